// Copyright 2026 The hpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include "hpo/objectives.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace hpo {

double branin(double x1, double x2) {
  constexpr double pi = std::numbers::pi;
  const double b = 5.1 / (4 * pi * pi), c = 5 / pi, t = 1 / (8 * pi);
  const double u = x2 - b * x1 * x1 + c * x1 - 6;
  return u * u + 10 * (1 - t) * std::cos(x1) + 10;
}

BraninGrid::BraninGrid(int n) : n_(n) {
  if (n < 2) throw std::invalid_argument("BraninGrid needs n >= 2");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  space_ = ParamSpace({ParamDim{"x1", DimKind::IntegerRange, idx, {}, 1},
                       ParamDim{"x2", DimKind::IntegerRange, idx, {}, 1}});
}

double BraninGrid::x1(int i) const { return -5.0 + 15.0 * i / (n_ - 1); }
double BraninGrid::x2(int i) const { return 15.0 * i / (n_ - 1); }

Evaluation BraninGrid::evaluate(const ParamPoint& p, const TrialContext&) {
  space_.validate(p);
  return {branin(x1(p.values[0]), x2(p.values[1])), 0.0, TrialStatus::Ok};
}

double BraninGrid::grid_minimum() const {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) best = std::min(best, branin(x1(i), x2(j)));
  return best;
}

double train_macs(const nnet::NetSpec& spec, const nnet::TrainParams& tp, std::size_t train_size) {
  const double per_epoch = static_cast<double>(train_size) * (tp.augment ? tp.augment_factor : 1);
  return spec.forward_macs() * per_epoch * tp.epochs;
}

CnnObjective::CnnObjective(const ParamSpace& space, const SliceDataset& data, nnet::Preset preset, ResourceCaps caps)
    : space_(space), data_(data), preset_(preset), caps_(caps),
      train_set_(slices_of(data, Split::Train)), val_set_(slices_of(data, Split::Validation)) {
  if (data.side != nnet::preset_shape(preset).input_side)
    throw std::invalid_argument("dataset side " + std::to_string(data.side) + " does not match the " +
                                std::string(nnet::to_string(preset)) + " preset");
  if (train_set_.size() == 0 || val_set_.size() == 0)
    throw std::invalid_argument("dataset needs nonempty train and validation splits");
}

std::string CnnObjective::id() const { return "cnn-" + std::string(nnet::to_string(preset_)); }

nnet::NetSpec CnnObjective::spec_for(const ParamPoint& p) const {
  const auto cap = std::min<std::uint64_t>(caps_.max_params, nnet::preset_shape(preset_).max_params);
  return nnet::build(space_, p, preset_, cap);
}

nnet::TrainParams CnnObjective::train_params_for(const ParamPoint& p, std::uint64_t seed) const {
  return nnet::train_params(nnet::hyper_params(space_, p), seed);
}

bool CnnObjective::feasible(const ParamPoint& p) const {
  try {
    const auto spec = spec_for(p);
    return train_macs(spec, train_params_for(p, 0), train_set_.size()) <= caps_.max_train_macs;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

Evaluation CnnObjective::evaluate(const ParamPoint& p, const TrialContext& ctx) {
  const auto spec = spec_for(p);
  const auto tp = train_params_for(p, ctx.seed);
  const double macs = train_macs(spec, tp, train_set_.size());
  if (macs > caps_.max_train_macs)
    throw std::invalid_argument("training cost " + std::to_string(macs) + " MACs exceeds the cap");
  const auto net = nnet::train(spec, train_set_, val_set_, data_.class_weights, tp);
  if (hook_) hook_(ctx, net);
  if (net.metrics.diverged) return {penalty_loss(), 1.0, TrialStatus::Diverged};
  return {net.metrics.val_loss, net.metrics.val_error, TrialStatus::Ok};
}

}  // namespace hpo
