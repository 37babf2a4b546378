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
#pragma once

// Concrete objectives: an analytic benchmark and the CNN trainer.

#include <cstdint>
#include <functional>
#include <optional>

#include "hpo/datagen.hpp"
#include "hpo/nnet.hpp"
#include "hpo/optimizer.hpp"

namespace hpo {

/// Branin-Hoo function; global minimum 0.397887 at three points.
double branin(double x1, double x2);

/// Branin sampled on an n x n grid over x1 in [-5, 10], x2 in [0, 15].
/// Dimensions "x1" and "x2" hold the grid indices 0..n-1.
class BraninGrid final : public Objective {
 public:
  explicit BraninGrid(int n = 32);

  const ParamSpace& space() const { return space_; }
  std::string id() const override { return "branin" + std::to_string(n_); }
  Evaluation evaluate(const ParamPoint& p, const TrialContext& ctx) override;
  double penalty_loss() const override { return 400.0; }

  double x1(int index) const;
  double x2(int index) const;
  /// Smallest value over the whole grid.
  double grid_minimum() const;

 private:
  int n_;
  ParamSpace space_;
};

/// Training cost of one trial in multiply-accumulates: forward MACs per
/// image times the images seen over all epochs (augmented epochs included).
double train_macs(const nnet::NetSpec& spec, const nnet::TrainParams& tp, std::size_t train_size);

/// Trains the network encoded by a point on the training split and scores it
/// on the validation split. Points that break the architecture rules or the
/// resource caps are infeasible.
class CnnObjective final : public Objective {
 public:
  CnnObjective(const ParamSpace& space, const SliceDataset& data, nnet::Preset preset, ResourceCaps caps);

  std::string id() const override;
  Evaluation evaluate(const ParamPoint& p, const TrialContext& ctx) override;
  bool feasible(const ParamPoint& p) const override;
  double penalty_loss() const override { return penalty_loss_for_classes(data_.num_classes); }

  /// Network and training settings for a point; throws on infeasible points.
  nnet::NetSpec spec_for(const ParamPoint& p) const;
  nnet::TrainParams train_params_for(const ParamPoint& p, std::uint64_t seed) const;

  /// Called with every successfully trained network (including diverged
  /// ones) before evaluate returns.
  using TrainedHook = std::function<void(const TrialContext&, const nnet::TrainedNet&)>;
  void on_trained(TrainedHook hook) { hook_ = std::move(hook); }

 private:
  const ParamSpace& space_;
  const SliceDataset& data_;
  nnet::Preset preset_;
  ResourceCaps caps_;
  LabeledImages train_set_, val_set_;
  TrainedHook hook_;
};

}  // namespace hpo
