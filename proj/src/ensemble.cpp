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
#include "hpo/ensemble.hpp"

#include <ostream>
#include <stdexcept>

namespace hpo {

Ensemble::Ensemble(std::vector<std::shared_ptr<const Classifier>> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!m) throw std::invalid_argument("null ensemble member");
    if (m->num_classes() != members_.front()->num_classes() || m->input_side() != members_.front()->input_side())
      throw std::invalid_argument("ensemble members disagree on classes or input side");
  }
}

Eigen::VectorXd predict_ensemble(const Ensemble& ens, const Image& image) {
  if (image.rows() != ens.input_side() || image.cols() != ens.input_side())
    throw std::invalid_argument("image does not match the ensemble input side");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ens.num_classes());
  for (const auto& m : ens.members()) sum += m->predict_proba(image);
  return sum / static_cast<double>(ens.members().size());
}

int vote(std::span<const Eigen::VectorXd> slice_probs) {
  if (slice_probs.empty()) throw std::invalid_argument("cannot vote on an empty volume");
  const auto k = slice_probs.front().size();
  Eigen::VectorXi votes = Eigen::VectorXi::Zero(k);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (const auto& p : slice_probs) {
    Eigen::Index arg = 0;
    p.maxCoeff(&arg);
    ++votes(arg);
    mean += p;
  }
  mean /= static_cast<double>(slice_probs.size());
  int best = 0;
  for (Eigen::Index c = 1; c < k; ++c) {
    if (votes(c) > votes(best) || (votes(c) == votes(best) && mean(c) > mean(best))) best = static_cast<int>(c);
  }
  return best;
}

int classify_volume(const Ensemble& ens, const Volume& vol) {
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(vol.slices.size());
  for (const auto& s : vol.slices) probs.push_back(predict_ensemble(ens, s));
  return vote(probs);
}

std::string_view to_string(Level level) { return level == Level::Slice ? "slice" : "volume"; }

double ConfusionMatrix::error_rate() const {
  const long n = total();
  if (n == 0) return 0.0;
  return 1.0 - static_cast<double>(counts.trace()) / static_cast<double>(n);
}

Eigen::MatrixXd ConfusionMatrix::normalized() const {
  Eigen::MatrixXd out = counts.cast<double>();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double s = out.row(r).sum();
    if (s > 0) out.row(r) /= s;
  }
  return out;
}

ConfusionMatrix tally(std::span<const int> truth, std::span<const int> predicted, int num_classes, Level level) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("tally: length mismatch");
  ConfusionMatrix cm;
  cm.level = level;
  cm.counts = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes)
      throw std::out_of_range("tally: label out of range");
    ++cm.counts(truth[i], predicted[i]);
  }
  return cm;
}

ConfusionMatrix confusion(const Ensemble& ens, const SliceDataset& data, Split split, Level level) {
  std::vector<int> truth, predicted;
  for (const Volume* v : data.volumes_in(split)) {
    if (level == Level::Volume) {
      truth.push_back(v->label);
      predicted.push_back(classify_volume(ens, *v));
      continue;
    }
    for (const auto& s : v->slices) {
      Eigen::Index arg = 0;
      predict_ensemble(ens, s).maxCoeff(&arg);
      truth.push_back(v->label);
      predicted.push_back(static_cast<int>(arg));
    }
  }
  return tally(truth, predicted, ens.num_classes(), level);
}

std::vector<std::optional<int>> localize_probs(std::span<const Eigen::VectorXd> slice_probs, double cutoff) {
  if (!(cutoff > 0.25 && cutoff < 1.0)) throw std::invalid_argument("localization cutoff must lie in (0.25, 1)");
  std::vector<std::optional<int>> out;
  out.reserve(slice_probs.size());
  for (const auto& p : slice_probs) {
    std::optional<int> pick;
    int above = 0;
    for (Eigen::Index c = 0; c < p.size(); ++c)
      if (p(c) > cutoff) {
        pick = static_cast<int>(c);
        ++above;
      }
    out.push_back(above == 1 ? pick : std::nullopt);
  }
  return out;
}

std::vector<std::optional<int>> localize(const Ensemble& ens, std::span<const Image> slices, double cutoff) {
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(slices.size());
  for (const auto& s : slices) probs.push_back(predict_ensemble(ens, s));
  return localize_probs(probs, cutoff);
}

std::vector<DecisionRun> decision_runs(std::span<const std::optional<int>> decisions) {
  std::vector<DecisionRun> runs;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (!runs.empty() && runs.back().label == decisions[i]) {
      runs.back().last = i;
    } else {
      runs.push_back({i, i, decisions[i]});
    }
  }
  return runs;
}

void write_confusion_tsv(std::ostream& os, const std::string& model, const ConfusionMatrix& cm) {
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    const auto norm = cm.normalized();
    os << model << '\t' << to_string(cm.level) << '\t' << class_letter(static_cast<int>(r));
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) os << '\t' << cm.counts(r, c);
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) os << '\t' << norm(r, c);
    os << '\t' << cm.error_rate() << '\n';
  }
}

void write_localization_tsv(std::ostream& os, std::span<const LocalizationRow> rows) {
  os << "slice\tvolume\ttruth";
  for (int c = 0; c < kNumClasses; ++c) os << "\tp_" << class_letter(c);
  os << "\tdecision\trun\n";
  for (const auto& r : rows) {
    os << r.index << '\t' << r.volume_id << '\t' << class_letter(r.truth);
    for (Eigen::Index c = 0; c < r.probs.size(); ++c) os << '\t' << r.probs(c);
    os << '\t' << (r.decision ? std::string(class_letter(*r.decision)) : std::string("-")) << '\t' << r.run << '\n';
  }
}

}  // namespace hpo
