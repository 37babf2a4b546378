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

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hpo/datagen.hpp"
#include "hpo/nnet.hpp"

namespace hpo {

/// Anything that maps a slice to class probabilities.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int num_classes() const = 0;
  virtual int input_side() const = 0;
  virtual Eigen::VectorXd predict_proba(const Image& image) const = 0;
};

class NetClassifier final : public Classifier {
 public:
  explicit NetClassifier(nnet::TrainedNet net) : net_(std::move(net)) {}
  int num_classes() const override { return net_.spec().num_classes; }
  int input_side() const override { return net_.spec().input_side; }
  Eigen::VectorXd predict_proba(const Image& image) const override { return net_.predict_proba(image); }
  const nnet::TrainedNet& net() const { return net_; }

 private:
  nnet::TrainedNet net_;
};

/// Unweighted average of member predictions.
class Ensemble {
 public:
  explicit Ensemble(std::vector<std::shared_ptr<const Classifier>> members);

  const std::vector<std::shared_ptr<const Classifier>>& members() const { return members_; }
  int num_classes() const { return members_.front()->num_classes(); }
  int input_side() const { return members_.front()->input_side(); }

 private:
  std::vector<std::shared_ptr<const Classifier>> members_;
};

Eigen::VectorXd predict_ensemble(const Ensemble& ens, const Image& image);

/// Majority vote over per-slice argmax labels. Ties go to the class with the
/// larger mean probability across slices, then to the lower class index.
int vote(std::span<const Eigen::VectorXd> slice_probs);
int classify_volume(const Ensemble& ens, const Volume& vol);

enum class Level { Slice, Volume };
std::string_view to_string(Level level);

struct ConfusionMatrix {
  Level level = Level::Slice;
  Eigen::MatrixXi counts;  // rows: true class, columns: predicted class

  long total() const { return counts.sum(); }
  double error_rate() const;
  /// Each row divided by its sum (zero rows stay zero).
  Eigen::MatrixXd normalized() const;
};

/// Tallies (true, predicted) pairs; labels must lie in [0, num_classes).
ConfusionMatrix tally(std::span<const int> truth, std::span<const int> predicted, int num_classes, Level level);

ConfusionMatrix confusion(const Ensemble& ens, const SliceDataset& data, Split split, Level level);

/// Per slice: the class whose ensemble probability exceeds `cutoff`, or none.
std::vector<std::optional<int>> localize(const Ensemble& ens, std::span<const Image> slices, double cutoff = 0.7);
std::vector<std::optional<int>> localize_probs(std::span<const Eigen::VectorXd> slice_probs, double cutoff = 0.7);

/// Maximal stretch of consecutive slices with the same decision.
struct DecisionRun {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
  std::optional<int> label;
};
std::vector<DecisionRun> decision_runs(std::span<const std::optional<int>> decisions);

/// Tab-separated tables; see docs/formats.md.
void write_confusion_tsv(std::ostream& os, const std::string& model, const ConfusionMatrix& cm);

struct LocalizationRow {
  std::size_t index = 0;
  int volume_id = 0;
  int truth = 0;
  Eigen::VectorXd probs;
  std::optional<int> decision;
  std::size_t run = 0;
};
void write_localization_tsv(std::ostream& os, std::span<const LocalizationRow> rows);

}  // namespace hpo
