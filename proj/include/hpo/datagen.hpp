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

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hpo {

/// Square grayscale slice, pixel values in [0, 1].
using Image = Eigen::MatrixXf;

enum class Split { Train = 0, Validation = 1, Test = 2 };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

constexpr int kNumClasses = 4;

/// Class letter (A..D) and the anatomy it stands in for.
std::string_view class_letter(int label);
std::string_view class_region(int label);

struct Volume {
  int id = 0;
  int label = 0;
  std::vector<Image> slices;
};

struct DatasetConfig {
  /// Default imbalance puts roughly 30% of the slices in class A.
  std::vector<int> volumes_per_class{10, 8, 7, 7};
  int min_slices = 10;
  int max_slices = 20;
  int side = 16;
  std::uint64_t seed = 7;
  std::array<double, 3> fractions{0.5, 0.25, 0.25};

  void validate() const;
};

class StratificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SliceDataset {
  int side = 0;
  int num_classes = kNumClasses;
  std::vector<Volume> volumes;
  std::vector<Split> split;           // one per volume
  std::vector<double> class_weights;  // N / (K * N_c) over training slices

  std::size_t num_slices() const;
  std::size_t num_slices(Split s) const;
  std::vector<const Volume*> volumes_in(Split s) const;
};

/// Flattened view of one split: slice images with their labels.
struct LabeledImages {
  std::vector<const Image*> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

LabeledImages slices_of(const SliceDataset& data, Split s);

/// Deterministic synthetic corpus: one shape family per class (ellipse, ring,
/// cross, bar) rendered with a per-volume style and per-slice jitter. The
/// first and last slice of each volume are drawn at half contrast.
SliceDataset generate(const DatasetConfig& cfg);

/// Volume-wise stratified assignment. Within each class the volumes are
/// shuffled with `seed`, then split counts follow the largest-remainder rule
/// (ties go to the earlier split: train, validation, test).
std::vector<Split> stratified_split(std::span<const int> volume_labels, const std::array<double, 3>& fractions,
                                    std::uint64_t seed, int num_classes = kNumClasses);

/// Per-class split counts from the largest-remainder rule.
std::array<int, 3> largest_remainder_counts(int n, const std::array<double, 3>& fractions);

std::vector<double> class_weights_from(const SliceDataset& data);

/// Directory layout: manifest.tsv plus slices/v<id>_s<k>.f32 raw files.
/// See docs/formats.md.
void save_dataset(const SliceDataset& data, const std::filesystem::path& dir);
SliceDataset load_dataset(const std::filesystem::path& dir);

}  // namespace hpo
