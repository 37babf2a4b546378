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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hpo {

enum class DimKind {
  IntegerRange,         // raw value used as is
  IntegerExponentBase2, // derived = 2^raw
  IntegerExponentBase10,// derived = 10^raw
  IntegerMultiple,      // derived = factor * raw
  Categorical,          // raw value is an index into labels
};

std::string_view to_string(DimKind kind);
DimKind dim_kind_from_string(std::string_view name);

/// One axis of the discrete search grid.
struct ParamDim {
  std::string name;
  DimKind kind = DimKind::IntegerRange;
  std::vector<int> raw_values;     // strictly increasing
  std::vector<std::string> labels; // categorical only, one per raw value
  int factor = 1;                  // IntegerMultiple only

  std::size_t size() const { return raw_values.size(); }

  /// Position of `raw` in raw_values, or -1 when absent.
  int rank_of(int raw) const;

  /// Value seen by the model: 2^raw, 10^raw, factor*raw or raw itself.
  double derived(int raw) const;

  std::string format(int raw) const;
};

class InvalidPointError : public std::invalid_argument {
 public:
  InvalidPointError(const std::string& dim, const std::string& what)
      : std::invalid_argument("invalid value for '" + dim + "': " + what), dim_(dim) {}
  const std::string& dim() const { return dim_; }

 private:
  std::string dim_;
};

class EnumerationRefused : public std::length_error {
 public:
  EnumerationRefused(std::uint64_t cardinality, std::uint64_t max);
};

/// A hyper-parameter setting: one raw value per dimension, in dimension order.
/// Ordering is lexicographic on the raw values.
struct ParamPoint {
  std::vector<int> values;

  friend auto operator<=>(const ParamPoint&, const ParamPoint&) = default;
  friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

struct ParamPointHash {
  std::size_t operator()(const ParamPoint& p) const noexcept;
};

/// Normalized surrogate input: rank / (count - 1) per dimension.
using EncodedPoint = Eigen::VectorXd;

class ParamSpace {
 public:
  ParamSpace() = default;
  explicit ParamSpace(std::vector<ParamDim> dims);

  const std::vector<ParamDim>& dims() const { return dims_; }
  std::size_t num_dims() const { return dims_.size(); }
  const ParamDim& dim(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  /// Throws InvalidPointError naming the first offending dimension.
  void validate(const ParamPoint& p) const;
  bool contains(const ParamPoint& p) const;

  std::string format(const ParamPoint& p) const;

 private:
  std::vector<ParamDim> dims_;
};

/// The eight-dimensional grid b, c, r, s, l, a, e, g.
ParamSpace default_space();

/// Baseline configuration: 5 blocks of one 64-filter 3x3 conv, lr 1e-3,
/// batch 8, 70 epochs, augmentation on.
ParamPoint baseline_point();

std::uint64_t cardinality(const ParamSpace& space);

ParamPoint sample_uniform(const ParamSpace& space, std::mt19937_64& rng);

EncodedPoint encode(const ParamSpace& space, const ParamPoint& p);

/// Nearest-rank inverse of encode. Coordinates are clamped to [0, 1].
ParamPoint decode(const ParamSpace& space, const EncodedPoint& x);

/// All points in lexicographic order. Throws EnumerationRefused when the
/// cardinality exceeds `max`.
std::vector<ParamPoint> enumerate(const ParamSpace& space, std::uint64_t max);

// Config file I/O (JSON). See docs/formats.md; json_io.hpp has the
// in-memory conversions.
void save_space(const ParamSpace& space, const std::filesystem::path& path);
ParamSpace load_space(const std::filesystem::path& path);

}  // namespace hpo
