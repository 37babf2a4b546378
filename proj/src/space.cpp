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
#include "hpo/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hpo/json_io.hpp"

namespace hpo {

namespace {

std::vector<int> inclusive_range(int lo, int hi) {
  std::vector<int> v(static_cast<std::size_t>(hi - lo + 1));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

}  // namespace

std::string_view to_string(DimKind kind) {
  switch (kind) {
    case DimKind::IntegerRange: return "integer-range";
    case DimKind::IntegerExponentBase2: return "integer-exponent-base2";
    case DimKind::IntegerExponentBase10: return "integer-exponent-base10";
    case DimKind::IntegerMultiple: return "integer-multiple";
    case DimKind::Categorical: return "categorical";
  }
  return "?";
}

DimKind dim_kind_from_string(std::string_view name) {
  for (auto k : {DimKind::IntegerRange, DimKind::IntegerExponentBase2,
                 DimKind::IntegerExponentBase10, DimKind::IntegerMultiple,
                 DimKind::Categorical}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown dimension kind '" + std::string(name) + "'");
}

int ParamDim::rank_of(int raw) const {
  auto it = std::lower_bound(raw_values.begin(), raw_values.end(), raw);
  if (it == raw_values.end() || *it != raw) return -1;
  return static_cast<int>(it - raw_values.begin());
}

double ParamDim::derived(int raw) const {
  switch (kind) {
    case DimKind::IntegerExponentBase2: return std::ldexp(1.0, raw);
    case DimKind::IntegerExponentBase10: return std::pow(10.0, raw);
    case DimKind::IntegerMultiple: return static_cast<double>(factor) * raw;
    case DimKind::IntegerRange:
    case DimKind::Categorical: break;
  }
  return raw;
}

std::string ParamDim::format(int raw) const {
  if (kind == DimKind::Categorical) {
    int r = rank_of(raw);
    if (r >= 0 && static_cast<std::size_t>(r) < labels.size()) return labels[r];
  }
  return std::to_string(raw);
}

EnumerationRefused::EnumerationRefused(std::uint64_t cardinality, std::uint64_t max)
    : std::length_error("space has " + std::to_string(cardinality) +
                        " points, more than the enumeration limit " + std::to_string(max)) {}

std::size_t ParamPointHash::operator()(const ParamPoint& p) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (int v : p.values) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

ParamSpace::ParamSpace(std::vector<ParamDim> dims) : dims_(std::move(dims)) {
  for (const auto& d : dims_) {
    if (d.name.empty()) throw std::invalid_argument("dimension with empty name");
    if (d.raw_values.empty())
      throw std::invalid_argument("dimension '" + d.name + "' has no values");
    if (std::adjacent_find(d.raw_values.begin(), d.raw_values.end(),
                           [](int a, int b) { return a >= b; }) != d.raw_values.end())
      throw std::invalid_argument("values of '" + d.name + "' must be strictly increasing");
    if (d.kind == DimKind::Categorical && d.labels.size() != d.raw_values.size())
      throw std::invalid_argument("categorical '" + d.name + "' needs one label per value");
    if (d.kind == DimKind::IntegerMultiple && d.factor <= 0)
      throw std::invalid_argument("multiple '" + d.name + "' needs a positive factor");
  }
  for (std::size_t i = 0; i < dims_.size(); ++i)
    for (std::size_t j = i + 1; j < dims_.size(); ++j)
      if (dims_[i].name == dims_[j].name)
        throw std::invalid_argument("duplicate dimension '" + dims_[i].name + "'");
}

std::size_t ParamSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].name == name) return i;
  throw std::out_of_range("no dimension named '" + std::string(name) + "'");
}

const ParamDim& ParamSpace::dim(std::string_view name) const { return dims_[index_of(name)]; }

void ParamSpace::validate(const ParamPoint& p) const {
  if (p.values.size() != dims_.size()) {
    throw InvalidPointError(p.values.size() < dims_.size() ? dims_[p.values.size()].name : "<extra>",
                            "point has " + std::to_string(p.values.size()) + " values, space has " +
                                std::to_string(dims_.size()) + " dimensions");
  }
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].rank_of(p.values[i]) < 0)
      throw InvalidPointError(dims_[i].name, std::to_string(p.values[i]) + " is not admissible");
  }
}

bool ParamSpace::contains(const ParamPoint& p) const {
  if (p.values.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].rank_of(p.values[i]) < 0) return false;
  return true;
}

std::string ParamSpace::format(const ParamPoint& p) const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (i) os << ", ";
    if (i < dims_.size())
      os << dims_[i].name << '=' << dims_[i].format(p.values[i]);
    else
      os << p.values[i];
  }
  os << ')';
  return os.str();
}

ParamSpace default_space() {
  std::vector<ParamDim> dims;
  dims.push_back({"b", DimKind::IntegerRange, inclusive_range(1, 5), {}, 1});
  dims.push_back({"c", DimKind::IntegerRange, inclusive_range(1, 7), {}, 1});
  dims.push_back({"r", DimKind::IntegerExponentBase2, inclusive_range(2, 7), {}, 1});
  dims.push_back({"s", DimKind::IntegerRange, {3, 5}, {}, 1});
  dims.push_back({"l", DimKind::IntegerExponentBase10, inclusive_range(-7, 0), {}, 1});
  dims.push_back({"a", DimKind::IntegerExponentBase2, inclusive_range(2, 8), {}, 1});
  dims.push_back({"e", DimKind::IntegerMultiple, inclusive_range(1, 10), {}, 10});
  dims.push_back({"g", DimKind::Categorical, {0, 1}, {"No", "Yes"}, 1});
  return ParamSpace(std::move(dims));
}

ParamPoint baseline_point() { return ParamPoint{{5, 1, 6, 3, -3, 3, 7, 1}}; }

std::uint64_t cardinality(const ParamSpace& space) {
  std::uint64_t n = 1;
  for (const auto& d : space.dims()) n *= d.size();
  return n;
}

ParamPoint sample_uniform(const ParamSpace& space, std::mt19937_64& rng) {
  ParamPoint p;
  p.values.reserve(space.num_dims());
  for (const auto& d : space.dims()) {
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    p.values.push_back(d.raw_values[pick(rng)]);
  }
  return p;
}

EncodedPoint encode(const ParamSpace& space, const ParamPoint& p) {
  space.validate(p);
  EncodedPoint x(static_cast<Eigen::Index>(space.num_dims()));
  for (std::size_t i = 0; i < space.num_dims(); ++i) {
    const auto& d = space.dims()[i];
    const auto n = d.size();
    x[static_cast<Eigen::Index>(i)] =
        n == 1 ? 0.0 : static_cast<double>(d.rank_of(p.values[i])) / static_cast<double>(n - 1);
  }
  return x;
}

ParamPoint decode(const ParamSpace& space, const EncodedPoint& x) {
  if (static_cast<std::size_t>(x.size()) != space.num_dims())
    throw std::invalid_argument("encoded point has wrong dimension");
  ParamPoint p;
  for (std::size_t i = 0; i < space.num_dims(); ++i) {
    const auto& d = space.dims()[i];
    const double c = std::clamp(x[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    const auto rank = d.size() == 1 ? 0 : static_cast<std::size_t>(std::lround(c * (d.size() - 1)));
    p.values.push_back(d.raw_values[rank]);
  }
  return p;
}

std::vector<ParamPoint> enumerate(const ParamSpace& space, std::uint64_t max) {
  const auto total = cardinality(space);
  if (total > max) throw EnumerationRefused(total, max);

  std::vector<ParamPoint> out;
  out.reserve(total);
  std::vector<std::size_t> rank(space.num_dims(), 0);
  ParamPoint p;
  for (const auto& d : space.dims()) p.values.push_back(d.raw_values.front());
  for (std::uint64_t k = 0; k < total; ++k) {
    out.push_back(p);
    // odometer, last dimension fastest
    for (std::size_t i = space.num_dims(); i-- > 0;) {
      const auto& d = space.dims()[i];
      if (++rank[i] < d.size()) {
        p.values[i] = d.raw_values[rank[i]];
        break;
      }
      rank[i] = 0;
      p.values[i] = d.raw_values.front();
    }
  }
  return out;
}

nlohmann::json space_to_json(const ParamSpace& space) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : space.dims()) {
    nlohmann::json jd;
    jd["name"] = d.name;
    jd["kind"] = std::string(to_string(d.kind));
    if (d.kind == DimKind::Categorical) {
      jd["labels"] = d.labels;
    } else {
      jd["values"] = d.raw_values;
    }
    if (d.kind == DimKind::IntegerMultiple) jd["factor"] = d.factor;
    dims.push_back(std::move(jd));
  }
  return nlohmann::json{{"dims", std::move(dims)}};
}

ParamSpace space_from_json(const nlohmann::json& j) {
  std::vector<ParamDim> dims;
  for (const auto& jd : j.at("dims")) {
    ParamDim d;
    d.name = jd.at("name").get<std::string>();
    d.kind = dim_kind_from_string(jd.at("kind").get<std::string>());
    if (d.kind == DimKind::Categorical) {
      d.labels = jd.at("labels").get<std::vector<std::string>>();
      d.raw_values = inclusive_range(0, static_cast<int>(d.labels.size()) - 1);
    } else if (jd.contains("range")) {
      const auto r = jd.at("range").get<std::vector<int>>();
      if (r.size() != 2 || r[0] > r[1])
        throw std::invalid_argument("range of '" + d.name + "' must be [lo, hi]");
      d.raw_values = inclusive_range(r[0], r[1]);
    } else {
      d.raw_values = jd.at("values").get<std::vector<int>>();
    }
    d.factor = jd.value("factor", 1);
    dims.push_back(std::move(d));
  }
  return ParamSpace(std::move(dims));
}

void save_space(const ParamSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << space_to_json(space).dump(2) << '\n';
}

ParamSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return space_from_json(nlohmann::json::parse(in));
}

}  // namespace hpo
