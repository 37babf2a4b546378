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
#include "hpo/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace hpo {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLetters{"A", "B", "C", "D"};
constexpr std::array<std::string_view, kNumClasses> kRegions{"abdomen", "head", "pelvis", "spine"};

/// Rendering style shared by all slices of one volume.
struct VolumeStyle {
  double intensity;
  double background;
  double scale;
  double noise;
  double angle;
  double cx, cy;  // centre offset, in units of the half side
  double aspect;
  double grad_amp, grad_dir;
  double distractor_rate;  // chance that a slice carries a bright blob
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double box_distance(double u, double v, double half_w, double half_h) {
  return std::max(std::abs(u) - half_w, std::abs(v) - half_h);
}

double ellipse_distance(double u, double v, double a, double b) {
  return (std::hypot(u / a, v / b) - 1.0) * std::min(a, b);
}

/// Signed distance (negative inside) of the class shape in shape coordinates.
double shape_distance(int label, double u, double v) {
  switch (label) {
    case 0: return ellipse_distance(u, v, 0.72, 0.52);
    case 1: return std::max(ellipse_distance(u, v, 0.72, 0.62), -ellipse_distance(u, v, 0.42, 0.34));
    case 2: return std::min(box_distance(u, v, 0.18, 0.72), box_distance(u, v, 0.72, 0.18));
    case 3: return box_distance(u, v, 0.18, 0.80);
    default: break;
  }
  throw std::out_of_range("class label out of range");
}

VolumeStyle draw_style(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  VolumeStyle s;
  s.intensity = in(0.55, 0.95);
  s.background = in(0.0, 0.20);
  s.scale = in(0.75, 1.0);
  s.noise = in(0.08, 0.18);
  s.angle = in(-0.4, 0.4);
  s.cx = in(-0.12, 0.12);
  s.cy = in(-0.12, 0.12);
  s.aspect = in(0.85, 1.15);
  s.grad_amp = in(0.0, 0.15);
  s.grad_dir = in(0.0, 2.0 * std::numbers::pi);
  s.distractor_rate = u01(rng) < 0.3 ? 0.6 : 0.15;
  return s;
}

Image render_slice(int label, const VolumeStyle& st, double t, bool edge, int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jit(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, st.noise);

  // slices near the ends of a volume show a smaller cross-section
  const double profile = 0.6 + 0.4 * std::sin(std::numbers::pi * t);
  const double scale = st.scale * profile * (1.0 + 0.08 * jit(rng));
  const double angle = st.angle + 0.1 * jit(rng);
  const double cx = st.cx + 0.06 * jit(rng);
  const double cy = st.cy + 0.06 * jit(rng);
  const double contrast = (edge ? 0.5 : 1.0) * (1.0 + 0.15 * jit(rng));
  const bool blob = u01(rng) < st.distractor_rate;
  const double dx = 0.7 * jit(rng), dy = 0.7 * jit(rng), dr = 0.15 + 0.12 * u01(rng);
  const double blob_level = 0.3 + 0.4 * u01(rng);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double half = side / 2.0;
  const double softness = 1.2 / side;

  Image img(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double x = (c + 0.5 - half) / half - cx;
      const double y = (r + 0.5 - half) / half - cy;
      const double u = (ca * x + sa * y) / (scale * st.aspect);
      const double v = (-sa * x + ca * y) / (scale / st.aspect);
      const double inside = sigmoid(-shape_distance(label, u, v) * scale / softness);
      double val = st.background +
                   st.grad_amp * (std::cos(st.grad_dir) * x + std::sin(st.grad_dir) * y) * 0.5 +
                   (st.intensity - st.background) * contrast * inside;
      if (blob) {
        const double d = std::hypot(x - dx, y - dy) - dr;
        val += blob_level * (st.intensity - st.background) * sigmoid(-d / softness);
      }
      val += noise(rng);
      img(r, c) = static_cast<float>(std::clamp(val, 0.0, 1.0));
    }
  }
  return img;
}

/// Slice counts for `n` volumes, spread over [lo, hi] by stratified draws so
/// that class totals stay close to n * (lo + hi) / 2.
std::vector<int> slice_counts(int n, int lo, int hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<int> counts(static_cast<std::size_t>(n));
  const double width = hi - lo + 1;
  for (int i = 0; i < n; ++i) {
    const double q = (i + u01(rng)) / n;
    counts[static_cast<std::size_t>(i)] = std::min(hi, lo + static_cast<int>(std::floor(q * width)));
  }
  std::shuffle(counts.begin(), counts.end(), rng);
  return counts;
}

void write_f32(std::ostream& os, const Image& img) {
  static_assert(std::endian::native == std::endian::little, "raw slice files are little-endian");
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const float v = img(r, c);
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

Image read_f32(const std::filesystem::path& path, int side) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read slice " + path.string());
  Image img(side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      float v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      img(r, c) = v;
    }
  if (!in) throw std::runtime_error("truncated slice " + path.string());
  return img;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

std::string_view class_letter(int label) { return kLetters.at(static_cast<std::size_t>(label)); }
std::string_view class_region(int label) { return kRegions.at(static_cast<std::size_t>(label)); }

void DatasetConfig::validate() const {
  if (volumes_per_class.size() != kNumClasses)
    throw std::invalid_argument("volumes_per_class needs one entry per class (4)");
  for (int n : volumes_per_class)
    if (n < 4)
      throw StratificationError("each class needs at least 4 volumes for a stratified split, got " +
                                std::to_string(n));
  if (min_slices < 1 || max_slices < min_slices) throw std::invalid_argument("bad slice range");
  if (side < 2 || !std::has_single_bit(static_cast<unsigned>(side)))
    throw std::invalid_argument("side must be a power of two");
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9 || *std::min_element(fractions.begin(), fractions.end()) < 0)
    throw std::invalid_argument("split fractions must be nonnegative and sum to 1");
}

std::size_t SliceDataset::num_slices() const {
  std::size_t n = 0;
  for (const auto& v : volumes) n += v.slices.size();
  return n;
}

std::size_t SliceDataset::num_slices(Split s) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < volumes.size(); ++i)
    if (split[i] == s) n += volumes[i].slices.size();
  return n;
}

std::vector<const Volume*> SliceDataset::volumes_in(Split s) const {
  std::vector<const Volume*> out;
  for (std::size_t i = 0; i < volumes.size(); ++i)
    if (split[i] == s) out.push_back(&volumes[i]);
  return out;
}

LabeledImages slices_of(const SliceDataset& data, Split s) {
  LabeledImages out;
  for (const Volume* v : data.volumes_in(s))
    for (const auto& img : v->slices) {
      out.images.push_back(&img);
      out.labels.push_back(v->label);
    }
  return out;
}

std::array<int, 3> largest_remainder_counts(int n, const std::array<double, 3>& fractions) {
  std::array<int, 3> counts{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double q = n * fractions[i];
    counts[i] = static_cast<int>(std::floor(q + 1e-12));
    rem[i] = q - counts[i];
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

std::vector<Split> stratified_split(std::span<const int> volume_labels, const std::array<double, 3>& fractions,
                                    std::uint64_t seed, int num_classes) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < volume_labels.size(); ++i) {
    const int c = volume_labels[i];
    if (c < 0 || c >= num_classes) throw std::out_of_range("volume label out of range");
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }
  for (int c = 0; c < num_classes; ++c)
    if (by_class[static_cast<std::size_t>(c)].size() < 3)
      throw StratificationError("class " + std::string(class_letter(c)) + " has " +
                                std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                                " volumes; a stratified split needs at least 3");

  std::mt19937_64 rng(seed);
  std::vector<Split> out(volume_labels.size(), Split::Train);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = largest_remainder_counts(static_cast<int>(idx.size()), fractions);
    std::size_t k = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (int j = 0; j < counts[s]; ++j) out[idx[k++]] = static_cast<Split>(s);
  }
  return out;
}

std::vector<double> class_weights_from(const SliceDataset& data) {
  std::vector<double> counts(static_cast<std::size_t>(data.num_classes), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < data.volumes.size(); ++i) {
    if (data.split[i] != Split::Train) continue;
    counts[static_cast<std::size_t>(data.volumes[i].label)] += static_cast<double>(data.volumes[i].slices.size());
    total += static_cast<double>(data.volumes[i].slices.size());
  }
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw StratificationError("class " + std::string(class_letter(static_cast<int>(c))) +
                                                  " has no training slices");
    w[c] = total / (static_cast<double>(data.num_classes) * counts[c]);
  }
  return w;
}

SliceDataset generate(const DatasetConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SliceDataset data;
  data.side = cfg.side;
  data.num_classes = kNumClasses;
  int next_id = 0;
  for (int label = 0; label < kNumClasses; ++label) {
    const int n = cfg.volumes_per_class[static_cast<std::size_t>(label)];
    const auto counts = slice_counts(n, cfg.min_slices, cfg.max_slices, rng);
    for (int i = 0; i < n; ++i) {
      Volume v;
      v.id = next_id++;
      v.label = label;
      const VolumeStyle style = draw_style(rng);
      const int count = counts[static_cast<std::size_t>(i)];
      for (int k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
        const bool edge = k == 0 || k == count - 1;
        v.slices.push_back(render_slice(label, style, t, edge, cfg.side, rng));
      }
      data.volumes.push_back(std::move(v));
    }
  }
  std::vector<int> labels;
  for (const auto& v : data.volumes) labels.push_back(v.label);
  data.split = stratified_split(labels, cfg.fractions, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  data.class_weights = class_weights_from(data);
  return data;
}

void save_dataset(const SliceDataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "slices");
  std::ofstream man(dir / "manifest.tsv");
  if (!man) throw std::runtime_error("cannot write " + (dir / "manifest.tsv").string());
  man << "# hpo-dataset v1\tside=" << data.side << "\tclasses=" << data.num_classes << '\n';
  man << "# volume\tclass\tsplit\tslices\n";
  for (std::size_t i = 0; i < data.volumes.size(); ++i) {
    const auto& v = data.volumes[i];
    man << v.id << '\t' << class_letter(v.label) << '\t' << to_string(data.split[i]) << '\t';
    for (std::size_t k = 0; k < v.slices.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "v%04d_s%03zu.f32", v.id, k);
      if (k) man << ',';
      man << name;
      std::ofstream out(dir / "slices" / name, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error(std::string("cannot write slice ") + name);
      write_f32(out, v.slices[k]);
    }
    man << '\n';
  }
  if (!man) throw std::runtime_error("failed writing dataset manifest");
}

SliceDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.tsv");
  if (!man) throw std::runtime_error("no dataset manifest in " + dir.string());
  SliceDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(man, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.starts_with("# hpo-dataset")) {
      for (auto f : split_on(line, '\t')) {
        if (f.starts_with("side=")) data.side = std::stoi(std::string(f.substr(5)));
        if (f.starts_with("classes=")) data.num_classes = std::stoi(std::string(f.substr(8)));
      }
      continue;
    }
    if (line.starts_with('#')) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 4) throw std::runtime_error("manifest line " + std::to_string(line_no) + ": expected 4 fields");
    Volume v;
    v.id = std::stoi(std::string(f[0]));
    const auto it = std::find(kLetters.begin(), kLetters.end(), f[1]);
    if (it == kLetters.end()) throw std::runtime_error("manifest line " + std::to_string(line_no) + ": bad class");
    v.label = static_cast<int>(it - kLetters.begin());
    data.split.push_back(split_from_string(f[2]));
    for (auto name : split_on(f[3], ','))
      v.slices.push_back(read_f32(dir / "slices" / std::string(name), data.side));
    data.volumes.push_back(std::move(v));
  }
  if (data.side <= 0) throw std::runtime_error("manifest missing side");
  data.class_weights = class_weights_from(data);
  return data;
}

}  // namespace hpo
