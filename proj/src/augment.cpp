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
#include <algorithm>
#include <cmath>
#include <numbers>

#include "hpo/nnet.hpp"

namespace hpo::nnet {

namespace {

float sample_clamped(const Image& img, double r, double c) {
  const auto last = static_cast<double>(img.rows() - 1);
  r = std::clamp(r, 0.0, last);
  c = std::clamp(c, 0.0, last);
  const auto r0 = static_cast<Eigen::Index>(std::floor(r));
  const auto c0 = static_cast<Eigen::Index>(std::floor(c));
  const auto r1 = std::min<Eigen::Index>(r0 + 1, img.rows() - 1);
  const auto c1 = std::min<Eigen::Index>(c0 + 1, img.cols() - 1);
  const double fr = r - static_cast<double>(r0);
  const double fc = c - static_cast<double>(c0);
  const double top = (1 - fc) * img(r0, c0) + fc * img(r0, c1);
  const double bottom = (1 - fc) * img(r1, c0) + fc * img(r1, c1);
  return static_cast<float>((1 - fr) * top + fr * bottom);
}

}  // namespace

AugmentParams draw_augment(int side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AugmentParams p;
  p.shift_x = 0.1 * side * u(rng);
  p.shift_y = 0.1 * side * u(rng);
  p.rotation = (15.0 * std::numbers::pi / 180.0) * u(rng);
  p.shear = 0.1 * u(rng);
  p.zoom = 1.0 + 0.1 * u(rng);
  p.noise_sigma = 0.025 * (1.0 + u(rng));
  return p;
}

Image apply_augment(const Image& image, const AugmentParams& p, std::mt19937_64& rng) {
  if (image.rows() != image.cols()) throw std::invalid_argument("augment expects a square image");
  const auto side = image.rows();
  const double centre = (static_cast<double>(side) - 1.0) / 2.0;

  // forward map: out = R * Shear * zoom * (in - centre) + centre + shift;
  // sample the inverse at every output pixel
  const double cr = std::cos(p.rotation), sr = std::sin(p.rotation);
  const double a = p.zoom * cr, b = p.zoom * (cr * p.shear - sr);
  const double c = p.zoom * sr, d = p.zoom * (sr * p.shear + cr);
  const double det = a * d - b * c;
  const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;

  Image out(side, side);
  for (Eigen::Index r = 0; r < side; ++r)
    for (Eigen::Index col = 0; col < side; ++col) {
      const double x = static_cast<double>(col) - centre - p.shift_x;
      const double y = static_cast<double>(r) - centre - p.shift_y;
      out(r, col) = sample_clamped(image, ic * x + id * y + centre, ia * x + ib * y + centre);
    }
  if (p.noise_sigma > 0) {
    std::normal_distribution<float> noise(0.0f, static_cast<float>(p.noise_sigma));
    for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] += noise(rng);
  }
  return out.cwiseMax(0.0f).cwiseMin(1.0f);
}

Image augment(const Image& image, std::mt19937_64& rng) {
  const auto p = draw_augment(static_cast<int>(image.rows()), rng);
  return apply_augment(image, p, rng);
}

}  // namespace hpo::nnet
