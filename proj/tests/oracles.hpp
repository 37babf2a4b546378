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

// Reference implementations used only by the tests. They avoid the library's
// own numerics (no Eigen decompositions, no shared helpers) so that
// agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline Vec gauss_solve(Mat a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0) throw std::runtime_error("singular system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

inline double se_kernel(const Vec& p, const Vec& q, const Vec& ls, double sv) {
  double r2 = 0;
  for (std::size_t d = 0; d < p.size(); ++d) {
    const double t = (p[d] - q[d]) / ls[d];
    r2 += t * t;
  }
  return sv * std::exp(-0.5 * r2);
}

struct GpPrediction {
  double mean;
  double variance;
};

/// Textbook GP posterior on the scale of `y` (no standardization):
///   mean = k*' (K + s I)^-1 y,  var = sv + noise - k*' (K + s I)^-1 k*
/// where s = noise + jitter.
inline GpPrediction gp_predict(const Mat& x, const Vec& y, const Vec& ls, double sv, double noise, double jitter,
                               const Vec& xs) {
  const std::size_t n = x.size();
  Mat k(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k[i][j] = se_kernel(x[i], x[j], ls, sv) + (i == j ? noise + jitter : 0.0);
  Vec ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = se_kernel(x[i], xs, ls, sv);
  const Vec alpha = gauss_solve(k, y);
  const Vec w = gauss_solve(k, ks);
  double mean = 0, red = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += ks[i] * alpha[i];
    red += ks[i] * w[i];
  }
  return {mean, sv + noise - red};
}

/// Determinant by elimination (for the log marginal likelihood oracle).
inline double log_det(Mat a) {
  const std::size_t n = a.size();
  double ld = 0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    ld += std::log(std::abs(a[col][col]));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return ld;
}

/// Standard normal CDF by composite Simpson integration of the density from
/// 0 to |z|; accurate to ~1e-14 for |z| <= 8 with either the default grid
/// or 2000 intervals.
inline double normal_cdf_simpson(double z, int n = 20000) {
  const double pi = 3.14159265358979323846;
  const double a = std::abs(z);
  n += n % 2;
  const double h = a / n;
  auto f = [&](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * pi); };
  double s = f(0) + f(a);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  const double half = s * h / 3;
  return z >= 0 ? 0.5 + half : 0.5 - half;
}

/// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
inline double sign_test_p(int wins, int n) {
  double p = 0;
  for (int k = wins; k <= n; ++k) {
    double c = 1;  // C(n, k)
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    p += c * std::pow(0.5, n);
  }
  return p;
}

/// Median of a copy.
inline double median(Vec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
