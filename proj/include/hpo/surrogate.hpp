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

// Gaussian-process regression over encoded hyper-parameter points.
//
// Kernel: ARD squared exponential
//   k(x, x') = sv * exp(-1/2 * sum_d ((x_d - x'_d) / l_d)^2)
// Targets are standardized before conditioning; the signal variance stays at
// 1 on that scale and the per-dimension length-scales plus the noise level are
// picked by coordinate ascent of the log-marginal-likelihood over a log grid.

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace hpo {

class GPFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `count` log-spaced values in [lo, hi].
template <typename Scalar>
std::vector<Scalar> log_grid(Scalar lo, Scalar hi, int count) {
  std::vector<Scalar> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Scalar t = count == 1 ? Scalar(0) : Scalar(i) / Scalar(count - 1);
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, t);
  }
  return g;
}

template <typename Scalar>
struct GPConfig {
  Scalar signal_variance = 1;
  /// Starting noise level; kept fixed when fit_noise is false.
  Scalar noise_variance = Scalar(1e-2);
  Scalar jitter = Scalar(1e-10);
  std::vector<Scalar> lengthscale_grid = log_grid<Scalar>(Scalar(0.05), Scalar(5), 16);
  std::vector<Scalar> noise_grid = log_grid<Scalar>(Scalar(1e-6), Scalar(1), 16);
  bool fit_noise = true;
  int lml_restarts = 3;
  int max_sweeps = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(signal_variance > 0)) throw std::invalid_argument("signal_variance must be > 0");
    if (!(noise_variance >= 0)) throw std::invalid_argument("noise_variance must be >= 0");
    if (!(jitter >= Scalar(1e-12) && jitter <= Scalar(1e-4)))
      throw std::invalid_argument("jitter must lie in [1e-12, 1e-4]");
    if (lengthscale_grid.empty()) throw std::invalid_argument("empty length-scale grid");
    for (Scalar l : lengthscale_grid)
      if (!(l > 0)) throw std::invalid_argument("length-scale candidates must be > 0");
    for (Scalar v : noise_grid)
      if (!(v >= 0)) throw std::invalid_argument("noise candidates must be >= 0");
    if (lml_restarts < 0) throw std::invalid_argument("lml_restarts must be >= 0");
  }
};

enum class Standardize { Yes, No };

template <typename Scalar>
struct Posterior {
  Scalar mean = 0;
  Scalar variance = 0;
};

template <typename Scalar>
struct GPModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix train_x;  // one row per training point
  Vector train_y;  // standardized targets
  Scalar y_mean = 0;
  Scalar y_std = 1;
  Vector lengthscales;
  Scalar signal_variance = 1;
  Scalar noise_variance = 0;
  Scalar jitter = Scalar(1e-10);  // after escalation
  Matrix chol;                    // lower factor of K + (noise + jitter) I
  Vector alpha;                   // (K + (noise + jitter) I)^-1 train_y

  Eigen::Index num_points() const { return train_x.rows(); }
  Eigen::Index num_dims() const { return train_x.cols(); }

  Scalar prior_variance() const { return signal_variance + noise_variance; }
  Scalar to_raw(Scalar z) const { return y_mean + y_std * z; }
};

template <typename DerivedA, typename DerivedB, typename DerivedL>
typename DerivedA::Scalar kernel(const Eigen::MatrixBase<DerivedA>& x1,
                                 const Eigen::MatrixBase<DerivedB>& x2,
                                 const Eigen::MatrixBase<DerivedL>& lengthscales,
                                 typename DerivedA::Scalar signal_variance) {
  if (x1.size() != x2.size() || x1.size() != lengthscales.size())
    throw std::invalid_argument("kernel: dimension mismatch");
  using Scalar = typename DerivedA::Scalar;
  Scalar r2 = 0;
  for (Eigen::Index d = 0; d < x1.size(); ++d) {
    const Scalar u = (x1(d) - x2(d)) / lengthscales(d);
    r2 += u * u;
  }
  return signal_variance * std::exp(Scalar(-0.5) * r2);
}

/// Gram matrix between the rows of `a` and the rows of `b`.
template <typename DerivedA, typename DerivedB, typename DerivedL>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kernel_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const Eigen::MatrixBase<DerivedL>& lengthscales, typename DerivedA::Scalar signal_variance) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.cols() || a.cols() != lengthscales.size())
    throw std::invalid_argument("kernel_matrix: dimension mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> r2 =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(a.rows(), b.rows());
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const Scalar inv = Scalar(1) / lengthscales(d);
    const auto ad = (a.col(d) * inv).eval();
    const auto bd = (b.col(d) * inv).eval();
    r2.array() += (ad.replicate(1, b.rows()) - bd.transpose().replicate(a.rows(), 1)).array().square();
  }
  return (signal_variance * (Scalar(-0.5) * r2.array()).exp()).matrix();
}

template <typename Scalar>
struct Standardization {
  Scalar mean = 0;
  Scalar std = 1;
};

/// Mean and population standard deviation; a zero spread maps to std = 1.
template <typename Derived>
Standardization<typename Derived::Scalar> standardization_of(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  Standardization<Scalar> s;
  s.mean = y.mean();
  const Scalar var = (y.array() - s.mean).square().mean();
  s.std = var > 0 ? std::sqrt(var) : Scalar(1);
  return s;
}

namespace detail {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Cholesky of gram + (noise + jitter) I, multiplying jitter by 10 on failure
/// up to 1e-4. Returns false when even the largest jitter fails.
template <typename Scalar>
bool factorize(const Mat<Scalar>& gram, Scalar noise, Scalar& jitter, Eigen::LLT<Mat<Scalar>>& llt) {
  for (;;) {
    Mat<Scalar> k = gram;
    k.diagonal().array() += noise + jitter;
    llt.compute(k);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0) return true;
    if (jitter >= Scalar(1e-4) * Scalar(0.999)) return false;
    jitter = std::min<Scalar>(jitter * 10, Scalar(1e-4));
  }
}

template <typename Scalar>
Scalar lml_from_factor(const Eigen::LLT<Mat<Scalar>>& llt, const Vec<Scalar>& y, const Vec<Scalar>& alpha) {
  const auto n = static_cast<Scalar>(y.size());
  const Scalar log_det_half = llt.matrixLLT().diagonal().array().log().sum();
  return Scalar(-0.5) * y.dot(alpha) - log_det_half -
         Scalar(0.5) * n * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

/// Per-dimension squared differences, reused across every LML evaluation.
template <typename Scalar>
struct DistanceCache {
  std::vector<Mat<Scalar>> sq;

  explicit DistanceCache(const Mat<Scalar>& x) {
    const Eigen::Index n = x.rows();
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
      Mat<Scalar> m(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
          const Scalar u = x(i, d) - x(j, d);
          m(i, j) = u * u;
        }
      sq.push_back(std::move(m));
    }
  }

  Mat<Scalar> gram(const Vec<Scalar>& lengthscales, Scalar signal_variance) const {
    const Eigen::Index n = sq.empty() ? 0 : sq.front().rows();
    Mat<Scalar> r2 = Mat<Scalar>::Zero(n, n);
    for (std::size_t d = 0; d < sq.size(); ++d) {
      const Scalar l = lengthscales(static_cast<Eigen::Index>(d));
      r2 += sq[d] / (l * l);
    }
    return (signal_variance * (Scalar(-0.5) * r2.array()).exp()).matrix();
  }
};

}  // namespace detail

/// Builds a model with fixed hyper-parameters: standardizes targets (unless
/// told not to), factorizes with jitter escalation and solves for the
/// mean weights. Accepts a single point.
template <typename DerivedX, typename DerivedY, typename DerivedL>
GPModel<typename DerivedX::Scalar> condition(const Eigen::MatrixBase<DerivedX>& x,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             const Eigen::MatrixBase<DerivedL>& lengthscales,
                                             typename DerivedX::Scalar noise_variance,
                                             const GPConfig<typename DerivedX::Scalar>& cfg,
                                             Standardize standardize = Standardize::Yes) {
  using Scalar = typename DerivedX::Scalar;
  cfg.validate();
  if (x.rows() < 1) throw GPFitError("GP needs at least one training point");
  if (x.rows() != y.size()) throw std::invalid_argument("condition: point/target count mismatch");
  if (lengthscales.size() != x.cols()) throw std::invalid_argument("condition: length-scale count mismatch");
  if (!y.allFinite()) throw GPFitError("GP targets must be finite");
  if ((lengthscales.array() <= 0).any()) throw std::invalid_argument("length-scales must be > 0");

  GPModel<Scalar> m;
  m.train_x = x;
  if (standardize == Standardize::Yes) {
    const auto s = standardization_of(y);
    m.y_mean = s.mean;
    m.y_std = s.std;
  }
  m.train_y = (y.array() - m.y_mean) / m.y_std;
  m.lengthscales = lengthscales;
  m.signal_variance = cfg.signal_variance;
  m.noise_variance = noise_variance;
  m.jitter = cfg.jitter;

  Eigen::LLT<detail::Mat<Scalar>> llt;
  const auto gram = kernel_matrix(m.train_x, m.train_x, m.lengthscales, m.signal_variance);
  if (!detail::factorize<Scalar>(gram, m.noise_variance, m.jitter, llt))
    throw GPFitError("kernel matrix not positive definite even with jitter 1e-4");
  m.chol = llt.matrixL();
  m.alpha = llt.solve(m.train_y);
  return m;
}

template <typename Scalar>
Scalar log_marginal_likelihood(const GPModel<Scalar>& m) {
  const auto n = static_cast<Scalar>(m.num_points());
  return Scalar(-0.5) * m.train_y.dot(m.alpha) - m.chol.diagonal().array().log().sum() -
         Scalar(0.5) * n * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

/// Fits length-scales (and the noise level when cfg.fit_noise) by coordinate
/// ascent of the LML over the configured grids. The first ascent starts at
/// all-ones length-scales; `lml_restarts` further ascents start at random grid
/// points drawn from cfg.seed. The best ascent wins.
template <typename DerivedX, typename DerivedY>
GPModel<typename DerivedX::Scalar> fit(const Eigen::MatrixBase<DerivedX>& x,
                                       const Eigen::MatrixBase<DerivedY>& y,
                                       const GPConfig<typename DerivedX::Scalar>& cfg) {
  using Scalar = typename DerivedX::Scalar;
  using Vec = detail::Vec<Scalar>;
  using Mat = detail::Mat<Scalar>;
  cfg.validate();
  if (x.rows() < 2) throw GPFitError("GP fit needs at least 2 points, got " + std::to_string(x.rows()));
  if (x.rows() != y.size()) throw std::invalid_argument("fit: point/target count mismatch");
  if (!y.allFinite()) throw GPFitError("GP targets must be finite");

  const Eigen::Index dims = x.cols();
  const auto s = standardization_of(y);
  const Vec z = (y.array() - s.mean) / s.std;
  const Mat xm = x;
  const detail::DistanceCache<Scalar> cache(xm);

  auto evaluate = [&](const Vec& ls, Scalar noise) {
    Scalar jitter = cfg.jitter;
    Eigen::LLT<Mat> llt;
    if (!detail::factorize<Scalar>(cache.gram(ls, cfg.signal_variance), noise, jitter, llt))
      return -std::numeric_limits<Scalar>::infinity();
    const Vec alpha = llt.solve(z);
    const Scalar v = detail::lml_from_factor<Scalar>(llt, z, alpha);
    return std::isfinite(v) ? v : -std::numeric_limits<Scalar>::infinity();
  };

  const auto& lgrid = cfg.lengthscale_grid;
  const auto& ngrid = cfg.noise_grid;
  const bool tune_noise = cfg.fit_noise && !ngrid.empty();

  auto ascend = [&](Vec ls, Scalar noise, Scalar score) {
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      bool improved = false;
      for (Eigen::Index d = 0; d < dims; ++d) {
        Scalar keep = ls(d);
        for (Scalar cand : lgrid) {
          if (cand == keep) continue;
          ls(d) = cand;
          const Scalar v = evaluate(ls, noise);
          if (v > score) {
            score = v;
            keep = cand;
            improved = true;
          }
        }
        ls(d) = keep;
      }
      if (tune_noise) {
        Scalar keep = noise;
        for (Scalar cand : ngrid) {
          if (cand == keep) continue;
          const Scalar v = evaluate(ls, cand);
          if (v > score) {
            score = v;
            keep = cand;
            improved = true;
          }
        }
        noise = keep;
      }
      if (!improved) break;
    }
    return std::tuple{ls, noise, score};
  };

  Vec best_ls = Vec::Ones(dims);
  Scalar best_noise = cfg.noise_variance;
  Scalar best = evaluate(best_ls, best_noise);
  std::tie(best_ls, best_noise, best) = ascend(best_ls, best_noise, best);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_l(0, lgrid.size() - 1);
  for (int r = 0; r < cfg.lml_restarts; ++r) {
    Vec ls(dims);
    for (Eigen::Index d = 0; d < dims; ++d) ls(d) = lgrid[pick_l(rng)];
    Scalar noise = cfg.noise_variance;
    if (tune_noise) {
      std::uniform_int_distribution<std::size_t> pick_n(0, ngrid.size() - 1);
      noise = ngrid[pick_n(rng)];
    }
    auto [l2, n2, s2] = ascend(ls, noise, evaluate(ls, noise));
    if (s2 > best) {
      best = s2;
      best_ls = l2;
      best_noise = n2;
    }
  }
  if (!std::isfinite(best)) throw GPFitError("no length-scale setting gave a factorizable kernel");
  return condition(x, y, best_ls, best_noise, cfg, Standardize::Yes);
}

template <typename Scalar>
GPModel<Scalar> fit(const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& points,
                    const std::vector<Scalar>& losses, const GPConfig<Scalar>& cfg) {
  if (points.size() != losses.size()) throw std::invalid_argument("fit: point/target count mismatch");
  if (points.size() < 2) throw GPFitError("GP fit needs at least 2 points");
  detail::Mat<Scalar> x(static_cast<Eigen::Index>(points.size()), points.front().size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != x.cols()) throw std::invalid_argument("fit: ragged points");
    x.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  const Eigen::Map<const detail::Vec<Scalar>> y(losses.data(), static_cast<Eigen::Index>(losses.size()));
  return fit(x, y, cfg);
}

/// Posterior of the (noisy) loss at x, on the original loss scale.
template <typename Scalar, typename Derived>
Posterior<Scalar> predict(const GPModel<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != m.num_dims()) throw std::invalid_argument("predict: dimension mismatch");
  detail::Vec<Scalar> ks(m.num_points());
  for (Eigen::Index i = 0; i < m.num_points(); ++i)
    ks(i) = kernel(m.train_x.row(i).transpose(), x, m.lengthscales, m.signal_variance);
  const detail::Vec<Scalar> v = m.chol.template triangularView<Eigen::Lower>().solve(ks);
  const Scalar var_z = std::max<Scalar>(0, m.prior_variance() - v.squaredNorm());
  return {m.to_raw(ks.dot(m.alpha)), var_z * m.y_std * m.y_std};
}

/// Posteriors for every row of `xs`; same values as calling predict row by row.
template <typename Scalar, typename Derived>
std::vector<Posterior<Scalar>> predict_batch(const GPModel<Scalar>& m, const Eigen::MatrixBase<Derived>& xs) {
  if (xs.cols() != m.num_dims()) throw std::invalid_argument("predict_batch: dimension mismatch");
  const detail::Mat<Scalar> ks = kernel_matrix(m.train_x, xs, m.lengthscales, m.signal_variance);
  const detail::Mat<Scalar> v = m.chol.template triangularView<Eigen::Lower>().solve(ks);
  const detail::Vec<Scalar> means = ks.transpose() * m.alpha;
  const detail::Vec<Scalar> reduction = v.colwise().squaredNorm().transpose();
  std::vector<Posterior<Scalar>> out(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index j = 0; j < xs.rows(); ++j) {
    const Scalar var_z = std::max<Scalar>(0, m.prior_variance() - reduction(j));
    out[static_cast<std::size_t>(j)] = {m.to_raw(means(j)), var_z * m.y_std * m.y_std};
  }
  return out;
}

// Text form, one field per line:
//   hpo-gp 1
//   dims <d> points <n>
//   signal_variance <v>
//   noise_variance <v>
//   jitter <v>
//   y_mean <v> y_std <v>
//   lengthscales <l_1> ... <l_d>
//   x <x_1> ... <x_d> y <raw loss>        (n lines)
// Reading re-conditions the model on the stored data and hyper-parameters.
template <typename Scalar>
void write_model(std::ostream& os, const GPModel<Scalar>& m) {
  const auto old = os.precision(std::numeric_limits<Scalar>::max_digits10);
  os << "hpo-gp 1\n";
  os << "dims " << m.num_dims() << " points " << m.num_points() << '\n';
  os << "signal_variance " << m.signal_variance << '\n';
  os << "noise_variance " << m.noise_variance << '\n';
  os << "jitter " << m.jitter << '\n';
  os << "y_mean " << m.y_mean << " y_std " << m.y_std << '\n';
  os << "lengthscales";
  for (Eigen::Index d = 0; d < m.num_dims(); ++d) os << ' ' << m.lengthscales(d);
  os << '\n';
  for (Eigen::Index i = 0; i < m.num_points(); ++i) {
    os << 'x';
    for (Eigen::Index d = 0; d < m.num_dims(); ++d) os << ' ' << m.train_x(i, d);
    os << " y " << m.to_raw(m.train_y(i)) << '\n';
  }
  os.precision(old);
}

template <typename Scalar>
GPModel<Scalar> read_model(std::istream& is) {
  auto expect = [&](const char* word) {
    std::string w;
    if (!(is >> w) || w != word) throw std::runtime_error(std::string("GP model: expected '") + word + "'");
  };
  int version = 0;
  expect("hpo-gp");
  is >> version;
  if (version != 1) throw std::runtime_error("GP model: unsupported version");
  Eigen::Index dims = 0, n = 0;
  expect("dims");
  is >> dims;
  expect("points");
  is >> n;
  GPConfig<Scalar> cfg;
  Scalar noise = 0, y_mean = 0, y_std = 1;
  expect("signal_variance");
  is >> cfg.signal_variance;
  expect("noise_variance");
  is >> noise;
  expect("jitter");
  is >> cfg.jitter;
  expect("y_mean");
  is >> y_mean;
  expect("y_std");
  is >> y_std;
  detail::Vec<Scalar> ls(dims);
  expect("lengthscales");
  for (Eigen::Index d = 0; d < dims; ++d) is >> ls(d);
  detail::Mat<Scalar> x(n, dims);
  detail::Vec<Scalar> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    expect("x");
    for (Eigen::Index d = 0; d < dims; ++d) is >> x(i, d);
    expect("y");
    is >> y(i);
  }
  if (!is) throw std::runtime_error("GP model: truncated input");
  GPModel<Scalar> m = condition(x, y, ls, noise, cfg, Standardize::No);
  // restore the stored standardization exactly
  m.y_mean = y_mean;
  m.y_std = y_std;
  m.train_y = (y.array() - y_mean) / y_std;
  m.alpha = m.chol.transpose().template triangularView<Eigen::Upper>().solve(
      m.chol.template triangularView<Eigen::Lower>().solve(m.train_y));
  return m;
}

}  // namespace hpo
