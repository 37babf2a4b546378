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
#include "hpo/acquire.hpp"

#include <cmath>
#include <numbers>

namespace hpo {

namespace {

constexpr Eigen::Index kBatch = 4096;

bool better(double pi, const ParamPoint& p, double best_pi, const ParamPoint* best) {
  if (best == nullptr) return true;
  if (pi != best_pi) return pi > best_pi;
  return p < *best;
}

}  // namespace

std::string_view to_string(TargetLabel label) {
  return label == TargetLabel::BestSoFar ? "best-so-far" : "improvement-25pct";
}

TargetLabel target_label_from_string(std::string_view s) {
  if (s == "best-so-far") return TargetLabel::BestSoFar;
  if (s == "improvement-25pct") return TargetLabel::Improvement25;
  throw std::invalid_argument("unknown target label '" + std::string(s) + "'");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

double probability_of_improvement(const Posterior<double>& post, const AcquisitionTarget& target) {
  const double sigma = std::sqrt(std::max(0.0, post.variance));
  if (sigma == 0.0) {
    if (post.mean < target.value) return 1.0;
    if (post.mean == target.value) return 0.5;
    return 0.0;
  }
  return normal_cdf((target.value - post.mean) / sigma);
}

std::pair<AcquisitionTarget, AcquisitionTarget> dual_targets(double best_loss) {
  if (!std::isfinite(best_loss)) throw std::invalid_argument("dual_targets: best loss must be finite");
  return {{best_loss, TargetLabel::BestSoFar}, {0.75 * best_loss, TargetLabel::Improvement25}};
}

AcquisitionTarget alternating_target(double best_loss, std::size_t iteration) {
  auto [best, improved] = dual_targets(best_loss);
  return iteration % 2 == 1 ? best : improved;
}

std::size_t argmax_pi(std::span<const Posterior<double>> posteriors, std::span<const ParamPoint> points,
                      const AcquisitionTarget& target) {
  if (posteriors.size() != points.size() || posteriors.empty())
    throw std::invalid_argument("argmax_pi: need equally many posteriors and points");
  std::size_t best = 0;
  double best_pi = probability_of_improvement(posteriors[0], target);
  for (std::size_t i = 1; i < posteriors.size(); ++i) {
    const double pi = probability_of_improvement(posteriors[i], target);
    if (better(pi, points[i], best_pi, &points[best])) {
      best = i;
      best_pi = pi;
    }
  }
  return best;
}

Proposal propose(const GPModel<double>& model, std::span<const Candidate> candidates,
                 const AcquisitionTarget& target, const VisitedSet& visited) {
  std::vector<const Candidate*> open;
  open.reserve(candidates.size());
  for (const auto& c : candidates)
    if (!visited.contains(c.point)) open.push_back(&c);
  if (open.empty()) throw SpaceExhausted();

  const Candidate* best = nullptr;
  Proposal out;
  Eigen::MatrixXd xs;
  for (std::size_t start = 0; start < open.size(); start += kBatch) {
    const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(kBatch, open.size() - start));
    xs.resize(count, model.num_dims());
    for (Eigen::Index j = 0; j < count; ++j) xs.row(j) = open[start + static_cast<std::size_t>(j)]->encoded.transpose();
    const auto posts = predict_batch(model, xs);
    for (Eigen::Index j = 0; j < count; ++j) {
      const Candidate* c = open[start + static_cast<std::size_t>(j)];
      const double pi = probability_of_improvement(posts[static_cast<std::size_t>(j)], target);
      if (better(pi, c->point, out.pi, best ? &best->point : nullptr)) {
        best = c;
        out.pi = pi;
        out.posterior = posts[static_cast<std::size_t>(j)];
      }
    }
  }
  out.point = best->point;
  return out;
}

}  // namespace hpo
