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

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hpo/space.hpp"
#include "hpo/surrogate.hpp"

namespace hpo {

enum class TargetLabel { BestSoFar, Improvement25 };

std::string_view to_string(TargetLabel label);
TargetLabel target_label_from_string(std::string_view s);

/// Loss level L* a proposal should beat. Losses are minimized.
struct AcquisitionTarget {
  double value = 0;
  TargetLabel label = TargetLabel::BestSoFar;
};

/// Standard normal CDF, 0.5 * erfc(-z / sqrt(2)). Exact 0.5 at z = 0.
double normal_cdf(double z);

/// PI = Phi((L* - mean) / sigma). With sigma = 0 the limit is used:
/// 1 below the target, 0.5 on it, 0 above.
double probability_of_improvement(const Posterior<double>& post, const AcquisitionTarget& target);

/// (best_loss, best-so-far) and (0.75 * best_loss, 25% improvement).
std::pair<AcquisitionTarget, AcquisitionTarget> dual_targets(double best_loss);

/// Target used by the adaptive iteration with 1-based index `iteration`:
/// odd iterations chase the best loss, even ones the 25% improvement.
AcquisitionTarget alternating_target(double best_loss, std::size_t iteration);

class SpaceExhausted : public std::runtime_error {
 public:
  SpaceExhausted() : std::runtime_error("every candidate has already been evaluated") {}
};

struct Candidate {
  ParamPoint point;
  EncodedPoint encoded;
};

using VisitedSet = std::unordered_set<ParamPoint, ParamPointHash>;

struct Proposal {
  ParamPoint point;
  double pi = 0;
  Posterior<double> posterior;
};

/// Unvisited candidate with the largest PI; ties go to the lexicographically
/// smallest point. Throws SpaceExhausted when nothing unvisited remains.
Proposal propose(const GPModel<double>& model, std::span<const Candidate> candidates,
                 const AcquisitionTarget& target, const VisitedSet& visited);

/// Same selection rule over precomputed posteriors (no model needed).
std::size_t argmax_pi(std::span<const Posterior<double>> posteriors, std::span<const ParamPoint> points,
                      const AcquisitionTarget& target);

}  // namespace hpo
