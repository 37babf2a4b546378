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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpo/acquire.hpp"
#include "hpo/space.hpp"
#include "hpo/surrogate.hpp"

namespace hpo {

enum class Stage { Random, Adaptive };
enum class TrialStatus { Ok, Diverged, Failed };

std::string_view to_string(Stage s);
std::string_view to_string(TrialStatus s);

/// One evaluated point of the search.
struct Trial {
  std::uint64_t id = 0;  // 1-based, gap-free
  ParamPoint point;
  Stage stage = Stage::Random;
  std::optional<TargetLabel> target;
  double loss = 0;
  double error_rate = 0;
  TrialStatus status = TrialStatus::Ok;
  double wall_time = 0;  // seconds

  bool ok() const { return status == TrialStatus::Ok; }
};

/// Desk-scale stand-ins for the memory and time limits on a single training.
struct ResourceCaps {
  std::uint64_t max_params = 2'000'000;
  /// Forward multiply-accumulates per image times images seen in training.
  double max_train_macs = 3.0e11;
};

struct SearchConfig {
  std::size_t random_iters = 47;
  std::size_t adaptive_iters = 53;
  std::uint64_t seed = 0;
  std::string objective_id;
  ResourceCaps caps;
  /// Full enumeration of the candidate set up to this cardinality.
  std::uint64_t enumeration_limit = 500'000;
  /// Otherwise this many uniform samples per proposal.
  std::size_t candidate_samples = 50'000;
  GPConfig<double> gp;

  void validate() const;
};

/// Per-trial context handed to the objective.
struct TrialContext {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;  // derived from the search seed and the trial id
};

struct Evaluation {
  double loss = 0;
  double error_rate = 0;
  TrialStatus status = TrialStatus::Ok;
};

/// Black-box loss to be minimized over a ParamSpace.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::string id() const = 0;
  virtual Evaluation evaluate(const ParamPoint& p, const TrialContext& ctx) = 0;
  /// Points that can never be evaluated are kept out of adaptive proposals.
  virtual bool feasible(const ParamPoint&) const { return true; }
  /// Loss recorded for failed or diverged evaluations.
  virtual double penalty_loss() const = 0;
};

/// Twice the cross-entropy of a uniform prediction over K classes.
double penalty_loss_for_classes(int num_classes);

class LedgerError : public std::runtime_error {
 public:
  LedgerError(std::size_t line, const std::string& what)
      : std::runtime_error("ledger line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LedgerHeader {
  std::string objective_id;
  std::uint64_t seed = 0;
};

/// Append-only trial record. When bound to a file, every append is written
/// and flushed before returning; see docs/formats.md for the line layout.
class Ledger {
 public:
  Ledger() = default;
  explicit Ledger(LedgerHeader header) : header_(std::move(header)) {}

  /// Starts a new file, replacing any existing one.
  static Ledger create(const std::filesystem::path& path, LedgerHeader header);
  /// Loads an existing file and keeps appending to it. An unterminated last
  /// line (interrupted write) is dropped.
  static Ledger open(const std::filesystem::path& path);
  static Ledger parse(std::istream& in);

  const LedgerHeader& header() const { return header_; }
  const std::vector<Trial>& trials() const { return trials_; }
  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  std::uint64_t next_id() const { return trials_.size() + 1; }

  void append(Trial t);

  /// Ledger text with wall_time blanked, for reproducibility comparisons.
  std::string canonical_text() const;

 private:
  LedgerHeader header_;
  std::vector<Trial> trials_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
};

std::string format_trial(const Trial& t, bool with_wall_time = true);
Trial parse_trial(std::string_view line, std::size_t line_no);

/// Called after each trial has been appended and persisted.
using TrialCallback = std::function<void(const Trial&)>;

struct RunResult {
  std::size_t appended = 0;
  std::optional<std::string> stop_reason;
};

/// Deterministic random stream for one trial and purpose.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial_id, std::uint64_t stream);

/// Context the search hands to the objective for trial `id`.
TrialContext trial_context(std::uint64_t seed, std::uint64_t id);

/// Appends n trials at uniformly drawn, not yet visited points.
RunResult run_random(const ParamSpace& space, Objective& objective, std::size_t n, Ledger& ledger,
                     const SearchConfig& cfg, const TrialCallback& on_trial = {});

/// Appends n GP-guided trials. Each iteration refits the surrogate on all ok
/// trials, alternates between the two PI targets and evaluates the winner.
RunResult run_adaptive(const ParamSpace& space, Objective& objective, std::size_t n, Ledger& ledger,
                       const SearchConfig& cfg, const TrialCallback& on_trial = {});

/// Proposal the adaptive stage would make for trial `next_id` given the ok
/// trials in `history`. Exposed so that proposals can be replayed.
struct AdaptiveStep {
  Proposal proposal;
  AcquisitionTarget target;
  GPModel<double> model;
};
AdaptiveStep plan_adaptive_step(const ParamSpace& space, std::span<const Trial> history,
                                 std::span<const Candidate> candidates, const SearchConfig& cfg,
                                 std::uint64_t next_id);

/// Full enumeration (feasible points only) when the space is small enough,
/// otherwise empty: callers then sample per proposal.
std::vector<Candidate> enumerate_candidates(const ParamSpace& space, const Objective& objective,
                                            std::uint64_t limit);

class TrialShortfall : public std::runtime_error {
 public:
  TrialShortfall(std::size_t wanted, std::size_t available)
      : std::runtime_error("need " + std::to_string(wanted) + " ok trials, only " +
                           std::to_string(available) + " available"),
        wanted_(wanted), available_(available) {}
  std::size_t wanted() const { return wanted_; }
  std::size_t available() const { return available_; }

 private:
  std::size_t wanted_, available_;
};

/// k ok trials with the smallest loss, ascending, ties by lower id.
std::vector<Trial> best_trials(std::span<const Trial> trials, std::size_t k);

struct RunningStats {
  std::vector<double> min_loss;
  std::vector<double> median_loss;
  std::vector<double> min_error;
};

/// Prefix statistics over every trial; non-ok trials contribute their
/// recorded penalty loss.
RunningStats running_stats(std::span<const Trial> trials);

}  // namespace hpo
