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
#include "hpo/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

namespace hpo {

namespace {

enum RngStream : std::uint64_t { kSampleStream = 1, kSurrogateStream = 2, kCandidateStream = 3, kEvalStream = 4 };

constexpr std::size_t kMaxSampleAttempts = 100'000;

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
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

double parse_double(std::string_view s, std::size_t line, const char* field) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw LedgerError(line, std::string("bad ") + field + " '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, std::size_t line, const char* field) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw LedgerError(line, std::string("bad ") + field + " '" + std::string(s) + "'");
  return v;
}

std::string header_line(const LedgerHeader& h) {
  return "# hpo-ledger v1\tobjective=" + h.objective_id + "\tseed=" + std::to_string(h.seed);
}

constexpr std::string_view kColumnsLine = "# id\tpoint\tstage\ttarget\tloss\terror_rate\tstatus\twall_time";

Trial evaluate_trial(const ParamSpace& space, Objective& objective, const ParamPoint& p,
                     const SearchConfig& cfg, std::uint64_t id) {
  space.validate(p);
  Trial t;
  t.id = id;
  t.point = p;
  const auto start = std::chrono::steady_clock::now();
  Evaluation ev;
  try {
    ev = objective.evaluate(p, trial_context(cfg.seed, id));
  } catch (const std::exception&) {
    ev = {objective.penalty_loss(), 1.0, TrialStatus::Failed};
  }
  t.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ev.status == TrialStatus::Ok && !(std::isfinite(ev.loss) && ev.error_rate >= 0 && ev.error_rate <= 1))
    ev.status = TrialStatus::Failed;
  t.status = ev.status;
  if (t.ok()) {
    t.loss = ev.loss;
    t.error_rate = ev.error_rate;
  } else {
    t.loss = objective.penalty_loss();
    t.error_rate = (ev.error_rate >= 0 && ev.error_rate <= 1) ? ev.error_rate : 1.0;
  }
  return t;
}

VisitedSet visited_of(const Ledger& ledger) {
  VisitedSet v;
  for (const auto& t : ledger.trials()) v.insert(t.point);
  return v;
}

/// Uniform draw that avoids visited points; nullopt when the space looks
/// exhausted.
std::optional<ParamPoint> sample_unvisited(const ParamSpace& space, const VisitedSet& visited,
                                           std::mt19937_64& rng) {
  if (visited.size() >= cardinality(space)) return std::nullopt;
  for (std::size_t attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    auto p = sample_uniform(space, rng);
    if (!visited.contains(p)) return p;
  }
  // Nearly full space: fall back to a scan.
  for (auto& p : enumerate(space, cardinality(space)))
    if (!visited.contains(p)) return p;
  return std::nullopt;
}

std::size_t adaptive_iterations_so_far(const Ledger& ledger) {
  return static_cast<std::size_t>(
      std::count_if(ledger.trials().begin(), ledger.trials().end(), [](const Trial& t) { return t.target.has_value(); }));
}

}  // namespace

TrialContext trial_context(std::uint64_t seed, std::uint64_t id) {
  auto rng = trial_rng(seed, id, kEvalStream);
  return {id, rng()};
}

std::string_view to_string(Stage s) { return s == Stage::Random ? "random" : "adaptive"; }

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Ok: return "ok";
    case TrialStatus::Diverged: return "diverged";
    case TrialStatus::Failed: return "failed";
  }
  return "?";
}

void SearchConfig::validate() const {
  if (random_iters < 2) throw std::invalid_argument("random_iters must be >= 2");
  if (candidate_samples == 0) throw std::invalid_argument("candidate_samples must be >= 1");
  gp.validate();
}

double penalty_loss_for_classes(int num_classes) { return 2.0 * std::log(static_cast<double>(num_classes)); }

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial_id, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial_id), static_cast<std::uint32_t>(trial_id >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------- ledger I/O

std::string format_trial(const Trial& t, bool with_wall_time) {
  std::string s = std::to_string(t.id);
  s += '\t';
  for (std::size_t i = 0; i < t.point.values.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(t.point.values[i]);
  }
  s += '\t';
  s += to_string(t.stage);
  s += '\t';
  s += t.target ? std::string(to_string(*t.target)) : "-";
  s += '\t';
  s += fmt_double(t.loss);
  s += '\t';
  s += fmt_double(t.error_rate);
  s += '\t';
  s += to_string(t.status);
  s += '\t';
  if (with_wall_time) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", t.wall_time);
    s += buf;
  } else {
    s += '-';
  }
  return s;
}

Trial parse_trial(std::string_view line, std::size_t line_no) {
  const auto f = split(line, '\t');
  if (f.size() != 8) throw LedgerError(line_no, "expected 8 tab-separated fields, got " + std::to_string(f.size()));
  Trial t;
  t.id = parse_int<std::uint64_t>(f[0], line_no, "id");
  if (!f[1].empty())
    for (auto v : split(f[1], ',')) t.point.values.push_back(parse_int<int>(v, line_no, "point value"));
  if (f[2] == "random") t.stage = Stage::Random;
  else if (f[2] == "adaptive") t.stage = Stage::Adaptive;
  else throw LedgerError(line_no, "bad stage '" + std::string(f[2]) + "'");
  if (f[3] != "-") {
    try {
      t.target = target_label_from_string(f[3]);
    } catch (const std::invalid_argument&) {
      throw LedgerError(line_no, "bad target '" + std::string(f[3]) + "'");
    }
  }
  t.loss = parse_double(f[4], line_no, "loss");
  t.error_rate = parse_double(f[5], line_no, "error_rate");
  if (f[6] == "ok") t.status = TrialStatus::Ok;
  else if (f[6] == "diverged") t.status = TrialStatus::Diverged;
  else if (f[6] == "failed") t.status = TrialStatus::Failed;
  else throw LedgerError(line_no, "bad status '" + std::string(f[6]) + "'");
  t.wall_time = f[7] == "-" ? 0.0 : parse_double(f[7], line_no, "wall_time");
  if (t.ok() && !(std::isfinite(t.loss) && t.error_rate >= 0 && t.error_rate <= 1))
    throw LedgerError(line_no, "ok trial with non-finite loss or error outside [0, 1]");
  return t;
}

Ledger Ledger::parse(std::istream& in) {
  Ledger l;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.starts_with("# hpo-ledger")) {
      const auto f = split(line, '\t');
      if (f.empty() || f[0] != "# hpo-ledger v1") throw LedgerError(line_no, "unsupported ledger version");
      for (std::size_t i = 1; i < f.size(); ++i) {
        if (f[i].starts_with("objective=")) l.header_.objective_id = std::string(f[i].substr(10));
        else if (f[i].starts_with("seed=")) l.header_.seed = parse_int<std::uint64_t>(f[i].substr(5), line_no, "seed");
      }
      have_header = true;
      continue;
    }
    if (line.starts_with('#')) continue;
    if (!have_header) throw LedgerError(line_no, "missing '# hpo-ledger v1' header");
    Trial t = parse_trial(line, line_no);
    if (t.id != l.trials_.size() + 1)
      throw LedgerError(line_no, "expected trial id " + std::to_string(l.trials_.size() + 1) + ", found " +
                                     std::to_string(t.id));
    l.trials_.push_back(std::move(t));
  }
  if (!have_header) throw LedgerError(line_no, "missing '# hpo-ledger v1' header");
  return l;
}

Ledger Ledger::create(const std::filesystem::path& path, LedgerHeader header) {
  Ledger l(std::move(header));
  l.out_.open(path, std::ios::trunc);
  if (!l.out_) throw std::runtime_error("cannot write ledger " + path.string());
  l.out_ << header_line(l.header_) << '\n' << kColumnsLine << '\n';
  l.out_.flush();
  l.path_ = path;
  return l;
}

Ledger Ledger::open(const std::filesystem::path& path) {
  std::string text;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read ledger " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  if (!text.empty() && text.back() != '\n') {
    // interrupted append: drop the partial record
    const auto cut = text.rfind('\n');
    text.resize(cut == std::string::npos ? 0 : cut + 1);
    std::filesystem::resize_file(path, text.size());
  }
  std::istringstream in(text);
  Ledger l = parse(in);
  l.out_.open(path, std::ios::app);
  if (!l.out_) throw std::runtime_error("cannot append to ledger " + path.string());
  l.path_ = path;
  return l;
}

void Ledger::append(Trial t) {
  if (t.id != trials_.size() + 1)
    throw std::logic_error("ledger append out of order: id " + std::to_string(t.id));
  if (path_) {
    out_ << format_trial(t) << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("ledger write failed for " + path_->string());
  }
  trials_.push_back(std::move(t));
}

std::string Ledger::canonical_text() const {
  std::string s = header_line(header_) + '\n';
  for (const auto& t : trials_) s += format_trial(t, false) + '\n';
  return s;
}

// ---------------------------------------------------------------- search

RunResult run_random(const ParamSpace& space, Objective& objective, std::size_t n, Ledger& ledger,
                     const SearchConfig& cfg, const TrialCallback& on_trial) {
  if (n == 0) throw std::invalid_argument("run_random: n must be >= 1");
  RunResult r;
  auto visited = visited_of(ledger);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = ledger.next_id();
    auto rng = trial_rng(cfg.seed, id, kSampleStream);
    auto p = sample_unvisited(space, visited, rng);
    if (!p) {
      r.stop_reason = "search space exhausted after " + std::to_string(ledger.size()) + " trials";
      break;
    }
    Trial t = evaluate_trial(space, objective, *p, cfg, id);
    t.stage = Stage::Random;
    visited.insert(t.point);
    ledger.append(t);
    ++r.appended;
    if (on_trial) on_trial(ledger.trials().back());
  }
  return r;
}

std::vector<Candidate> enumerate_candidates(const ParamSpace& space, const Objective& objective,
                                            std::uint64_t limit) {
  std::vector<Candidate> out;
  if (cardinality(space) > limit) return out;
  for (auto& p : enumerate(space, limit)) {
    if (!objective.feasible(p)) continue;
    EncodedPoint x = encode(space, p);
    out.push_back({std::move(p), std::move(x)});
  }
  return out;
}

AdaptiveStep plan_adaptive_step(const ParamSpace& space, std::span<const Trial> history,
                                std::span<const Candidate> candidates, const SearchConfig& cfg,
                                std::uint64_t next_id) {
  std::vector<EncodedPoint> xs;
  std::vector<double> ys;
  VisitedSet visited;
  std::size_t iteration = 1;
  for (const auto& t : history) {
    visited.insert(t.point);
    if (t.target) ++iteration;
    if (!t.ok()) continue;
    xs.push_back(encode(space, t.point));
    ys.push_back(t.loss);
  }
  if (xs.size() < 2) throw GPFitError("fewer than 2 ok trials to fit the surrogate");

  GPConfig<double> gp = cfg.gp;
  auto seed_rng = trial_rng(cfg.seed, next_id, kSurrogateStream);
  gp.seed = seed_rng();
  AdaptiveStep step;
  step.model = fit(xs, ys, gp);
  step.target = alternating_target(*std::min_element(ys.begin(), ys.end()), iteration);
  step.proposal = propose(step.model, candidates, step.target, visited);
  return step;
}

RunResult run_adaptive(const ParamSpace& space, Objective& objective, std::size_t n, Ledger& ledger,
                       const SearchConfig& cfg, const TrialCallback& on_trial) {
  cfg.validate();
  RunResult r;
  if (n == 0) return r;
  const auto enumerated = enumerate_candidates(space, objective, cfg.enumeration_limit);
  const bool sampled = cardinality(space) > cfg.enumeration_limit;
  if (!sampled && enumerated.empty()) {
    r.stop_reason = "no feasible point in the search space";
    return r;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto id = ledger.next_id();
    std::vector<Candidate> drawn;
    if (sampled) {
      auto rng = trial_rng(cfg.seed, id, kCandidateStream);
      drawn.reserve(cfg.candidate_samples);
      for (std::size_t j = 0; j < cfg.candidate_samples; ++j) {
        auto p = sample_uniform(space, rng);
        if (!objective.feasible(p)) continue;
        EncodedPoint x = encode(space, p);
        drawn.push_back({std::move(p), std::move(x)});
      }
    }
    const std::span<const Candidate> candidates = sampled ? std::span<const Candidate>(drawn) : enumerated;

    std::optional<Trial> t;
    const std::size_t iteration = adaptive_iterations_so_far(ledger) + 1;
    try {
      auto step = plan_adaptive_step(space, ledger.trials(), candidates, cfg, id);
      t = evaluate_trial(space, objective, step.proposal.point, cfg, id);
      t->stage = Stage::Adaptive;
      t->target = step.target.label;
    } catch (const SpaceExhausted&) {
      r.stop_reason = "every feasible candidate has been evaluated (" + std::to_string(ledger.size()) + " trials)";
      break;
    } catch (const GPFitError&) {
      // fall back to one random trial for this iteration
      auto rng = trial_rng(cfg.seed, id, kSampleStream);
      auto p = sample_unvisited(space, visited_of(ledger), rng);
      if (!p) {
        r.stop_reason = "search space exhausted after " + std::to_string(ledger.size()) + " trials";
        break;
      }
      t = evaluate_trial(space, objective, *p, cfg, id);
      t->stage = Stage::Random;
      t->target = iteration % 2 == 1 ? TargetLabel::BestSoFar : TargetLabel::Improvement25;
    }
    ledger.append(*t);
    ++r.appended;
    if (on_trial) on_trial(ledger.trials().back());
  }
  return r;
}

// ---------------------------------------------------------------- summaries

std::vector<Trial> best_trials(std::span<const Trial> trials, std::size_t k) {
  std::vector<Trial> ok;
  for (const auto& t : trials)
    if (t.ok()) ok.push_back(t);
  if (ok.size() < k) throw TrialShortfall(k, ok.size());
  std::stable_sort(ok.begin(), ok.end(), [](const Trial& a, const Trial& b) {
    if (a.loss != b.loss) return a.loss < b.loss;
    return a.id < b.id;
  });
  ok.resize(k);
  return ok;
}

RunningStats running_stats(std::span<const Trial> trials) {
  RunningStats s;
  std::vector<double> sorted;
  double min_loss = std::numeric_limits<double>::infinity();
  double min_err = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), t.loss), t.loss);
    min_loss = std::min(min_loss, t.loss);
    min_err = std::min(min_err, t.error_rate);
    const auto n = sorted.size();
    const double med = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    s.min_loss.push_back(min_loss);
    s.median_loss.push_back(med);
    s.min_error.push_back(min_err);
  }
  return s;
}

}  // namespace hpo
