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
#include "hpo/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

#include "hpo/ensemble.hpp"
#include "hpo/json_io.hpp"
#include "hpo/objectives.hpp"

namespace hpo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  if (workspace.empty()) throw ConfigError("workspace path is empty");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(cutoff > 0.25 && cutoff < 1.0)) throw ConfigError("cutoff must lie in (0.25, 1)");
  if (dataset.side != nnet::preset_shape(preset).input_side)
    throw ConfigError("dataset side " + std::to_string(dataset.side) + " does not match the " +
                      std::string(nnet::to_string(preset)) + " preset input of " +
                      std::to_string(nnet::preset_shape(preset).input_side));
  try {
    if (baseline) space.validate(*baseline);
    dataset.validate();
    search.validate();
  } catch (const StratificationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ParamPoint RunConfig::baseline_point() const { return baseline ? *baseline : preset_baseline(space, preset); }

json to_json(const RunConfig& c) {
  json j;
  j["workspace"] = c.workspace.string();
  if (c.dataset_dir) j["dataset_dir"] = c.dataset_dir->string();
  if (c.ledger_path) j["ledger"] = c.ledger_path->string();
  j["preset"] = std::string(nnet::to_string(c.preset));
  j["k"] = c.k;
  j["cutoff"] = c.cutoff;
  j["space"] = space_to_json(c.space);
  if (c.baseline) j["baseline"] = c.baseline->values;
  j["dataset"] = {{"volumes_per_class", c.dataset.volumes_per_class},
                  {"min_slices", c.dataset.min_slices},
                  {"max_slices", c.dataset.max_slices},
                  {"side", c.dataset.side},
                  {"seed", c.dataset.seed},
                  {"fractions", c.dataset.fractions}};
  const auto& s = c.search;
  j["search"] = {{"random_iters", s.random_iters},
                 {"adaptive_iters", s.adaptive_iters},
                 {"seed", s.seed},
                 {"max_params", s.caps.max_params},
                 {"max_train_macs", s.caps.max_train_macs},
                 {"enumeration_limit", s.enumeration_limit},
                 {"candidate_samples", s.candidate_samples},
                 {"lml_restarts", s.gp.lml_restarts},
                 {"max_sweeps", s.gp.max_sweeps}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"workspace", "dataset_dir", "ledger", "preset", "k", "cutoff", "space", "baseline", "dataset", "search"},
             "config");
  RunConfig c;
  if (j.contains("workspace")) c.workspace = j.at("workspace").get<std::string>();
  if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
  if (j.contains("ledger")) c.ledger_path = j.at("ledger").get<std::string>();
  if (j.contains("preset")) {
    try {
      c.preset = nnet::preset_from_string(j.at("preset").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    c.dataset.side = nnet::preset_shape(c.preset).input_side;
  }
  read(j, "k", c.k);
  read(j, "cutoff", c.cutoff);
  if (j.contains("space")) {
    try {
      c.space = space_from_json(j.at("space"));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad space: ") + e.what());
    }
  }
  if (j.contains("baseline")) {
    ParamPoint p;
    read(j, "baseline", p.values);
    c.baseline = p;
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, {"volumes_per_class", "min_slices", "max_slices", "side", "seed", "fractions"}, "dataset");
    read(d, "volumes_per_class", c.dataset.volumes_per_class);
    read(d, "min_slices", c.dataset.min_slices);
    read(d, "max_slices", c.dataset.max_slices);
    read(d, "side", c.dataset.side);
    read(d, "seed", c.dataset.seed);
    read(d, "fractions", c.dataset.fractions);
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    check_keys(s,
               {"random_iters", "adaptive_iters", "seed", "max_params", "max_train_macs", "enumeration_limit",
                "candidate_samples", "lml_restarts", "max_sweeps"},
               "search");
    read(s, "random_iters", c.search.random_iters);
    read(s, "adaptive_iters", c.search.adaptive_iters);
    read(s, "seed", c.search.seed);
    read(s, "max_params", c.search.caps.max_params);
    read(s, "max_train_macs", c.search.caps.max_train_macs);
    read(s, "enumeration_limit", c.search.enumeration_limit);
    read(s, "candidate_samples", c.search.candidate_samples);
    read(s, "lml_restarts", c.search.gp.lml_restarts);
    read(s, "max_sweeps", c.search.gp.max_sweeps);
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------- lock

WorkspaceLock::WorkspaceLock(const fs::path& workspace, Mode mode) {
  fs::create_directories(workspace);
  const auto path = workspace / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, (mode == Mode::Exclusive ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw WorkspaceBusy("workspace " + workspace.string() + " is in use by another command");
  }
}

WorkspaceLock::~WorkspaceLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---------------------------------------------------------------- helpers

fs::path model_cache_path(const RunConfig& cfg, std::uint64_t trial_id, const nnet::NetSpec& spec) {
  std::ostringstream name;
  name << "trial_" << trial_id << '_' << std::hex << std::setw(16) << std::setfill('0') << spec.hash() << ".bin";
  return cfg.models_dir() / name.str();
}

ParamPoint preset_baseline(const ParamSpace& space, nnet::Preset preset) {
  ParamPoint p = baseline_point();
  const auto b = space.index_of("b");
  const int side = nnet::preset_shape(preset).input_side;
  while ((side >> p.values[b]) < 1) {
    const int rank = space.dims()[b].rank_of(p.values[b]);
    if (rank <= 0) throw std::invalid_argument("no block count fits the preset input");
    p.values[b] = space.dims()[b].raw_values[static_cast<std::size_t>(rank - 1)];
  }
  space.validate(p);
  return p;
}

namespace {

SliceDataset require_dataset(const RunConfig& cfg) {
  if (!fs::exists(cfg.dataset_path() / "manifest.tsv"))
    throw std::runtime_error("missing dataset at " + cfg.dataset_path().string() + " (run gen first)");
  auto data = load_dataset(cfg.dataset_path());
  if (data.side != nnet::preset_shape(cfg.preset).input_side)
    throw ConfigError("dataset side " + std::to_string(data.side) + " does not match the preset");
  return data;
}

std::string objective_id(const RunConfig& cfg) { return "cnn-" + std::string(nnet::to_string(cfg.preset)); }

/// Keeps the weights of trials that can still enter the top k.
class ModelCache {
 public:
  ModelCache(const RunConfig& cfg, const Ledger& ledger, const CnnObjective& objective)
      : cfg_(cfg), ledger_(ledger), objective_(objective) {
    fs::create_directories(cfg.models_dir());
  }

  void offer(const TrialContext& ctx, const nnet::TrainedNet& net) {
    if (net.metrics.diverged || !std::isfinite(net.metrics.val_loss)) return;
    const auto best = best_so_far();
    if (best.size() >= cfg_.k && !(net.metrics.val_loss < best.back().loss)) return;
    nnet::save_weights(model_cache_path(cfg_, ctx.id, net.spec()), net);
  }

  /// Removes cached files of trials outside the current top k.
  void prune() {
    std::set<fs::path> keep;
    for (const auto& t : best_so_far()) {
      try {
        keep.insert(model_cache_path(cfg_, t.id, objective_.spec_for(t.point)));
      } catch (const std::invalid_argument&) {
      }
    }
    for (const auto& entry : fs::directory_iterator(cfg_.models_dir())) {
      const auto name = entry.path().filename().string();
      if (name.rfind("trial_", 0) == 0 && !keep.count(entry.path())) fs::remove(entry.path());
    }
  }

 private:
  std::vector<Trial> best_so_far() const {
    std::size_t ok = 0;
    for (const auto& t : ledger_.trials()) ok += t.ok();
    return best_trials(ledger_.trials(), std::min(ok, cfg_.k));
  }

  const RunConfig& cfg_;
  const Ledger& ledger_;
  const CnnObjective& objective_;
};

void log_trial(std::ostream& log, const ParamSpace& space, const Trial& t) {
  log << "trial " << t.id << ' ' << to_string(t.stage);
  if (t.target) log << '/' << to_string(*t.target);
  log << ' ' << space.format(t.point) << " loss=" << t.loss << " err=" << t.error_rate << ' ' << to_string(t.status)
      << ' ' << std::fixed << std::setprecision(1) << t.wall_time << "s" << std::defaultfloat << std::setprecision(6)
      << std::endl;
}

Ledger run_stages(const RunConfig& cfg, Ledger ledger, std::ostream& log) {
  const auto data = require_dataset(cfg);
  CnnObjective objective(cfg.space, data, cfg.preset, cfg.search.caps);
  ModelCache cache(cfg, ledger, objective);
  objective.on_trained([&](const TrialContext& ctx, const nnet::TrainedNet& net) { cache.offer(ctx, net); });
  const auto on_trial = [&](const Trial& t) {
    cache.prune();
    log_trial(log, cfg.space, t);
  };

  SearchConfig sc = cfg.search;
  sc.objective_id = objective.id();
  std::size_t random_done = 0, adaptive_done = 0;
  for (const auto& t : ledger.trials()) (t.target ? adaptive_done : random_done)++;

  if (adaptive_done == 0 && random_done < sc.random_iters) {
    const auto r = run_random(cfg.space, objective, sc.random_iters - random_done, ledger, sc, on_trial);
    if (r.stop_reason) log << "random stage stopped: " << *r.stop_reason << '\n';
  }
  if (adaptive_done < sc.adaptive_iters) {
    const auto r = run_adaptive(cfg.space, objective, sc.adaptive_iters - adaptive_done, ledger, sc, on_trial);
    if (r.stop_reason) log << "adaptive stage stopped: " << *r.stop_reason << '\n';
  }
  return ledger;
}

}  // namespace

// ---------------------------------------------------------------- commands

void cmd_gen(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  WorkspaceLock lock(cfg.workspace, WorkspaceLock::Mode::Exclusive);
  const auto data = generate(cfg.dataset);
  const auto dir = cfg.dataset_path();
  if (fs::exists(dir / "slices")) fs::remove_all(dir / "slices");
  save_dataset(data, dir);
  log << "wrote " << data.volumes.size() << " volumes, " << data.num_slices() << " slices (train "
      << data.num_slices(Split::Train) << ", validation " << data.num_slices(Split::Validation) << ", test "
      << data.num_slices(Split::Test) << ") to " << dir.string() << '\n';
}

Ledger cmd_search(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  WorkspaceLock lock(cfg.workspace, WorkspaceLock::Mode::Exclusive);
  if (fs::exists(cfg.ledger_file()))
    throw std::runtime_error("ledger " + cfg.ledger_file().string() + " already exists; use resume");
  require_dataset(cfg);
  save_run_config(cfg, cfg.config_file());
  auto ledger = Ledger::create(cfg.ledger_file(), {objective_id(cfg), cfg.search.seed});
  return run_stages(cfg, std::move(ledger), log);
}

Ledger cmd_resume(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  WorkspaceLock lock(cfg.workspace, WorkspaceLock::Mode::Exclusive);
  if (!fs::exists(cfg.ledger_file()))
    throw std::runtime_error("no ledger at " + cfg.ledger_file().string() + "; use search");
  auto ledger = Ledger::open(cfg.ledger_file());
  if (ledger.header().seed != cfg.search.seed || ledger.header().objective_id != objective_id(cfg))
    throw ConfigError("ledger was written with objective " + ledger.header().objective_id + " and seed " +
                      std::to_string(ledger.header().seed) + "; the config disagrees");
  log << "resuming after " << ledger.size() << " trials\n";
  return run_stages(cfg, std::move(ledger), log);
}

namespace {

nnet::TrainedNet load_or_train(const fs::path& path, const nnet::NetSpec& spec, const SliceDataset& data,
                               const nnet::TrainParams& tp, bool& trained) {
  trained = false;
  if (fs::exists(path)) {
    try {
      return nnet::load_weights(path, spec);
    } catch (const std::exception&) {
      // stale or damaged cache entry: retrain below
    }
  }
  trained = true;
  auto net = nnet::train(spec, data, tp);
  fs::create_directories(path.parent_path());
  nnet::save_weights(path, net);
  return net;
}

std::ofstream open_report(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(6);
  return out;
}

}  // namespace

ReportSummary cmd_report(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  WorkspaceLock lock(cfg.workspace, WorkspaceLock::Mode::Shared);
  if (!fs::exists(cfg.ledger_file())) throw std::runtime_error("no ledger at " + cfg.ledger_file().string());
  std::ifstream ledger_in(cfg.ledger_file());
  const auto ledger = Ledger::parse(ledger_in);
  const auto data = require_dataset(cfg);
  const auto& trials = ledger.trials();
  const auto best = best_trials(trials, cfg.k);
  CnnObjective objective(cfg.space, data, cfg.preset, cfg.search.caps);
  fs::create_directories(cfg.report_dir());
  ReportSummary summary;

  {
    auto out = open_report(cfg.report_dir() / "running_stats.tsv");
    const auto st = running_stats(trials);
    out << "iteration\tstage\tloss\terror_rate\tmin_loss\tmedian_loss\tmin_error\n";
    for (std::size_t i = 0; i < trials.size(); ++i)
      out << i + 1 << '\t' << to_string(trials[i].stage) << '\t' << trials[i].loss << '\t' << trials[i].error_rate
          << '\t' << st.min_loss[i] << '\t' << st.median_loss[i] << '\t' << st.min_error[i] << '\n';
  }

  std::vector<std::shared_ptr<const Classifier>> members;
  {
    auto out = open_report(cfg.report_dir() / "top_k.tsv");
    out << "rank\ttrial\tloss\terror_rate\tpoint\tparameters\tarchitecture\n";
    for (std::size_t r = 0; r < best.size(); ++r) {
      const auto& t = best[r];
      const auto spec = objective.spec_for(t.point);
      out << r + 1 << '\t' << t.id << '\t' << t.loss << '\t' << t.error_rate << '\t' << cfg.space.format(t.point)
          << '\t' << spec.parameter_count() << '\t' << spec.describe() << '\n';
      bool trained = false;
      auto net = load_or_train(model_cache_path(cfg, t.id, spec), spec, data,
                               objective.train_params_for(t.point, trial_context(cfg.search.seed, t.id).seed),
                               trained);
      summary.retrained += trained;
      if (trained) log << "retrained member trial " << t.id << '\n';
      members.push_back(std::make_shared<NetClassifier>(std::move(net)));
    }
  }
  summary.members = members.size();
  const Ensemble ensemble(std::move(members));

  // trial id 0 never occurs in the ledger, so its seed is free for the baseline
  const auto base_point = cfg.baseline_point();
  const auto base_spec = nnet::build(cfg.space, base_point, cfg.preset);
  bool base_trained = false;
  log << "baseline " << cfg.space.format(base_point) << '\n';
  auto base_net = load_or_train(cfg.models_dir() / ("baseline_" + model_cache_path(cfg, 0, base_spec).filename().string()),
                                base_spec, data,
                                nnet::train_params(nnet::hyper_params(cfg.space, base_point),
                                                   trial_context(cfg.search.seed, 0).seed),
                                base_trained);
  const Ensemble baseline({std::make_shared<NetClassifier>(std::move(base_net))});

  {
    auto out = open_report(cfg.report_dir() / "confusion.tsv");
    out << "model\tlevel\ttrue";
    for (int c = 0; c < data.num_classes; ++c) out << "\tn_" << class_letter(c);
    for (int c = 0; c < data.num_classes; ++c) out << "\tr_" << class_letter(c);
    out << "\terror_rate\n";
    for (const auto& [name, ens] : {std::pair<std::string, const Ensemble*>{"baseline", &baseline},
                                    std::pair<std::string, const Ensemble*>{"ensemble", &ensemble}}) {
      for (Level level : {Level::Slice, Level::Volume}) {
        const auto cm = confusion(*ens, data, Split::Test, level);
        write_confusion_tsv(out, name, cm);
        double& slot = name == "baseline" ? (level == Level::Slice ? summary.baseline_slice_error
                                                                    : summary.baseline_volume_error)
                                          : (level == Level::Slice ? summary.ensemble_slice_error
                                                                    : summary.ensemble_volume_error);
        slot = cm.error_rate();
      }
    }
  }

  {
    // one test volume per class, concatenated in class order
    std::vector<const Volume*> chosen;
    const auto test = data.volumes_in(Split::Test);
    for (int c = 0; c < data.num_classes; ++c) {
      auto it = std::find_if(test.begin(), test.end(), [c](const Volume* v) { return v->label == c; });
      if (it != test.end()) chosen.push_back(*it);
    }
    std::vector<Eigen::VectorXd> probs;
    std::vector<LocalizationRow> rows;
    for (const Volume* v : chosen)
      for (const auto& s : v->slices) {
        probs.push_back(predict_ensemble(ensemble, s));
        rows.push_back({rows.size(), v->id, v->label, probs.back(), std::nullopt, 0});
      }
    const auto decisions = localize_probs(probs, cfg.cutoff);
    const auto runs = decision_runs(decisions);
    for (std::size_t r = 0; r < runs.size(); ++r)
      for (std::size_t i = runs[r].first; i <= runs[r].last; ++i) {
        rows[i].decision = decisions[i];
        rows[i].run = r;
      }
    auto out = open_report(cfg.report_dir() / "localization.tsv");
    write_localization_tsv(out, rows);
  }

  log << "ensemble of " << summary.members << ": slice error " << summary.ensemble_slice_error << ", volume error "
      << summary.ensemble_volume_error << "; baseline: slice " << summary.baseline_slice_error << ", volume "
      << summary.baseline_volume_error << '\n';
  return summary;
}

}  // namespace hpo
