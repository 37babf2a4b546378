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

// Run configuration, workspace layout and the four commands behind the CLI.
//
// Layout under the workspace directory:
//   config.json          effective configuration, written by `search`
//   dataset/             generated corpus (manifest.tsv + slices/)
//   ledger.tsv           trial ledger
//   models/              best-k weight cache, trial_<id>_<spechash>.bin
//   report/              running_stats.tsv, top_k.tsv, confusion.tsv,
//                        localization.tsv
//   .lock                advisory lock file

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hpo/datagen.hpp"
#include "hpo/nnet.hpp"
#include "hpo/optimizer.hpp"
#include "hpo/space.hpp"

namespace hpo {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::filesystem::path workspace = "workspace";
  std::optional<std::filesystem::path> dataset_dir;  // default: workspace/dataset
  std::optional<std::filesystem::path> ledger_path;  // default: workspace/ledger.tsv
  ParamSpace space = default_space();
  nnet::Preset preset = nnet::Preset::Desk;
  DatasetConfig dataset;
  SearchConfig search;
  std::size_t k = 10;
  double cutoff = 0.7;
  /// Reference configuration for the report; default preset_baseline().
  std::optional<ParamPoint> baseline;

  std::filesystem::path dataset_path() const { return dataset_dir.value_or(workspace / "dataset"); }
  std::filesystem::path ledger_file() const { return ledger_path.value_or(workspace / "ledger.tsv"); }
  std::filesystem::path models_dir() const { return workspace / "models"; }
  std::filesystem::path report_dir() const { return workspace / "report"; }
  std::filesystem::path config_file() const { return workspace / "config.json"; }

  void validate() const;
  ParamPoint baseline_point() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Exclusive (writers) or shared (reports) advisory lock on workspace/.lock.
/// Acquisition never blocks: a held lock raises WorkspaceBusy.
class WorkspaceBusy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WorkspaceLock {
 public:
  enum class Mode { Exclusive, Shared };
  WorkspaceLock(const std::filesystem::path& workspace, Mode mode);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  int fd_ = -1;
};

/// Path of the cached weights for a trial.
std::filesystem::path model_cache_path(const RunConfig& cfg, std::uint64_t trial_id, const nnet::NetSpec& spec);

/// Baseline point adapted to the preset: the block count is lowered until the
/// pools leave at least a 1x1 map.
ParamPoint preset_baseline(const ParamSpace& space, nnet::Preset preset);

/// Progress lines go to `log` (one per trial / step); pass a null stream to
/// silence them.
void cmd_gen(const RunConfig& cfg, std::ostream& log);
Ledger cmd_search(const RunConfig& cfg, std::ostream& log);
Ledger cmd_resume(const RunConfig& cfg, std::ostream& log);

struct ReportSummary {
  double baseline_slice_error = 0;
  double baseline_volume_error = 0;
  double ensemble_slice_error = 0;
  double ensemble_volume_error = 0;
  std::size_t members = 0;
  std::size_t retrained = 0;  // members not found in the cache
};
ReportSummary cmd_report(const RunConfig& cfg, std::ostream& log);

}  // namespace hpo
