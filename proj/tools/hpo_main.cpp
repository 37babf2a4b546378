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
// hpo: dataset generation, hyper-parameter search and reports.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "hpo/workspace.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> workspace;
  std::optional<std::size_t> k;
  std::optional<std::size_t> random_iters;
  std::optional<std::size_t> adaptive_iters;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "search seed");
  cmd->add_option("--workspace", f.workspace, "workspace directory");
  cmd->add_option("--k", f.k, "ensemble size")->check(CLI::PositiveNumber);
  cmd->add_option("--random-iters", f.random_iters, "random-search trials");
  cmd->add_option("--adaptive-iters", f.adaptive_iters, "GP-guided trials");
}

// `resume` and `report` default to the configuration saved by `search`.
hpo::RunConfig resolve(const Flags& f, bool prefer_saved) {
  hpo::RunConfig cfg;
  if (f.config) {
    cfg = hpo::load_run_config(*f.config);
  } else if (prefer_saved) {
    hpo::RunConfig probe;
    if (f.workspace) probe.workspace = *f.workspace;
    if (std::filesystem::exists(probe.config_file())) cfg = hpo::load_run_config(probe.config_file());
  }
  if (f.workspace) cfg.workspace = *f.workspace;
  if (f.seed) cfg.search.seed = *f.seed;
  if (f.k) cfg.k = *f.k;
  if (f.random_iters) cfg.search.random_iters = *f.random_iters;
  if (f.adaptive_iters) cfg.search.adaptive_iters = *f.adaptive_iters;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process hyper-parameter search for slice classifiers"};
  app.require_subcommand(1);
  Flags gen_f, search_f, resume_f, report_f;
  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  auto* search = app.add_subcommand("search", "run random then adaptive search");
  auto* resume = app.add_subcommand("resume", "continue an interrupted search");
  auto* report = app.add_subcommand("report", "write ensemble and search reports");
  add_flags(gen, gen_f);
  add_flags(search, search_f);
  add_flags(resume, resume_f);
  add_flags(report, report_f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      hpo::cmd_gen(resolve(gen_f, false), std::cout);
    } else if (search->parsed()) {
      const auto ledger = hpo::cmd_search(resolve(search_f, false), std::cout);
      std::cout << ledger.size() << " trials in ledger\n";
    } else if (resume->parsed()) {
      const auto ledger = hpo::cmd_resume(resolve(resume_f, true), std::cout);
      std::cout << ledger.size() << " trials in ledger\n";
    } else if (report->parsed()) {
      hpo::cmd_report(resolve(report_f, true), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
