// Copyright 2026 The mimodet Authors
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

// Command-line front end over the C API.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 1 otherwise.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mimodet.h"

namespace {

int exit_code(md_status s) {
  switch (s) {
    case MD_OK: return 0;
    case MD_ERR_CONFIG: return 2;
    case MD_ERR_NUMERICAL: return 3;
    default: return 1;
  }
}

int fail(md_status s) {
  std::cerr << "mimodet: " << md_last_error() << '\n';
  return exit_code(s);
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

int with_experiment(const Options& o, int (*body)(md_experiment*, const Options&)) {
  md_experiment* e = nullptr;
  if (md_status s = md_experiment_from_file(o.config.c_str(), &e); s != MD_OK) return fail(s);
  if (o.seed) md_experiment_set_seed(e, *o.seed);
  const int rc = body(e, o);
  md_experiment_free(e);
  return rc;
}

int finish_run(md_status s, int failures, const Options& o) {
  if (s != MD_OK) return fail(s);
  std::cout << "results written to " << o.out << '\n';
  if (failures > 0) {
    std::cerr << "mimodet: " << failures << " detector failure(s); see " << o.out << "/log.txt\n";
    return 3;
  }
  return 0;
}

int run_train(md_experiment* e, const Options& o) {
  int failures = 0;
  const md_status s = md_experiment_train(e, o.out.c_str(), &failures);
  return finish_run(s, failures, o);
}

int run_evaluate(md_experiment* e, const Options& o) {
  int failures = 0;
  const md_status s = md_experiment_evaluate(e, o.out.c_str(), &failures);
  return finish_run(s, failures, o);
}

int run_sweep(md_experiment* e, const Options& o) {
  int failures = 0;
  const md_status s = md_experiment_sweep(e, o.out.c_str(), &failures);
  return finish_run(s, failures, o);
}

int run_bounds(md_experiment* e, const Options& o) {
  char* text = nullptr;
  if (md_status s = md_experiment_bounds(e, &text); s != MD_OK) return fail(s);
  std::filesystem::create_directories(o.out);
  std::ofstream(std::filesystem::path(o.out) / "bounds.json") << text;
  std::cout << text;
  md_free_string(text);
  return 0;
}

int run_report(const Options& o) {
  const auto csv = (std::filesystem::path(o.out) / "results.csv").string();
  char* text = nullptr;
  if (md_status s = md_report(csv.c_str(), &text); s != MD_OK) return fail(s);
  std::ofstream(std::filesystem::path(o.out) / "report.txt") << text;
  std::cout << text;
  md_free_string(text);
  return 0;
}

void add_common(CLI::App* sub, Options& o, bool need_config) {
  auto* c = sub->add_option("--config", o.config, "Experiment config (JSON)");
  if (need_config) c->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Master seed override");
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mimodet: MIMO detection experiments"};
  app.require_subcommand(1);
  Options o;
  auto* train = app.add_subcommand("train", "Train learned detectors and save snapshots");
  auto* evaluate = app.add_subcommand("evaluate", "Run the SNR experiment and write BER curves");
  auto* sweep = app.add_subcommand("sweep", "Sweep network width or training-set size");
  auto* bounds = app.add_subcommand("bounds", "Evaluate covering-number and tail bounds");
  auto* report = app.add_subcommand("report", "Summarize results.csv in the output directory");
  for (auto* s : {train, evaluate, sweep, bounds}) add_common(s, o, true);
  add_common(report, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*train) return with_experiment(o, run_train);
  if (*evaluate) return with_experiment(o, run_evaluate);
  if (*sweep) return with_experiment(o, run_sweep);
  if (*bounds) return with_experiment(o, run_bounds);
  return run_report(o);
}
