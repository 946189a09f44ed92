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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mimodet.h"
#include "mimodet/channels.hpp"
#include "mimodet/classical.hpp"
#include "mimodet/io.hpp"
#include "mimodet/metrics.hpp"
#include "mimodet/neural.hpp"
#include "mimodet/unfolded.hpp"

using namespace mimodet;

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "name": "capi", "seed": 4,
  "scenario": {"regime": "time-invariant", "dr": 2, "dt": 2},
  "snr_db": [8],
  "detectors": ["map", "zf", "dl"],
  "train_size": 2000,
  "test": {"min_vectors": 1000, "max_vectors": 5000, "min_errors": 20},
  "network": {"hidden_layers": 1, "width": 10, "batch_size": 100, "iterations": 50}
})";

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mimodet_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MIMODET_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("C API status codes and errors") {
  CHECK(std::string(md_version()).size() > 0);
  md_experiment* e = nullptr;
  CHECK(md_experiment_from_json("{\"bogus\": 1}", &e) == MD_ERR_CONFIG);
  CHECK(std::string(md_last_error()).find("bogus") != std::string::npos);
  CHECK(md_experiment_from_json(nullptr, &e) == MD_ERR_INVALID_ARGUMENT);
  CHECK(md_experiment_from_file("/nonexistent.json", &e) != MD_OK);
  REQUIRE(md_experiment_from_json(kConfig, &e) == MD_OK);
  CHECK(std::string(md_last_error()).empty());
  CHECK(md_experiment_set_seed(e, 9) == MD_OK);
  char* text = nullptr;
  REQUIRE(md_experiment_to_json(e, &text) == MD_OK);
  CHECK(nlohmann::json::parse(text).at("seed") == 9);
  md_free_string(text);

  const auto dir = scratch("run");
  int failures = -1;
  REQUIRE(md_experiment_evaluate(e, dir.c_str(), &failures) == MD_OK);
  CHECK(failures == 0);
  const std::string csv = read_text_file((dir / "results.csv").string());
  CHECK(csv.rfind("experiment,detector,axis_name,axis_value,snr_db,ber,bit_count,error_count,ci_halfwidth,seed\n",
                  0) == 0);
  char* report = nullptr;
  REQUIRE(md_report((dir / "results.csv").c_str(), &report) == MD_OK);
  CHECK(std::string(report).find("map") != std::string::npos);
  md_free_string(report);
  char* bounds = nullptr;
  REQUIRE(md_experiment_bounds(e, &bounds) == MD_OK);
  CHECK(std::string(bounds).find("covering") != std::string::npos);
  md_free_string(bounds);

  md_mlp* m = nullptr;
  REQUIRE(md_mlp_load((dir / "models" / "dl_snr8.json").c_str(), &m) == MD_OK);
  CHECK(md_mlp_output_dim(m) == 16);
  CHECK(md_mlp_uses_csi(m) == 0);
  const double x[4] = {0.1, -0.2, 0.3, 0.4};
  double probs[16];
  REQUIRE(md_mlp_probabilities(m, x, nullptr, probs, 16) == MD_OK);
  double sum = 0.0;
  for (double p : probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(md_mlp_probabilities(m, x, nullptr, probs, 15) == MD_ERR_INVALID_ARGUMENT);
  double s[4];
  CHECK(md_mlp_detect(m, x, nullptr, s) == MD_OK);
  CHECK(md_mlp_save(m, (dir / "copy.json").c_str()) == MD_OK);
  md_mlp_free(m);
  CHECK(read_text_file((dir / "copy.json").string()) == read_text_file((dir / "models" / "dl_snr8.json").string()));
  CHECK(md_mlp_load((dir / "missing.json").c_str(), &m) == MD_ERR_IO);

  write_file(dir / "future.json", R"({"format":"mimodet-sicnet","format_version":99,"Q":1,"tau":[1],"xi":[0]})");
  md_sicnet* n = nullptr;
  CHECK(md_sicnet_load((dir / "future.json").c_str(), &n) == MD_ERR_VERSION);
  md_experiment_free(e);
  fs::remove_all(dir);
}

TEST_CASE("C API detectors match the C++ core") {
  const auto c = make_constellation(Modulation::Qpsk);
  const ChannelSource src(ChannelModel::Gaussian, Regime::TimeVarying, 2, 2, 0.0, 1);
  const NoiseSpec noise(0.3);
  const auto dir = scratch("sicnet");
  SicNetParameters sp;
  sp.tau = {1.0, 0.9};
  sp.xi = {0.0, 0.2};
  save_sicnet(sp, (dir / "s.json").string());
  md_sicnet* net = nullptr;
  REQUIRE(md_sicnet_load((dir / "s.json").c_str(), &net) == MD_OK);
  CHECK(md_sicnet_layers(net) == 2);
  const SicNet ref(c, 2);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Mat h = src.next(rng).H();
    const Vec x = h * draw_symbols(c, 2, rng) + draw_noise(noise, 4, rng);
    const RowMat hr = h;
    double out[4];
    REQUIRE(md_map_detect(2, 2, hr.data(), x.data(), 0.3, out) == MD_OK);
    CHECK(Eigen::Map<Vec>(out, 4) == map_detect(h, x, noise, c, ObservationModel::linear()).hard_symbols);
    REQUIRE(md_zf_detect(2, 2, hr.data(), x.data(), out) == MD_OK);
    CHECK(Eigen::Map<Vec>(out, 4) == hard_decide(zf_detect(h, x), c));
    REQUIRE(md_amp_detect(2, 2, hr.data(), x.data(), 0.3, 10, out) == MD_OK);
    CHECK(Eigen::Map<Vec>(out, 4) == amp_detect(h, x, noise, c, 10).hard_symbols);
    REQUIRE(md_sic_detect(2, 2, hr.data(), x.data(), 0.3, 5, out) == MD_OK);
    CHECK(Eigen::Map<Vec>(out, 4) == sic_detect(h, x, noise, c, 5).hard_symbols);
    REQUIRE(md_sicnet_detect(net, 2, 2, hr.data(), x.data(), 0.3, out) == MD_OK);
    CHECK(Eigen::Map<Vec>(out, 4) == ref.detect(sp, h, x, noise).hard_symbols);
  }
  md_sicnet_free(net);
  const double zero[16] = {};
  const double x0[4] = {};
  double out[4];
  CHECK(md_zf_detect(2, 2, zero, x0, out) == MD_ERR_NUMERICAL);
  CHECK(md_map_detect(2, 2, zero, x0, -1.0, out) == MD_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);
}

TEST_CASE("C API bound calculators") {
  md_bound_inputs in{2.0, 4.0, 1, 16.0, 10.0, 1.0, 2.0, 10.0, 3.0};
  double v = 0.0;
  REQUIRE(md_covering_bound(&in, 0.1, &v) == MD_OK);
  TheoryBoundInputs t;
  t.R = 2.0;
  t.max_width = 4.0;
  t.depth = 1;
  t.output_dim = 16.0;
  t.parameter_count = 10.0;
  t.delta = 3.0;
  CHECK(v == covering_bound(t, 0.1));
  md_tail_bound tb{};
  REQUIRE(md_generalization_tail_bound(&in, 1e6, 0.5, &tb) == MD_OK);
  CHECK(tb.clipped <= 1.0);
  CHECK(md_generalization_tail_bound(&in, 1e6, -1.0, &tb) == MD_ERR_INVALID_ARGUMENT);
  REQUIRE(md_modeldriven_tail_bound(0.0, 1.0, 1.0, 1.0, 0.5, &v) == MD_OK);
  CHECK(v == doctest::Approx(8.0 * std::exp(-1.0 / 512.0) + 0.5));
}

TEST_CASE("CLI exit codes") {
  const auto dir = scratch("cli");
  write_file(dir / "ok.json", kConfig);
  write_file(dir / "bad.json", R"({"snr_db": []})");
  write_file(dir / "broken.json", "{");
  // an exploding step size drives the training loss to a non-finite value
  auto j = nlohmann::json::parse(kConfig);
  j["network"]["step_size"] = 1e300;
  j["network"]["bound"] = 1e300;
  write_file(dir / "nan.json", j.dump());
  const std::string out = " --out " + (dir / "out").string();

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("evaluate --config " + (dir / "ok.json").string() + out) == 0);
  CHECK(fs::exists(dir / "out" / "results.csv"));
  CHECK(run_cli("report" + out) == 0);
  CHECK(fs::exists(dir / "out" / "report.txt"));
  CHECK(run_cli("bounds --config " + (dir / "ok.json").string() + out) == 0);
  CHECK(fs::exists(dir / "out" / "bounds.json"));
  CHECK(run_cli("train --seed 3 --config " + (dir / "ok.json").string() + out) == 0);
  CHECK(run_cli("evaluate --config " + (dir / "bad.json").string() + out) == 2);
  CHECK(run_cli("evaluate --config " + (dir / "broken.json").string() + out) == 2);
  CHECK(run_cli("evaluate --config " + (dir / "missing.json").string() + out) == 2);
  CHECK(run_cli("evaluate --seed notanumber --config " + (dir / "ok.json").string() + out) == 2);
  CHECK(run_cli("nonsense") == 2);
  CHECK(run_cli("evaluate --config " + (dir / "nan.json").string() + out) == 3);
  fs::remove_all(dir);
}
