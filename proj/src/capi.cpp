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

#include "mimodet.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "mimodet/harness.hpp"
#include "mimodet/io.hpp"

struct md_experiment {
  mimodet::ExperimentSpec spec;
};

struct md_mlp {
  mimodet::NeuralDetector det;
};

struct md_sicnet {
  mimodet::SicNetParameters params;
};

namespace {

thread_local std::string g_last_error;

md_status to_status(mimodet::ErrorCode c) {
  switch (c) {
    case mimodet::ErrorCode::InvalidArgument: return MD_ERR_INVALID_ARGUMENT;
    case mimodet::ErrorCode::Config: return MD_ERR_CONFIG;
    case mimodet::ErrorCode::Numerical: return MD_ERR_NUMERICAL;
    case mimodet::ErrorCode::Io: return MD_ERR_IO;
    case mimodet::ErrorCode::Version: return MD_ERR_VERSION;
  }
  return MD_ERR_INTERNAL;
}

template <class F>
md_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return MD_OK;
  } catch (const mimodet::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw mimodet::InvalidArgument(what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

mimodet::Mat channel_from(int dr, int dt, const double* h) {
  require(dr > 0 && dt > 0, "antenna counts must be positive");
  require(h != nullptr, "channel buffer is null");
  return Eigen::Map<const RowMat>(h, 2 * dr, 2 * dt);
}

mimodet::Vec vector_from(const double* x, int n) {
  require(x != nullptr, "vector buffer is null");
  return Eigen::Map<const mimodet::Vec>(x, n);
}

void store(const mimodet::Vec& v, double* out) {
  require(out != nullptr, "output buffer is null");
  std::memcpy(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

const mimodet::RealConstellation& qpsk() {
  static const auto c = mimodet::make_constellation(mimodet::Modulation::Qpsk);
  return c;
}

void write_bundle(const mimodet::ResultsBundle& b, const char* out_dir, int* failures) {
  require(out_dir != nullptr, "output directory is null");
  mimodet::save_results(b, out_dir);
  if (failures) *failures = static_cast<int>(b.failures.size());
}

mimodet::TheoryBoundInputs bound_inputs(const md_bound_inputs* in) {
  require(in != nullptr, "bound inputs are null");
  mimodet::TheoryBoundInputs t;
  t.R = in->R;
  t.max_width = in->max_width;
  t.depth = in->depth;
  t.output_dim = in->output_dim;
  t.parameter_count = in->parameter_count;
  t.mu = in->mu;
  t.sigma_sq = in->sigma_sq;
  t.nu = in->nu;
  t.delta = in->delta;
  return t;
}

}  // namespace

extern "C" {

const char* md_version(void) { return "0.1.0"; }

const char* md_last_error(void) { return g_last_error.c_str(); }

void md_free_string(char* s) { std::free(s); }

md_status md_experiment_from_json(const char* json, md_experiment** out) {
  return guard([&] {
    require(json != nullptr && out != nullptr, "null argument");
    *out = new md_experiment{mimodet::parse_experiment(json)};
  });
}

md_status md_experiment_from_file(const char* path, md_experiment** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new md_experiment{mimodet::load_experiment(path)};
  });
}

md_status md_experiment_set_seed(md_experiment* e, uint64_t seed) {
  return guard([&] {
    require(e != nullptr, "null experiment");
    e->spec.seed = seed;
  });
}

md_status md_experiment_to_json(const md_experiment* e, char** out) {
  return guard([&] {
    require(e != nullptr && out != nullptr, "null argument");
    *out = dup_string(mimodet::experiment_to_json(e->spec));
  });
}

md_status md_experiment_train(const md_experiment* e, const char* out_dir, int* failures) {
  return guard([&] {
    require(e != nullptr, "null experiment");
    write_bundle(mimodet::train_experiment(e->spec), out_dir, failures);
  });
}

md_status md_experiment_evaluate(const md_experiment* e, const char* out_dir, int* failures) {
  return guard([&] {
    require(e != nullptr, "null experiment");
    write_bundle(mimodet::run_experiment(e->spec), out_dir, failures);
  });
}

md_status md_experiment_sweep(const md_experiment* e, const char* out_dir, int* failures) {
  return guard([&] {
    require(e != nullptr, "null experiment");
    write_bundle(mimodet::sweep(e->spec), out_dir, failures);
  });
}

md_status md_experiment_bounds(const md_experiment* e, char** json_out) {
  return guard([&] {
    require(e != nullptr && json_out != nullptr, "null argument");
    *json_out = dup_string(mimodet::bounds_report(e->spec));
  });
}

void md_experiment_free(md_experiment* e) { delete e; }

md_status md_report(const char* results_csv_path, char** text_out) {
  return guard([&] {
    require(results_csv_path != nullptr && text_out != nullptr, "null argument");
    *text_out = dup_string(mimodet::summarize_results(mimodet::read_text_file(results_csv_path)));
  });
}

md_status md_map_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq, double* s_out) {
  return guard([&] {
    const auto H = channel_from(dr, dt, h);
    const auto r = mimodet::map_detect(H, vector_from(x, 2 * dr), mimodet::NoiseSpec(sigma_n_sq), qpsk(),
                                       mimodet::ObservationModel::linear());
    store(r.hard_symbols, s_out);
  });
}

md_status md_zf_detect(int dr, int dt, const double* h, const double* x, double* s_out) {
  return guard([&] {
    const auto H = channel_from(dr, dt, h);
    store(mimodet::hard_decide(mimodet::zf_detect(H, vector_from(x, 2 * dr)), qpsk()), s_out);
  });
}

md_status md_amp_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq, int iterations,
                        double* s_out) {
  return guard([&] {
    const auto H = channel_from(dr, dt, h);
    const auto r = mimodet::amp_detect(H, vector_from(x, 2 * dr), mimodet::NoiseSpec(sigma_n_sq), qpsk(),
                                       iterations);
    store(r.hard_symbols, s_out);
  });
}

md_status md_sic_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq, int iterations,
                        double* s_out) {
  return guard([&] {
    const auto H = channel_from(dr, dt, h);
    const auto r = mimodet::sic_detect(H, vector_from(x, 2 * dr), mimodet::NoiseSpec(sigma_n_sq), qpsk(),
                                       iterations);
    store(r.hard_symbols, s_out);
  });
}

md_status md_mlp_load(const char* path, md_mlp** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new md_mlp{mimodet::load_model(path)};
  });
}

md_status md_mlp_save(const md_mlp* m, const char* path) {
  return guard([&] {
    require(m != nullptr && path != nullptr, "null argument");
    mimodet::save_model(m->det, path);
  });
}

size_t md_mlp_output_dim(const md_mlp* m) {
  return m ? static_cast<size_t>(m->det.params().shape.output_dim()) : 0;
}

int md_mlp_uses_csi(const md_mlp* m) { return m && m->det.uses_csi() ? 1 : 0; }

md_status md_mlp_probabilities(const md_mlp* m, const double* x, const double* h, double* out, size_t out_len) {
  return guard([&] {
    require(m != nullptr, "null model");
    require(out_len == md_mlp_output_dim(m), "output length does not match the model");
    const int dr = m->det.dr(), dt = m->det.dt();
    mimodet::Mat H;
    if (m->det.uses_csi()) H = channel_from(dr, dt, h);
    store(m->det.probabilities(vector_from(x, 2 * dr), m->det.uses_csi() ? &H : nullptr), out);
  });
}

md_status md_mlp_detect(const md_mlp* m, const double* x, const double* h, double* s_out) {
  return guard([&] {
    require(m != nullptr, "null model");
    const int dr = m->det.dr(), dt = m->det.dt();
    mimodet::Mat H;
    if (m->det.uses_csi()) H = channel_from(dr, dt, h);
    store(m->det.detect(vector_from(x, 2 * dr), m->det.uses_csi() ? &H : nullptr).hard_symbols, s_out);
  });
}

void md_mlp_free(md_mlp* m) { delete m; }

md_status md_sicnet_load(const char* path, md_sicnet** out) {
  return guard([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new md_sicnet{mimodet::load_sicnet(path)};
  });
}

int md_sicnet_layers(const md_sicnet* n) { return n ? n->params.layers() : 0; }

md_status md_sicnet_detect(const md_sicnet* n, int dr, int dt, const double* h, const double* x,
                           double sigma_n_sq, double* s_out) {
  return guard([&] {
    require(n != nullptr, "null model");
    const auto H = channel_from(dr, dt, h);
    const mimodet::SicNet net(qpsk(), dt);
    store(net.detect(n->params, H, vector_from(x, 2 * dr), mimodet::NoiseSpec(sigma_n_sq)).hard_symbols, s_out);
  });
}

void md_sicnet_free(md_sicnet* n) { delete n; }

md_status md_covering_bound(const md_bound_inputs* in, double eps, double* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    *out = mimodet::covering_bound(bound_inputs(in), eps);
  });
}

md_status md_generalization_tail_bound(const md_bound_inputs* in, double n, double eps, md_tail_bound* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    const auto t = mimodet::generalization_tail_bound(bound_inputs(in), n, eps);
    out->raw = t.raw;
    out->clipped = t.clipped;
    out->preconditions_met = t.preconditions_met ? 1 : 0;
    out->min_samples_nu = t.min_samples_nu;
    out->min_samples_cover = t.min_samples_cover;
  });
}

md_status md_modeldriven_tail_bound(double ln_cu, double n, double eps, double delta_u, double p_omega,
                                    double* out) {
  return guard([&] {
    require(out != nullptr, "null output");
    *out = mimodet::modeldriven_tail_bound(ln_cu, n, eps, delta_u, p_omega);
  });
}

}  // extern "C"
