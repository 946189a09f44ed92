/* Copyright 2026 The mimodet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the mimodet detection library.
 *
 * All functions return an md_status. On failure a description is available
 * from md_last_error() on the calling thread until the next call. Matrices
 * are row-major real-valued arrays: the channel H is (2 dr) x (2 dt), the
 * observation x has 2 dr entries and symbol outputs have 2 dt entries.
 * Strings returned through char** are owned by the caller and released with
 * md_free_string().
 */

#ifndef MIMODET_H_
#define MIMODET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MIMODET_BUILDING)
#define MD_API __attribute__((visibility("default")))
#else
#define MD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum md_status {
  MD_OK = 0,
  MD_ERR_INVALID_ARGUMENT = 1,
  MD_ERR_CONFIG = 2,
  MD_ERR_NUMERICAL = 3,
  MD_ERR_IO = 4,
  MD_ERR_VERSION = 5,
  MD_ERR_INTERNAL = 6
} md_status;

typedef struct md_experiment md_experiment;
typedef struct md_mlp md_mlp;
typedef struct md_sicnet md_sicnet;

MD_API const char* md_version(void);
MD_API const char* md_last_error(void);
MD_API void md_free_string(char* s);

/* Experiments. `failures` (may be NULL) receives the number of detector
 * failures that were recorded without aborting the run. */
MD_API md_status md_experiment_from_json(const char* json, md_experiment** out);
MD_API md_status md_experiment_from_file(const char* path, md_experiment** out);
MD_API md_status md_experiment_set_seed(md_experiment* e, uint64_t seed);
MD_API md_status md_experiment_to_json(const md_experiment* e, char** out);
MD_API md_status md_experiment_train(const md_experiment* e, const char* out_dir, int* failures);
MD_API md_status md_experiment_evaluate(const md_experiment* e, const char* out_dir, int* failures);
MD_API md_status md_experiment_sweep(const md_experiment* e, const char* out_dir, int* failures);
MD_API md_status md_experiment_bounds(const md_experiment* e, char** json_out);
MD_API void md_experiment_free(md_experiment* e);

/* Summary table of a results.csv file. */
MD_API md_status md_report(const char* results_csv_path, char** text_out);

/* Classical QPSK detectors on raw buffers. sigma_n_sq is the complex noise
 * variance. */
MD_API md_status md_map_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq,
                               double* s_out);
MD_API md_status md_zf_detect(int dr, int dt, const double* h, const double* x, double* s_out);
MD_API md_status md_amp_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq,
                               int iterations, double* s_out);
MD_API md_status md_sic_detect(int dr, int dt, const double* h, const double* x, double sigma_n_sq,
                               int iterations, double* s_out);

/* Neural detector snapshots. h may be NULL for networks without CSI input. */
MD_API md_status md_mlp_load(const char* path, md_mlp** out);
MD_API md_status md_mlp_save(const md_mlp* m, const char* path);
MD_API size_t md_mlp_output_dim(const md_mlp* m);
MD_API int md_mlp_uses_csi(const md_mlp* m);
MD_API md_status md_mlp_probabilities(const md_mlp* m, const double* x, const double* h, double* out,
                                      size_t out_len);
MD_API md_status md_mlp_detect(const md_mlp* m, const double* x, const double* h, double* s_out);
MD_API void md_mlp_free(md_mlp* m);

/* SIC-Net snapshots. */
MD_API md_status md_sicnet_load(const char* path, md_sicnet** out);
MD_API int md_sicnet_layers(const md_sicnet* n);
MD_API md_status md_sicnet_detect(const md_sicnet* n, int dr, int dt, const double* h, const double* x,
                                  double sigma_n_sq, double* s_out);
MD_API void md_sicnet_free(md_sicnet* n);

/* Bound calculators. */
typedef struct md_bound_inputs {
  double R;
  double max_width;
  int depth;
  double output_dim;
  double parameter_count;
  double mu;
  double sigma_sq;
  double nu;
  double delta;
} md_bound_inputs;

typedef struct md_tail_bound {
  double raw;
  double clipped;
  int preconditions_met;
  double min_samples_nu;
  double min_samples_cover;
} md_tail_bound;

MD_API md_status md_covering_bound(const md_bound_inputs* in, double eps, double* out);
MD_API md_status md_generalization_tail_bound(const md_bound_inputs* in, double n, double eps,
                                              md_tail_bound* out);
MD_API md_status md_modeldriven_tail_bound(double ln_cu, double n, double eps, double delta_u,
                                           double p_omega, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MIMODET_H_ */
