// Copyright 2026 The ppc Authors
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

/* C interface to the point-cloud pyramid classifier.
 *
 * Every function returning ppc_status reports failures through the status
 * value and leaves a human-readable message in ppc_last_error(), which is
 * per thread and valid until the next failing call on that thread. Strings
 * handed out through char** parameters are owned by the caller and must be
 * released with ppc_string_free(). Handles are opaque and released with
 * their matching _free function; passing NULL to a _free function is a no-op.
 */
#ifndef PPC_PPC_H
#define PPC_PPC_H

#include <stddef.h>
#include <stdint.h>

#if defined(PPC_BUILDING_LIBRARY)
#define PPC_API __attribute__((visibility("default")))
#else
#define PPC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ppc_status {
  PPC_OK = 0,
  PPC_ERR_USAGE = 1,   /* bad arguments or configuration */
  PPC_ERR_DATA = 2,    /* unreadable or invalid input data */
  PPC_ERR_NUMERIC = 3, /* NaN or Inf during training or inference */
  PPC_ERR_INTERNAL = 4
} ppc_status;

typedef struct ppc_config ppc_config;
typedef struct ppc_model ppc_model;

/* Receives one line of progress output (without the newline). */
typedef void (*ppc_log_fn)(const char* line, void* user);

PPC_API const char* ppc_version(void);
PPC_API const char* ppc_last_error(void);
PPC_API void ppc_string_free(char* s);

/* NULL restores the default (standard output). */
PPC_API void ppc_set_log(ppc_log_fn fn, void* user);
/* 0 or 1 = single-threaded. Results do not depend on this setting. */
PPC_API void ppc_set_threads(int n);

/* Configuration. */
PPC_API ppc_status ppc_config_default(ppc_config** out);
PPC_API ppc_status ppc_config_load(const char* path, ppc_config** out);
PPC_API ppc_status ppc_config_parse(const char* json, ppc_config** out);
PPC_API ppc_status ppc_config_set_seed(ppc_config* cfg, uint64_t seed);
PPC_API ppc_status ppc_config_set_threads(ppc_config* cfg, int threads);
PPC_API ppc_status ppc_config_set_output_dir(ppc_config* cfg, const char* dir);
/* Canonical JSON with every default filled in. */
PPC_API ppc_status ppc_config_to_json(const ppc_config* cfg, char** out);
PPC_API void ppc_config_free(ppc_config* cfg);

/* Commands. Outputs go to the config's output directory unless noted. */
PPC_API ppc_status ppc_sample(const char* mesh_dir, const char* out_dir, uint64_t n_points, uint64_t seed,
                              int normalize_scale);
/* resume_checkpoint may be NULL. */
PPC_API ppc_status ppc_train(const ppc_config* cfg, const char* resume_checkpoint);
/* split is "test" or "train"; report_json may be NULL. */
PPC_API ppc_status ppc_eval(const ppc_config* cfg, const char* checkpoint, const char* split, char** report_json);
PPC_API ppc_status ppc_ablate(const ppc_config* cfg);
PPC_API ppc_status ppc_sweep(const ppc_config* cfg);
/* verdict receives "front", "back" or "abstain"; dump_neighbors may be NULL. */
PPC_API ppc_status ppc_orient(const char* checkpoint, const char* mesh, uint64_t seed, const char* dump_neighbors,
                              char** verdict);
PPC_API ppc_status ppc_synth(const ppc_config* cfg, const char* out_dir);
PPC_API ppc_status ppc_plot(const char* report, const char* out_dir);

/* Models. */
PPC_API ppc_status ppc_model_init(const ppc_config* cfg, ppc_model** out);
PPC_API ppc_status ppc_model_load(const char* path, ppc_model** out);
PPC_API ppc_status ppc_model_save(const ppc_model* model, const char* path);
PPC_API int ppc_model_num_classes(const ppc_model* model);
PPC_API int ppc_model_input_points(const ppc_model* model);
/* points: n rows of x y z nx ny nz (row-major doubles), n >= input points.
 * Writes num_classes Eval-mode logits. */
PPC_API ppc_status ppc_model_predict(const ppc_model* model, const double* points, size_t n, uint64_t seed,
                                     double* logits, size_t logits_len);
PPC_API void ppc_model_free(ppc_model* model);

#ifdef __cplusplus
}
#endif

#endif /* PPC_PPC_H */
