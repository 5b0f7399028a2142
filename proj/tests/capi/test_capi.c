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

/* Exercises the shared library through the C header alone. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "ppc/ppc.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static int lines = 0;
static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

static char* read_text(const char* path) {
  FILE* f = fopen(path, "rb");
  if (!f) return NULL;
  fseek(f, 0, SEEK_END);
  long n = ftell(f);
  fseek(f, 0, SEEK_SET);
  char* buf = malloc((size_t)n + 1);
  size_t got = fread(buf, 1, (size_t)n, f);
  buf[got] = '\0';
  fclose(f);
  return buf;
}

/* A random cloud with unit normals, deterministic per call. */
static void fill_cloud(double* pts, size_t n, unsigned seed) {
  srand(seed);
  for (size_t i = 0; i < n; ++i) {
    double* p = pts + 6 * i;
    for (int j = 0; j < 3; ++j) p[j] = (double)rand() / RAND_MAX - 0.5;
    double nx = (double)rand() / RAND_MAX - 0.5, ny = (double)rand() / RAND_MAX - 0.5, nz = 1.0;
    double len = sqrt(nx * nx + ny * ny + nz * nz);
    p[3] = nx / len;
    p[4] = ny / len;
    p[5] = nz / len;
  }
}

int main(int argc, char** argv) {
  if (argc < 3) {
    fprintf(stderr, "usage: test_capi <tiny config> <scratch dir>\n");
    return 2;
  }
  const char* config_path = argv[1];
  char out_dir[4096], ckpt[4200], copy[4200];
  snprintf(out_dir, sizeof out_dir, "%s/run", argv[2]);
  snprintf(ckpt, sizeof ckpt, "%s/checkpoint.ppck", out_dir);
  snprintf(copy, sizeof copy, "%s/copy.ppck", argv[2]);

  EXPECT(ppc_version() != NULL && strlen(ppc_version()) > 0);

  /* Errors leave a message and a typed status. */
  ppc_config* cfg = NULL;
  EXPECT(ppc_config_parse("{\"sed\": 1}", &cfg) == PPC_ERR_USAGE);
  EXPECT(cfg == NULL);
  EXPECT(strstr(ppc_last_error(), "sed") != NULL);
  EXPECT(ppc_config_parse(NULL, &cfg) == PPC_ERR_USAGE);
  EXPECT(ppc_config_load("/nonexistent.json", &cfg) != PPC_OK);
  EXPECT(ppc_config_set_seed(NULL, 1) == PPC_ERR_USAGE);
  ppc_config_free(NULL);
  ppc_model_free(NULL);
  ppc_string_free(NULL);

  /* Defaults echo the standard pyramid. */
  EXPECT(ppc_config_default(&cfg) == PPC_OK);
  char* text = NULL;
  EXPECT(ppc_config_to_json(cfg, &text) == PPC_OK);
  EXPECT(text && strstr(text, "\"input_points\": 32768") != NULL);
  ppc_string_free(text);
  ppc_config_free(cfg);

  EXPECT(ppc_config_load(config_path, &cfg) == PPC_OK);
  EXPECT(ppc_config_set_output_dir(cfg, out_dir) == PPC_OK);
  EXPECT(ppc_config_set_threads(cfg, -1) == PPC_ERR_USAGE);

  /* Train through the log sink. */
  ppc_set_log(count_lines, &lines);
  EXPECT(ppc_train(cfg, NULL) == PPC_OK);
  EXPECT(lines >= 3);
  char* report = NULL;
  EXPECT(ppc_eval(cfg, ckpt, "test", &report) == PPC_OK);
  EXPECT(report && strstr(report, "\"macro_f1\"") != NULL);
  ppc_string_free(report);
  EXPECT(ppc_eval(cfg, ckpt, "validation", NULL) == PPC_ERR_USAGE);
  ppc_set_log(NULL, NULL);

  /* Models: predict, save, reload, predict again. */
  ppc_model* model = NULL;
  EXPECT(ppc_model_load(ckpt, &model) == PPC_OK);
  EXPECT(ppc_model_num_classes(model) == 4);
  EXPECT(ppc_model_input_points(model) == 128);
  size_t n = 200;
  double* pts = malloc(sizeof(double) * 6 * n);
  fill_cloud(pts, n, 7);
  double a[4], b[4];
  EXPECT(ppc_model_predict(model, pts, n, 3, a, 4) == PPC_OK);
  EXPECT(ppc_model_predict(model, pts, n, 3, b, 4) == PPC_OK);
  EXPECT(memcmp(a, b, sizeof a) == 0);
  EXPECT(ppc_model_predict(model, pts, 100, 3, a, 4) == PPC_ERR_DATA);
  EXPECT(ppc_model_predict(model, pts, n, 3, a, 3) == PPC_ERR_USAGE);
  pts[10] = NAN;
  EXPECT(ppc_model_predict(model, pts, n, 3, a, 4) == PPC_ERR_DATA);
  fill_cloud(pts, n, 7);
  pts[1] = NAN;
  EXPECT(ppc_model_predict(model, pts, n, 3, a, 4) == PPC_ERR_DATA);
  fill_cloud(pts, n, 7);

  EXPECT(ppc_model_save(model, copy) == PPC_OK);
  ppc_model* again = NULL;
  EXPECT(ppc_model_load(copy, &again) == PPC_OK);
  EXPECT(ppc_model_predict(again, pts, n, 3, b, 4) == PPC_OK);
  EXPECT(ppc_model_predict(model, pts, n, 3, a, 4) == PPC_OK);
  EXPECT(memcmp(a, b, sizeof a) == 0);

  /* Thread count does not change results. */
  ppc_set_threads(4);
  EXPECT(ppc_model_predict(model, pts, n, 3, b, 4) == PPC_OK);
  EXPECT(memcmp(a, b, sizeof a) == 0);
  ppc_set_threads(0);

  ppc_model_free(again);
  ppc_model_free(model);
  free(pts);

  /* A corrupt checkpoint is a data error. */
  FILE* f = fopen(copy, "wb");
  fputs("PPCKgarbage", f);
  fclose(f);
  EXPECT(ppc_model_load(copy, &model) == PPC_ERR_DATA);
  EXPECT(strlen(ppc_last_error()) > 0);

  /* The config echo written by train reloads to the same canonical text. */
  char echo_path[4200];
  snprintf(echo_path, sizeof echo_path, "%s/config.json", out_dir);
  char* echo = read_text(echo_path);
  EXPECT(echo != NULL);
  ppc_config* reloaded = NULL;
  EXPECT(ppc_config_parse(echo, &reloaded) == PPC_OK);
  char* t1 = NULL;
  char* t2 = NULL;
  EXPECT(ppc_config_to_json(reloaded, &t1) == PPC_OK);
  EXPECT(ppc_config_to_json(cfg, &t2) == PPC_OK);
  EXPECT(t1 && t2 && strcmp(t1, t2) == 0);
  ppc_string_free(t1);
  ppc_string_free(t2);
  ppc_config_free(reloaded);
  free(echo);
  ppc_config_free(cfg);

  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("C API checks passed\n");
  return failures ? 1 : 0;
}
