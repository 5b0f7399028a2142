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

#include "ppc/ppc.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <new>
#include <streambuf>
#include <string>

#include "ppc/checkpoint.hpp"
#include "ppc/commands.hpp"
#include "ppc/error.hpp"
#include "ppc/parallel.hpp"

struct ppc_config {
  ppc::RunConfig cfg;
};

struct ppc_model {
  ppc::Model model;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
ppc_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

/// Line-buffered stream that forwards each completed line to the log sink.
class LogBuf : public std::streambuf {
 public:
  ~LogBuf() override { flush_line(); }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return ch;
    if (ch == '\n') flush_line();
    else line_.push_back(static_cast<char>(ch));
    return ch;
  }

 private:
  void flush_line() {
    if (line_.empty()) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    if (g_log_fn) {
      g_log_fn(line_.c_str(), g_log_user);
    } else {
      std::cout << line_ << std::endl;
    }
    line_.clear();
  }
  std::string line_;
};

ppc_status fail(ppc_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

/// Runs fn, translating exceptions into status codes.
template <class F>
ppc_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PPC_OK;
  } catch (const ppc::Error& e) {
    return fail(static_cast<ppc_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PPC_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PPC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PPC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PPC_ERR_INTERNAL, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class T>
void require_ptr(const T* p, const char* what) {
  if (p == nullptr) ppc::throw_usage(std::string(what) + " must not be NULL");
}

std::filesystem::path opt_path(const char* p) { return p ? std::filesystem::path(p) : std::filesystem::path(); }

}  // namespace

extern "C" {

const char* ppc_version(void) { return "0.1.0"; }

const char* ppc_last_error(void) { return g_last_error.c_str(); }

void ppc_string_free(char* s) { std::free(s); }

void ppc_set_log(ppc_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

void ppc_set_threads(int n) { ppc::set_num_threads(n); }

ppc_status ppc_config_default(ppc_config** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = new ppc_config{};
  });
}

ppc_status ppc_config_load(const char* path, ppc_config** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = new ppc_config{ppc::load_run_config(path)};
  });
}

ppc_status ppc_config_parse(const char* json, ppc_config** out) {
  return guarded([&] {
    require_ptr(json, "json");
    require_ptr(out, "out");
    *out = new ppc_config{ppc::parse_run_config(json)};
  });
}

ppc_status ppc_config_set_seed(ppc_config* cfg, uint64_t seed) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    cfg->cfg.set_seed(seed);
  });
}

ppc_status ppc_config_set_threads(ppc_config* cfg, int threads) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    if (threads < 0) ppc::throw_usage("threads must be >= 0");
    cfg->cfg.threads = threads;
  });
}

ppc_status ppc_config_set_output_dir(ppc_config* cfg, const char* dir) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(dir, "dir");
    cfg->cfg.output_dir = dir;
  });
}

ppc_status ppc_config_to_json(const ppc_config* cfg, char** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    *out = dup_string(ppc::cmd_spec_echo(cfg->cfg));
  });
}

void ppc_config_free(ppc_config* cfg) { delete cfg; }

ppc_status ppc_sample(const char* mesh_dir, const char* out_dir, uint64_t n_points, uint64_t seed,
                      int normalize_scale) {
  return guarded([&] {
    require_ptr(mesh_dir, "mesh_dir");
    require_ptr(out_dir, "out_dir");
    ppc::SampleArgs a;
    a.mesh_dir = mesh_dir;
    a.out_dir = out_dir;
    a.n_points = n_points;
    a.seed = seed;
    a.normalize_scale = normalize_scale != 0;
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_sample(a, log);
  });
}

ppc_status ppc_train(const ppc_config* cfg, const char* resume_checkpoint) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_train(cfg->cfg, log, opt_path(resume_checkpoint));
  });
}

ppc_status ppc_eval(const ppc_config* cfg, const char* checkpoint, const char* split, char** report_json) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(checkpoint, "checkpoint");
    LogBuf buf;
    std::ostream log(&buf);
    const auto r = ppc::cmd_eval(cfg->cfg, checkpoint, split ? split : "test", log);
    if (report_json) *report_json = dup_string(ppc::to_json(r).dump());
  });
}

ppc_status ppc_ablate(const ppc_config* cfg) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_ablate(cfg->cfg, log);
  });
}

ppc_status ppc_sweep(const ppc_config* cfg) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_sweep(cfg->cfg, log);
  });
}

ppc_status ppc_orient(const char* checkpoint, const char* mesh, uint64_t seed, const char* dump_neighbors,
                      char** verdict) {
  return guarded([&] {
    require_ptr(checkpoint, "checkpoint");
    require_ptr(mesh, "mesh");
    LogBuf buf;
    std::ostream log(&buf);
    const auto r = ppc::cmd_orient(checkpoint, mesh, seed, opt_path(dump_neighbors), log);
    if (verdict) *verdict = dup_string(r.verdict);
  });
}

ppc_status ppc_synth(const ppc_config* cfg, const char* out_dir) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out_dir, "out_dir");
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_synth(cfg->cfg, out_dir, log);
  });
}

ppc_status ppc_plot(const char* report, const char* out_dir) {
  return guarded([&] {
    require_ptr(report, "report");
    require_ptr(out_dir, "out_dir");
    LogBuf buf;
    std::ostream log(&buf);
    ppc::cmd_plot(report, out_dir, log);
  });
}

ppc_status ppc_model_init(const ppc_config* cfg, ppc_model** out) {
  return guarded([&] {
    require_ptr(cfg, "cfg");
    require_ptr(out, "out");
    *out = new ppc_model{ppc::initial_model(cfg->cfg.network, cfg->cfg.seed)};
  });
}

ppc_status ppc_model_load(const char* path, ppc_model** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = new ppc_model{ppc::load_checkpoint(path).model};
  });
}

ppc_status ppc_model_save(const ppc_model* model, const char* path) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(path, "path");
    ppc::save_checkpoint(path, model->model, nullptr, 0);
  });
}

int ppc_model_num_classes(const ppc_model* model) { return model ? model->model.spec.num_classes : 0; }

int ppc_model_input_points(const ppc_model* model) { return model ? model->model.spec.input_points : 0; }

ppc_status ppc_model_predict(const ppc_model* model, const double* points, size_t n, uint64_t seed, double* logits,
                             size_t logits_len) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(points, "points");
    require_ptr(logits, "logits");
    const auto classes = static_cast<size_t>(model->model.spec.num_classes);
    if (logits_len < classes) ppc::throw_usage("logits buffer holds fewer than num_classes values");
    ppc::PointCloud pc;
    pc.positions.resize(static_cast<Eigen::Index>(n), 3);
    pc.normals.resize(static_cast<Eigen::Index>(n), 3);
    for (size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        pc.positions(static_cast<Eigen::Index>(i), c) = points[6 * i + static_cast<size_t>(c)];
        pc.normals(static_cast<Eigen::Index>(i), c) = points[6 * i + 3 + static_cast<size_t>(c)];
      }
    }
    pc.validate();
    ppc::Rng rng(seed);
    ppc::ForwardOptions opts;
    opts.mode = ppc::Mode::Eval;
    const ppc::Mat z = ppc::forward(model->model, std::span<const ppc::PointCloud>(&pc, 1), opts, rng);
    for (size_t c = 0; c < classes; ++c) logits[c] = z(0, static_cast<Eigen::Index>(c));
  });
}

void ppc_model_free(ppc_model* model) { delete model; }

}  // extern "C"
