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

#include "ppc/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ppc/error.hpp"
#include "ppc/tasks.hpp"

namespace ppc {
namespace {

constexpr char kMagic[4] = {'P', 'P', 'C', 'K'};

template <class T>
void put_le(std::string& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::string& in, size_t at) {
  if (at + sizeof(T) > in.size()) throw_data("checkpoint: truncated file");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return static_cast<T>(v);
}

void put_tensor(std::string& blob, nlohmann::ordered_json& list, const std::string& name, const Mat& m) {
  list.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", blob.size()}});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_le(blob, std::bit_cast<uint64_t>(m(r, c)));
  }
}

Mat get_tensor(const std::string& bytes, size_t blob_start, const nlohmann::json& entry,
               const std::string& expect_name, Eigen::Index rows, Eigen::Index cols) {
  const auto name = entry.at("name").get<std::string>();
  if (name != expect_name) throw_data("checkpoint: expected tensor '" + expect_name + "', found '" + name + "'");
  const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || (rows >= 0 && (shape[0] != rows || shape[1] != cols))) {
    throw_data("checkpoint: tensor '" + name + "' has an unexpected shape");
  }
  const auto offset = entry.at("offset").get<size_t>();
  Mat m(shape[0], shape[1]);
  size_t at = blob_start + offset;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c, at += 8) m(r, c) = std::bit_cast<double>(get_le<uint64_t>(bytes, at));
  }
  return m;
}

}  // namespace

std::string serialize_checkpoint(const Model& model, const TrainState* state, uint64_t seed) {
  Model& m = const_cast<Model&>(model);  // accessors are non-const; nothing is modified
  nlohmann::ordered_json header;
  header["format"] = "ppc-checkpoint";
  header["version"] = kCheckpointVersion;
  header["dtype"] = "f64le";
  header["network"] = to_json(model.spec);
  header["epoch"] = state ? state->next_epoch : 0;
  header["rng"] = {{"algorithm", Rng::kAlgorithm}, {"seed", seed}, {"epoch", state ? state->next_epoch : 0}};
  std::string blob;
  auto& params = header["parameters"] = nlohmann::ordered_json::array();
  for (auto& [name, p] : m.parameters()) put_tensor(blob, params, name, p->value);
  auto& buffers = header["buffers"] = nlohmann::ordered_json::array();
  for (auto& [name, b] : m.buffers()) put_tensor(blob, buffers, name, *b);
  auto& momentum = header["momentum"] = nlohmann::ordered_json::array();
  if (state) {
    const auto& vel = state->optimizer.velocities();
    const auto named = m.parameters();
    for (size_t i = 0; i < vel.size(); ++i) put_tensor(blob, momentum, named.at(i).first, vel[i]);
  }
  header["blob_bytes"] = blob.size();
  header["blob_fnv1a"] = fnv1a(blob);
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<uint64_t>(text.size()));
  out += text;
  while (out.size() % 8 != 0) out.push_back('\0');
  out += blob;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw_data("checkpoint: bad magic");
  const auto version = get_le<uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw_data("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = get_le<uint64_t>(bytes, 8);
  if (16 + header_len > bytes.size()) throw_data("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("checkpoint: corrupt header: ") + e.what());
  }
  size_t blob_start = 16 + header_len;
  blob_start = (blob_start + 7) / 8 * 8;
  try {
    if (header.at("format") != "ppc-checkpoint" || header.at("version") != kCheckpointVersion) {
      throw_data("checkpoint: header does not describe a version " + std::to_string(kCheckpointVersion) +
                 " checkpoint");
    }
    if (header.at("dtype") != "f64le") throw_data("checkpoint: unsupported dtype");
    const auto blob_bytes = header.at("blob_bytes").get<size_t>();
    if (blob_start > bytes.size() || bytes.size() - blob_start != blob_bytes) {
      throw_data("checkpoint: tensor data is " + std::to_string(bytes.size() - std::min(blob_start, bytes.size())) +
                 " bytes, header says " + std::to_string(blob_bytes));
    }
    if (fnv1a(std::string_view(bytes).substr(blob_start)) != header.at("blob_fnv1a").get<uint64_t>()) {
      throw_data("checkpoint: tensor data checksum mismatch");
    }
    Checkpoint ck;
    NetworkSpec spec;
    try {
      spec = network_spec_from_json(header.at("network"));
    } catch (const Error& e) {
      throw_data(std::string("checkpoint: ") + e.what());
    }
    Rng init(0);
    ck.model = build_network(spec, init);
    ck.next_epoch = header.at("epoch").get<int>();
    ck.seed = header.at("rng").at("seed").get<uint64_t>();
    auto params = ck.model.parameters();
    const auto& pj = header.at("parameters");
    if (pj.size() != params.size()) throw_data("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i].second;
      p->value = get_tensor(bytes, blob_start, pj[i], params[i].first, p->value.rows(), p->value.cols());
      p->zero_grad();
    }
    auto buffers = ck.model.buffers();
    const auto& bj = header.at("buffers");
    if (bj.size() != buffers.size()) throw_data("checkpoint: buffer count mismatch");
    for (size_t i = 0; i < buffers.size(); ++i) {
      Mat& b = *buffers[i].second;
      b = get_tensor(bytes, blob_start, bj[i], buffers[i].first, b.rows(), b.cols());
    }
    const auto& mj = header.at("momentum");
    if (!mj.empty() && mj.size() != params.size()) throw_data("checkpoint: momentum count mismatch");
    for (size_t i = 0; i < mj.size(); ++i) {
      const auto& v = params[i].second->value;
      ck.optimizer.velocities().push_back(get_tensor(bytes, blob_start, mj[i], params[i].first, v.rows(), v.cols()));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("checkpoint: malformed header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState* state, uint64_t seed) {
  const std::string bytes = serialize_checkpoint(model, state, seed);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw_data("checkpoint: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw_data("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace ppc
