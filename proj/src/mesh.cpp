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

#include "ppc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ppc/error.hpp"

namespace ppc {

double Mesh::face_area(size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vec3 Mesh::face_normal(size_t f) const {
  const auto& t = faces[f];
  const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  return n / n.norm();
}

double Mesh::total_area() const {
  double a = 0.0;
  for (size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

void clean_mesh(Mesh& mesh) {
  const size_t nv = mesh.vertices.size();
  std::vector<std::array<uint32_t, 3>> kept;
  kept.reserve(mesh.faces.size());
  for (const auto& t : mesh.faces) {
    for (uint32_t idx : t) {
      if (idx >= nv) {
        throw_data("mesh '" + mesh.name + "': face index " + std::to_string(idx) +
                   " out of range (" + std::to_string(nv) + " vertices)");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    const Vec3 c = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                       .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    const double n = c.norm();
    if (!(n > 0.0) || !std::isfinite(n)) continue;
    kept.push_back(t);
  }
  mesh.dropped_faces += mesh.faces.size() - kept.size();
  mesh.faces = std::move(kept);
  if (mesh.faces.empty()) throw_data("mesh '" + mesh.name + "': empty after cleanup");
}

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw_data("unsupported format: unknown PLY property type '" + s + "'");
}

size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> props;
};

enum class PlyFormat { Ascii, BinaryLE, BinaryBE };

class BinaryReader {
 public:
  BinaryReader(std::istream& in, bool big_endian) : in_(in), swap_(big_endian != (std::endian::native == std::endian::big)) {}

  double read(PlyType t) {
    unsigned char buf[8];
    const size_t n = ply_size(t);
    if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) {
      throw_data("truncated PLY body");
    }
    if (swap_) std::reverse(buf, buf + n);
    switch (t) {
      case PlyType::Int8: { int8_t v; std::memcpy(&v, buf, 1); return v; }
      case PlyType::UInt8: { uint8_t v; std::memcpy(&v, buf, 1); return v; }
      case PlyType::Int16: { int16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::UInt16: { uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case PlyType::Int32: { int32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::UInt32: { uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
      case PlyType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

 private:
  std::istream& in_;
  bool swap_;
};

void append_polygon(Mesh& mesh, const std::vector<int64_t>& poly) {
  for (size_t i = 1; i + 1 < poly.size(); ++i) {
    for (int64_t idx : {poly[0], poly[i], poly[i + 1]}) {
      if (idx < 0) throw_data("mesh '" + mesh.name + "': negative face index");
    }
    mesh.faces.push_back({static_cast<uint32_t>(poly[0]), static_cast<uint32_t>(poly[i]),
                          static_cast<uint32_t>(poly[i + 1])});
  }
}

Mesh load_ply(std::istream& in, const std::string& name) {
  Mesh mesh;
  mesh.name = name;
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw_data("unsupported format: missing PLY magic in '" + name + "'");

  PlyFormat format = PlyFormat::Ascii;
  bool have_format = false;
  std::vector<PlyElement> elements;
  while (true) {
    if (!std::getline(in, line)) throw_data("unsupported format: unterminated PLY header in '" + name + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
    if (kw == "format") {
      std::string f, version;
      ls >> f >> version;
      if (f == "ascii") format = PlyFormat::Ascii;
      else if (f == "binary_little_endian") format = PlyFormat::BinaryLE;
      else if (f == "binary_big_endian") format = PlyFormat::BinaryBE;
      else throw_data("unsupported format: PLY encoding '" + f + "'");
      have_format = true;
    } else if (kw == "element") {
      PlyElement e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw_data("unsupported format: bad PLY element line '" + line + "'");
      e.count = static_cast<size_t>(count);
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw_data("unsupported format: PLY property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(ct);
        p.type = parse_ply_type(it);
      } else {
        p.type = parse_ply_type(t);
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else {
      throw_data("unsupported format: unknown PLY header keyword '" + kw + "'");
    }
  }
  if (!have_format) throw_data("unsupported format: PLY header lacks format line");

  BinaryReader bin(in, format == PlyFormat::BinaryBE);
  std::vector<double> values;
  std::vector<int64_t> poly;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (size_t k = 0; k < e.props.size(); ++k) {
      const auto& p = e.props[k];
      if (p.name == "x") ix = static_cast<int>(k);
      if (p.name == "y") iy = static_cast<int>(k);
      if (p.name == "z") iz = static_cast<int>(k);
      if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) iface = static_cast<int>(k);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw_data("unsupported format: PLY vertex lacks x/y/z");
    if (is_vertex) mesh.vertices.reserve(e.count);

    std::string row;
    for (size_t r = 0; r < e.count; ++r) {
      std::istringstream rs;
      if (format == PlyFormat::Ascii) {
        do {
          if (!std::getline(in, row)) throw_data("truncated PLY body in '" + name + "'");
        } while (row.find_first_not_of(" \t\r") == std::string::npos);
        rs.str(row);
      }
      auto next = [&](PlyType t) -> double {
        if (format == PlyFormat::Ascii) {
          double v;
          if (!(rs >> v)) throw_data("malformed PLY row in '" + name + "'");
          return v;
        }
        return bin.read(t);
      };
      values.assign(e.props.size(), 0.0);
      for (size_t k = 0; k < e.props.size(); ++k) {
        const auto& p = e.props[k];
        if (p.is_list) {
          const double cnt = next(p.count_type);
          if (cnt < 0) throw_data("malformed PLY list count");
          const auto n = static_cast<size_t>(cnt);
          if (static_cast<int>(k) == iface && is_face) {
            poly.clear();
            for (size_t q = 0; q < n; ++q) poly.push_back(static_cast<int64_t>(next(p.type)));
            append_polygon(mesh, poly);
          } else {
            for (size_t q = 0; q < n; ++q) next(p.type);
          }
        } else {
          values[k] = next(p.type);
        }
      }
      if (is_vertex) mesh.vertices.emplace_back(values[ix], values[iy], values[iz]);
    }
  }
  return mesh;
}

Mesh load_obj(std::istream& in, const std::string& name) {
  Mesh mesh;
  mesh.name = name;
  std::string line;
  std::vector<int64_t> poly;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw_data("unsupported format: bad OBJ vertex at line " + std::to_string(lineno));
      mesh.vertices.emplace_back(x, y, z);
    } else if (kw == "f") {
      poly.clear();
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        long long idx = 0;
        try {
          idx = std::stoll(head);
        } catch (const std::exception&) {
          throw_data("unsupported format: bad OBJ face at line " + std::to_string(lineno));
        }
        if (idx < 0) idx = static_cast<long long>(mesh.vertices.size()) + idx;
        else idx -= 1;
        poly.push_back(idx);
      }
      if (poly.size() < 3) throw_data("unsupported format: OBJ face with < 3 vertices at line " + std::to_string(lineno));
      append_polygon(mesh, poly);
    }
  }
  return mesh;
}

}  // namespace

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open mesh file '" + path.string() + "'");
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  Mesh mesh;
  if (ext == ".ply") {
    mesh = load_ply(in, path.stem().string());
  } else if (ext == ".obj") {
    mesh = load_obj(in, path.stem().string());
  } else {
    throw_data("unsupported format: '" + path.string() + "'");
  }
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw_data("mesh '" + path.string() + "' is empty");
  }
  clean_mesh(mesh);
  return mesh;
}

void save_ply(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path.string() + "'");
  out << "ply\nformat binary_little_endian 1.0\n";
  if (!mesh.name.empty()) out << "comment name " << mesh.name << "\n";
  out << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  for (const auto& v : mesh.vertices) {
    const float xyz[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()), static_cast<float>(v.z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.faces) {
    const uint8_t n = 3;
    const int32_t idx[3] = {static_cast<int32_t>(f[0]), static_cast<int32_t>(f[1]), static_cast<int32_t>(f[2])};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) throw_data("failed writing '" + path.string() + "'");
}

}  // namespace ppc
