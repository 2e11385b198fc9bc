#pragma once

// OFF (ascii) and PLY (ascii, binary little-endian) readers and writers.

#include "pfm/mesh.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

namespace pfm {

using ColorMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 3>;

/// A mesh as read from disk, before and after validation bookkeeping.
struct LoadedMesh {
  TriangleMesh mesh;
  std::vector<Index> original_index; ///< kept vertex -> index in the file
  std::vector<std::string> warnings;
};

struct RawMesh {
  VertexMatrix vertices;
  TriangleMatrix triangles;
};

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline void push_polygon(std::vector<std::array<Index, 3>>& tris, const std::vector<Index>& poly) {
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) tris.push_back({poly[0], poly[i], poly[i + 1]});
}

inline RawMesh to_raw(const std::vector<Vec3>& verts, const std::vector<std::array<Index, 3>>& tris) {
  RawMesh raw;
  raw.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) raw.vertices.row(static_cast<Index>(i)) = verts[i].transpose();
  raw.triangles.resize(static_cast<Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int c = 0; c < 3; ++c) raw.triangles(static_cast<Index>(t), c) = tris[t][static_cast<std::size_t>(c)];
  return raw;
}

// Reads the next non-comment token stream line.
inline bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
  }
  return false;
}

} // namespace detail

inline RawMesh read_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!detail::next_content_line(in, line)) throw InputError(path.string() + ": empty OFF file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") throw InputError(path.string() + ": missing OFF header");
  long long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!detail::next_content_line(in, line)) throw InputError(path.string() + ": missing OFF counts");
    header = std::istringstream(line);
    header >> nv;
  }
  if (!(header >> nf >> ne) || nv < 0 || nf < 0) throw InputError(path.string() + ": malformed OFF counts");

  std::vector<Vec3> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts) {
    if (!detail::next_content_line(in, line)) throw InputError(path.string() + ": truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> v.x() >> v.y() >> v.z())) throw InputError(path.string() + ": malformed vertex line");
  }
  std::vector<std::array<Index, 3>> tris;
  std::vector<Index> poly;
  for (long long f = 0; f < nf; ++f) {
    if (!detail::next_content_line(in, line)) throw InputError(path.string() + ": truncated face list");
    std::istringstream ls(line);
    long long count = 0;
    if (!(ls >> count) || count < 3) throw InputError(path.string() + ": malformed face line");
    poly.assign(static_cast<std::size_t>(count), 0);
    for (auto& idx : poly)
      if (!(ls >> idx)) throw InputError(path.string() + ": malformed face line");
    detail::push_polygon(tris, poly);
  }
  return detail::to_raw(verts, tris);
}

inline void write_off(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << " 0\n";
  out << std::setprecision(17);
  for (Index i = 0; i < mesh.num_vertices(); ++i)
    out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2) << '\n';
  for (Index t = 0; t < mesh.num_triangles(); ++t)
    out << "3 " << mesh.triangles()(t, 0) << ' ' << mesh.triangles()(t, 1) << ' ' << mesh.triangles()(t, 2) << '\n';
}

namespace detail {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline PlyType parse_ply_type(const std::string& s) {
  if (s == "char" || s == "int8") return PlyType::Int8;
  if (s == "uchar" || s == "uint8") return PlyType::UInt8;
  if (s == "short" || s == "int16") return PlyType::Int16;
  if (s == "ushort" || s == "uint16") return PlyType::UInt16;
  if (s == "int" || s == "int32") return PlyType::Int32;
  if (s == "uint" || s == "uint32") return PlyType::UInt32;
  if (s == "float" || s == "float32") return PlyType::Float32;
  if (s == "double" || s == "float64") return PlyType::Float64;
  throw InputError("unknown PLY property type '" + s + "'");
}

inline std::size_t ply_type_size(PlyType t) {
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
  long long count = 0;
  std::vector<PlyProperty> properties;
};

template <class T>
T read_le(std::istream& in) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InputError("truncated binary PLY body");
  return value;
}

inline double read_binary_scalar(std::istream& in, PlyType t) {
  switch (t) {
  case PlyType::Int8: return read_le<std::int8_t>(in);
  case PlyType::UInt8: return read_le<std::uint8_t>(in);
  case PlyType::Int16: return read_le<std::int16_t>(in);
  case PlyType::UInt16: return read_le<std::uint16_t>(in);
  case PlyType::Int32: return read_le<std::int32_t>(in);
  case PlyType::UInt32: return read_le<std::uint32_t>(in);
  case PlyType::Float32: return read_le<float>(in);
  case PlyType::Float64: return read_le<double>(in);
  }
  return 0.0;
}

template <class T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

} // namespace detail

inline RawMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw InputError(path.string() + ": missing PLY magic");

  bool binary = false;
  std::vector<detail::PlyElement> elements;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw InputError(path.string() + ": unsupported PLY format '" + fmt + "'");
    } else if (keyword == "element") {
      detail::PlyElement e;
      if (!(ls >> e.name >> e.count) || e.count < 0) throw InputError(path.string() + ": malformed element line");
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) throw InputError(path.string() + ": property before element");
      detail::PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = detail::parse_ply_type(count_type);
        p.type = detail::parse_ply_type(item_type);
      } else {
        p.type = detail::parse_ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw InputError(path.string() + ": PLY header not terminated");

  std::vector<Vec3> verts;
  std::vector<std::array<Index, 3>> tris;
  std::vector<Index> poly;
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t p = 0; p < e.properties.size(); ++p) {
      const auto& name = e.properties[p].name;
      if (name == "x") ix = static_cast<int>(p);
      if (name == "y") iy = static_cast<int>(p);
      if (name == "z") iz = static_cast<int>(p);
      if (name == "vertex_indices" || name == "vertex_index") iface = static_cast<int>(p);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw InputError(path.string() + ": vertex element lacks x/y/z");
    if (is_face && iface < 0) throw InputError(path.string() + ": face element lacks vertex_indices");

    std::vector<double> scalars(e.properties.size());
    for (long long r = 0; r < e.count; ++r) {
      std::istringstream ls;
      if (!binary) {
        if (!std::getline(in, line)) throw InputError(path.string() + ": truncated PLY body");
        ls = std::istringstream(line);
      }
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const auto& prop = e.properties[p];
        if (prop.is_list) {
          double count_d = 0.0;
          if (binary) count_d = detail::read_binary_scalar(in, prop.count_type);
          else if (!(ls >> count_d)) throw InputError(path.string() + ": malformed PLY list");
          const auto count = static_cast<long long>(count_d);
          if (count < 0) throw InputError(path.string() + ": negative PLY list length");
          poly.assign(static_cast<std::size_t>(count), 0);
          for (auto& idx : poly) {
            double value = 0.0;
            if (binary) value = detail::read_binary_scalar(in, prop.type);
            else if (!(ls >> value)) throw InputError(path.string() + ": malformed PLY list");
            idx = static_cast<Index>(value);
          }
          if (is_face && static_cast<int>(p) == iface) {
            if (count < 3) throw InputError(path.string() + ": face with fewer than 3 vertices");
            detail::push_polygon(tris, poly);
          }
        } else {
          double value = 0.0;
          if (binary) value = detail::read_binary_scalar(in, prop.type);
          else if (!(ls >> value)) throw InputError(path.string() + ": malformed PLY row");
          scalars[p] = value;
        }
      }
      if (is_vertex) verts.emplace_back(scalars[static_cast<std::size_t>(ix)], scalars[static_cast<std::size_t>(iy)],
                                        scalars[static_cast<std::size_t>(iz)]);
    }
  }
  return detail::to_raw(verts, tris);
}

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Writes a PLY with double-precision coordinates and optional per-vertex RGB.
inline void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh,
                      PlyFormat format = PlyFormat::BinaryLittleEndian,
                      const ColorMatrix* colors = nullptr) {
  if (colors && colors->rows() != mesh.num_vertices())
    throw InputError("color count does not match vertex count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const bool binary = format == PlyFormat::BinaryLittleEndian;
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << mesh.num_vertices() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.num_triangles() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  if (binary) {
    for (Index i = 0; i < mesh.num_vertices(); ++i) {
      for (int c = 0; c < 3; ++c) detail::write_le<double>(out, mesh.vertices()(i, c));
      if (colors)
        for (int c = 0; c < 3; ++c) detail::write_le<std::uint8_t>(out, (*colors)(i, c));
    }
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
      detail::write_le<std::uint8_t>(out, 3);
      for (int c = 0; c < 3; ++c) detail::write_le<std::int32_t>(out, static_cast<std::int32_t>(mesh.triangles()(t, c)));
    }
  } else {
    out << std::setprecision(17);
    for (Index i = 0; i < mesh.num_vertices(); ++i) {
      out << mesh.vertices()(i, 0) << ' ' << mesh.vertices()(i, 1) << ' ' << mesh.vertices()(i, 2);
      if (colors)
        for (int c = 0; c < 3; ++c) out << ' ' << static_cast<int>((*colors)(i, c));
      out << '\n';
    }
    for (Index t = 0; t < mesh.num_triangles(); ++t)
      out << "3 " << mesh.triangles()(t, 0) << ' ' << mesh.triangles()(t, 1) << ' ' << mesh.triangles()(t, 2) << '\n';
  }
}

/// Reads an OFF or PLY file, drops unreferenced vertices, repairs orientation
/// and validates the result.
inline LoadedMesh load_mesh(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("no such file: " + path.string());
  const std::string ext = detail::lower_extension(path);
  RawMesh raw;
  if (ext == ".off") raw = read_off(path);
  else if (ext == ".ply") raw = read_ply(path);
  else throw InputError(path.string() + ": unsupported mesh extension '" + ext + "'");
  if (raw.vertices.rows() == 0 || raw.triangles.rows() == 0) throw InputError(path.string() + ": empty mesh");

  LoadedMesh loaded;
  auto compact = drop_unreferenced(raw.vertices, raw.triangles);
  if (compact.original_index.size() != static_cast<std::size_t>(raw.vertices.rows()))
    loaded.warnings.push_back(std::to_string(raw.vertices.rows() - static_cast<Index>(compact.original_index.size())) +
                              " unreferenced vertices dropped");
  const auto report = orient_consistently(compact.vertices, compact.triangles);
  if (!report.orientable) loaded.warnings.push_back("mesh is not consistently orientable");
  try {
    loaded.mesh = TriangleMesh(std::move(compact.vertices), std::move(compact.triangles));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (loaded.mesh.num_components() > 1)
    loaded.warnings.push_back("mesh has " + std::to_string(loaded.mesh.num_components()) + " connected components");
  loaded.original_index = std::move(compact.original_index);
  for (const auto& w : loaded.warnings) log::warn(path.filename().string() + ": " + w);
  return loaded;
}

inline void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh, const ColorMatrix* colors = nullptr) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".off") write_off(path, mesh);
  else if (ext == ".ply") write_ply(path, mesh, PlyFormat::BinaryLittleEndian, colors);
  else throw InputError(path.string() + ": unsupported mesh extension '" + ext + "'");
}

} // namespace pfm
