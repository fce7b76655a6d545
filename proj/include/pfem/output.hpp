#pragma once

/// \file output.hpp
/// \brief Legacy ASCII VTK snapshots and binary restart checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>

#include "distributed.hpp"
#include "dofmap.hpp"
#include "mesh.hpp"

namespace pfem {

struct VtkField {
  std::string name;
  const DofMap* space;
  const DistVector* values;  // unique mode
};

/// UNSTRUCTURED_GRID with one POINT_DATA entry per field. Only vertex DoF
/// are written, so P2 fields lose their edge values. Distributed vectors are
/// gathered first; the file does not depend on the rank layout.
inline void write_vtk(const Mesh& mesh, std::span<const VtkField> fields, std::ostream& out,
                      const std::string& title = "pfem output") {
  out.precision(17);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (const auto& v : mesh.vertices) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  const Index nv = static_cast<Index>(mesh.dim) + 1;
  out << "CELLS " << mesh.n_cells() << ' ' << mesh.n_cells() * (nv + 1) << '\n';
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    out << nv;
    for (Index v : mesh.cell(c)) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.n_cells() << '\n';
  const int type = mesh.dim == 3 ? 10 : 5;
  for (Index c = 0; c < mesh.n_cells(); ++c) out << type << '\n';
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.n_vertices() << '\n';
  for (const auto& f : fields) {
    if (f.space->n_vertices != mesh.n_vertices()) throw ConfigError("field '" + f.name + "' is not on this mesh");
    const auto g = f.values->gather();
    if (f.space->n_components == 1) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (Index v = 0; v < mesh.n_vertices(); ++v) out << g[v] << '\n';
    } else {
      out << "VECTORS " << f.name << " double\n";
      for (Index v = 0; v < mesh.n_vertices(); ++v) {
        for (int c = 0; c < 3; ++c) {
          const double x = c < f.space->n_components ? g[f.space->global(v, c)] : 0.0;
          out << (c ? " " : "") << x;
        }
        out << '\n';
      }
    }
  }
}

inline void write_vtk_file(const Mesh& mesh, std::span<const VtkField> fields, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_vtk(mesh, fields, out);
  if (!out) throw Error("write to '" + path + "' failed");
}

// ------------------------------------------------------------- checkpoints

/// Layout (little endian): "PFEM", u32 version, u64 step, f64 t, f64 dt,
/// u64 n + bytes of the scheme name, u64 n + f64 velocity, u64 n + f64 pressure.
struct Checkpoint {
  static constexpr std::uint32_t version = 1;
  std::uint64_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  std::string scheme;
  std::vector<double> velocity;
  std::vector<double> pressure;

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T take(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("truncated checkpoint");
  return v;
}
inline void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}
inline std::vector<double> take_doubles(std::istream& in) {
  const auto n = take<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 36)) throw ConfigError("implausible checkpoint vector length");
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw ConfigError("truncated checkpoint");
  return v;
}
}  // namespace detail

inline void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  out.write("PFEM", 4);
  detail::put(out, Checkpoint::version);
  detail::put(out, c.step);
  detail::put(out, c.t);
  detail::put(out, c.dt);
  detail::put<std::uint64_t>(out, c.scheme.size());
  out.write(c.scheme.data(), static_cast<std::streamsize>(c.scheme.size()));
  detail::put_doubles(out, c.velocity);
  detail::put_doubles(out, c.pressure);
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "PFEM", 4) != 0) throw ConfigError("not a pfem checkpoint");
  const auto ver = detail::take<std::uint32_t>(in);
  if (ver != Checkpoint::version) throw ConfigError("unsupported checkpoint version " + std::to_string(ver));
  Checkpoint c;
  c.step = detail::take<std::uint64_t>(in);
  c.t = detail::take<double>(in);
  c.dt = detail::take<double>(in);
  const auto n = detail::take<std::uint64_t>(in);
  if (n > 1024) throw ConfigError("implausible scheme name length");
  c.scheme.resize(n);
  if (!in.read(c.scheme.data(), static_cast<std::streamsize>(n))) throw ConfigError("truncated checkpoint");
  c.velocity = detail::take_doubles(in);
  c.pressure = detail::take_doubles(in);
  return c;
}

inline void write_checkpoint_file(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_checkpoint(c, out);
  if (!out) throw Error("write to '" + path + "' failed");
}

inline Checkpoint read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace pfem
