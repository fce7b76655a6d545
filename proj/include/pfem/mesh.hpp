#pragma once

/// \file mesh.hpp
/// \brief Simplicial meshes (triangles / tetrahedra) with marked boundary faces
/// and the structured box generator.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core.hpp"

namespace pfem {

/// Simplicial mesh. Cells and faces are stored flat: a cell has dim+1 vertex
/// indices, a boundary face has dim.
struct Mesh {
  int dim = 3;
  std::vector<Point> vertices;
  std::vector<Index> cell_vertices;
  std::vector<Index> face_vertices;
  std::vector<int> face_markers;
  std::vector<int> cell_markers;  // empty or one per cell

  int vertices_per_cell() const { return dim + 1; }
  int vertices_per_face() const { return dim; }
  Index n_vertices() const { return vertices.size(); }
  Index n_cells() const { return cell_vertices.size() / static_cast<Index>(dim + 1); }
  Index n_boundary_faces() const { return face_markers.size(); }

  std::span<const Index> cell(Index c) const {
    return {cell_vertices.data() + c * static_cast<Index>(dim + 1), static_cast<Index>(dim + 1)};
  }
  std::span<Index> cell(Index c) {
    return {cell_vertices.data() + c * static_cast<Index>(dim + 1), static_cast<Index>(dim + 1)};
  }
  std::span<const Index> face(Index f) const {
    return {face_vertices.data() + f * static_cast<Index>(dim), static_cast<Index>(dim)};
  }

  void add_cell(std::span<const Index> v, std::optional<int> marker = std::nullopt) {
    cell_vertices.insert(cell_vertices.end(), v.begin(), v.end());
    if (marker) cell_markers.push_back(*marker);
  }
  void add_face(std::span<const Index> v, int marker) {
    face_vertices.insert(face_vertices.end(), v.begin(), v.end());
    face_markers.push_back(marker);
  }
};

/// Sorted vertex tuple identifying a face; unused slots hold a sentinel.
using FaceKey = std::array<Index, 3>;

inline FaceKey make_face_key(std::span<const Index> v) {
  FaceKey k{static_cast<Index>(-1), static_cast<Index>(-1), static_cast<Index>(-1)};
  std::copy(v.begin(), v.end(), k.begin());
  std::sort(k.begin(), k.begin() + static_cast<std::ptrdiff_t>(v.size()));
  return k;
}

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto x : k) h = (h ^ x) * 1099511628211ull;
    return h;
  }
};

/// Local face f of a cell is the face opposite local vertex f; its vertices
/// keep increasing local order.
inline std::array<int, 3> local_face(int dim, int f) {
  std::array<int, 3> out{-1, -1, -1};
  int k = 0;
  for (int v = 0; v <= dim; ++v)
    if (v != f) out[static_cast<std::size_t>(k++)] = v;
  return out;
}

inline std::vector<Index> face_of_cell(const Mesh& mesh, Index c, int f) {
  const auto cv = mesh.cell(c);
  const auto lf = local_face(mesh.dim, f);
  std::vector<Index> out(static_cast<std::size_t>(mesh.dim));
  for (int k = 0; k < mesh.dim; ++k) out[static_cast<std::size_t>(k)] = cv[static_cast<std::size_t>(lf[static_cast<std::size_t>(k)])];
  return out;
}

/// Signed measure of a cell under its stored vertex ordering.
inline double signed_cell_volume(const Mesh& mesh, Index c) {
  const auto v = mesh.cell(c);
  const Point& p0 = mesh.vertices[v[0]];
  if (mesh.dim == 2) {
    const Vec3 a = mesh.vertices[v[1]] - p0;
    const Vec3 b = mesh.vertices[v[2]] - p0;
    return 0.5 * (a[0] * b[1] - a[1] * b[0]);
  }
  const Vec3 a = mesh.vertices[v[1]] - p0;
  const Vec3 b = mesh.vertices[v[2]] - p0;
  const Vec3 d = mesh.vertices[v[3]] - p0;
  const double det = a[0] * (b[1] * d[2] - b[2] * d[1]) - a[1] * (b[0] * d[2] - b[2] * d[0]) +
                     a[2] * (b[0] * d[1] - b[1] * d[0]);
  return det / 6.0;
}

/// |det(edge matrix)| / dim!
inline double cell_volume(const Mesh& mesh, Index c) { return std::abs(signed_cell_volume(mesh, c)); }

/// Measure of a boundary face (length in 2D, area in 3D).
inline double face_measure(const Mesh& mesh, std::span<const Index> f) {
  const Point& p0 = mesh.vertices[f[0]];
  const Vec3 a = mesh.vertices[f[1]] - p0;
  if (mesh.dim == 2) return norm(a);
  const Vec3 b = mesh.vertices[f[2]] - p0;
  const Vec3 n{{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]}};
  return 0.5 * norm(n);
}

/// Cell and local face index for every boundary face.
struct BoundaryFaceOwner {
  Index cell;
  int local_face;
};

inline std::unordered_map<FaceKey, std::vector<std::pair<Index, int>>, FaceKeyHash> build_face_table(
    const Mesh& mesh) {
  std::unordered_map<FaceKey, std::vector<std::pair<Index, int>>, FaceKeyHash> table;
  table.reserve(mesh.n_cells() * static_cast<Index>(mesh.dim + 1));
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    for (int f = 0; f <= mesh.dim; ++f) {
      const auto fv = face_of_cell(mesh, c, f);
      table[make_face_key(fv)].emplace_back(c, f);
    }
  }
  return table;
}

/// Throws InvariantViolation when a boundary face does not belong to exactly
/// one cell.
inline std::vector<BoundaryFaceOwner> boundary_face_owners(const Mesh& mesh) {
  const auto table = build_face_table(mesh);
  std::vector<BoundaryFaceOwner> out;
  out.reserve(mesh.n_boundary_faces());
  for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
    auto it = table.find(make_face_key(mesh.face(f)));
    if (it == table.end() || it->second.size() != 1)
      throw InvariantViolation("boundary face " + std::to_string(f) + " is not a face of exactly one cell");
    out.push_back({it->second.front().first, it->second.front().second});
  }
  return out;
}

/// Checks every Mesh invariant; throws InvariantViolation on the first failure.
inline void validate(const Mesh& mesh) {
  if (mesh.dim != 2 && mesh.dim != 3) throw InvariantViolation("mesh dimension must be 2 or 3");
  const Index nv = mesh.n_vertices();
  if (mesh.cell_vertices.size() % static_cast<Index>(mesh.dim + 1) != 0)
    throw InvariantViolation("cell storage is not a multiple of dim+1");
  if (mesh.face_vertices.size() != mesh.face_markers.size() * static_cast<Index>(mesh.dim))
    throw InvariantViolation("each boundary face needs exactly one marker");
  if (!mesh.cell_markers.empty() && mesh.cell_markers.size() != mesh.n_cells())
    throw InvariantViolation("cell markers must be empty or one per cell");
  for (Index v : mesh.cell_vertices)
    if (v >= nv) throw InvariantViolation("cell references vertex " + std::to_string(v) + " out of range");
  for (Index v : mesh.face_vertices)
    if (v >= nv) throw InvariantViolation("face references vertex " + std::to_string(v) + " out of range");
  for (Index c = 0; c < mesh.n_cells(); ++c)
    if (!(signed_cell_volume(mesh, c) > 0.0))
      throw InvariantViolation("cell " + std::to_string(c) + " has non-positive volume");
  (void)boundary_face_owners(mesh);
}

inline double total_volume(const Mesh& mesh) {
  double s = 0.0;
  for (Index c = 0; c < mesh.n_cells(); ++c) s += cell_volume(mesh, c);
  return s;
}

/// Axis-aligned box [a_k, b_k] with n_k cells per axis. Face markers are
/// ordered (x-min, x-max, y-min, y-max[, z-min, z-max]).
struct BoxSpec {
  int dim = 3;
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> upper{1.0, 1.0, 1.0};
  std::array<int, 3> subdivisions{1, 1, 1};
  std::array<int, 6> face_markers{1, 2, 3, 4, 5, 6};
};

/// Structured simplicial mesh of a box.
///
/// Vertices are numbered lexicographically with x fastest. In 3D each
/// hexahedron, with local vertices numbered by bits (x + 2y + 4z), is cut into
/// the six Kuhn tetrahedra {0, e_p0, e_p0+e_p1, 7} for the axis permutations
/// p in lexicographic order. In 2D each quad is cut along its (0,0)-(1,1)
/// diagonal into {0,1,3} and {0,3,2}. Any cell whose template ordering is
/// negatively oriented has its last two vertices swapped. Boundary faces
/// are emitted in cell order and take the marker of the box side they lie on.
inline Mesh generate_box(const BoxSpec& spec) {
  if (spec.dim != 2 && spec.dim != 3) throw ConfigError("box dimension must be 2 or 3");
  for (int k = 0; k < spec.dim; ++k) {
    if (!(spec.lower[static_cast<std::size_t>(k)] < spec.upper[static_cast<std::size_t>(k)]))
      throw ConfigError("box bounds must satisfy lower < upper on every axis");
    if (spec.subdivisions[static_cast<std::size_t>(k)] < 1)
      throw ConfigError("box subdivisions must be >= 1");
  }
  const int d = spec.dim;
  const std::array<Index, 3> n{static_cast<Index>(spec.subdivisions[0]),
                               static_cast<Index>(spec.subdivisions[1]),
                               d == 3 ? static_cast<Index>(spec.subdivisions[2]) : Index{0}};
  const Index nx = n[0] + 1, ny = n[1] + 1, nz = d == 3 ? n[2] + 1 : 1;

  Mesh mesh;
  mesh.dim = d;
  mesh.vertices.reserve(nx * ny * nz);
  for (Index k = 0; k < nz; ++k)
    for (Index j = 0; j < ny; ++j)
      for (Index i = 0; i < nx; ++i) {
        Point p;
        const std::array<Index, 3> ijk{i, j, k};
        for (int a = 0; a < d; ++a) {
          const auto au = static_cast<std::size_t>(a);
          // Exact endpoints so boundary detection and volumes stay exact.
          const double t = static_cast<double>(ijk[au]) / static_cast<double>(n[au]);
          p[au] = ijk[au] == n[au] ? spec.upper[au] : spec.lower[au] + t * (spec.upper[au] - spec.lower[au]);
        }
        mesh.vertices.push_back(p);
      }

  auto vid = [&](Index i, Index j, Index k) { return i + nx * (j + ny * k); };

  std::vector<std::array<int, 4>> templ;
  if (d == 3) {
    const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (const auto& p : perms) {
      const int b0 = 1 << p[0];
      const int b1 = b0 | (1 << p[1]);
      templ.push_back({0, b0, b1, 7});
    }
  } else {
    templ.push_back({0, 1, 3, -1});
    templ.push_back({0, 3, 2, -1});
  }

  const Index ncz = d == 3 ? n[2] : 1;
  std::vector<std::array<Index, 3>> cell_ijk;  // grid coordinates of local vertices
  for (Index k = 0; k < ncz; ++k)
    for (Index j = 0; j < n[1]; ++j)
      for (Index i = 0; i < n[0]; ++i) {
        for (const auto& t : templ) {
          std::array<Index, 4> cv{};
          for (int a = 0; a <= d; ++a) {
            const int bits = t[static_cast<std::size_t>(a)];
            cv[static_cast<std::size_t>(a)] =
                vid(i + static_cast<Index>(bits & 1), j + static_cast<Index>((bits >> 1) & 1),
                    k + static_cast<Index>((bits >> 2) & 1));
          }
          mesh.add_cell(std::span<const Index>(cv.data(), static_cast<std::size_t>(d + 1)));
          const Index c = mesh.n_cells() - 1;
          if (signed_cell_volume(mesh, c) < 0.0) {
            auto cell = mesh.cell(c);
            std::swap(cell[static_cast<std::size_t>(d - 1)], cell[static_cast<std::size_t>(d)]);
          }
        }
      }

  // A face lies on box side (axis, end) iff all its vertices share that grid
  // coordinate on the boundary plane.
  auto grid = [&](Index v) {
    std::array<Index, 3> g{v % nx, (v / nx) % ny, v / (nx * ny)};
    return g;
  };
  for (Index c = 0; c < mesh.n_cells(); ++c) {
    for (int f = 0; f <= d; ++f) {
      const auto fv = face_of_cell(mesh, c, f);
      for (int a = 0; a < d; ++a) {
        const auto au = static_cast<std::size_t>(a);
        for (int end = 0; end < 2; ++end) {
          const Index target = end == 0 ? 0 : n[au];
          const bool on = std::all_of(fv.begin(), fv.end(), [&](Index v) { return grid(v)[au] == target; });
          if (on) mesh.add_face(fv, spec.face_markers[static_cast<std::size_t>(2 * a + end)]);
        }
      }
    }
  }
  return mesh;
}

/// Marker values present on boundary faces, sorted.
inline std::vector<int> boundary_markers(const Mesh& mesh) {
  std::vector<int> m = mesh.face_markers;
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  return m;
}

}  // namespace pfem
