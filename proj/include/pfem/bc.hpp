#pragma once

/// \file bc.hpp
/// \brief Boundary-condition sets and Dirichlet enforcement by row
/// replacement c u_i = c g_i, optionally symmetrized column-wise.

#include <functional>
#include <map>

#include "dofmap.hpp"
#include "sparse.hpp"

namespace pfem {

enum class BCKind { dirichlet, neumann };

using BoundaryFunction = std::function<Vec3(const Point&)>;

struct BCEntry {
  int marker = 0;
  BCKind kind = BCKind::dirichlet;
  BoundaryFunction data;
};

struct BCSet {
  std::vector<BCEntry> entries;

  BCSet& dirichlet(int marker, BoundaryFunction g) {
    entries.push_back({marker, BCKind::dirichlet, std::move(g)});
    return *this;
  }
  BCSet& dirichlet(int marker, double value) {
    return dirichlet(marker, [value](const Point&) { return Vec3{value, value, value}; });
  }
  BCSet& neumann(int marker, BoundaryFunction g) {
    entries.push_back({marker, BCKind::neumann, std::move(g)});
    return *this;
  }

  std::vector<int> markers(BCKind kind) const {
    std::vector<int> m;
    for (const auto& e : entries)
      if (e.kind == kind) m.push_back(e.marker);
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
    return m;
  }
};

/// Dirichlet DoF (global, sorted) with their prescribed values.
struct DirichletDofs {
  std::vector<Index> dofs;
  std::vector<double> values;

  Index size() const { return dofs.size(); }
  /// Dense lookup over [0, n): value or NaN for free DoF.
  std::vector<double> dense(Index n) const {
    std::vector<double> v(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < dofs.size(); ++k) v[dofs[k]] = values[k];
    return v;
  }
};

/// Scalar DoF lying on each boundary face: its vertices plus, for P2, the
/// edges between them.
inline std::vector<Index> face_dofs(const DofMap& space, std::span<const Index> face) {
  std::vector<Index> out(face.begin(), face.end());
  if (space.element.degree() == 2) {
    for (std::size_t a = 0; a < face.size(); ++a)
      for (std::size_t b = a + 1; b < face.size(); ++b) {
        std::array<Index, 2> key{std::min(face[a], face[b]), std::max(face[a], face[b])};
        const auto it = std::lower_bound(space.edges.begin(), space.edges.end(), key);
        if (it == space.edges.end() || *it != key) throw InvariantViolation("boundary edge missing from DoF map");
        out.push_back(space.n_vertices + static_cast<Index>(it - space.edges.begin()));
      }
  }
  return out;
}

/// Every DoF whose nodal point lies on a face with a Dirichlet marker, with
/// g evaluated there. A DoF claimed by several markers takes the value of
/// the lowest marker.
inline DirichletDofs resolve_dirichlet(const Mesh& mesh, const DofMap& space, const BCSet& bcs) {
  const auto present = boundary_markers(mesh);
  std::map<int, const BCEntry*> by_marker;
  for (const auto& e : bcs.entries) {
    if (!std::binary_search(present.begin(), present.end(), e.marker))
      throw ConfigError("boundary condition on unknown marker " + std::to_string(e.marker));
    if (e.kind != BCKind::dirichlet) continue;
    if (!e.data) throw ConfigError("Dirichlet condition on marker " + std::to_string(e.marker) + " has no data");
    if (!by_marker.emplace(e.marker, &e).second)
      throw ConfigError("two Dirichlet conditions on marker " + std::to_string(e.marker));
  }
  std::vector<int> claim(space.n_scalar, std::numeric_limits<int>::max());
  for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
    const int m = mesh.face_markers[f];
    if (!by_marker.contains(m)) continue;
    for (Index s : face_dofs(space, mesh.face(f))) claim[s] = std::min(claim[s], m);
  }
  DirichletDofs out;
  std::vector<std::pair<Index, double>> pairs;
  for (Index s = 0; s < space.n_scalar; ++s) {
    if (claim[s] == std::numeric_limits<int>::max()) continue;
    const Vec3 g = by_marker.at(claim[s])->data(space.dof_points[s]);
    for (int c = 0; c < space.n_components; ++c) pairs.emplace_back(space.global(s, c), g[static_cast<std::size_t>(c)]);
  }
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [d, v] : pairs) {
    out.dofs.push_back(d);
    out.values.push_back(v);
  }
  return out;
}

/// Replaces each Dirichlet row by c u_i = c g_i with c the row's previous
/// |diagonal| (1.0 when that vanishes). With `symmetrize`, Dirichlet columns
/// are eliminated too after moving A_ki g_i to the right-hand side.
/// Returns c per Dirichlet DoF. Applying twice equals applying once.
inline std::vector<double> apply_dirichlet(DistMatrix& a, DistVector& b, const DirichletDofs& bc, bool symmetrize) {
  const Index n = a.n_rows();
  for (Index d : bc.dofs)
    if (d >= n) throw InvariantViolation("Dirichlet DoF " + std::to_string(d) + " is not owned by any rank");
  const RankMap& rm = a.row_map();
  // Exchange of (column, value) pairs; every rank sees the full list.
  const std::vector<double> g = bc.dense(n);
  std::vector<double> c(bc.dofs.size());

  for_each_rank(a.n_ranks(), [&](Rank r) {
    const auto rows = rm.indices(r);
    const CsrMatrix& m = a.local(r);
    auto vals = a.values(r);
    auto& rhs = b.local(r);
    for (Index i = 0; i < m.n_rows; ++i) {
      const Index gi = rows[i];
      if (std::isnan(g[gi])) {
        if (!symmetrize) continue;
        for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
          const Index j = m.cols[k];
          if (j < n && !std::isnan(g[j]) && vals[k] != 0.0) {
            rhs[i] -= vals[k] * g[j];
            vals[k] = 0.0;
          }
        }
        continue;
      }
      const auto pd = m.find(i, gi);
      if (pd < 0) throw PatternError("Dirichlet row " + std::to_string(gi) + " has no diagonal entry");
      double ci = std::abs(vals[static_cast<std::size_t>(pd)]);
      if (ci < 1e-300) ci = 1.0;
      for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) vals[k] = 0.0;
      vals[static_cast<std::size_t>(pd)] = ci;
      rhs[i] = ci * g[gi];
      const auto pos = std::lower_bound(bc.dofs.begin(), bc.dofs.end(), gi) - bc.dofs.begin();
      c[static_cast<std::size_t>(pos)] = ci;
    }
  });
  return c;
}

/// b_i = c_i g_i on Dirichlet rows, with c as returned by apply_dirichlet.
inline void set_dirichlet_values(DistVector& b, const DirichletDofs& bc, std::span<const double> c) {
  const RankMap& m = b.map();
  for (std::size_t k = 0; k < bc.dofs.size(); ++k) {
    const Index d = bc.dofs[k];
    b.local(m.owner(d))[m.owner_local(d)] = c[k] * bc.values[k];
  }
}

/// Zeroes the rows of A listed in `rows` (entries stay in the pattern).
inline void zero_rows(DistMatrix& a, std::span<const Index> rows) {
  const RankMap& rm = a.row_map();
  for (Index gi : rows) {
    const Rank r = rm.owner(gi);
    const CsrMatrix& m = a.local(r);
    const Index li = rm.owner_local(gi);
    auto vals = a.values(r);
    for (Index k = m.row_ptr[li]; k < m.row_ptr[li + 1]; ++k) vals[k] = 0.0;
  }
}

/// Zeroes the columns of A listed in `cols`.
inline void zero_columns(DistMatrix& a, std::span<const Index> cols) {
  std::vector<char> hit(a.n_cols(), 0);
  for (Index j : cols) hit[j] = 1;
  for_each_rank(a.n_ranks(), [&](Rank r) {
    const CsrMatrix& m = a.local(r);
    auto vals = a.values(r);
    for (Index k = 0; k < m.nnz(); ++k)
      if (hit[m.cols[k]]) vals[k] = 0.0;
  });
}

/// Sets the Dirichlet entries of a unique vector to their prescribed values.
inline void impose_values(DistVector& x, const DirichletDofs& bc) {
  const RankMap& m = x.map();
  for (std::size_t k = 0; k < bc.dofs.size(); ++k) x.local(m.owner(bc.dofs[k]))[m.owner_local(bc.dofs[k])] = bc.values[k];
}

/// Zeroes the Dirichlet entries of a unique vector.
inline void zero_entries(DistVector& x, std::span<const Index> dofs) {
  const RankMap& m = x.map();
  for (Index d : dofs) x.local(m.owner(d))[m.owner_local(d)] = 0.0;
}

}  // namespace pfem
