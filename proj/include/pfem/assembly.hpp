#pragma once

/// \file assembly.hpp
/// \brief Matrix-graph precomputation and element-loop assembly of weak forms
/// into row-partitioned matrices and vectors.
///
/// Standard mode: each rank integrates its owned elements; contributions to
/// rows owned elsewhere are shipped to the owner in one consolidation phase
/// and added in increasing source-rank order. Overlapped mode: each rank
/// integrates all its local (owned + halo) elements and keeps only its owned
/// rows, so no consolidation is needed; the halo must then cover the support
/// of every owned row.

#include "form.hpp"
#include "sparse.hpp"

namespace pfem {

enum class AssemblyMode { standard, overlapped };

struct AssemblyOptions {
  AssemblyMode mode = AssemblyMode::standard;
  const MatrixGraph* graph = nullptr;
};

/// Affine map x = x0 + J xhat of one cell.
struct CellGeometry {
  int dim = 3;
  Point x0;
  std::array<std::array<double, 3>, 3> jac{};      // jac[r][c] = d x_r / d xhat_c
  std::array<std::array<double, 3>, 3> inv_jac_t{};  // (J^{-1})^T
  double det = 0.0;

  CellGeometry(const Mesh& mesh, Index c) : dim(mesh.dim) {
    const auto v = mesh.cell(c);
    x0 = mesh.vertices[v[0]];
    for (int k = 0; k < dim; ++k) {
      const Vec3 e = mesh.vertices[v[static_cast<std::size_t>(k + 1)]] - x0;
      for (int r = 0; r < dim; ++r) jac[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = e[static_cast<std::size_t>(r)];
    }
    const auto& J = jac;
    if (dim == 2) {
      det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
      inv_jac_t[0][0] = J[1][1] / det;
      inv_jac_t[0][1] = -J[1][0] / det;
      inv_jac_t[1][0] = -J[0][1] / det;
      inv_jac_t[1][1] = J[0][0] / det;
    } else {
      det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
            J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
      // Cofactor matrix divided by det is (J^{-1})^T.
      inv_jac_t[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) / det;
      inv_jac_t[0][1] = -(J[1][0] * J[2][2] - J[1][2] * J[2][0]) / det;
      inv_jac_t[0][2] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) / det;
      inv_jac_t[1][0] = -(J[0][1] * J[2][2] - J[0][2] * J[2][1]) / det;
      inv_jac_t[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) / det;
      inv_jac_t[1][2] = -(J[0][0] * J[2][1] - J[0][1] * J[2][0]) / det;
      inv_jac_t[2][0] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) / det;
      inv_jac_t[2][1] = -(J[0][0] * J[1][2] - J[0][2] * J[1][0]) / det;
      inv_jac_t[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) / det;
    }
  }

  Point map(const Point& ref) const {
    Point x = x0;
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        x[static_cast<std::size_t>(r)] += jac[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * ref[static_cast<std::size_t>(c)];
    return x;
  }

  Vec3 physical_gradient(const Vec3& g) const {
    Vec3 out;
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c)
        out[static_cast<std::size_t>(r)] += inv_jac_t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] * g[static_cast<std::size_t>(c)];
    return out;
  }
};

namespace detail {

inline void check_space(const Mesh& mesh, const DofMap& space) {
  if (space.element.dim() != mesh.dim) throw FormStructureError("space dimension does not match mesh");
  if (space.cell_dofs.size() != mesh.n_cells() * static_cast<Index>(space.dofs_per_cell))
    throw FormStructureError("space was not built on this mesh");
}

inline void check_same_partition(const DofMap& a, const DofMap& b) {
  if (a.partition != b.partition && a.partition->owner != b.partition->owner)
    throw ConfigError("spaces were built on different partitions");
}

inline const std::vector<Index>& loop_cells(const DofMap& space, Rank r, AssemblyMode mode) {
  return mode == AssemblyMode::standard ? space.partition->owned_elements[static_cast<std::size_t>(r)]
                                        : space.partition->local_elements[static_cast<std::size_t>(r)];
}

/// Every cell that touches a row owned by rank r must be local to r.
inline void check_overlap_coverage(const DofMap& rows) {
  const auto& part = *rows.partition;
  for (int r = 0; r < part.n_ranks; ++r) {
    std::vector<char> local(part.n_elements(), 0);
    for (Index c : part.local_elements[static_cast<std::size_t>(r)]) local[c] = 1;
    for (Index c = 0; c < part.n_elements(); ++c) {
      if (local[c]) continue;
      for (Index d : rows.cell(c))
        if (rows.scalar_owner[d] == r)
          throw ConfigError("overlapped assembly: halo of rank " + std::to_string(r) +
                            " does not cover the support of its owned rows");
    }
  }
}

}  // namespace detail

/// Smallest face-layer halo (starting from the partition's current local
/// sets) that makes overlapped assembly on `element` communication-free.
inline Partition halo_for_overlapped_assembly(const Mesh& mesh, const Partition& partition, const DualGraph& graph,
                                              const FiniteElement& element) {
  Partition p = partition;
  for (;;) {
    const DofMap dm = build_dofmap(mesh, p, element);
    try {
      detail::check_overlap_coverage(dm);
      return p;
    } catch (const ConfigError&) {
      p = add_halo(p, graph, 1);
    }
  }
}

/// Sparsity pattern coupling every row DoF to every column DoF of each
/// element, consolidated on the row owners.
inline MatrixGraph build_graph(const DofMap& rows, const DofMap& cols) {
  detail::check_same_partition(rows, cols);
  if (rows.n_components != 1 || cols.n_components != 1) throw FormStructureError("graphs are built on scalar spaces");
  const int n = rows.n_ranks();
  std::vector<std::vector<std::vector<std::pair<Index, Index>>>> outbox(
      static_cast<std::size_t>(n), std::vector<std::vector<std::pair<Index, Index>>>(static_cast<std::size_t>(n)));
  for_each_rank(n, [&](Rank r) {
    auto& box = outbox[static_cast<std::size_t>(r)];
    for (Index c : rows.partition->owned_elements[static_cast<std::size_t>(r)]) {
      const auto rd = rows.cell(c);
      const auto cd = cols.cell(c);
      for (Index gi : rd)
        for (Index gj : cd) box[static_cast<std::size_t>(rows.scalar_owner[gi])].emplace_back(gi, gj);
    }
  });
  MatrixGraph g;
  g.row_map = rows.unique_map;
  g.col_map = cols.unique_map;
  g.row_ptr.resize(static_cast<std::size_t>(n));
  g.cols.resize(static_cast<std::size_t>(n));
  for_each_rank(n, [&](Rank r) {
    std::vector<std::pair<Index, Index>> all;
    for (int s = 0; s < n; ++s) {
      const auto& in = outbox[static_cast<std::size_t>(s)][static_cast<std::size_t>(r)];
      all.insert(all.end(), in.begin(), in.end());
    }
    for (auto& [i, j] : all) i = rows.unique_map->owner_local(i);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    auto& rp = g.row_ptr[static_cast<std::size_t>(r)];
    auto& cc = g.cols[static_cast<std::size_t>(r)];
    rp.assign(rows.unique_map->local_size(r) + 1, 0);
    for (const auto& [i, j] : all) {
      ++rp[i + 1];
      cc.push_back(j);
    }
    for (std::size_t i = 0; i + 1 < rp.size(); ++i) rp[i + 1] += rp[i];
  });
  return g;
}

/// a_ij = sum over cells of the integral of form(phi_j, psi_i), with psi the
/// test (row) basis and phi the trial (column) basis.
template <form::BilinearExpr Form>
DistMatrix assemble_matrix(const Mesh& mesh, const Form& form, const DofMap& test_space, const DofMap& trial_space,
                           const QuadratureRule& quad, const AssemblyOptions& options = {}) {
  detail::check_space(mesh, test_space);
  detail::check_space(mesh, trial_space);
  detail::check_same_partition(test_space, trial_space);
  if (quad.dim != mesh.dim) throw FormStructureError("quadrature dimension does not match mesh");
  if (test_space.n_components != 1 || trial_space.n_components != 1)
    throw FormStructureError("forms are assembled on scalar spaces; compose vector blocks afterwards");
  if (options.mode == AssemblyMode::overlapped) detail::check_overlap_coverage(test_space);

  const Tabulation test_tab = tabulate(test_space.element, quad.points);
  const Tabulation trial_tab = tabulate(trial_space.element, quad.points);
  const int nt = test_tab.n_dof, ns = trial_tab.n_dof;
  const int n = test_space.n_ranks();
  const auto& row_map = *test_space.unique_map;

  // outbox[source][target]
  std::vector<std::vector<std::vector<Triplet>>> outbox(static_cast<std::size_t>(n),
                                                        std::vector<std::vector<Triplet>>(static_cast<std::size_t>(n)));
  for_each_rank(n, [&](Rank r) {
    Form f = form;
    auto& box = outbox[static_cast<std::size_t>(r)];
    std::vector<double> ke(static_cast<std::size_t>(nt * ns));
    std::vector<Vec3> test_grad(static_cast<std::size_t>(nt)), trial_grad(static_cast<std::size_t>(ns));
    for (Index c : detail::loop_cells(test_space, r, options.mode)) {
      const CellGeometry geo(mesh, c);
      const double vol = std::abs(geo.det);
      std::fill(ke.begin(), ke.end(), 0.0);
      f.bind_cell({c, r});
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const auto tg = test_tab.gradients_at(q);
        const auto sg = trial_tab.gradients_at(q);
        for (int i = 0; i < nt; ++i) test_grad[static_cast<std::size_t>(i)] = geo.physical_gradient(tg[static_cast<std::size_t>(i)]);
        for (int j = 0; j < ns; ++j) trial_grad[static_cast<std::size_t>(j)] = geo.physical_gradient(sg[static_cast<std::size_t>(j)]);
        const form::QpContext ctx{geo.map(quad.points[q]), quad.points[q], test_tab.values_at(q), test_grad,
                                  trial_tab.values_at(q), trial_grad};
        f.prepare(ctx);
        const double w = quad.weights[q] * vol;
        for (int i = 0; i < nt; ++i)
          for (int j = 0; j < ns; ++j) ke[static_cast<std::size_t>(i * ns + j)] += w * f.eval(ctx, i, j);
      }
      const auto rd = test_space.cell(c);
      const auto cd = trial_space.cell(c);
      for (int i = 0; i < nt; ++i) {
        const Index gi = rd[static_cast<std::size_t>(i)];
        const Rank o = row_map.owner(gi);
        if (options.mode == AssemblyMode::overlapped && o != r) continue;
        for (int j = 0; j < ns; ++j)
          box[static_cast<std::size_t>(o)].push_back({gi, cd[static_cast<std::size_t>(j)], ke[static_cast<std::size_t>(i * ns + j)]});
      }
    }
  });

  // Consolidation: own contributions first, then other sources by rank.
  auto incoming = [&](Rank r) {
    std::vector<Triplet> all = std::move(outbox[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)]);
    for (int s = 0; s < n; ++s) {
      if (s == r) continue;
      auto& in = outbox[static_cast<std::size_t>(s)][static_cast<std::size_t>(r)];
      all.insert(all.end(), in.begin(), in.end());
    }
    for (auto& t : all) t.row = row_map.owner_local(t.row);
    return all;
  };

  if (options.graph) {
    DistMatrix a = DistMatrix::from_graph(*options.graph);
    if (!options.graph->row_map->same_layout(row_map) || options.graph->col_map->global_size() != trial_space.global_size())
      throw ConfigError("matrix graph does not match the spaces");
    for_each_rank(n, [&](Rank r) {
      const auto all = incoming(r);
      const auto& m = a.local(r);
      auto vals = a.values(r);
      for (const auto& t : all) {
        const auto p = m.find(t.row, t.col);
        if (p < 0) throw PatternError("assembled entry outside the precomputed graph");
        vals[static_cast<std::size_t>(p)] += t.value;
      }
    });
    return a;
  }
  std::vector<CsrMatrix> local(static_cast<std::size_t>(n));
  for_each_rank(n, [&](Rank r) {
    local[static_cast<std::size_t>(r)] = CsrMatrix::from_triplets(row_map.local_size(r), trial_space.global_size(), incoming(r));
  });
  return DistMatrix(test_space.unique_map, trial_space.unique_map, std::move(local));
}

namespace detail {

template <class Form>
void assemble_vector_into(std::vector<std::vector<std::vector<std::pair<Index, double>>>>& outbox, const Mesh& mesh,
                          const Form& form, const DofMap& space, const QuadratureRule& quad, AssemblyMode mode) {
  const Tabulation tab = tabulate(space.element, quad.points);
  const int nt = tab.n_dof;
  for_each_rank(space.n_ranks(), [&](Rank r) {
    Form f = form;
    auto& box = outbox[static_cast<std::size_t>(r)];
    std::vector<double> be(static_cast<std::size_t>(nt));
    std::vector<Vec3> grads(static_cast<std::size_t>(nt));
    for (Index c : loop_cells(space, r, mode)) {
      const CellGeometry geo(mesh, c);
      const double vol = std::abs(geo.det);
      std::fill(be.begin(), be.end(), 0.0);
      f.bind_cell({c, r});
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const auto g = tab.gradients_at(q);
        for (int i = 0; i < nt; ++i) grads[static_cast<std::size_t>(i)] = geo.physical_gradient(g[static_cast<std::size_t>(i)]);
        const form::QpContext ctx{geo.map(quad.points[q]), quad.points[q], tab.values_at(q), grads, {}, {}};
        f.prepare(ctx);
        const double w = quad.weights[q] * vol;
        for (int i = 0; i < nt; ++i) be[static_cast<std::size_t>(i)] += w * f.eval(ctx, i, 0);
      }
      const auto rd = space.cell(c);
      for (int i = 0; i < nt; ++i) {
        const Index gi = rd[static_cast<std::size_t>(i)];
        const Rank o = space.scalar_owner[gi];
        if (mode == AssemblyMode::overlapped && o != r) continue;
        box[static_cast<std::size_t>(o)].emplace_back(gi, be[static_cast<std::size_t>(i)]);
      }
    }
  });
}

inline void consolidate_into(DistVector& b, std::vector<std::vector<std::vector<std::pair<Index, double>>>>& outbox) {
  const int n = b.n_ranks();
  for_each_rank(n, [&](Rank r) {
    auto& d = b.local(r);
    auto add_from = [&](int s) {
      for (const auto& [g, v] : outbox[static_cast<std::size_t>(s)][static_cast<std::size_t>(r)]) d[b.map().owner_local(g)] += v;
    };
    add_from(r);
    for (int s = 0; s < n; ++s)
      if (s != r) add_from(s);
  });
}

inline auto make_vector_outbox(int n) {
  return std::vector<std::vector<std::vector<std::pair<Index, double>>>>(
      static_cast<std::size_t>(n), std::vector<std::vector<std::pair<Index, double>>>(static_cast<std::size_t>(n)));
}

}  // namespace detail

/// b_i = sum over cells of the integral of form(psi_i). Unique mode.
template <form::LinearExpr Form>
DistVector assemble_vector(const Mesh& mesh, const Form& form, const DofMap& space, const QuadratureRule& quad,
                           AssemblyMode mode = AssemblyMode::standard) {
  detail::check_space(mesh, space);
  if (quad.dim != mesh.dim) throw FormStructureError("quadrature dimension does not match mesh");
  if (space.n_components != 1) throw FormStructureError("forms are assembled on scalar spaces");
  if (mode == AssemblyMode::overlapped) detail::check_overlap_coverage(space);
  auto outbox = detail::make_vector_outbox(space.n_ranks());
  detail::assemble_vector_into(outbox, mesh, form, space, quad, mode);
  DistVector b(space.unique_map);
  detail::consolidate_into(b, outbox);
  return b;
}

/// Adds the integral of form(psi_i) over boundary faces carrying one of
/// `markers`. Faces are integrated by the rank owning their cell.
template <form::LinearExpr Form>
void add_boundary_integral(DistVector& b, const Mesh& mesh, const Form& form, const DofMap& space,
                           std::span<const int> markers, const QuadratureRule& facet_quad) {
  detail::check_space(mesh, space);
  if (facet_quad.dim != mesh.dim - 1) throw FormStructureError("facet quadrature dimension mismatch");
  const FiniteElement& fe = space.element;
  const int d = mesh.dim;
  const double ref_measure = d == 2 ? 1.0 : 0.5;

  // Cell-reference points of the facet rule, per local face.
  std::vector<std::vector<Point>> ref_points(static_cast<std::size_t>(d + 1));
  std::vector<Tabulation> tabs;
  for (int f = 0; f <= d; ++f) {
    const auto lf = local_face(d, f);
    for (const auto& s : facet_quad.points) {
      std::array<double, 3> bary{};
      if (d == 2) {
        bary = {1.0 - s[0], s[0], 0.0};
      } else {
        bary = {1.0 - s[0] - s[1], s[0], s[1]};
      }
      Point p;
      for (int k = 0; k < d; ++k) p = p + bary[static_cast<std::size_t>(k)] * reference_vertex(d, lf[static_cast<std::size_t>(k)]);
      ref_points[static_cast<std::size_t>(f)].push_back(p);
    }
    tabs.push_back(tabulate(fe, ref_points[static_cast<std::size_t>(f)]));
  }

  const auto owners = boundary_face_owners(mesh);
  std::vector<int> sorted_markers(markers.begin(), markers.end());
  std::sort(sorted_markers.begin(), sorted_markers.end());
  const int n = space.n_ranks();
  const int nt = fe.n_local_dof();
  auto outbox = detail::make_vector_outbox(n);
  for_each_rank(n, [&](Rank r) {
    Form fm = form;
    auto& box = outbox[static_cast<std::size_t>(r)];
    std::vector<double> be(static_cast<std::size_t>(nt));
    std::vector<Vec3> grads(static_cast<std::size_t>(nt));
    for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
      if (!std::binary_search(sorted_markers.begin(), sorted_markers.end(), mesh.face_markers[f])) continue;
      const Index c = owners[f].cell;
      if (space.partition->owner[c] != r) continue;
      const int lf = owners[f].local_face;
      const CellGeometry geo(mesh, c);
      const double scale = face_measure(mesh, mesh.face(f)) / ref_measure;
      const auto& tab = tabs[static_cast<std::size_t>(lf)];
      std::fill(be.begin(), be.end(), 0.0);
      fm.bind_cell({c, r});
      for (std::size_t q = 0; q < facet_quad.size(); ++q) {
        const auto g = tab.gradients_at(q);
        for (int i = 0; i < nt; ++i) grads[static_cast<std::size_t>(i)] = geo.physical_gradient(g[static_cast<std::size_t>(i)]);
        const Point& ref = ref_points[static_cast<std::size_t>(lf)][q];
        const form::QpContext ctx{geo.map(ref), ref, tab.values_at(q), grads, {}, {}};
        fm.prepare(ctx);
        for (int i = 0; i < nt; ++i) be[static_cast<std::size_t>(i)] += facet_quad.weights[q] * scale * fm.eval(ctx, i, 0);
      }
      const auto rd = space.cell(c);
      for (int i = 0; i < nt; ++i) {
        const Index gi = rd[static_cast<std::size_t>(i)];
        box[static_cast<std::size_t>(space.scalar_owner[gi])].emplace_back(gi, be[static_cast<std::size_t>(i)]);
      }
    }
  });
  DistVector extra(space.unique_map);
  detail::consolidate_into(extra, outbox);
  axpy(b, 1.0, extra);
}

/// Nodal interpolation of fn at the DoF points. fn returns a double for
/// scalar spaces or a Vec3 whose first n_components entries are used.
template <class F>
DistVector interpolate(F&& fn, const DofMap& space) {
  DistVector out(space.unique_map);
  for_each_rank(space.n_ranks(), [&](Rank r) {
    const auto idx = space.unique(r);
    auto& d = out.local(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Index g = idx[k];
      const Index s = g % space.n_scalar;
      const int comp = static_cast<int>(g / space.n_scalar);
      const auto v = fn(space.dof_points[s]);
      if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Vec3>)
        d[k] = v[static_cast<std::size_t>(comp)];
      else
        d[k] = v;
    }
  });
  return out;
}

/// Diagonal (HRZ) lumped mass: on every cell the diagonal of the consistent
/// element mass matrix is rescaled to sum to the cell volume. For P1 this
/// equals row-sum lumping; for P2 it stays positive where row sums do not.
inline DistVector assemble_lumped_mass(const Mesh& mesh, const DofMap& scalar_space, const QuadratureRule& quad) {
  detail::check_space(mesh, scalar_space);
  if (scalar_space.n_components != 1) throw FormStructureError("lumped mass is assembled on a scalar space");
  const Tabulation tab = tabulate(scalar_space.element, quad.points);
  const int nt = tab.n_dof;
  const int n = scalar_space.n_ranks();
  auto outbox = detail::make_vector_outbox(n);
  for_each_rank(n, [&](Rank r) {
    auto& box = outbox[static_cast<std::size_t>(r)];
    std::vector<double> diag(static_cast<std::size_t>(nt));
    for (Index c : scalar_space.partition->owned_elements[static_cast<std::size_t>(r)]) {
      const double vol = cell_volume(mesh, c);
      std::fill(diag.begin(), diag.end(), 0.0);
      double total = 0.0;
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const auto phi = tab.values_at(q);
        for (int i = 0; i < nt; ++i) diag[static_cast<std::size_t>(i)] += quad.weights[q] * phi[static_cast<std::size_t>(i)] * phi[static_cast<std::size_t>(i)];
      }
      for (double v : diag) total += v;
      const auto rd = scalar_space.cell(c);
      for (int i = 0; i < nt; ++i) {
        const Index gi = rd[static_cast<std::size_t>(i)];
        box[static_cast<std::size_t>(scalar_space.scalar_owner[gi])].emplace_back(gi, diag[static_cast<std::size_t>(i)] * vol / total);
      }
    }
  });
  DistVector m(scalar_space.unique_map);
  detail::consolidate_into(m, outbox);
  return m;
}

/// Component-blocked copy of a scalar vector for an n-component space.
inline DistVector expand_components(const DistVector& scalar, const DofMap& vector_space) {
  const auto g = scalar.gather();
  std::vector<double> out(vector_space.global_size());
  for (int c = 0; c < vector_space.n_components; ++c)
    std::copy(g.begin(), g.end(), out.begin() + static_cast<std::ptrdiff_t>(static_cast<Index>(c) * vector_space.n_scalar));
  return DistVector::scatter(vector_space.unique_map, out);
}

/// blockdiag(A, ..., A) on an n-component space; A lives on the scalar space.
inline DistMatrix block_diagonal(const DistMatrix& scalar, const DofMap& vector_space) {
  std::vector<MatrixBlock> blocks;
  for (int c = 0; c < vector_space.n_components; ++c) {
    const Index off = static_cast<Index>(c) * vector_space.n_scalar;
    blocks.push_back({&scalar, off, off, 1.0});
  }
  return compose_blocks(vector_space.unique_map, vector_space.unique_map, blocks);
}

}  // namespace pfem
