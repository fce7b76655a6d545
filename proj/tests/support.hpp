#pragma once

// Helpers shared by the test suites.

#include <vector>

#include "pfem/pfem.hpp"

namespace pfem::test {

inline Mesh box_mesh(int dim, int nx, int ny = -1, int nz = -1) {
  BoxSpec b;
  b.dim = dim;
  b.subdivisions = {nx, ny < 0 ? nx : ny, dim == 3 ? (nz < 0 ? nx : nz) : 1};
  return generate_box(b);
}

/// Greedy partition with `halo` face layers; 1 rank gives the trivial one.
inline Partition make_partition(const Mesh& m, int n_ranks, int halo = 0) {
  const DualGraph g = build_dual_graph(m);
  Partition p = n_ranks == 1 ? trivial_partition(m.n_cells()) : partition_greedy(g, n_ranks);
  return halo > 0 ? add_halo(p, g, halo) : p;
}

/// Partition whose halo supports communication-free assembly on `fe`.
inline Partition overlapped_partition(const Mesh& m, int n_ranks, const FiniteElement& fe) {
  const DualGraph g = build_dual_graph(m);
  return halo_for_overlapped_assembly(m, add_halo(make_partition(m, n_ranks), g, 1), g, fe);
}

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const CsrMatrix& a) {
  Dense d(a.n_rows, std::vector<double>(a.n_cols, 0.0));
  for (Index i = 0; i < a.n_rows; ++i)
    for (Index k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) d[i][a.cols[k]] = a.vals[k];
  return d;
}

inline Dense to_dense(const DistMatrix& a) { return to_dense(a.gather()); }

inline double max_abs_diff(const Dense& a, const Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

inline double max_abs(const Dense& a) {
  double m = 0.0;
  for (const auto& row : a)
    for (double x : row) m = std::max(m, std::abs(x));
  return m;
}

/// Dense LU with partial pivoting; solves in place. Independent of the
/// library's local solvers.
inline std::vector<double> dense_solve(Dense a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

inline Dense dense_inverse(const Dense& a) {
  const std::size_t n = a.size();
  Dense inv(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    const auto col = dense_solve(a, e);
    for (std::size_t i = 0; i < n; ++i) inv[i][j] = col[i];
  }
  return inv;
}

/// Dense monolithic solve of [C G; D 0] [u; p] = [f; g]. For enclosed flow
/// the row of pressure DoF 0 becomes p_0 = 0.
inline std::pair<std::vector<double>, std::vector<double>> dense_saddle_solve(const SaddleSystem& sys) {
  const FlowSpace& fs = *sys.space;
  const Dense c = to_dense(sys.c), gr = to_dense(sys.grad()), d = to_dense(sys.div());
  const Index nu = c.size(), np = d.size();
  Dense k(nu + np, std::vector<double>(nu + np, 0.0));
  std::vector<double> rhs(nu + np, 0.0);
  const auto f = sys.f.gather(), g = sys.g.gather();
  for (Index i = 0; i < nu; ++i) {
    for (Index j = 0; j < nu; ++j) k[i][j] = c[i][j];
    for (Index j = 0; j < np; ++j) k[i][nu + j] = gr[i][j];
    rhs[i] = f[i];
  }
  for (Index i = 0; i < np; ++i) {
    for (Index j = 0; j < nu; ++j) k[nu + i][j] = d[i][j];
    rhs[nu + i] = g[i];
  }
  if (fs.enclosed) {
    std::fill(k[nu].begin(), k[nu].end(), 0.0);
    k[nu][nu] = 1.0;
    rhs[nu] = 0.0;
  }
  const auto x = dense_solve(std::move(k), std::move(rhs));
  return {std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nu)),
          std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(nu), x.end())};
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm2_diff(const DistVector& a, const DistVector& b) {
  DistVector d = a;
  axpy(d, -1.0, b);
  return norm2(d);
}

/// Observed order log2(e_k / e_{k+1}) for successive halvings.
inline std::vector<double> observed_orders(const std::vector<double>& e) {
  std::vector<double> o;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) o.push_back(std::log2(e[k] / e[k + 1]));
  return o;
}

}  // namespace pfem::test
