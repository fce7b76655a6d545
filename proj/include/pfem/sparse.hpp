#pragma once

/// \file sparse.hpp
/// \brief CSR storage, matrix graphs and the row-partitioned DistMatrix.

#include <ostream>
#include <tuple>

#include "distributed.hpp"

namespace pfem {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted and unique per row.
struct CsrMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Index> row_ptr{0};
  std::vector<Index> cols;
  std::vector<double> vals;

  Index nnz() const { return cols.size(); }

  std::span<const Index> row_cols(Index i) const { return {cols.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]}; }
  std::span<const double> row_vals(Index i) const { return {vals.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]}; }
  std::span<double> row_vals(Index i) { return {vals.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]}; }

  /// Position of (i, j) in vals, or -1.
  std::ptrdiff_t find(Index i, Index j) const {
    const auto b = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto e = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(b, e, j);
    return it != e && *it == j ? it - cols.begin() : -1;
  }

  double operator()(Index i, Index j) const {
    const auto p = find(i, j);
    return p < 0 ? 0.0 : vals[static_cast<std::size_t>(p)];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (Index i = 0; i < n_rows; ++i) {
      double s = 0.0;
      for (Index k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += vals[k] * x[cols[k]];
      y[i] = s;
    }
  }

  /// Duplicates are summed in their order of appearance (stable sort), so
  /// the result is reproducible for a given triplet sequence.
  static CsrMatrix from_triplets(Index n_rows, Index n_cols, std::vector<Triplet> t) {
    std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr.assign(n_rows + 1, 0);
    for (std::size_t k = 0; k < t.size();) {
      std::size_t e = k;
      double s = 0.0;
      while (e < t.size() && t[e].row == t[k].row && t[e].col == t[k].col) s += t[e++].value;
      if (t[k].row >= n_rows || t[k].col >= n_cols) throw InvariantViolation("triplet out of range");
      m.cols.push_back(t[k].col);
      m.vals.push_back(s);
      ++m.row_ptr[t[k].row + 1];
      k = e;
    }
    for (Index i = 0; i < n_rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
  }

  static CsrMatrix from_pattern(Index n_rows, Index n_cols, std::vector<Index> row_ptr, std::vector<Index> cols) {
    CsrMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_ptr = std::move(row_ptr);
    m.cols = std::move(cols);
    m.vals.assign(m.cols.size(), 0.0);
    return m;
  }

  static CsrMatrix identity(Index n) {
    CsrMatrix m;
    m.n_rows = m.n_cols = n;
    m.row_ptr.resize(n + 1);
    for (Index i = 0; i <= n; ++i) m.row_ptr[i] = i;
    m.cols.resize(n);
    std::iota(m.cols.begin(), m.cols.end(), Index{0});
    m.vals.assign(n, 1.0);
    return m;
  }
};

/// Row-partitioned sparsity pattern: per rank, the sorted global columns of
/// each owned row (owned rows in row-map order).
struct MatrixGraph {
  RankMapPtr row_map;
  RankMapPtr col_map;
  std::vector<std::vector<Index>> row_ptr;
  std::vector<std::vector<Index>> cols;

  Index nnz() const {
    Index n = 0;
    for (const auto& c : cols) n += c.size();
    return n;
  }
};

/// Sparse matrix whose rows are distributed by a unique map; columns carry
/// global indices from a unique column (domain) map.
class DistMatrix {
 public:
  DistMatrix() = default;

  DistMatrix(RankMapPtr row_map, RankMapPtr col_map, std::vector<CsrMatrix> local)
      : row_map_(std::move(row_map)), col_map_(std::move(col_map)), local_(std::move(local)) {
    if (!row_map_->is_unique() || !col_map_->is_unique()) throw InvariantViolation("DistMatrix needs unique maps");
    if (static_cast<int>(local_.size()) != row_map_->n_ranks() || row_map_->n_ranks() != col_map_->n_ranks())
      throw InvariantViolation("DistMatrix rank count mismatch");
    build_import_plan();
  }

  /// Zero matrix with the pattern of a precomputed graph.
  static DistMatrix from_graph(const MatrixGraph& g) {
    std::vector<CsrMatrix> local;
    for (int r = 0; r < g.row_map->n_ranks(); ++r)
      local.push_back(CsrMatrix::from_pattern(g.row_map->local_size(r), g.col_map->global_size(),
                                              g.row_ptr[static_cast<std::size_t>(r)], g.cols[static_cast<std::size_t>(r)]));
    return DistMatrix(g.row_map, g.col_map, std::move(local));
  }

  /// Distributes a global CSR by rows.
  static DistMatrix scatter(RankMapPtr row_map, RankMapPtr col_map, const CsrMatrix& global) {
    std::vector<CsrMatrix> local;
    for (int r = 0; r < row_map->n_ranks(); ++r) {
      CsrMatrix m;
      m.n_rows = row_map->local_size(r);
      m.n_cols = global.n_cols;
      for (Index g : row_map->indices(r)) {
        for (Index k = global.row_ptr[g]; k < global.row_ptr[g + 1]; ++k) {
          m.cols.push_back(global.cols[k]);
          m.vals.push_back(global.vals[k]);
        }
        m.row_ptr.push_back(m.cols.size());
      }
      local.push_back(std::move(m));
    }
    return DistMatrix(std::move(row_map), std::move(col_map), std::move(local));
  }

  const RankMap& row_map() const { return *row_map_; }
  const RankMap& col_map() const { return *col_map_; }
  const RankMapPtr& row_map_ptr() const { return row_map_; }
  const RankMapPtr& col_map_ptr() const { return col_map_; }
  int n_ranks() const { return row_map_->n_ranks(); }
  Index n_rows() const { return row_map_->global_size(); }
  Index n_cols() const { return col_map_->global_size(); }

  const CsrMatrix& local(Rank r) const { return local_[static_cast<std::size_t>(r)]; }
  /// Values may be edited in place; the pattern is fixed.
  std::span<double> values(Rank r) { return local_[static_cast<std::size_t>(r)].vals; }

  Index nnz() const {
    Index n = 0;
    for (const auto& m : local_) n += m.nnz();
    return n;
  }

  /// y = A x. Off-rank entries of x are fetched in one import phase before
  /// the local products.
  void apply(const DistVector& x, DistVector& y) const {
    if (x.size() != n_cols() || y.size() != n_rows()) throw InvariantViolation("spmv dimension mismatch");
    for_each_rank(n_ranks(), [&](Rank r) {
      const auto& plan = plans_[static_cast<std::size_t>(r)];
      const auto& own = x.local(r);
      std::vector<double> ext(own.size() + plan.ghosts.size());
      std::copy(own.begin(), own.end(), ext.begin());
      for (std::size_t k = 0; k < plan.ghosts.size(); ++k)
        ext[own.size() + k] = x.local(col_map_->owner(plan.ghosts[k]))[col_map_->owner_local(plan.ghosts[k])];
      const auto& m = local_[static_cast<std::size_t>(r)];
      auto& yy = y.local(r);
      for (Index i = 0; i < m.n_rows; ++i) {
        double s = 0.0;
        for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) s += m.vals[k] * ext[plan.ext_cols[k]];
        yy[i] = s;
      }
    });
  }

  DistVector apply(const DistVector& x) const {
    DistVector y(row_map_);
    apply(x, y);
    return y;
  }

  /// Global CSR on the coordinator.
  CsrMatrix gather() const {
    std::vector<Triplet> t;
    for (int r = 0; r < n_ranks(); ++r) {
      const auto rows = row_map_->indices(r);
      const auto& m = local(r);
      for (Index i = 0; i < m.n_rows; ++i)
        for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) t.push_back({rows[i], m.cols[k], m.vals[k]});
    }
    return CsrMatrix::from_triplets(n_rows(), n_cols(), std::move(t));
  }

  /// Diagonal entries as a vector over the row map (square matrices).
  DistVector diagonal() const {
    DistVector d(row_map_);
    for_each_rank(n_ranks(), [&](Rank r) {
      const auto rows = row_map_->indices(r);
      const auto& m = local(r);
      for (Index i = 0; i < m.n_rows; ++i) d.local(r)[i] = m(i, rows[i]);
    });
    return d;
  }

 private:
  struct ImportPlan {
    std::vector<Index> ghosts;    // sorted global columns owned elsewhere
    std::vector<Index> ext_cols;  // per stored entry: position in [own | ghosts]
  };

  void build_import_plan() {
    plans_.resize(local_.size());
    for (int r = 0; r < n_ranks(); ++r) {
      auto& plan = plans_[static_cast<std::size_t>(r)];
      const auto& m = local_[static_cast<std::size_t>(r)];
      for (Index j : m.cols) {
        if (j >= col_map_->global_size()) throw InvariantViolation("column index out of range");
        if (col_map_->owner(j) != r) plan.ghosts.push_back(j);
      }
      std::sort(plan.ghosts.begin(), plan.ghosts.end());
      plan.ghosts.erase(std::unique(plan.ghosts.begin(), plan.ghosts.end()), plan.ghosts.end());
      const Index n_own = col_map_->local_size(r);
      plan.ext_cols.resize(m.cols.size());
      for (std::size_t k = 0; k < m.cols.size(); ++k) {
        const Index j = m.cols[k];
        if (col_map_->owner(j) == r) {
          plan.ext_cols[k] = col_map_->owner_local(j);
        } else {
          plan.ext_cols[k] =
              n_own + static_cast<Index>(std::lower_bound(plan.ghosts.begin(), plan.ghosts.end(), j) - plan.ghosts.begin());
        }
      }
    }
  }

  RankMapPtr row_map_;
  RankMapPtr col_map_;
  std::vector<CsrMatrix> local_;
  std::vector<ImportPlan> plans_;
};

namespace detail {
/// Routes triplets to the owners of their rows and builds the per-rank CSR.
/// Owners take their own triplets first, then incoming ones by increasing
/// source rank.
inline DistMatrix matrix_from_rank_triplets(RankMapPtr row_map, RankMapPtr col_map,
                                            std::vector<std::vector<Triplet>> per_source) {
  const int n = row_map->n_ranks();
  std::vector<std::vector<Triplet>> inbox(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s)
    for (const auto& t : per_source[static_cast<std::size_t>(s)])
      inbox[static_cast<std::size_t>(row_map->owner(t.row))].push_back(t);
  std::vector<CsrMatrix> local(static_cast<std::size_t>(n));
  for_each_rank(n, [&](Rank r) {
    auto& in = inbox[static_cast<std::size_t>(r)];
    for (auto& t : in) t.row = row_map->owner_local(t.row);
    local[static_cast<std::size_t>(r)] = CsrMatrix::from_triplets(row_map->local_size(r), col_map->global_size(), std::move(in));
  });
  return DistMatrix(std::move(row_map), std::move(col_map), std::move(local));
}
}  // namespace detail

/// diag(d) with d's layout for rows and columns.
inline DistMatrix diagonal_matrix(const DistVector& d) {
  const RankMap& m = d.map();
  std::vector<CsrMatrix> local(static_cast<std::size_t>(d.n_ranks()));
  for_each_rank(d.n_ranks(), [&](Rank r) {
    const auto rows = m.indices(r);
    const auto& v = d.local(r);
    auto& a = local[static_cast<std::size_t>(r)];
    a.n_rows = rows.size();
    a.n_cols = m.global_size();
    a.row_ptr.resize(rows.size() + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      a.row_ptr[i + 1] = i + 1;
      a.cols.push_back(rows[i]);
      a.vals.push_back(v[i]);
    }
  });
  return DistMatrix(d.map_ptr(), d.map_ptr(), std::move(local));
}

/// A^T distributed by A's column map.
inline DistMatrix transpose(const DistMatrix& a) {
  std::vector<std::vector<Triplet>> out(static_cast<std::size_t>(a.n_ranks()));
  for_each_rank(a.n_ranks(), [&](Rank r) {
    const auto rows = a.row_map().indices(r);
    const auto& m = a.local(r);
    for (Index i = 0; i < m.n_rows; ++i)
      for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
        out[static_cast<std::size_t>(r)].push_back({m.cols[k], rows[i], m.vals[k]});
  });
  return detail::matrix_from_rank_triplets(a.col_map_ptr(), a.row_map_ptr(), std::move(out));
}

/// A * diag(d) * B. Rows of B referenced by rank r are fetched from their
/// owners first; products are accumulated in increasing middle index.
inline DistMatrix multiply(const DistMatrix& a, const DistVector& d, const DistMatrix& b) {
  if (a.n_cols() != b.n_rows() || d.size() != a.n_cols()) throw InvariantViolation("multiply dimension mismatch");
  const RankMap& bm = b.row_map();
  std::vector<CsrMatrix> local(static_cast<std::size_t>(a.n_ranks()));
  for_each_rank(a.n_ranks(), [&](Rank r) {
    const auto& m = a.local(r);
    CsrMatrix out;
    out.n_rows = m.n_rows;
    out.n_cols = b.n_cols();
    std::vector<double> acc(b.n_cols(), 0.0);
    std::vector<char> used(b.n_cols(), 0);
    std::vector<Index> touched;
    for (Index i = 0; i < m.n_rows; ++i) {
      touched.clear();
      for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
        const Index mid = m.cols[k];
        const double f = m.vals[k] * d.at(mid);
        const auto& brow = b.local(bm.owner(mid));
        const Index li = bm.owner_local(mid);
        for (Index q = brow.row_ptr[li]; q < brow.row_ptr[li + 1]; ++q) {
          const Index j = brow.cols[q];
          if (!used[j]) {
            used[j] = 1;
            touched.push_back(j);
          }
          acc[j] += f * brow.vals[q];
        }
      }
      std::sort(touched.begin(), touched.end());
      for (Index j : touched) {
        out.cols.push_back(j);
        out.vals.push_back(acc[j]);
        acc[j] = 0.0;
        used[j] = 0;
      }
      out.row_ptr.push_back(out.cols.size());
    }
    local[static_cast<std::size_t>(r)] = std::move(out);
  });
  return DistMatrix(a.row_map_ptr(), b.col_map_ptr(), std::move(local));
}

/// Places blocks into a larger matrix: entry (i, j) of block k lands at
/// (i + row_offset_k, j + col_offset_k). Target rows must be owned by the
/// same rank as the source rows.
struct MatrixBlock {
  const DistMatrix* matrix;
  Index row_offset;
  Index col_offset;
  double scale = 1.0;
};

inline DistMatrix compose_blocks(RankMapPtr row_map, RankMapPtr col_map, const std::vector<MatrixBlock>& blocks) {
  std::vector<std::vector<Triplet>> per_rank(static_cast<std::size_t>(row_map->n_ranks()));
  for (const auto& blk : blocks) {
    for (int r = 0; r < blk.matrix->n_ranks(); ++r) {
      const auto rows = blk.matrix->row_map().indices(r);
      const auto& m = blk.matrix->local(r);
      for (Index i = 0; i < m.n_rows; ++i) {
        const Index gi = rows[i] + blk.row_offset;
        if (row_map->owner(gi) != r) throw InvariantViolation("block row changes owner");
        for (Index k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k)
          per_rank[static_cast<std::size_t>(r)].push_back({gi, m.cols[k] + blk.col_offset, blk.scale * m.vals[k]});
      }
    }
  }
  return detail::matrix_from_rank_triplets(std::move(row_map), std::move(col_map), std::move(per_rank));
}

/// A + alpha * B on the union pattern.
inline DistMatrix add(const DistMatrix& a, double alpha, const DistMatrix& b) {
  return compose_blocks(a.row_map_ptr(), a.col_map_ptr(), {{&a, 0, 0, 1.0}, {&b, 0, 0, alpha}});
}

/// Matrix Market coordinate export (1-based), for debugging.
inline void write_matrix_market(const DistMatrix& a, std::ostream& out) {
  const CsrMatrix g = a.gather();
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << g.n_rows << ' ' << g.n_cols << ' ' << g.nnz() << '\n';
  out.precision(17);
  for (Index i = 0; i < g.n_rows; ++i)
    for (Index k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) out << i + 1 << ' ' << g.cols[k] + 1 << ' ' << g.vals[k] << '\n';
}

}  // namespace pfem
