#pragma once

/// \file schwarz.hpp
/// \brief Preconditioners: identity, Jacobi and algebraic additive Schwarz
///   P^{-1} = sum_i R_i^T A_i^{-1} R_i,  A_i = R_i A R_i^T.

#include <chrono>
#include <memory>
#include <string>

#include "local_solvers.hpp"
#include "sparse.hpp"

namespace pfem {

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  /// z = P^{-1} r. Both vectors live on the operator's row map.
  virtual void apply(const DistVector& r, DistVector& z) const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  void apply(const DistVector& r, DistVector& z) const override {
    for (int k = 0; k < r.n_ranks(); ++k) z.local(k) = r.local(k);
  }
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const DistMatrix& a) : inv_diag_(a.diagonal()) {
    for (int r = 0; r < inv_diag_.n_ranks(); ++r)
      for (double& d : inv_diag_.local(r)) d = std::abs(d) > 1e-300 ? 1.0 / d : 1.0;
  }
  void apply(const DistVector& r, DistVector& z) const override {
    for_each_rank(r.n_ranks(), [&](Rank k) {
      const auto& rr = r.local(k);
      const auto& d = inv_diag_.local(k);
      auto& zz = z.local(k);
      for (std::size_t i = 0; i < rr.size(); ++i) zz[i] = d[i] * rr[i];
    });
  }

 private:
  DistVector inv_diag_;
};

/// One subdomain per rank. R_i starts from the rows rank i owns and grows by
/// `overlap` layers through the matrix graph.
class SchwarzPreconditioner final : public Preconditioner {
 public:
  SchwarzPreconditioner(const DistMatrix& a, int overlap, SubdomainSolverKind kind) : row_map_(a.row_map_ptr()) {
    if (a.n_rows() != a.n_cols()) throw ConfigError("Schwarz preconditioner needs a square matrix");
    if (overlap < 0) throw ConfigError("Schwarz overlap must be >= 0");
    if (!row_map_->same_layout(a.col_map())) throw ConfigError("Schwarz preconditioner needs matching row/column maps");
    const int n = a.n_ranks();
    sets_.resize(static_cast<std::size_t>(n));
    solvers_.resize(static_cast<std::size_t>(n));
    factor_seconds_.assign(static_cast<std::size_t>(n), 0.0);
    const RankMap& rm = a.row_map();
    auto row_of = [&](Index g) {
      const auto& m = a.local(rm.owner(g));
      const Index li = rm.owner_local(g);
      return std::pair{m.row_cols(li), m.row_vals(li)};
    };
    for_each_rank(n, [&](Rank r) {
      auto& set = sets_[static_cast<std::size_t>(r)];
      const auto own = rm.indices(r);
      set.assign(own.begin(), own.end());
      std::vector<char> in(a.n_rows(), 0);
      for (Index g : set) in[g] = 1;
      std::vector<Index> frontier = set;
      for (int layer = 0; layer < overlap; ++layer) {
        std::vector<Index> next;
        for (Index g : frontier)
          for (Index j : row_of(g).first)
            if (!in[j]) {
              in[j] = 1;
              next.push_back(j);
            }
        set.insert(set.end(), next.begin(), next.end());
        frontier = std::move(next);
      }
      std::sort(set.begin(), set.end());

      CsrMatrix ai;
      ai.n_rows = ai.n_cols = set.size();
      for (Index g : set) {
        const auto [cols, vals] = row_of(g);
        for (std::size_t k = 0; k < cols.size(); ++k) {
          if (!in[cols[k]]) continue;
          ai.cols.push_back(static_cast<Index>(std::lower_bound(set.begin(), set.end(), cols[k]) - set.begin()));
          ai.vals.push_back(vals[k]);
        }
        ai.row_ptr.push_back(ai.cols.size());
      }
      const auto t0 = std::chrono::steady_clock::now();
      solvers_[static_cast<std::size_t>(r)] = make_local_solver(kind, ai, "subdomain " + std::to_string(r));
      factor_seconds_[static_cast<std::size_t>(r)] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
  }

  int n_subdomains() const { return static_cast<int>(sets_.size()); }
  std::span<const Index> subdomain(int i) const { return sets_[static_cast<std::size_t>(i)]; }
  double factorization_seconds(int i) const { return factor_seconds_[static_cast<std::size_t>(i)]; }

  /// Restriction gather, local solves, then an extension phase where every
  /// owner sums incoming pieces in increasing source order.
  void apply(const DistVector& r, DistVector& z) const override {
    const RankMap& rm = *row_map_;
    const int n = n_subdomains();
    std::vector<std::vector<double>> local(static_cast<std::size_t>(n));
    for_each_rank(n, [&](Rank s) {
      const auto& set = sets_[static_cast<std::size_t>(s)];
      std::vector<double> rhs(set.size());
      for (std::size_t k = 0; k < set.size(); ++k) rhs[k] = r.local(rm.owner(set[k]))[rm.owner_local(set[k])];
      auto& x = local[static_cast<std::size_t>(s)];
      x.resize(set.size());
      solvers_[static_cast<std::size_t>(s)]->solve(rhs, x);
    });
    for_each_rank(n, [&](Rank t) {
      auto& zz = z.local(t);
      std::fill(zz.begin(), zz.end(), 0.0);
      for (int s = 0; s < n; ++s) {
        const auto& set = sets_[static_cast<std::size_t>(s)];
        const auto& x = local[static_cast<std::size_t>(s)];
        for (std::size_t k = 0; k < set.size(); ++k)
          if (rm.owner(set[k]) == t) zz[rm.owner_local(set[k])] += x[k];
      }
    });
  }

 private:
  RankMapPtr row_map_;
  std::vector<std::vector<Index>> sets_;
  std::vector<std::unique_ptr<LocalSolver>> solvers_;
  std::vector<double> factor_seconds_;
};

}  // namespace pfem
