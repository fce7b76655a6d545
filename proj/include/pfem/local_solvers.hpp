#pragma once

/// \file local_solvers.hpp
/// \brief Rank-local factorizations used as subdomain solvers: dense LU with
/// partial pivoting, sparse LU (Eigen) and ILU(0).

#include <memory>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "sparse.hpp"

namespace pfem {

/// Solves with a factored square matrix.
class LocalSolver {
 public:
  virtual ~LocalSolver() = default;
  virtual void solve(std::span<const double> rhs, std::span<double> x) const = 0;
  virtual Index size() const = 0;
};

/// Row-major dense LU with partial pivoting.
class DenseLU final : public LocalSolver {
 public:
  explicit DenseLU(const CsrMatrix& a, const std::string& label = "matrix") : n_(a.n_rows), lu_(n_ * n_, 0.0), perm_(n_) {
    if (a.n_rows != a.n_cols) throw FactorizationError(label + ": dense LU needs a square matrix");
    for (Index i = 0; i < n_; ++i)
      for (Index k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) lu_[i * n_ + a.cols[k]] = a.vals[k];
    factor(label);
  }

  DenseLU(Index n, std::vector<double> row_major, const std::string& label = "matrix")
      : n_(n), lu_(std::move(row_major)), perm_(n) {
    factor(label);
  }

  Index size() const override { return n_; }

  void solve(std::span<const double> rhs, std::span<double> x) const override {
    std::vector<double> y(n_);
    for (Index i = 0; i < n_; ++i) y[i] = rhs[perm_[i]];
    for (Index i = 0; i < n_; ++i)
      for (Index k = 0; k < i; ++k) y[i] -= lu_[i * n_ + k] * y[k];
    for (Index ii = n_; ii-- > 0;) {
      for (Index k = ii + 1; k < n_; ++k) y[ii] -= lu_[ii * n_ + k] * y[k];
      y[ii] /= lu_[ii * n_ + ii];
    }
    std::copy(y.begin(), y.end(), x.begin());
  }

 private:
  void factor(const std::string& label) {
    std::iota(perm_.begin(), perm_.end(), Index{0});
    double scale = 0.0;
    for (double v : lu_) scale = std::max(scale, std::abs(v));
    for (Index k = 0; k < n_; ++k) {
      Index p = k;
      for (Index i = k + 1; i < n_; ++i)
        if (std::abs(lu_[i * n_ + k]) > std::abs(lu_[p * n_ + k])) p = i;
      if (!(std::abs(lu_[p * n_ + k]) > 1e-14 * scale))
        throw FactorizationError(label + " is singular (zero pivot in column " + std::to_string(k) + ")");
      if (p != k) {
        for (Index j = 0; j < n_; ++j) std::swap(lu_[k * n_ + j], lu_[p * n_ + j]);
        std::swap(perm_[k], perm_[p]);
      }
      const double piv = lu_[k * n_ + k];
      for (Index i = k + 1; i < n_; ++i) {
        const double f = lu_[i * n_ + k] / piv;
        lu_[i * n_ + k] = f;
        if (f == 0.0) continue;
        for (Index j = k + 1; j < n_; ++j) lu_[i * n_ + j] -= f * lu_[k * n_ + j];
      }
    }
  }

  Index n_;
  std::vector<double> lu_;
  std::vector<Index> perm_;
};

/// Sparse LU with COLAMD ordering, backed by Eigen::SparseLU.
class SparseLU final : public LocalSolver {
 public:
  explicit SparseLU(const CsrMatrix& a, const std::string& label = "matrix") : n_(a.n_rows) {
    if (a.n_rows != a.n_cols) throw FactorizationError(label + ": sparse LU needs a square matrix");
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(a.nnz());
    for (Index i = 0; i < a.n_rows; ++i)
      for (Index k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        t.emplace_back(static_cast<int>(i), static_cast<int>(a.cols[k]), a.vals[k]);
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(m);
    lu_->factorize(m);
    if (lu_->info() != Eigen::Success) throw FactorizationError(label + " is singular (sparse LU failed)");
  }

  Index size() const override { return n_; }

  void solve(std::span<const double> rhs, std::span<double> x) const override {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n_));
    Eigen::Map<Eigen::VectorXd> out(x.data(), static_cast<Eigen::Index>(n_));
    out = lu_->solve(b);
  }

 private:
  Index n_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

/// ILU(0): L and U share the pattern of A. A zero (or tiny) pivot is replaced
/// by +-1e-12 keeping its sign, with a warning.
class Ilu0 final : public LocalSolver {
 public:
  explicit Ilu0(const CsrMatrix& a, const std::string& label = "matrix") : f_(a) {
    if (a.n_rows != a.n_cols) throw PatternError(label + ": ILU(0) needs a square matrix");
    const Index n = f_.n_rows;
    diag_.resize(n);
    for (Index i = 0; i < n; ++i) {
      const auto p = f_.find(i, i);
      if (p < 0) throw PatternError(label + ": structurally missing diagonal in row " + std::to_string(i));
      diag_[i] = static_cast<Index>(p);
    }
    std::vector<std::ptrdiff_t> pos(n, -1);
    for (Index i = 0; i < n; ++i) {
      for (Index k = f_.row_ptr[i]; k < f_.row_ptr[i + 1]; ++k) pos[f_.cols[k]] = static_cast<std::ptrdiff_t>(k);
      for (Index k = f_.row_ptr[i]; k < f_.row_ptr[i + 1] && f_.cols[k] < i; ++k) {
        const Index col = f_.cols[k];
        f_.vals[k] /= f_.vals[diag_[col]];
        const double lik = f_.vals[k];
        for (Index q = diag_[col] + 1; q < f_.row_ptr[col + 1]; ++q) {
          const auto p = pos[f_.cols[q]];
          if (p >= 0) f_.vals[static_cast<std::size_t>(p)] -= lik * f_.vals[q];
        }
      }
      double& d = f_.vals[diag_[i]];
      if (std::abs(d) < 1e-12) {
        log().warn("ILU(0) on {}: pivot {} in row {} replaced by a 1e-12 shift", label, d, i);
        d = std::signbit(d) ? -1e-12 : 1e-12;
      }
      for (Index k = f_.row_ptr[i]; k < f_.row_ptr[i + 1]; ++k) pos[f_.cols[k]] = -1;
    }
  }

  Index size() const override { return f_.n_rows; }

  void solve(std::span<const double> rhs, std::span<double> x) const override {
    const Index n = f_.n_rows;
    std::vector<double> y(rhs.begin(), rhs.end());
    for (Index i = 0; i < n; ++i)
      for (Index k = f_.row_ptr[i]; k < diag_[i]; ++k) y[i] -= f_.vals[k] * y[f_.cols[k]];
    for (Index i = n; i-- > 0;) {
      for (Index k = diag_[i] + 1; k < f_.row_ptr[i + 1]; ++k) y[i] -= f_.vals[k] * y[f_.cols[k]];
      y[i] /= f_.vals[diag_[i]];
    }
    std::copy(y.begin(), y.end(), x.begin());
  }

  const CsrMatrix& factors() const { return f_; }

 private:
  CsrMatrix f_;
  std::vector<Index> diag_;
};

enum class SubdomainSolverKind { dense_lu, sparse_lu, ilu0 };

inline std::unique_ptr<LocalSolver> make_local_solver(SubdomainSolverKind kind, const CsrMatrix& a,
                                                      const std::string& label) {
  switch (kind) {
    case SubdomainSolverKind::dense_lu: return std::make_unique<DenseLU>(a, label);
    case SubdomainSolverKind::sparse_lu: return std::make_unique<SparseLU>(a, label);
    case SubdomainSolverKind::ilu0: return std::make_unique<Ilu0>(a, label);
  }
  throw ConfigError("unknown subdomain solver");
}

}  // namespace pfem
