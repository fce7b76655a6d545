#pragma once

/// \file krylov.hpp
/// \brief Preconditioned CG, restarted GMRES and BiCGStab over any operator
/// with `apply(x, y)`, plus the SolverConfig-driven front end.

#include <random>
#include <string>

#include "schwarz.hpp"

namespace pfem {

template <class Op>
concept LinearOperator = requires(const Op& op, const DistVector& x, DistVector& y) { op.apply(x, y); };

enum class KrylovMethod { cg, gmres, bicgstab };
enum class PreconditionerKind { none, jacobi, ilu0, schwarz };

struct SolverConfig {
  KrylovMethod method = KrylovMethod::gmres;
  double tol = 1e-10;
  int max_iters = 1000;
  int restart = 50;
  PreconditionerKind preconditioner = PreconditionerKind::schwarz;
  int overlap = 1;
  SubdomainSolverKind subdomain_solver = SubdomainSolverKind::sparse_lu;

  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("solver tol must be > 0");
    if (restart < 1) throw ConfigError("gmres restart must be >= 1");
    if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
    if (overlap < 0) throw ConfigError("schwarz overlap must be >= 0");
  }
};

struct SolverStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Relative residual estimate after each iteration (index 0: initial).
  std::vector<double> history;
};

inline KrylovMethod parse_krylov_method(const std::string& s) {
  if (s == "cg") return KrylovMethod::cg;
  if (s == "gmres") return KrylovMethod::gmres;
  if (s == "bicgstab") return KrylovMethod::bicgstab;
  throw ConfigError("unknown solver method '" + s + "'");
}

inline PreconditionerKind parse_preconditioner(const std::string& s) {
  if (s == "none") return PreconditionerKind::none;
  if (s == "jacobi") return PreconditionerKind::jacobi;
  if (s == "ilu0") return PreconditionerKind::ilu0;
  if (s == "schwarz") return PreconditionerKind::schwarz;
  throw ConfigError("unknown preconditioner '" + s + "'");
}

inline SubdomainSolverKind parse_subdomain_solver(const std::string& s) {
  if (s == "dense-lu" || s == "dense_lu") return SubdomainSolverKind::dense_lu;
  if (s == "sparse-lu" || s == "sparse_lu" || s == "lu") return SubdomainSolverKind::sparse_lu;
  if (s == "ilu0" || s == "ilu") return SubdomainSolverKind::ilu0;
  throw ConfigError("unknown subdomain solver '" + s + "'");
}

/// ILU(0) is Schwarz without overlap and ILU(0) local solves.
inline std::unique_ptr<Preconditioner> make_preconditioner(const DistMatrix& a, const SolverConfig& cfg) {
  switch (cfg.preconditioner) {
    case PreconditionerKind::none: return std::make_unique<IdentityPreconditioner>();
    case PreconditionerKind::jacobi: return std::make_unique<JacobiPreconditioner>(a);
    case PreconditionerKind::ilu0: return std::make_unique<SchwarzPreconditioner>(a, 0, SubdomainSolverKind::ilu0);
    case PreconditionerKind::schwarz:
      return std::make_unique<SchwarzPreconditioner>(a, cfg.overlap, cfg.subdomain_solver);
  }
  throw ConfigError("unknown preconditioner");
}

namespace detail {
inline void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) throw SolverDivergence(std::string(where) + ": non-finite residual");
}

inline DistVector residual(const auto& a, const DistVector& b, const DistVector& x) {
  DistVector r(b.map_ptr());
  a.apply(x, r);
  axpby(r, 1.0, b, -1.0);
  return r;
}
}  // namespace detail

/// Preconditioned conjugate gradients. History holds ||r_k|| / ||b||.
template <LinearOperator Op, class Prec>
SolverStats cg(const Op& a, const DistVector& b, DistVector& x, const Prec& m, double tol, int max_iters) {
  SolverStats st;
  const double bn = norm2(b);
  detail::check_finite(bn, "cg");
  if (bn == 0.0) {
    fill(x, 0.0);
    st.converged = true;
    st.history.push_back(0.0);
    return st;
  }
  DistVector r = detail::residual(a, b, x);
  double rel = norm2(r) / bn;
  st.history.push_back(rel);
  if (rel <= tol) {
    st.relative_residual = rel;
    st.converged = true;
    return st;
  }
  DistVector z(b.map_ptr()), p(b.map_ptr()), q(b.map_ptr());
  m.apply(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iters; ++it) {
    a.apply(p, q);
    const double pq = dot(p, q);
    detail::check_finite(pq, "cg");
    if (pq <= 0.0) {
      log().warn("cg: non-positive curvature {} at iteration {}", pq, it);
      break;
    }
    const double alpha = rz / pq;
    axpy(x, alpha, p);
    axpy(r, -alpha, q);
    rel = norm2(r) / bn;
    detail::check_finite(rel, "cg");
    st.iterations = it;
    st.history.push_back(rel);
    if (rel <= tol) break;
    m.apply(r, z);
    const double rz_new = dot(r, z);
    axpby(p, 1.0, z, rz_new / rz);
    rz = rz_new;
  }
  st.relative_residual = norm2(detail::residual(a, b, x)) / bn;
  st.converged = st.relative_residual <= tol * (1.0 + 1e-6) || rel <= tol;
  return st;
}

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt; a second
/// orthogonalization pass runs when max_i |<w, v_i>| / ||w|| exceeds 1e-8.
/// Convergence is confirmed on the true residual at the end of each cycle.
template <LinearOperator Op, class Prec>
SolverStats gmres(const Op& a, const DistVector& b, DistVector& x, const Prec& m, double tol, int max_iters,
                  int restart) {
  SolverStats st;
  const double bn = norm2(b);
  detail::check_finite(bn, "gmres");
  if (bn == 0.0) {
    fill(x, 0.0);
    st.converged = true;
    st.history.push_back(0.0);
    return st;
  }
  const auto map = b.map_ptr();
  DistVector r = detail::residual(a, b, x);
  double beta = norm2(r);
  st.history.push_back(beta / bn);
  const int mr = std::max(1, restart);
  DistVector z(map), w(map);
  while (true) {
    st.relative_residual = beta / bn;
    detail::check_finite(st.relative_residual, "gmres");
    if (st.relative_residual <= tol) {
      st.converged = true;
      return st;
    }
    if (st.iterations >= max_iters) return st;
    std::vector<DistVector> v;
    v.reserve(static_cast<std::size_t>(mr) + 1);
    v.push_back(r);
    scale(v[0], 1.0 / beta);
    std::vector<std::vector<double>> h(static_cast<std::size_t>(mr), std::vector<double>(static_cast<std::size_t>(mr) + 1, 0.0));
    std::vector<double> cs(static_cast<std::size_t>(mr)), sn(static_cast<std::size_t>(mr)), g(static_cast<std::size_t>(mr) + 1, 0.0);
    g[0] = beta;
    int k = 0;
    for (; k < mr && st.iterations < max_iters;) {
      auto& hk = h[static_cast<std::size_t>(k)];
      m.apply(v[static_cast<std::size_t>(k)], z);
      a.apply(z, w);
      for (int i = 0; i <= k; ++i) {
        hk[static_cast<std::size_t>(i)] = dot(w, v[static_cast<std::size_t>(i)]);
        axpy(w, -hk[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(i)]);
      }
      double wn = norm2(w);
      double worst = 0.0;
      for (int i = 0; i <= k; ++i) worst = std::max(worst, std::abs(dot(w, v[static_cast<std::size_t>(i)])));
      if (wn > 0.0 && worst / wn > 1e-8) {
        for (int i = 0; i <= k; ++i) {
          const double c = dot(w, v[static_cast<std::size_t>(i)]);
          hk[static_cast<std::size_t>(i)] += c;
          axpy(w, -c, v[static_cast<std::size_t>(i)]);
        }
        wn = norm2(w);
      }
      detail::check_finite(wn, "gmres");
      hk[static_cast<std::size_t>(k) + 1] = wn;
      for (int i = 0; i < k; ++i) {
        const double t = cs[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)] +
                         sn[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i) + 1];
        hk[static_cast<std::size_t>(i) + 1] = -sn[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)] +
                                              cs[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i) + 1];
        hk[static_cast<std::size_t>(i)] = t;
      }
      const double d = std::hypot(hk[static_cast<std::size_t>(k)], hk[static_cast<std::size_t>(k) + 1]);
      cs[static_cast<std::size_t>(k)] = d == 0.0 ? 1.0 : hk[static_cast<std::size_t>(k)] / d;
      sn[static_cast<std::size_t>(k)] = d == 0.0 ? 0.0 : hk[static_cast<std::size_t>(k) + 1] / d;
      hk[static_cast<std::size_t>(k)] = d;
      hk[static_cast<std::size_t>(k) + 1] = 0.0;
      g[static_cast<std::size_t>(k) + 1] = -sn[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k)];
      g[static_cast<std::size_t>(k)] *= cs[static_cast<std::size_t>(k)];
      ++k;
      ++st.iterations;
      const double est = std::abs(g[static_cast<std::size_t>(k)]) / bn;
      detail::check_finite(est, "gmres");
      st.history.push_back(est);
      if (est <= tol || wn == 0.0) break;
      v.push_back(w);
      scale(v.back(), 1.0 / wn);
    }
    // Solve the k x k upper-triangular least-squares system.
    std::vector<double> y(static_cast<std::size_t>(k), 0.0);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) s -= h[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
      const double hii = h[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(i)] = hii == 0.0 ? 0.0 : s / hii;
    }
    DistVector vy(map);
    for (int j = 0; j < k; ++j) axpy(vy, y[static_cast<std::size_t>(j)], v[static_cast<std::size_t>(j)]);
    m.apply(vy, z);
    axpy(x, 1.0, z);
    r = detail::residual(a, b, x);
    beta = norm2(r);
    if (k == 0) {
      st.relative_residual = beta / bn;
      return st;
    }
  }
}

/// Right-preconditioned BiCGStab.
template <LinearOperator Op, class Prec>
SolverStats bicgstab(const Op& a, const DistVector& b, DistVector& x, const Prec& m, double tol, int max_iters) {
  SolverStats st;
  const double bn = norm2(b);
  detail::check_finite(bn, "bicgstab");
  if (bn == 0.0) {
    fill(x, 0.0);
    st.converged = true;
    st.history.push_back(0.0);
    return st;
  }
  const auto map = b.map_ptr();
  DistVector r = detail::residual(a, b, x);
  const DistVector r0 = r;
  DistVector p(map), v(map), s(map), t(map), ph(map), sh(map);
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  double rel = norm2(r) / bn;
  st.history.push_back(rel);
  for (int it = 1; it <= max_iters && rel > tol; ++it) {
    const double rho_new = dot(r0, r);
    detail::check_finite(rho_new, "bicgstab");
    if (rho_new == 0.0) {
      log().warn("bicgstab: breakdown (rho = 0) at iteration {}", it);
      break;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    // p = r + beta (p - omega v)
    axpy(p, -omega, v);
    axpby(p, 1.0, r, beta);
    m.apply(p, ph);
    a.apply(ph, v);
    const double r0v = dot(r0, v);
    if (r0v == 0.0) {
      log().warn("bicgstab: breakdown (r0.v = 0) at iteration {}", it);
      break;
    }
    alpha = rho_new / r0v;
    s = r;
    axpy(s, -alpha, v);
    st.iterations = it;
    if (norm2(s) / bn <= tol) {
      axpy(x, alpha, ph);
      rel = norm2(s) / bn;
      st.history.push_back(rel);
      break;
    }
    m.apply(s, sh);
    a.apply(sh, t);
    const double tt = dot(t, t);
    omega = tt == 0.0 ? 0.0 : dot(t, s) / tt;
    axpy(x, alpha, ph);
    axpy(x, omega, sh);
    r = s;
    axpy(r, -omega, t);
    rel = norm2(r) / bn;
    detail::check_finite(rel, "bicgstab");
    st.history.push_back(rel);
    rho = rho_new;
    if (omega == 0.0) break;
  }
  st.relative_residual = norm2(detail::residual(a, b, x)) / bn;
  st.converged = st.relative_residual <= tol * (1.0 + 1e-6) || rel <= tol;
  return st;
}

/// Runs the configured method with an already built preconditioner.
/// x carries the initial guess in and the solution out.
template <LinearOperator Op>
SolverStats solve_with(const Op& a, const DistVector& b, DistVector& x, const Preconditioner& m,
                       const SolverConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case KrylovMethod::cg: return cg(a, b, x, m, cfg.tol, cfg.max_iters);
    case KrylovMethod::gmres: return gmres(a, b, x, m, cfg.tol, cfg.max_iters, cfg.restart);
    case KrylovMethod::bicgstab: return bicgstab(a, b, x, m, cfg.tol, cfg.max_iters);
  }
  throw ConfigError("unknown solver method");
}

namespace detail {
/// Random probe |y.Ax - x.Ay| for a debug-only symmetry check.
inline double symmetry_defect(const DistMatrix& a) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> gx(a.n_rows()), gy(a.n_rows());
  for (auto& v : gx) v = u(rng);
  for (auto& v : gy) v = u(rng);
  const DistVector x = DistVector::scatter(a.row_map_ptr(), gx), y = DistVector::scatter(a.row_map_ptr(), gy);
  const double l = dot(y, a.apply(x)), r = dot(x, a.apply(y));
  return std::abs(l - r) / std::max(1e-300, std::abs(l) + std::abs(r));
}
}  // namespace detail

/// Builds the configured preconditioner and solves A x = b.
inline SolverStats solve(const DistMatrix& a, const DistVector& b, DistVector& x, const SolverConfig& cfg) {
  cfg.validate();
#ifndef NDEBUG
  if (cfg.method == KrylovMethod::cg && a.n_rows() > 0) {
    const double d = detail::symmetry_defect(a);
    if (d > 1e-10) log().warn("cg on a matrix that fails the symmetry probe (defect {:.3e})", d);
  }
#endif
  const auto m = make_preconditioner(a, cfg);
  return solve_with(a, b, x, *m, cfg);
}

}  // namespace pfem
