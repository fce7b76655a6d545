#pragma once

/// \file splitting.hpp
/// \brief Unsteady incompressible (Navier-)Stokes with P2-P1 Taylor-Hood
/// elements, BDF1 in time, and algebraic block-LU splittings of
///
///   [ C  G ] [u]   [f]        C = M/dt + nu K + N(beta)
///   [ D  0 ] [p] = [g],       D_ij = -int q_i div phi_j
///
/// (M is the consistent or the lumped mass, see InertiaMass.)
///
/// G is D^T with the rows of Dirichlet velocity DoF zeroed, so those rows of
/// the momentum equation read c u_i = c g_i. The lumped approximation
/// H = dt M_L^{-1} of C^{-1} gives the "discrete Laplacians"
///   S_perot  = dt D M_L^{-1} D^T      (full gradient)
///   S_yosida = dt D M_L^{-1} G
/// which are assembled once without the dt factor and rescaled per step.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>

#include "assembly.hpp"
#include "bc.hpp"
#include "krylov.hpp"
#include "partition.hpp"

namespace pfem {

using SpaceTimeFunction = std::function<Vec3(const Point&, double)>;

/// Mass matrix in the 1/dt term of C. `lumped` reuses M_L, so that
/// H = dt M_L^{-1} is the first Neumann term of C^{-1} exactly.
enum class InertiaMass { lumped, consistent };

struct FlowConfig {
  BoxSpec box;
  int n_ranks = 1;
  unsigned seed = 0;
  double nu = 1.0;
  bool convection = false;
  InertiaMass inertia = InertiaMass::lumped;
  std::vector<int> dirichlet_markers;
  SpaceTimeFunction velocity_bc;  // on the Dirichlet markers; null means no-slip
  SpaceTimeFunction forcing;      // body force; null means none
  std::function<Vec3(const Point&)> initial_velocity;
};

enum class PressureGauge { pin_first, mean_zero };


enum class SchemeKind { exact_lu, perot, yosida, yosida_q };

struct SplitScheme {
  SchemeKind kind = SchemeKind::yosida;
  int q = 0;  // pressure corrections (yosida_q)
  SolverConfig c_solver{KrylovMethod::gmres, 1e-12, 2000, 50, PreconditionerKind::schwarz, 1,
                        SubdomainSolverKind::sparse_lu};
  SolverConfig schur_solver{KrylovMethod::cg, 1e-12, 2000, 50, PreconditionerKind::schwarz, 1,
                            SubdomainSolverKind::sparse_lu};
  PressureGauge gauge = PressureGauge::pin_first;
  // Perot/Yosida: predict with G p_prev and solve for the increment only.
  bool incremental = true;

  void validate() const {
    if (kind == SchemeKind::yosida_q && q < 0) throw ConfigError("yosida-q needs q >= 0");
    c_solver.validate();
    schur_solver.validate();
  }
};

/// "exact-lu", "perot", "yosida", "yosidaN" (N pressure corrections).
inline SplitScheme parse_scheme(const std::string& name) {
  SplitScheme s;
  if (name == "exact-lu") {
    s.kind = SchemeKind::exact_lu;
  } else if (name == "perot") {
    s.kind = SchemeKind::perot;
  } else if (name == "yosida") {
    s.kind = SchemeKind::yosida;
  } else if (name.starts_with("yosida")) {
    const std::string tail = name.substr(6);
    if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("unknown scheme '" + name + "'");
    s.kind = SchemeKind::yosida_q;
    s.q = std::stoi(tail);
  } else {
    throw ConfigError("unknown scheme '" + name + "'");
  }
  return s;
}

inline std::string scheme_name(const SplitScheme& s) {
  switch (s.kind) {
    case SchemeKind::exact_lu: return "exact-lu";
    case SchemeKind::perot: return "perot";
    case SchemeKind::yosida: return "yosida";
    case SchemeKind::yosida_q: return "yosida" + std::to_string(s.q);
  }
  return "?";
}

/// Time-independent part of the discretization.
struct FlowSpace {
  Mesh mesh;
  std::shared_ptr<const Partition> partition;
  std::shared_ptr<const DofMap> vs;  // P2 scalar
  std::shared_ptr<const DofMap> v;   // P2 vector (dim components)
  std::shared_ptr<const DofMap> q;   // P1 pressure
  QuadratureRule quad{};
  DistMatrix mass_s, stiff_s;  // scalar P2 blocks
  DistMatrix mass;             // vector M
  DistVector lumped;           // vector M_L
  DistMatrix inertia_s;        // scalar mass in the 1/dt term of C
  DistMatrix inertia;          // its vector version
  DistMatrix div;              // D
  DistMatrix grad;             // D^T
  DistMatrix grad_z;           // D^T, Dirichlet rows zeroed
  std::vector<Index> dirichlet_dofs;
  bool enclosed = false;       // pressure defined up to a constant
  DistMatrix lap_perot;        // D M_L^{-1} D^T
  DistMatrix lap_yosida;       // D M_L^{-1} G, pinned at pressure DoF 0 when enclosed
  std::shared_ptr<const Preconditioner> prec_perot, prec_yosida;
  std::vector<int> dirichlet_markers;

  int dim() const { return mesh.dim; }
};

namespace detail {

inline DistVector inverse(const DistVector& d) {
  DistVector out = d;
  for (int r = 0; r < out.n_ranks(); ++r)
    for (double& x : out.local(r)) x = 1.0 / x;
  return out;
}

/// Vector load int f . v on a component-blocked space.
template <class F>
DistVector assemble_vector_load(const Mesh& mesh, const DofMap& vs, const DofMap& v, const F& fn,
                                const QuadratureRule& quad) {
  std::vector<double> global(v.global_size(), 0.0);
  for (int c = 0; c < v.n_components; ++c) {
    const auto part = assemble_vector(
        mesh, form::coefficient([&fn, c](const Point& x) { return fn(x)[static_cast<std::size_t>(c)]; }) * form::TestFunction{},
        vs, quad);
    const auto g = part.gather();
    std::copy(g.begin(), g.end(), global.begin() + static_cast<std::ptrdiff_t>(static_cast<Index>(c) * v.n_scalar));
  }
  return DistVector::scatter(v.unique_map, global);
}

/// Pins pressure DoF 0 of a square pressure matrix: row and column zeroed,
/// diagonal kept at its magnitude.
inline void pin_first(DistMatrix& a) {
  DistVector dummy(a.row_map_ptr());
  apply_dirichlet(a, dummy, DirichletDofs{{0}, {0.0}}, true);
}

}  // namespace detail

inline FlowSpace build_flow_space(const FlowConfig& cfg, const SolverConfig& schur_solver) {
  if (cfg.box.dim != 2 && cfg.box.dim != 3) throw ConfigError("flow problems need dim 2 or 3");
  if (cfg.nu < 0.0) throw ConfigError("viscosity must be >= 0");
  FlowSpace fs;
  fs.mesh = generate_box(cfg.box);
  const DualGraph graph = build_dual_graph(fs.mesh);
  fs.partition = std::make_shared<const Partition>(
      cfg.n_ranks == 1 ? trivial_partition(fs.mesh.n_cells()) : partition_greedy(graph, cfg.n_ranks, cfg.seed));
  const int d = fs.mesh.dim;
  fs.vs = std::make_shared<const DofMap>(build_dofmap(fs.mesh, *fs.partition, FiniteElement(2, d)));
  fs.v = std::make_shared<const DofMap>(with_components(*fs.vs, d));
  fs.q = std::make_shared<const DofMap>(build_dofmap(fs.mesh, *fs.partition, FiniteElement(1, d)));
  fs.quad = quadrature_for(d, 4);
  using namespace form;
  const MatrixGraph g = build_graph(*fs.vs, *fs.vs);
  fs.mass_s = assemble_matrix(fs.mesh, TrialFunction{} * TestFunction{}, *fs.vs, *fs.vs, fs.quad, {AssemblyMode::standard, &g});
  fs.stiff_s = assemble_matrix(fs.mesh, dot(grad(TrialFunction{}), grad(TestFunction{})), *fs.vs, *fs.vs, fs.quad,
                               {AssemblyMode::standard, &g});
  fs.mass = block_diagonal(fs.mass_s, *fs.v);
  const DistVector lumped_s = assemble_lumped_mass(fs.mesh, *fs.vs, fs.quad);
  fs.lumped = expand_components(lumped_s, *fs.v);
  fs.inertia_s = cfg.inertia == InertiaMass::lumped ? diagonal_matrix(lumped_s) : fs.mass_s;
  fs.inertia = block_diagonal(fs.inertia_s, *fs.v);

  std::vector<DistMatrix> parts;
  parts.reserve(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c)
    parts.push_back(assemble_matrix(fs.mesh, -1.0 * (TestFunction{} * component(grad(TrialFunction{}), c)), *fs.q, *fs.vs,
                                    fs.quad));
  std::vector<MatrixBlock> blocks;
  for (int c = 0; c < d; ++c) blocks.push_back({&parts[static_cast<std::size_t>(c)], 0, static_cast<Index>(c) * fs.vs->n_scalar, 1.0});
  fs.div = compose_blocks(fs.q->unique_map, fs.v->unique_map, blocks);
  fs.grad = transpose(fs.div);

  fs.dirichlet_markers = cfg.dirichlet_markers;
  BCSet bcs;
  for (int m : cfg.dirichlet_markers) bcs.dirichlet(m, 0.0);
  fs.dirichlet_dofs = resolve_dirichlet(fs.mesh, *fs.v, bcs).dofs;
  fs.grad_z = fs.grad;
  zero_rows(fs.grad_z, fs.dirichlet_dofs);
  const auto present = boundary_markers(fs.mesh);
  fs.enclosed = std::all_of(present.begin(), present.end(), [&](int m) {
    return std::find(cfg.dirichlet_markers.begin(), cfg.dirichlet_markers.end(), m) != cfg.dirichlet_markers.end();
  });

  const DistVector inv_ml = pfem::detail::inverse(fs.lumped);
  fs.lap_perot = multiply(fs.div, inv_ml, fs.grad);
  fs.lap_yosida = multiply(fs.div, inv_ml, fs.grad_z);
  if (fs.enclosed) pfem::detail::pin_first(fs.lap_yosida);
  fs.prec_perot = make_preconditioner(fs.lap_perot, schur_solver);
  fs.prec_yosida = make_preconditioner(fs.lap_yosida, schur_solver);
  return fs;
}

/// One BDF1 step's block system.
struct SaddleSystem {
  const FlowSpace* space = nullptr;
  double dt = 0.0;
  double t = 0.0;  // time level being solved for
  DistMatrix c;    // Dirichlet rows enforced
  DistVector f;
  DistVector g;    // continuity right-hand side
  DirichletDofs bc;
  DistVector p_prev;  // previous pressure; empty means zero
  mutable std::shared_ptr<const Preconditioner> c_prec;

  const DistMatrix& div() const { return space->div; }
  const DistMatrix& grad() const { return space->grad_z; }
};

/// C = M/dt + nu K + N(beta), f = M u_prev / dt + F(t), M being the
/// configured inertia mass. beta (the previous velocity) is used only when
/// cfg.convection is set.
inline SaddleSystem build_saddle_system(const FlowSpace& fs, const FlowConfig& cfg, double dt, const DistVector& u_prev,
                                        double t_new) {
  if (!(dt > 0.0)) throw ConfigError("time step must be > 0");
  SaddleSystem sys;
  sys.space = &fs;
  sys.dt = dt;
  sys.t = t_new;
  const int d = fs.dim();
  std::optional<DistMatrix> conv;
  if (cfg.convection) {
    using namespace form;
    auto values = std::make_shared<const DistVector>(import_to(u_prev, fs.v->repeated_map));
    if (d == 2)
      conv = assemble_matrix(fs.mesh, dot(FeField<2>(fs.v, values), grad(TrialFunction{})) * TestFunction{}, *fs.vs, *fs.vs, fs.quad);
    else
      conv = assemble_matrix(fs.mesh, dot(FeField<3>(fs.v, values), grad(TrialFunction{})) * TestFunction{}, *fs.vs, *fs.vs, fs.quad);
  }
  std::vector<MatrixBlock> blocks;
  for (int c = 0; c < d; ++c) {
    const Index off = static_cast<Index>(c) * fs.vs->n_scalar;
    blocks.push_back({&fs.inertia_s, off, off, 1.0 / dt});
    if (cfg.nu != 0.0) blocks.push_back({&fs.stiff_s, off, off, cfg.nu});
    if (conv) blocks.push_back({&*conv, off, off, 1.0});
  }
  sys.c = compose_blocks(fs.v->unique_map, fs.v->unique_map, blocks);

  sys.f = fs.inertia.apply(u_prev);
  scale(sys.f, 1.0 / dt);
  if (cfg.forcing) {
    const auto load = detail::assemble_vector_load(
        fs.mesh, *fs.vs, *fs.v, [&](const Point& x) { return cfg.forcing(x, t_new); }, fs.quad);
    axpy(sys.f, 1.0, load);
  }
  sys.g = DistVector(fs.q->unique_map);

  BCSet bcs;
  for (int m : cfg.dirichlet_markers) {
    if (cfg.velocity_bc)
      bcs.dirichlet(m, [&cfg, t_new](const Point& x) { return cfg.velocity_bc(x, t_new); });
    else
      bcs.dirichlet(m, 0.0);
  }
  sys.bc = resolve_dirichlet(fs.mesh, *fs.v, bcs);
  apply_dirichlet(sys.c, sys.f, sys.bc, false);
  return sys;
}

struct SplitResult {
  DistVector u;
  DistVector p;
  std::vector<DistVector> corrections;  // yosida-q pressure increments
  int c_iters = 0;
  int schur_iters = 0;
};

namespace detail {

/// Momentum right-hand side of the predictor: f, or f - G p_prev.
inline DistVector predictor_rhs(const SaddleSystem& sys, const SplitScheme& scheme) {
  DistVector f = sys.f;
  if (scheme.incremental && sys.p_prev.map_ptr()) axpy(f, -1.0, sys.grad().apply(sys.p_prev));
  return f;
}

/// p = p_prev + dp for incremental schemes.
inline DistVector total_pressure(const SaddleSystem& sys, const SplitScheme& scheme, DistVector dp) {
  if (scheme.incremental && sys.p_prev.map_ptr()) axpy(dp, 1.0, sys.p_prev);
  return dp;
}

inline void check_inner(const SolverStats& st, const char* what) {
  if (!st.converged)
    throw SolverDivergence(std::string(what) + " did not converge (relative residual " +
                           std::to_string(st.relative_residual) + ")");
}

/// x = C^{-1} rhs, zero initial guess.
inline DistVector solve_c(const SaddleSystem& sys, const DistVector& rhs, const SolverConfig& cfg, int& iters) {
  if (!sys.c_prec) sys.c_prec = make_preconditioner(sys.c, cfg);
  DistVector x(sys.c.row_map_ptr());
  const auto st = solve_with(sys.c, rhs, x, *sys.c_prec, cfg);
  check_inner(st, "velocity solve");
  iters += st.iterations;
  return x;
}

/// Preconditioner of a dt-scaled operator: z = P0^{-1} r / dt.
class ScaledPreconditioner final : public Preconditioner {
 public:
  ScaledPreconditioner(const Preconditioner& base, double factor) : base_(base), factor_(factor) {}
  void apply(const DistVector& r, DistVector& z) const override {
    base_.apply(r, z);
    scale(z, factor_);
  }

 private:
  const Preconditioner& base_;
  double factor_;
};

/// Matrix operator scaled by a constant.
struct ScaledOperator {
  const DistMatrix& a;
  double factor;
  void apply(const DistVector& x, DistVector& y) const {
    a.apply(x, y);
    scale(y, factor);
  }
};

/// Pinned exact Schur operator y = P D C^{-1} G P x + s x_0 e_0.
struct ExactSchurOperator {
  const SaddleSystem& sys;
  const SolverConfig& c_cfg;
  bool pin;
  double pin_scale;
  int* c_iters;
  void apply(const DistVector& x, DistVector& y) const {
    DistVector xp = x;
    const RankMap& m = x.map();
    if (pin) xp.local(m.owner(0))[m.owner_local(0)] = 0.0;
    const DistVector w = solve_c(sys, sys.grad().apply(xp), c_cfg, *c_iters);
    sys.div().apply(w, y);
    if (pin) y.local(m.owner(0))[m.owner_local(0)] = pin_scale * x.local(m.owner(0))[m.owner_local(0)];
  }
};

inline void zero_first(DistVector& v) {
  const RankMap& m = v.map();
  v.local(m.owner(0))[m.owner_local(0)] = 0.0;
}

/// Fixes the free constant of an enclosed-flow pressure: p_0 = 0 or zero
/// mean. Perot's Schur matrix is not pinned, so it needs the shift too.
inline void apply_gauge(const SaddleSystem& sys, PressureGauge gauge, DistVector& p) {
  if (!sys.space->enclosed) return;
  if (gauge == PressureGauge::pin_first) {
    const double p0 = p.at(0);
    for (int r = 0; r < p.n_ranks(); ++r)
      for (double& x : p.local(r)) x -= p0;
    return;
  }
  double s = 0.0;
  for (int r = 0; r < p.n_ranks(); ++r)
    for (double x : p.local(r)) s += x;
  const double mean = s / static_cast<double>(p.size());
  for (int r = 0; r < p.n_ranks(); ++r)
    for (double& x : p.local(r)) x -= mean;
}

/// p = S_yosida^{-1} rhs (rhs pinned in place when enclosed).
inline DistVector solve_lumped_yosida(const SaddleSystem& sys, DistVector rhs, const SolverConfig& cfg, int& iters) {
  const FlowSpace& fs = *sys.space;
  if (fs.enclosed) zero_first(rhs);
  const ScaledOperator op{fs.lap_yosida, sys.dt};
  const ScaledPreconditioner prec(*fs.prec_yosida, 1.0 / sys.dt);
  DistVector p(fs.q->unique_map);
  const auto st = solve_with(op, rhs, p, prec, cfg);
  check_inner(st, "pressure Schur solve");
  iters += st.iterations;
  return p;
}

}  // namespace detail

/// Reference factorization: C u~ = f, S p = D u~ - g with the exact Schur
/// complement S = D C^{-1} G applied matrix-free, then u = u~ - C^{-1} G p.
inline SplitResult solve_exact_lu(const SaddleSystem& sys, const SplitScheme& scheme) {
  const FlowSpace& fs = *sys.space;
  SplitResult res;
  const DistVector ut = detail::solve_c(sys, sys.f, scheme.c_solver, res.c_iters);
  DistVector rhs = sys.div().apply(ut);
  axpy(rhs, -1.0, sys.g);
  if (fs.enclosed) detail::zero_first(rhs);
  const double pin_scale = fs.enclosed ? sys.dt * fs.lap_yosida.local(fs.q->owner(0))(fs.q->unique_map->owner_local(0), 0) : 1.0;
  const detail::ExactSchurOperator op{sys, scheme.c_solver, fs.enclosed, pin_scale, &res.c_iters};
  const detail::ScaledPreconditioner prec(*fs.prec_yosida, 1.0 / sys.dt);
  SolverConfig outer = scheme.schur_solver;
  outer.method = KrylovMethod::gmres;  // inner solves make the operator only approximately symmetric
  res.p = DistVector(fs.q->unique_map);
  const auto st = solve_with(op, rhs, res.p, prec, outer);
  detail::check_inner(st, "exact Schur solve");
  res.schur_iters += st.iterations;
  res.u = ut;
  axpy(res.u, -1.0, detail::solve_c(sys, sys.grad().apply(res.p), scheme.c_solver, res.c_iters));
  detail::apply_gauge(sys, scheme.gauge, res.p);
  return res;
}

/// C^{-1} replaced by H = dt M_L^{-1} in both factors (full gradient), so
/// D u = g holds to solver tolerance and the splitting error sits in the
/// momentum equation, including the Dirichlet rows.
inline SplitResult solve_perot(const SaddleSystem& sys, const SplitScheme& scheme) {
  const FlowSpace& fs = *sys.space;
  SplitResult res;
  const DistVector ut = detail::solve_c(sys, detail::predictor_rhs(sys, scheme), scheme.c_solver, res.c_iters);
  DistVector rhs = fs.div.apply(ut);
  axpy(rhs, -1.0, sys.g);
  const detail::ScaledOperator op{fs.lap_perot, sys.dt};
  const detail::ScaledPreconditioner prec(*fs.prec_perot, 1.0 / sys.dt);
  DistVector dp(fs.q->unique_map);
  const auto st = solve_with(op, rhs, dp, prec, scheme.schur_solver);
  detail::check_inner(st, "pressure Schur solve");
  res.schur_iters += st.iterations;
  DistVector corr = fs.grad.apply(dp);
  pointwise_multiply(corr, detail::inverse(fs.lumped));
  res.u = ut;
  axpy(res.u, -sys.dt, corr);
  res.p = detail::total_pressure(sys, scheme, std::move(dp));
  detail::apply_gauge(sys, scheme.gauge, res.p);
  return res;
}

namespace detail {
inline SplitResult yosida_core(const SaddleSystem& sys, const SplitScheme& scheme, int q) {
  const FlowSpace& fs = *sys.space;
  SplitResult res;
  const DistVector ut = solve_c(sys, predictor_rhs(sys, scheme), scheme.c_solver, res.c_iters);
  DistVector rhs = fs.div.apply(ut);
  axpy(rhs, -1.0, sys.g);
  const DistVector dp0 = solve_lumped_yosida(sys, rhs, scheme.schur_solver, res.schur_iters);
  res.u = ut;
  axpy(res.u, -1.0, solve_c(sys, sys.grad().apply(dp0), scheme.c_solver, res.c_iters));
  res.p = total_pressure(sys, scheme, dp0);
  for (int k = 0; k < q; ++k) {
    DistVector r = fs.div.apply(res.u);
    axpy(r, -1.0, sys.g);
    DistVector dp = solve_lumped_yosida(sys, r, scheme.schur_solver, res.schur_iters);
    axpy(res.p, 1.0, dp);
    axpy(res.u, -1.0, solve_c(sys, sys.grad().apply(dp), scheme.c_solver, res.c_iters));
    res.corrections.push_back(std::move(dp));
  }
  apply_gauge(sys, scheme.gauge, res.p);
  return res;
}
}  // namespace detail

/// Lumped Schur complement in the L factor, exact C-solve in the U factor:
/// velocity Dirichlet data hold exactly, the splitting error shows up as
/// D u != g.
inline SplitResult solve_yosida(const SaddleSystem& sys, const SplitScheme& scheme) {
  return detail::yosida_core(sys, scheme, 0);
}

/// Yosida followed by q corrections S dp = D u - g, p += dp,
/// u -= C^{-1} G dp. The increments are returned.
inline SplitResult solve_yosida_q(const SaddleSystem& sys, const SplitScheme& scheme, int q) {
  if (q < 0) throw ConfigError("yosida-q needs q >= 0");
  return detail::yosida_core(sys, scheme, q);
}

inline SplitResult solve_step(const SaddleSystem& sys, const SplitScheme& scheme) {
  scheme.validate();
  switch (scheme.kind) {
    case SchemeKind::exact_lu: return solve_exact_lu(sys, scheme);
    case SchemeKind::perot: return solve_perot(sys, scheme);
    case SchemeKind::yosida: return solve_yosida(sys, scheme);
    case SchemeKind::yosida_q: return solve_yosida_q(sys, scheme, scheme.q);
  }
  throw ConfigError("unknown scheme");
}

/// ||D u - g||_2
inline double divergence_norm(const SaddleSystem& sys, const DistVector& u) {
  DistVector r = sys.div().apply(u);
  axpy(r, -1.0, sys.g);
  return norm2(r);
}

/// max |u_i - g_i| over the Dirichlet velocity DoF.
inline double dirichlet_trace_error(const SaddleSystem& sys, const DistVector& u) {
  double e = 0.0;
  for (std::size_t k = 0; k < sys.bc.dofs.size(); ++k) e = std::max(e, std::abs(u.at(sys.bc.dofs[k]) - sys.bc.values[k]));
  return e;
}

// ------------------------------------------------------------ time stepping

struct AdaptiveConfig {
  double tol = 1e-3;
  double dt_min = 1e-6;
  double dt_max = 1.0;
  double theta = 0.9;
  double order = 2.0;
  int max_retries = 5;

  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("adaptive tol must be > 0");
    if (!(dt_min > 0.0) || dt_min > dt_max) throw ConfigError("adaptive needs 0 < dt_min <= dt_max");
    if (!(theta > 0.0) || theta > 1.0) throw ConfigError("adaptive safety factor must lie in (0, 1]");
    if (!(order > 0.0)) throw ConfigError("controller order must be > 0");
  }
};

/// clamp(theta dt (tol/eta)^{1/r}, dt_min, dt_max)
inline double next_time_step(double dt, double eta, const AdaptiveConfig& cfg) {
  const double factor = eta > 0.0 ? std::pow(cfg.tol / eta, 1.0 / cfg.order) : std::numeric_limits<double>::infinity();
  return std::clamp(cfg.theta * dt * factor, cfg.dt_min, cfg.dt_max);
}

/// ||dp_q|| / ||p||, or 0 when no correction was computed.
inline double pressure_estimator(const SplitResult& r) {
  if (r.corrections.empty()) return 0.0;
  const double pn = norm2(r.p);
  return pn > 0.0 ? norm2(r.corrections.back()) / pn : 0.0;
}

struct FlowState {
  std::int64_t step = 0;
  double t = 0.0;
  double dt = 0.0;  // step size to try next
  DistVector u;
  DistVector p;
};

inline FlowState initial_state(const FlowSpace& fs, const FlowConfig& cfg, double t0, double dt) {
  FlowState s;
  s.t = t0;
  s.dt = dt;
  s.u = cfg.initial_velocity ? interpolate(cfg.initial_velocity, *fs.v) : DistVector(fs.v->unique_map);
  s.p = DistVector(fs.q->unique_map);
  return s;
}

struct StepRecord {
  std::int64_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  double eta = 0.0;
  int c_iters = 0;
  int schur_iters = 0;
  double div_norm = 0.0;
  bool compliant = true;
  int retries = 0;
};

struct StepOutcome {
  StepRecord record;
  SplitResult result;
  double next_dt = 0.0;
};

inline StepOutcome fixed_step(const FlowSpace& fs, const FlowConfig& cfg, const SplitScheme& scheme,
                              const FlowState& state, double dt) {
  SaddleSystem sys = build_saddle_system(fs, cfg, dt, state.u, state.t + dt);
  sys.p_prev = state.p;
  StepOutcome out;
  out.result = solve_step(sys, scheme);
  out.record = {state.step + 1, state.t + dt, dt, pressure_estimator(out.result), out.result.c_iters,
                out.result.schur_iters, divergence_norm(sys, out.result.u), true, 0};
  out.next_dt = dt;
  return out;
}

/// Tries state.dt (capped by t_end), shrinking after each rejection. After
/// max_retries rejections, or once dt_min is reached, the step is accepted
/// and flagged non-compliant.
inline StepOutcome adaptive_step(const FlowSpace& fs, const FlowConfig& cfg, const SplitScheme& scheme,
                                 const FlowState& state, const AdaptiveConfig& acfg, double t_end) {
  acfg.validate();
  if (scheme.kind != SchemeKind::yosida_q || scheme.q < 1) throw ConfigError("adaptive stepping needs yosida-q with q >= 1");
  double dt = std::clamp(state.dt, acfg.dt_min, acfg.dt_max);
  for (int attempt = 0;; ++attempt) {
    const double remaining = t_end - state.t;
    const bool last = dt >= remaining;
    const double used = last ? remaining : dt;
    StepOutcome out = fixed_step(fs, cfg, scheme, state, used);
    const double eta = out.record.eta;
    if (last) out.record.t = t_end;
    out.record.retries = attempt;
    const double proposal = next_time_step(used, eta, acfg);
    if (eta <= acfg.tol) {
      out.next_dt = last ? std::max(proposal, dt) : proposal;
      return out;
    }
    if (attempt >= acfg.max_retries || used <= acfg.dt_min) {
      log().warn("adaptive step at t={} accepted with eta={:.3e} > tol after {} retries", state.t, eta, attempt);
      out.record.compliant = false;
      out.next_dt = proposal;
      return out;
    }
    dt = std::min(proposal, used);
  }
}

struct TimeLoopConfig {
  double t_end = 1.0;
  bool adaptive = false;
  AdaptiveConfig adapt;
  std::int64_t max_steps = 1000000;
  int vtk_every = 0;  // 0: none
  std::string vtk_prefix;
};

inline const char* csv_header() { return "step,t,dt,eta,c_iters,schur_iters,div_norm"; }

inline std::string csv_row(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%d,%d,%.17g", static_cast<long long>(r.step), r.t, r.dt, r.eta,
                r.c_iters, r.schur_iters, r.div_norm);
  return buf;
}

/// Marches from `state` to cfg.t_end. `on_step` sees every accepted step and
/// the new state (for CSV, VTK and checkpoint output).
inline std::vector<StepRecord> time_loop(const FlowSpace& fs, const FlowConfig& cfg, const SplitScheme& scheme,
                                         FlowState& state, const TimeLoopConfig& loop,
                                         const std::function<void(const StepRecord&, const FlowState&)>& on_step = {}) {
  std::vector<StepRecord> records;
  if (!(state.dt > 0.0)) throw ConfigError("time step must be > 0");
  const double eps = 1e-12 * std::max(1.0, std::abs(loop.t_end));
  while (state.t < loop.t_end - eps && state.step < loop.max_steps) {
    StepOutcome out;
    if (loop.adaptive) {
      out = adaptive_step(fs, cfg, scheme, state, loop.adapt, loop.t_end);
    } else {
      const double remaining = loop.t_end - state.t;
      const double dt = state.dt > remaining - eps ? remaining : state.dt;
      out = fixed_step(fs, cfg, scheme, state, dt);
      if (dt == remaining) out.record.t = loop.t_end;
      out.next_dt = state.dt;
    }
    state.step = out.record.step;
    state.t = out.record.t;
    state.dt = out.next_dt;
    state.u = std::move(out.result.u);
    state.p = std::move(out.result.p);
    records.push_back(out.record);
    if (on_step) on_step(out.record, state);
  }
  return records;
}

}  // namespace pfem
