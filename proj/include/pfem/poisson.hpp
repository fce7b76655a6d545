#pragma once

/// \file poisson.hpp
/// \brief -div(kappa grad u) = f on a box with Dirichlet and Neumann sides,
/// data taken from a manufactured solution.

#include <chrono>
#include <numbers>

#include "assembly.hpp"
#include "bc.hpp"
#include "krylov.hpp"
#include "params.hpp"

namespace pfem {

/// Exact solution with its gradient and the matching source for
/// -kappa Lap u = f.
struct ManufacturedSolution {
  std::function<double(const Point&)> u;
  std::function<Vec3(const Point&)> grad;
  std::function<double(const Point&)> f;
};

/// "sine": prod_k sin(pi x_k). "poly": 1 + x^2 + 2 y^2 (+ 3 z^2).
inline ManufacturedSolution manufactured_solution(const std::string& name, int dim, double kappa) {
  constexpr double pi = std::numbers::pi;
  ManufacturedSolution m;
  if (name == "sine") {
    m.u = [dim](const Point& x) {
      double v = 1.0;
      for (int k = 0; k < dim; ++k) v *= std::sin(pi * x[static_cast<std::size_t>(k)]);
      return v;
    };
    m.grad = [dim](const Point& x) {
      Vec3 g;
      for (int k = 0; k < dim; ++k) {
        double v = pi;
        for (int j = 0; j < dim; ++j) {
          const double xj = x[static_cast<std::size_t>(j)];
          v *= j == k ? std::cos(pi * xj) : std::sin(pi * xj);
        }
        g[static_cast<std::size_t>(k)] = v;
      }
      return g;
    };
    m.f = [u = m.u, dim, kappa](const Point& x) { return kappa * dim * pi * pi * u(x); };
  } else if (name == "poly") {
    m.u = [dim](const Point& x) { return 1.0 + x[0] * x[0] + 2.0 * x[1] * x[1] + (dim == 3 ? 3.0 * x[2] * x[2] : 0.0); };
    m.grad = [dim](const Point& x) { return Vec3{2.0 * x[0], 4.0 * x[1], dim == 3 ? 6.0 * x[2] : 0.0}; };
    m.f = [dim, kappa](const Point&) { return -kappa * (dim == 3 ? 12.0 : 6.0); };
  } else {
    throw ConfigError("unknown manufactured solution '" + name + "'");
  }
  return m;
}

struct PoissonConfig {
  int dim = 3;
  int n = 8;
  int degree = 1;
  double kappa = 1.0;
  std::string solution = "sine";
  std::vector<int> dirichlet_markers{1, 2, 3, 4, 5, 6};
  std::vector<int> neumann_markers;
  int n_ranks = 1;
  unsigned seed = 0;
  AssemblyMode assembly = AssemblyMode::standard;
  bool use_graph = true;
  bool symmetrize = true;
  SolverConfig solver{KrylovMethod::cg, 1e-10, 5000, 50, PreconditionerKind::schwarz, 1, SubdomainSolverKind::sparse_lu};

  void validate() const {
    if (dim != 2 && dim != 3) throw ConfigError("poisson dim must be 2 or 3");
    if (n < 1) throw ConfigError("poisson n must be >= 1");
    if (degree != 1 && degree != 2) throw ConfigError("poisson degree must be 1 or 2");
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0");
    if (n_ranks < 1) throw ConfigError("ranks must be >= 1");
    solver.validate();
  }
};

inline SolverConfig solver_from_params(const ParamTree& p, const std::string& section, SolverConfig cfg) {
  const std::string s = section + ".";
  if (p.has(s + "method")) cfg.method = parse_krylov_method(p.get_string(s + "method"));
  cfg.tol = p.get_real(s + "tol", cfg.tol);
  cfg.max_iters = static_cast<int>(p.get_int(s + "max_iters", cfg.max_iters));
  cfg.restart = static_cast<int>(p.get_int(s + "restart", cfg.restart));
  if (p.has(s + "preconditioner")) cfg.preconditioner = parse_preconditioner(p.get_string(s + "preconditioner"));
  cfg.overlap = static_cast<int>(p.get_int(s + "overlap", cfg.overlap));
  if (p.has(s + "subdomain_solver")) cfg.subdomain_solver = parse_subdomain_solver(p.get_string(s + "subdomain_solver"));
  cfg.validate();
  return cfg;
}

inline PoissonConfig poisson_from_params(const ParamTree& p) {
  PoissonConfig c;
  c.dim = static_cast<int>(p.get_int("mesh.dim", c.dim));
  c.n = static_cast<int>(p.get_int("mesh.n", c.n));
  c.degree = static_cast<int>(p.get_int("poisson.degree", c.degree));
  c.kappa = p.get_real("poisson.kappa", c.kappa);
  c.solution = p.get_string("poisson.solution", c.solution);
  const std::vector<int> all = c.dim == 3 ? std::vector<int>{1, 2, 3, 4, 5, 6} : std::vector<int>{1, 2, 3, 4};
  c.dirichlet_markers = p.get_int_list("poisson.dirichlet", all);
  c.neumann_markers = p.get_int_list("poisson.neumann", {});
  c.symmetrize = p.get_bool("poisson.symmetrize", c.symmetrize);
  const std::string mode = p.get_string("poisson.assembly", "standard");
  if (mode == "standard")
    c.assembly = AssemblyMode::standard;
  else if (mode == "overlapped")
    c.assembly = AssemblyMode::overlapped;
  else
    throw ConfigError("poisson.assembly must be 'standard' or 'overlapped'");
  c.n_ranks = static_cast<int>(p.get_int("partition.ranks", c.n_ranks));
  c.seed = static_cast<unsigned>(p.get_int("partition.seed", c.seed));
  c.solver = solver_from_params(p, "solver", c.solver);
  c.validate();
  return c;
}

struct PoissonResult {
  Mesh mesh;
  std::shared_ptr<const DofMap> space;
  DistVector u;
  SolverStats stats;
  DirichletDofs dirichlet;
  double l2_error = 0.0;
  double h1_error = 0.0;  // seminorm
  double h = 0.0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Outward unit normal of the box side containing x.
inline Vec3 box_normal(const BoxSpec& box, const Point& x) {
  Vec3 nrm;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < box.dim; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double dl = std::abs(x[kk] - box.lower[kk]), du = std::abs(x[kk] - box.upper[kk]);
    if (dl < best) {
      best = dl;
      nrm = Vec3{};
      nrm[kk] = -1.0;
    }
    if (du < best) {
      best = du;
      nrm = Vec3{};
      nrm[kk] = 1.0;
    }
  }
  return nrm;
}

/// L2 norm and H1 seminorm of u_h - u on the owned cells of each rank,
/// summed in rank order.
inline std::pair<double, double> error_norms(const Mesh& mesh, const DofMap& space, const DistVector& uh,
                                             const ManufacturedSolution& exact) {
  const QuadratureRule quad = quadrature_for(mesh.dim, 4);
  const Tabulation tab = tabulate(space.element, quad.points);
  const DistVector rep = import_to(uh, space.repeated_map);
  const int n = space.n_ranks();
  std::vector<double> l2(static_cast<std::size_t>(n)), h1(static_cast<std::size_t>(n));
  for_each_rank(n, [&](Rank r) {
    const auto& vals = rep.local(r);
    double sl = 0.0, sh = 0.0;
    std::vector<double> coef(static_cast<std::size_t>(tab.n_dof));
    for (Index c : space.partition->owned_elements[static_cast<std::size_t>(r)]) {
      const CellGeometry geo(mesh, c);
      const auto dofs = space.cell(c);
      for (std::size_t k = 0; k < dofs.size(); ++k) coef[k] = vals[static_cast<std::size_t>(rep.map().find(r, dofs[k]))];
      for (std::size_t q = 0; q < quad.size(); ++q) {
        const auto phi = tab.values_at(q);
        const auto gr = tab.gradients_at(q);
        double v = 0.0;
        Vec3 g;
        for (std::size_t k = 0; k < dofs.size(); ++k) {
          v += coef[k] * phi[k];
          g = g + coef[k] * geo.physical_gradient(gr[k]);
        }
        const Point x = geo.map(quad.points[q]);
        const double w = quad.weights[q] * std::abs(geo.det);
        const double e = v - exact.u(x);
        const Vec3 ge = g - exact.grad(x);
        sl += w * e * e;
        sh += w * dot(ge, ge);
      }
    }
    l2[static_cast<std::size_t>(r)] = sl;
    h1[static_cast<std::size_t>(r)] = sh;
  });
  double sl = 0.0, sh = 0.0;
  for (int r = 0; r < n; ++r) {
    sl += l2[static_cast<std::size_t>(r)];
    sh += h1[static_cast<std::size_t>(r)];
  }
  return {std::sqrt(sl), std::sqrt(sh)};
}

/// Assembled, Dirichlet-treated linear system of a Poisson problem.
struct PoissonSystem {
  BoxSpec box;
  Mesh mesh;
  std::shared_ptr<const DofMap> space;
  DistMatrix a;
  DistVector b;
  DirichletDofs dirichlet;
  ManufacturedSolution exact;
};

inline PoissonSystem assemble_poisson(const PoissonConfig& cfg) {
  cfg.validate();
  PoissonSystem sys;
  sys.box.dim = cfg.dim;
  sys.box.subdivisions = {cfg.n, cfg.n, cfg.dim == 3 ? cfg.n : 1};
  sys.mesh = generate_box(sys.box);
  const Mesh& mesh = sys.mesh;
  const DualGraph graph = build_dual_graph(mesh);
  Partition part = cfg.n_ranks == 1 ? trivial_partition(mesh.n_cells()) : partition_greedy(graph, cfg.n_ranks, cfg.seed);
  const FiniteElement fe(cfg.degree, cfg.dim);
  if (cfg.assembly == AssemblyMode::overlapped) part = halo_for_overlapped_assembly(mesh, add_halo(part, graph, 1), graph, fe);
  sys.space = std::make_shared<const DofMap>(build_dofmap(mesh, part, fe));
  const DofMap& V = *sys.space;
  sys.exact = manufactured_solution(cfg.solution, cfg.dim, cfg.kappa);
  const auto& exact = sys.exact;

  using namespace form;
  const QuadratureRule quad = quadrature_for(cfg.dim, 4);
  std::optional<MatrixGraph> g;
  if (cfg.use_graph) g = build_graph(V, V);
  sys.a = assemble_matrix(mesh, cfg.kappa * dot(grad(TrialFunction{}), grad(TestFunction{})), V, V,
                          quadrature_for(cfg.dim, 2 * (cfg.degree - 1)), {cfg.assembly, g ? &*g : nullptr});
  sys.b = assemble_vector(mesh, coefficient(exact.f) * TestFunction{}, V, quad, cfg.assembly);
  if (!cfg.neumann_markers.empty()) {
    const double kappa = cfg.kappa;
    const BoxSpec box = sys.box;
    add_boundary_integral(
        sys.b, mesh,
        coefficient([&](const Point& x) { return kappa * dot(exact.grad(x), box_normal(box, x)); }) * TestFunction{}, V,
        cfg.neumann_markers, facet_quadrature_for(cfg.dim, 4));
  }
  BCSet bcs;
  for (int m : cfg.dirichlet_markers)
    bcs.dirichlet(m, [&](const Point& x) {
      const double v = exact.u(x);
      return Vec3{v, v, v};
    });
  for (int m : cfg.neumann_markers) bcs.neumann(m, {});
  sys.dirichlet = resolve_dirichlet(mesh, V, bcs);
  apply_dirichlet(sys.a, sys.b, sys.dirichlet, cfg.symmetrize);
  return sys;
}

inline PoissonResult solve_poisson(const PoissonConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  PoissonSystem sys = assemble_poisson(cfg);
  const auto t1 = clock::now();
  PoissonResult res;
  res.h = 1.0 / cfg.n;
  res.u = DistVector(sys.space->unique_map);
  res.stats = solve(sys.a, sys.b, res.u, cfg.solver);
  if (!res.stats.converged)
    throw SolverDivergence("poisson solve did not converge (relative residual " + std::to_string(res.stats.relative_residual) + ")");
  const auto t2 = clock::now();
  std::tie(res.l2_error, res.h1_error) = error_norms(sys.mesh, *sys.space, res.u, sys.exact);
  res.assembly_seconds = std::chrono::duration<double>(t1 - t0).count();
  res.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  res.mesh = std::move(sys.mesh);
  res.space = sys.space;
  res.dirichlet = std::move(sys.dirichlet);
  return res;
}

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  Index n_dofs = 0;
  double l2 = 0.0, h1 = 0.0;
  double l2_order = 0.0, h1_order = 0.0;  // vs previous row
  int iterations = 0;
};

/// Solves on n, 2n, 4n, ... (`levels` meshes) and reports observed orders.
inline std::vector<ConvergenceRow> convergence_study(PoissonConfig cfg, int levels) {
  if (levels < 1) throw ConfigError("convergence levels must be >= 1");
  std::vector<ConvergenceRow> rows;
  for (int k = 0; k < levels; ++k) {
    const auto r = solve_poisson(cfg);
    ConvergenceRow row{cfg.n, r.h, r.space->global_size(), r.l2_error, r.h1_error, 0.0, 0.0, r.stats.iterations};
    if (!rows.empty()) {
      const auto& prev = rows.back();
      const double ratio = std::log(prev.h / row.h);
      row.l2_order = std::log(prev.l2 / row.l2) / ratio;
      row.h1_order = std::log(prev.h1 / row.h1) / ratio;
    }
    rows.push_back(row);
    cfg.n *= 2;
  }
  return rows;
}

}  // namespace pfem
