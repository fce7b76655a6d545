// pfem command-line driver.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pfem/pfem.hpp"

namespace {

using namespace pfem;

constexpr int exit_config = 2;
constexpr int exit_divergence = 3;

ParamTree load_params(const std::string& path) { return path.empty() ? ParamTree{} : ParamTree::load(path); }

Checkpoint to_checkpoint(std::int64_t step, double t, double dt, const std::string& scheme, const DistVector& u,
                         const DistVector* p) {
  Checkpoint c;
  c.step = static_cast<std::uint64_t>(step);
  c.t = t;
  c.dt = dt;
  c.scheme = scheme;
  c.velocity = u.gather();
  if (p) c.pressure = p->gather();
  return c;
}

int run_poisson(const std::string& prm, int ranks, int levels) {
  const ParamTree p = load_params(prm);
  PoissonConfig cfg = poisson_from_params(p);
  if (ranks > 0) cfg.n_ranks = ranks;
  const std::string vtk = p.get_string("output.vtk", "");
  const std::string ckpt = p.get_string("output.checkpoint", "");
  p.warn_unused();

  if (levels > 0) {
    const auto rows = convergence_study(cfg, levels);
    std::printf("%6s %12s %10s %14s %14s %8s %8s %6s\n", "n", "h", "dofs", "L2", "H1", "L2-ord", "H1-ord", "iters");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (i == 0)
        std::printf("%6d %12.5e %10llu %14.6e %14.6e %8s %8s %6d\n", r.n, r.h, static_cast<unsigned long long>(r.n_dofs),
                    r.l2, r.h1, "-", "-", r.iterations);
      else
        std::printf("%6d %12.5e %10llu %14.6e %14.6e %8.3f %8.3f %6d\n", r.n, r.h,
                    static_cast<unsigned long long>(r.n_dofs), r.l2, r.h1, r.l2_order, r.h1_order, r.iterations);
    }
    return 0;
  }

  const PoissonResult r = solve_poisson(cfg);
  std::printf("dim %d  n %d  P%d  ranks %d  dofs %llu\n", cfg.dim, cfg.n, cfg.degree, cfg.n_ranks,
              static_cast<unsigned long long>(r.space->global_size()));
  std::printf("iterations %d  relative residual %.3e\n", r.stats.iterations, r.stats.relative_residual);
  std::printf("L2 error %.6e  H1 error %.6e\n", r.l2_error, r.h1_error);
  std::printf("assembly %.3f s  solve %.3f s\n", r.assembly_seconds, r.solve_seconds);
  if (!vtk.empty()) {
    const VtkField f{"u", r.space.get(), &r.u};
    write_vtk_file(r.mesh, std::span(&f, 1), vtk);
  }
  if (!ckpt.empty()) write_checkpoint_file(to_checkpoint(0, 0.0, 0.0, "poisson", r.u, nullptr), ckpt);
  return 0;
}

int run_ns(const std::string& prm, const std::string& scheme, bool adaptive, int ranks) {
  const ParamTree p = load_params(prm);
  NsRun run = ns_from_params(p, scheme, adaptive);
  if (ranks > 0) run.flow.n_ranks = ranks;
  p.warn_unused();
  const FlowSpace fs = build_flow_space(run.flow, run.scheme.schur_solver);
  FlowState state = initial_state(fs, run.flow, 0.0, run.dt);
  if (!run.restart_path.empty()) {
    const Checkpoint c = read_checkpoint_file(run.restart_path);
    if (c.scheme != scheme_name(run.scheme))
      throw ConfigError("checkpoint was written by scheme '" + c.scheme + "', not '" + scheme_name(run.scheme) + "'");
    if (c.velocity.size() != fs.v->global_size() || c.pressure.size() != fs.q->global_size())
      throw ConfigError("checkpoint does not match the discretization");
    state.step = static_cast<std::int64_t>(c.step);
    state.t = c.t;
    state.dt = c.dt;
    state.u = DistVector::scatter(fs.v->unique_map, c.velocity);
    state.p = DistVector::scatter(fs.q->unique_map, c.pressure);
  }

  std::ofstream csv(run.csv_path, state.step > 0 ? std::ios::app : std::ios::trunc);
  if (!csv) throw ConfigError("cannot open '" + run.csv_path + "' for writing");
  if (state.step == 0) csv << csv_header() << '\n';
  auto snapshot = [&](const FlowState& s) {
    char name[64];
    std::snprintf(name, sizeof name, "_%06lld.vtk", static_cast<long long>(s.step));
    const VtkField fields[] = {{"velocity", fs.v.get(), &s.u}, {"pressure", fs.q.get(), &s.p}};
    write_vtk_file(fs.mesh, fields, run.loop.vtk_prefix + name);
  };
  if (run.loop.vtk_every > 0 && state.step == 0) snapshot(state);

  int non_compliant = 0;
  const auto records = time_loop(fs, run.flow, run.scheme, state, run.loop, [&](const StepRecord& r, const FlowState& s) {
    csv << csv_row(r) << '\n';
    if (!r.compliant) ++non_compliant;
    if (run.loop.vtk_every > 0 && s.step % run.loop.vtk_every == 0) snapshot(s);
  });
  csv.flush();
  if (!run.checkpoint_path.empty())
    write_checkpoint_file(to_checkpoint(state.step, state.t, state.dt, scheme_name(run.scheme), state.u, &state.p),
                          run.checkpoint_path);
  long long c_iters = 0, s_iters = 0;
  for (const auto& r : records) {
    c_iters += r.c_iters;
    s_iters += r.schur_iters;
  }
  std::printf("scheme %s  steps %zu  t %.6g  velocity iterations %lld  schur iterations %lld\n",
              scheme_name(run.scheme).c_str(), records.size(), state.t, c_iters, s_iters);
  if (!records.empty()) std::printf("final ||D u|| %.3e\n", records.back().div_norm);
  if (non_compliant > 0) std::printf("%d step(s) accepted above the estimator tolerance\n", non_compliant);
  return 0;
}

int run_bench(const std::string& prm, const std::vector<int>& ranks, const std::string& out) {
  const ParamTree p = load_params(prm);
  PoissonConfig base = poisson_from_params(p);
  p.warn_unused();
  std::ostringstream csv;
  csv << "subdomains,dofs,iterations,relative_residual,setup_seconds,solve_seconds,mean_factor_seconds,max_factor_seconds\n";
  for (int k : ranks) {
    if (k < 1) throw ConfigError("--ranks entries must be >= 1");
    PoissonConfig cfg = base;
    cfg.n_ranks = k;
    const PoissonSystem sys = assemble_poisson(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const auto prec = make_preconditioner(sys.a, cfg.solver);
    const auto t1 = std::chrono::steady_clock::now();
    DistVector u(sys.space->unique_map);
    const SolverStats st = solve_with(sys.a, sys.b, u, *prec, cfg.solver);
    const auto t2 = std::chrono::steady_clock::now();
    if (!st.converged) throw SolverDivergence("bench solve with " + std::to_string(k) + " subdomains did not converge");
    double mean = 0.0, mx = 0.0;
    if (const auto* s = dynamic_cast<const SchwarzPreconditioner*>(prec.get())) {
      for (int i = 0; i < s->n_subdomains(); ++i) {
        mean += s->factorization_seconds(i);
        mx = std::max(mx, s->factorization_seconds(i));
      }
      mean /= s->n_subdomains();
    }
    char line[256];
    std::snprintf(line, sizeof line, "%d,%llu,%d,%.3e,%.6f,%.6f,%.6f,%.6f\n", k,
                  static_cast<unsigned long long>(sys.space->global_size()), st.iterations, st.relative_residual,
                  std::chrono::duration<double>(t1 - t0).count(), std::chrono::duration<double>(t2 - t1).count(), mean, mx);
    csv << line;
  }
  std::cout << csv.str();
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot open '" + out + "' for writing");
    f << csv.str();
  }
  return 0;
}

int run_partition_info(const std::string& prm, int ranks) {
  const ParamTree p = load_params(prm);
  const int dim = static_cast<int>(p.get_int("mesh.dim", 3));
  const int n = static_cast<int>(p.get_int("mesh.n", 8));
  const int degree = static_cast<int>(p.get_int("poisson.degree", 1));
  if (ranks <= 0) ranks = static_cast<int>(p.get_int("partition.ranks", 4));
  const unsigned seed = static_cast<unsigned>(p.get_int("partition.seed", 0));
  const int depth = static_cast<int>(p.get_int("partition.halo", 1));
  if (dim != 2 && dim != 3) throw ConfigError("mesh.dim must be 2 or 3");
  if (n < 1 || ranks < 1 || depth < 0) throw ConfigError("mesh.n, ranks must be >= 1 and partition.halo >= 0");
  if (degree != 1 && degree != 2) throw ConfigError("poisson.degree must be 1 or 2");

  BoxSpec box;
  box.dim = dim;
  box.subdivisions = {n, n, dim == 3 ? n : 1};
  const Mesh mesh = generate_box(box);
  const DualGraph g = build_dual_graph(mesh);
  const Partition part = add_halo(partition_greedy(g, ranks, seed), g, depth);
  const DofMap dm = build_dofmap(mesh, part, FiniteElement(degree, dim));

  // Interface DoF: touched by owned cells of more than one rank.
  std::vector<int> touch(dm.n_scalar, -1);
  std::vector<char> iface(dm.n_scalar, 0);
  for (int r = 0; r < ranks; ++r)
    for (Index c : part.owned_elements[static_cast<std::size_t>(r)])
      for (Index d : dm.cell(c)) {
        if (touch[d] >= 0 && touch[d] != r) iface[d] = 1;
        touch[d] = r;
      }

  std::printf("mesh: dim %d, %llu cells, %llu vertices; P%d, %llu DoF; %d ranks, halo depth %d\n", dim,
              static_cast<unsigned long long>(mesh.n_cells()), static_cast<unsigned long long>(mesh.n_vertices()), degree,
              static_cast<unsigned long long>(dm.global_size()), ranks, depth);
  std::printf("%5s %10s %10s %10s %12s %10s %10s\n", "rank", "owned", "halo", "owned_dof", "repeated_dof", "interface",
              "ghost_dof");
  std::size_t total_iface = 0;
  for (int r = 0; r < ranks; ++r) {
    const auto ru = static_cast<std::size_t>(r);
    const std::size_t owned = part.owned_elements[ru].size();
    const std::size_t halo = part.local_elements[ru].size() - owned;
    const auto uni = dm.unique(r);
    const auto rep = dm.repeated(r);
    std::size_t n_iface = 0;
    for (Index d : rep)
      if (d < dm.n_scalar) n_iface += iface[d];
    std::printf("%5d %10zu %10zu %10zu %12zu %10zu %10zu\n", r, owned, halo, uni.size(), rep.size(), n_iface,
                rep.size() - uni.size());
  }
  for (char f : iface) total_iface += f;
  std::printf("interface DoF total: %zu\n", total_iface);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel finite elements: Poisson and incompressible flow drivers"};
  app.require_subcommand(1);
  int workers = 1;
  std::string level = "warn";
  app.add_option("--workers", workers, "worker threads for the in-process ranks")->check(CLI::PositiveNumber);
  app.add_option("--log-level", level, "trace, debug, info, warn, error, off");

  std::string prm;
  int ranks = 0;
  int levels = 0;
  auto* poisson = app.add_subcommand("poisson", "solve -div(kappa grad u) = f");
  poisson->add_option("-p,--params", prm, "parameter file")->required();
  poisson->add_option("--ranks", ranks, "number of subdomains (overrides partition.ranks)")->check(CLI::PositiveNumber);
  poisson->add_option("--convergence", levels, "refinement levels for a convergence study")->check(CLI::PositiveNumber);

  std::string scheme;
  bool adaptive = false;
  auto* ns = app.add_subcommand("ns", "unsteady (Navier-)Stokes time loop");
  ns->add_option("-p,--params", prm, "parameter file")->required();
  ns->add_option("--scheme", scheme, "exact-lu, perot, yosida, yosidaN")->required();
  ns->add_flag("--adaptive", adaptive, "adaptive time stepping (needs yosidaN, N >= 1)");
  ns->add_option("--ranks", ranks, "number of subdomains (overrides partition.ranks)")->check(CLI::PositiveNumber);

  std::vector<int> bench_ranks{1, 2, 4, 8};
  std::string bench_out;
  auto* bench = app.add_subcommand("bench-scaling", "iterations and timings versus subdomain count");
  bench->add_option("-p,--params", prm, "parameter file")->required();
  bench->add_option("--ranks", bench_ranks, "comma-separated subdomain counts")->delimiter(',');
  bench->add_option("-o,--output", bench_out, "also write the CSV here");

  auto* info = app.add_subcommand("partition-info", "partition sizes, interface DoF and halo sizes");
  info->add_option("-p,--params", prm, "parameter file (mesh.*, partition.*)");
  info->add_option("--ranks", ranks, "number of parts (default partition.ranks or 4)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return exit_config;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(level));
    set_worker_count(workers);
    if (*poisson) return run_poisson(prm, ranks, levels);
    if (*ns) return run_ns(prm, scheme, adaptive, ranks);
    if (*bench) return run_bench(prm, bench_ranks, bench_out);
    if (*info) return run_partition_info(prm, ranks);
  } catch (const SolverDivergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_divergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
