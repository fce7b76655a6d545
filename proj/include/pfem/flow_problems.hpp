#pragma once

/// \file flow_problems.hpp
/// \brief Named unsteady flow set-ups on the unit square/cube.

#include <numbers>

#include "poisson.hpp"
#include "splitting.hpp"

namespace pfem {

struct CavityOptions {
  double lid_ramp = 0.0;   // time constant of 1 - exp(-t/ramp); 0 starts impulsively
  double pulse_center = 0.5;
  double pulse_width = 0.05;
  double pulse_amplitude = 20.0;
  double pulse_base = 0.05;
};

/// Temporal pulse b + a exp(-((t - c)/w)^2).
inline double pulse_profile(double t, const CavityOptions& o) {
  const double s = (t - o.pulse_center) / o.pulse_width;
  return o.pulse_base + o.pulse_amplitude * std::exp(-s * s);
}

/// "cavity": lid-driven, lid on y = 1 (2D) or z = 1 (3D) with a smooth
/// profile vanishing at the lid edges.
/// "pulse": closed box driven by a body force with a rotational part and a
/// gradient part, both modulated by pulse_profile.
inline FlowConfig named_flow_problem(const std::string& name, int dim, int n, double nu, const CavityOptions& o) {
  constexpr double pi = std::numbers::pi;
  if (dim != 2 && dim != 3) throw ConfigError("flow dim must be 2 or 3");
  if (n < 1) throw ConfigError("mesh n must be >= 1");
  FlowConfig cfg;
  cfg.box.dim = dim;
  cfg.box.subdivisions = {n, n, dim == 3 ? n : 1};
  cfg.nu = nu;
  cfg.dirichlet_markers = dim == 3 ? std::vector<int>{1, 2, 3, 4, 5, 6} : std::vector<int>{1, 2, 3, 4};
  if (name == "cavity") {
    const double ramp = o.lid_ramp;
    cfg.velocity_bc = [dim, ramp](const Point& x, double t) {
      const double upper = dim == 3 ? x[2] : x[1];
      if (upper < 1.0 - 1e-12) return Vec3{};
      double s = 16.0 * x[0] * x[0] * (1 - x[0]) * (1 - x[0]);
      if (dim == 3) s *= 16.0 * x[1] * x[1] * (1 - x[1]) * (1 - x[1]);
      const double r = ramp > 0.0 ? 1.0 - std::exp(-t / ramp) : 1.0;
      return Vec3{s * r, 0.0, 0.0};
    };
  } else if (name == "pulse") {
    cfg.forcing = [o](const Point& x, double t) {
      const double a = pulse_profile(t, o);
      const double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]);
      // curl of sin^2(pi x) sin^2(pi y) plus grad of cos(pi x) cos(pi y)
      Vec3 f{pi * sx * sx * std::sin(2 * pi * x[1]), -pi * std::sin(2 * pi * x[0]) * sy * sy, 0.0};
      f = f + Vec3{-pi * sx * std::cos(pi * x[1]), -pi * std::cos(pi * x[0]) * sy, 0.0};
      return a * f;
    };
  } else {
    throw ConfigError("unknown flow problem '" + name + "'");
  }
  return cfg;
}

struct NsRun {
  FlowConfig flow;
  SplitScheme scheme;
  TimeLoopConfig loop;
  double dt = 0.01;
  std::string csv_path;
  std::string checkpoint_path;
  std::string restart_path;
};

inline NsRun ns_from_params(const ParamTree& p, const std::string& scheme_name, bool adaptive) {
  NsRun run;
  CavityOptions o;
  o.lid_ramp = p.get_real("ns.lid_ramp", o.lid_ramp);
  o.pulse_center = p.get_real("ns.pulse_center", o.pulse_center);
  o.pulse_width = p.get_real("ns.pulse_width", o.pulse_width);
  o.pulse_amplitude = p.get_real("ns.pulse_amplitude", o.pulse_amplitude);
  o.pulse_base = p.get_real("ns.pulse_base", o.pulse_base);
  const int dim = static_cast<int>(p.get_int("mesh.dim", 2));
  const int n = static_cast<int>(p.get_int("mesh.n", 8));
  run.flow = named_flow_problem(p.get_string("ns.problem", "cavity"), dim, n, p.get_real("ns.nu", 1.0), o);
  run.flow.convection = p.get_bool("ns.convection", false);
  const std::string inertia = p.get_string("ns.inertia", "lumped");
  if (inertia == "lumped")
    run.flow.inertia = InertiaMass::lumped;
  else if (inertia == "consistent")
    run.flow.inertia = InertiaMass::consistent;
  else
    throw ConfigError("ns.inertia must be 'lumped' or 'consistent'");
  run.flow.n_ranks = static_cast<int>(p.get_int("partition.ranks", 1));
  run.flow.seed = static_cast<unsigned>(p.get_int("partition.seed", 0));
  if (run.flow.n_ranks < 1) throw ConfigError("partition.ranks must be >= 1");
  run.scheme = parse_scheme(scheme_name);
  run.scheme.incremental = p.get_bool("ns.incremental", run.scheme.incremental);
  run.scheme.c_solver = solver_from_params(p, "solver.velocity", run.scheme.c_solver);
  run.scheme.schur_solver = solver_from_params(p, "solver.schur", run.scheme.schur_solver);
  const std::string gauge = p.get_string("ns.pressure_gauge", "pin");
  if (gauge == "pin")
    run.scheme.gauge = PressureGauge::pin_first;
  else if (gauge == "mean-zero")
    run.scheme.gauge = PressureGauge::mean_zero;
  else
    throw ConfigError("ns.pressure_gauge must be 'pin' or 'mean-zero'");
  run.dt = p.get_real("ns.dt", run.dt);
  if (!(run.dt > 0.0)) throw ConfigError("ns.dt must be > 0");
  run.loop.t_end = p.get_real("ns.t_end", 1.0);
  run.loop.max_steps = p.get_int("ns.max_steps", run.loop.max_steps);
  run.loop.adaptive = adaptive;
  run.loop.adapt.tol = p.get_real("adaptive.tol", run.loop.adapt.tol);
  run.loop.adapt.dt_min = p.get_real("adaptive.dt_min", run.loop.adapt.dt_min);
  run.loop.adapt.dt_max = p.get_real("adaptive.dt_max", run.loop.adapt.dt_max);
  run.loop.adapt.theta = p.get_real("adaptive.theta", run.loop.adapt.theta);
  run.loop.adapt.max_retries = static_cast<int>(p.get_int("adaptive.max_retries", run.loop.adapt.max_retries));
  if (adaptive) {
    run.loop.adapt.validate();
    if (run.scheme.kind != SchemeKind::yosida_q || run.scheme.q < 1)
      throw ConfigError("--adaptive needs a pressure-corrected scheme (yosida1, yosida2, ...)");
  }
  run.loop.vtk_every = static_cast<int>(p.get_int("output.vtk_every", 0));
  run.loop.vtk_prefix = p.get_string("output.vtk_prefix", "ns");
  run.csv_path = p.get_string("output.csv", "ns_steps.csv");
  run.checkpoint_path = p.get_string("output.checkpoint", "");
  run.restart_path = p.get_string("output.restart", "");
  return run;
}

}  // namespace pfem
