#pragma once

/// \file fe.hpp
/// \brief Lagrange P1/P2 elements on the reference simplex and tabulated
/// symmetric quadrature rules.
///
/// Reference simplex: vertices 0, e1, e2 (, e3). Barycentric coordinates are
/// l0 = 1 - sum(x), lk = x_k.

#include <array>
#include <span>
#include <vector>

#include "core.hpp"

namespace pfem {

struct QuadratureRule {
  int dim = 0;  // 1 = segment [0,1], 2 = triangle, 3 = tetrahedron
  std::vector<Point> points;
  std::vector<double> weights;
  int exact_degree = 0;

  std::size_t size() const { return weights.size(); }
};

namespace detail {

// Fully symmetric orbits written in barycentric coordinates.
inline void add_orbit_s21(QuadratureRule& q, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  const std::array<std::array<double, 3>, 3> bary{{{a, a, b}, {a, b, a}, {b, a, a}}};
  for (const auto& l : bary) {
    q.points.push_back(Point{{l[1], l[2], 0.0}});
    q.weights.push_back(w);
  }
}

inline void add_orbit_s31(QuadratureRule& q, double a, double w) {
  const double b = 1.0 - 3.0 * a;
  for (int k = 0; k < 4; ++k) {
    std::array<double, 4> l{a, a, a, a};
    l[static_cast<std::size_t>(k)] = b;
    q.points.push_back(Point{{l[1], l[2], l[3]}});
    q.weights.push_back(w);
  }
}

inline void add_orbit_s22(QuadratureRule& q, double a, double w) {
  const double b = 0.5 - a;
  const std::array<std::array<double, 4>, 6> bary{
      {{a, a, b, b}, {a, b, a, b}, {a, b, b, a}, {b, a, a, b}, {b, a, b, a}, {b, b, a, a}}};
  for (const auto& l : bary) {
    q.points.push_back(Point{{l[1], l[2], l[3]}});
    q.weights.push_back(w);
  }
}

}  // namespace detail

/// Tabulated rules for dim 2 and 3 up to degree 4 (triangle: 1, 3, 6 points;
/// tetrahedron: 1, 4, 14 points, the last exact to degree 5), and Gauss
/// rules on the unit segment (dim 1) up to degree 5 for 2D facets.
inline QuadratureRule quadrature_for(int dim, int required_degree) {
  if (required_degree < 0) throw ConfigError("quadrature degree must be non-negative");
  QuadratureRule q;
  q.dim = dim;
  if (dim == 1) {
    if (required_degree > 5) throw ConfigError("unsupported quadrature degree " + std::to_string(required_degree));
    if (required_degree <= 1) {
      q.points = {Point{{0.5, 0, 0}}};
      q.weights = {1.0};
      q.exact_degree = 1;
    } else if (required_degree <= 3) {
      const double h = 0.5 / std::sqrt(3.0);
      q.points = {Point{{0.5 - h, 0, 0}}, Point{{0.5 + h, 0, 0}}};
      q.weights = {0.5, 0.5};
      q.exact_degree = 3;
    } else {
      const double h = 0.5 * std::sqrt(0.6);
      q.points = {Point{{0.5 - h, 0, 0}}, Point{{0.5, 0, 0}}, Point{{0.5 + h, 0, 0}}};
      q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
      q.exact_degree = 5;
    }
    return q;
  }
  if (dim != 2 && dim != 3) throw ConfigError("quadrature dimension must be 1, 2 or 3");
  if (required_degree > 4) throw ConfigError("unsupported quadrature degree " + std::to_string(required_degree));

  if (dim == 2) {
    if (required_degree <= 1) {
      q.points = {Point{{1.0 / 3.0, 1.0 / 3.0, 0}}};
      q.weights = {0.5};
      q.exact_degree = 1;
    } else if (required_degree == 2) {
      detail::add_orbit_s21(q, 1.0 / 6.0, 1.0 / 6.0);
      q.exact_degree = 2;
    } else {
      detail::add_orbit_s21(q, 0.44594849091596488631832925388305, 0.5 * 0.22338158967801146569500700843312);
      detail::add_orbit_s21(q, 0.091576213509770743459571463402202, 0.5 * 0.10995174365532186763832632490021);
      q.exact_degree = 4;
    }
    return q;
  }

  if (required_degree <= 1) {
    q.points = {Point{{0.25, 0.25, 0.25}}};
    q.weights = {1.0 / 6.0};
    q.exact_degree = 1;
  } else if (required_degree == 2) {
    detail::add_orbit_s31(q, (5.0 - std::sqrt(5.0)) / 20.0, 1.0 / 24.0);
    q.exact_degree = 2;
  } else {
    detail::add_orbit_s31(q, 0.092735250310891226402323913737031, 0.012248840519393658257285034247721);
    detail::add_orbit_s31(q, 0.31088591926330060979734573376346, 0.018781320953002641799864275388881);
    detail::add_orbit_s22(q, 0.045503704125649649491880526279339, 0.0070910034628469110730115713533762);
    q.exact_degree = 5;
  }
  return q;
}

/// Rule for the boundary facets of a dim-dimensional cell.
inline QuadratureRule facet_quadrature_for(int cell_dim, int required_degree) {
  return quadrature_for(cell_dim - 1, required_degree);
}

/// Vertices of the reference simplex of dimension dim.
inline Point reference_vertex(int dim, int k) {
  Point p;
  if (k > 0 && k <= dim) p[static_cast<std::size_t>(k - 1)] = 1.0;
  return p;
}

/// Continuous Lagrange element of degree 1 or 2.
///
/// Local DoF order: the dim+1 vertices, then (P2) the edges in lexicographic
/// vertex-pair order: (0,1),(0,2),(1,2) for triangles and
/// (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) for tetrahedra.
class FiniteElement {
 public:
  FiniteElement(int degree, int dim) : degree_(degree), dim_(dim) {
    if (degree != 1 && degree != 2) throw ConfigError("only P1 and P2 elements are supported");
    if (dim != 2 && dim != 3) throw ConfigError("element dimension must be 2 or 3");
  }

  int degree() const { return degree_; }
  int dim() const { return dim_; }
  int n_vertices() const { return dim_ + 1; }
  int n_edges() const { return dim_ == 2 ? 3 : 6; }
  int n_local_dof() const { return degree_ == 1 ? n_vertices() : n_vertices() + n_edges(); }

  std::array<int, 2> edge(int e) const {
    static constexpr std::array<std::array<int, 2>, 3> tri{{{0, 1}, {0, 2}, {1, 2}}};
    static constexpr std::array<std::array<int, 2>, 6> tet{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
    return dim_ == 2 ? tri[static_cast<std::size_t>(e)] : tet[static_cast<std::size_t>(e)];
  }

  /// Reference coordinates of local node k.
  Point node(int k) const {
    if (k < n_vertices()) return reference_vertex(dim_, k);
    const auto e = edge(k - n_vertices());
    return 0.5 * (reference_vertex(dim_, e[0]) + reference_vertex(dim_, e[1]));
  }

  /// Values and reference-space gradients of all local basis functions.
  void eval(const Point& x, std::span<double> values, std::span<Vec3> grads) const {
    std::array<double, 4> l{};
    std::array<Vec3, 4> gl{};
    l[0] = 1.0;
    for (int k = 0; k < dim_; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      l[ku + 1] = x[ku];
      l[0] -= x[ku];
      gl[ku + 1][ku] = 1.0;
      gl[0][ku] = -1.0;
    }
    const int nv = n_vertices();
    if (degree_ == 1) {
      for (int i = 0; i < nv; ++i) {
        values[static_cast<std::size_t>(i)] = l[static_cast<std::size_t>(i)];
        grads[static_cast<std::size_t>(i)] = gl[static_cast<std::size_t>(i)];
      }
      return;
    }
    for (int i = 0; i < nv; ++i) {
      const double li = l[static_cast<std::size_t>(i)];
      values[static_cast<std::size_t>(i)] = li * (2.0 * li - 1.0);
      grads[static_cast<std::size_t>(i)] = (4.0 * li - 1.0) * gl[static_cast<std::size_t>(i)];
    }
    for (int e = 0; e < n_edges(); ++e) {
      const auto [a, b] = edge(e);
      const auto au = static_cast<std::size_t>(a), bu = static_cast<std::size_t>(b);
      values[static_cast<std::size_t>(nv + e)] = 4.0 * l[au] * l[bu];
      grads[static_cast<std::size_t>(nv + e)] = 4.0 * (l[au] * gl[bu] + l[bu] * gl[au]);
    }
  }

  struct Evaluation {
    std::vector<double> values;
    std::vector<Vec3> gradients;
  };

  Evaluation eval(const Point& x) const {
    Evaluation out{std::vector<double>(static_cast<std::size_t>(n_local_dof())),
                   std::vector<Vec3>(static_cast<std::size_t>(n_local_dof()))};
    eval(x, out.values, out.gradients);
    return out;
  }

  friend bool operator==(const FiniteElement&, const FiniteElement&) = default;

 private:
  int degree_;
  int dim_;
};

/// Basis values and reference gradients tabulated at every point of a rule.
struct Tabulation {
  int n_dof = 0;
  std::vector<double> values;  // [q * n_dof + i]
  std::vector<Vec3> gradients;

  std::span<const double> values_at(std::size_t q) const {
    return {values.data() + q * static_cast<std::size_t>(n_dof), static_cast<std::size_t>(n_dof)};
  }
  std::span<const Vec3> gradients_at(std::size_t q) const {
    return {gradients.data() + q * static_cast<std::size_t>(n_dof), static_cast<std::size_t>(n_dof)};
  }
};

inline Tabulation tabulate(const FiniteElement& fe, std::span<const Point> points) {
  Tabulation t;
  t.n_dof = fe.n_local_dof();
  t.values.resize(points.size() * static_cast<std::size_t>(t.n_dof));
  t.gradients.resize(points.size() * static_cast<std::size_t>(t.n_dof));
  for (std::size_t q = 0; q < points.size(); ++q) {
    fe.eval(points[q], {t.values.data() + q * static_cast<std::size_t>(t.n_dof), static_cast<std::size_t>(t.n_dof)},
            {t.gradients.data() + q * static_cast<std::size_t>(t.n_dof), static_cast<std::size_t>(t.n_dof)});
  }
  return t;
}

}  // namespace pfem
