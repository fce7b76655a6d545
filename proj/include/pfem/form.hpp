#pragma once

/// \file form.hpp
/// \brief Compile-time weak-form expressions.
///
/// A form such as `kappa * dot(grad(u), grad(v)) + sigma * u * v` builds a
/// small expression tree whose type records how many trial and test factors
/// it carries. The assembler evaluates the whole tree at once for each
/// quadrature point and local (test i, trial j) pair, so every sum of terms
/// costs a single element loop.

#include <concepts>
#include <memory>
#include <type_traits>

#include "distributed.hpp"
#include "dofmap.hpp"

namespace pfem::form {

/// Per-cell data handed to every node before the quadrature loop.
struct CellContext {
  Index cell;
  Rank rank;
};

/// Per-quadrature-point data. Gradients are physical.
struct QpContext {
  Point x;
  Point ref;
  std::span<const double> test_phi;
  std::span<const Vec3> test_grad;
  std::span<const double> trial_phi;
  std::span<const Vec3> trial_grad;
};

/// -1 marks an ill-formed combination (e.g. u*u or a bilinear plus a linear term).
constexpr int sum_order(int a, int b) { return a == b ? a : -1; }
constexpr int product_order(int a, int b) { return (a < 0 || b < 0 || a + b > 1) ? -1 : a + b; }

template <class E>
concept Expr = requires(E e, const E ce, const CellContext& c, const QpContext& q) {
  typename E::value_type;
  { E::trial_order } -> std::convertible_to<int>;
  { E::test_order } -> std::convertible_to<int>;
  e.bind_cell(c);
  e.prepare(q);
  { ce.eval(q, 0, 0) } -> std::convertible_to<typename E::value_type>;
};

template <class E>
concept BilinearExpr = Expr<E> && E::trial_order == 1 && E::test_order == 1 &&
                       std::same_as<typename E::value_type, double>;

template <class E>
concept LinearExpr = Expr<E> && E::trial_order == 0 && E::test_order == 1 &&
                     std::same_as<typename E::value_type, double>;

struct NodeBase {
  void bind_cell(const CellContext&) {}
  void prepare(const QpContext&) {}
};

// ----------------------------------------------------------------- terminals

struct TrialFunction : NodeBase {
  using value_type = double;
  static constexpr int trial_order = 1, test_order = 0;
  double eval(const QpContext& q, int, int j) const { return q.trial_phi[static_cast<std::size_t>(j)]; }
};

struct TestFunction : NodeBase {
  using value_type = double;
  static constexpr int trial_order = 0, test_order = 1;
  double eval(const QpContext& q, int i, int) const { return q.test_phi[static_cast<std::size_t>(i)]; }
};

struct TrialGradient : NodeBase {
  using value_type = Vec3;
  static constexpr int trial_order = 1, test_order = 0;
  const Vec3& eval(const QpContext& q, int, int j) const { return q.trial_grad[static_cast<std::size_t>(j)]; }
};

struct TestGradient : NodeBase {
  using value_type = Vec3;
  static constexpr int trial_order = 0, test_order = 1;
  const Vec3& eval(const QpContext& q, int i, int) const { return q.test_grad[static_cast<std::size_t>(i)]; }
};

inline TrialGradient grad(TrialFunction) { return {}; }
inline TestGradient grad(TestFunction) { return {}; }

struct Constant : NodeBase {
  using value_type = double;
  static constexpr int trial_order = 0, test_order = 0;
  double value = 0.0;
  explicit Constant(double v) : value(v) {}
  double eval(const QpContext&, int, int) const { return value; }
};

struct VectorConstant : NodeBase {
  using value_type = Vec3;
  static constexpr int trial_order = 0, test_order = 0;
  Vec3 value;
  explicit VectorConstant(Vec3 v) : value(v) {}
  const Vec3& eval(const QpContext&, int, int) const { return value; }
};

/// Function of the physical point, evaluated at quadrature points.
template <class F>
struct Coefficient : NodeBase {
  using value_type = std::decay_t<std::invoke_result_t<const F&, const Point&>>;
  static constexpr int trial_order = 0, test_order = 0;
  F fn;
  value_type cached{};
  explicit Coefficient(F f) : fn(std::move(f)) {}
  void prepare(const QpContext& q) { cached = fn(q.x); }
  const value_type& eval(const QpContext&, int, int) const { return cached; }
};

template <class F>
Coefficient<F> coefficient(F f) {
  return Coefficient<F>(std::move(f));
}

/// Finite-element field used as a coefficient, e.g. the convecting velocity.
/// Values come from a repeated-mode vector, so each rank reads only its own
/// storage. With one component the value is a scalar, else a Vec3.
template <int Components>
struct FeField : NodeBase {
  using value_type = std::conditional_t<Components == 1, double, Vec3>;
  static constexpr int trial_order = 0, test_order = 0;

  FeField(std::shared_ptr<const DofMap> space, std::shared_ptr<const DistVector> repeated_values)
      : space_(std::move(space)), values_(std::move(repeated_values)) {
    if (space_->n_components != Components) throw FormStructureError("FeField component count mismatch");
    if (values_->is_unique() && space_->n_ranks() > 1)
      throw FormStructureError("FeField needs repeated-mode values");
  }

  void bind_cell(const CellContext& c) {
    const auto dofs = space_->cell(c.cell);
    local_.resize(dofs.size() * static_cast<std::size_t>(Components));
    const auto& data = values_->local(c.rank);
    for (int comp = 0; comp < Components; ++comp)
      for (std::size_t k = 0; k < dofs.size(); ++k) {
        const auto pos = values_->map().find(c.rank, space_->global(dofs[k], comp));
        if (pos < 0) throw InvariantViolation("FeField value not present on rank");
        local_[static_cast<std::size_t>(comp) * dofs.size() + k] = data[static_cast<std::size_t>(pos)];
      }
  }

  void prepare(const QpContext& q) {
    const int n = space_->dofs_per_cell;
    phi_.resize(static_cast<std::size_t>(n));
    grad_.resize(static_cast<std::size_t>(n));
    space_->element.eval(q.ref, phi_, grad_);
    cached_ = value_type{};
    for (int comp = 0; comp < Components; ++comp) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += phi_[static_cast<std::size_t>(k)] * local_[static_cast<std::size_t>(comp * n + k)];
      if constexpr (Components == 1)
        cached_ = s;
      else
        cached_[static_cast<std::size_t>(comp)] = s;
    }
  }

  const value_type& eval(const QpContext&, int, int) const { return cached_; }

 private:
  std::shared_ptr<const DofMap> space_;
  std::shared_ptr<const DistVector> values_;
  std::vector<double> local_;
  std::vector<double> phi_;
  std::vector<Vec3> grad_;
  value_type cached_{};
};

// ----------------------------------------------------------------- operators

namespace detail {
template <class A, class B>
auto multiply_values(const A& a, const B& b) {
  if constexpr (std::is_same_v<A, double> || std::is_same_v<B, double>)
    return a * b;
  else
    static_assert(!sizeof(A), "vector * vector is ambiguous; use dot()");
}
}  // namespace detail

template <Expr A, Expr B>
struct Sum {
  static_assert(std::is_same_v<typename A::value_type, typename B::value_type>, "sum of scalar and vector terms");
  using value_type = typename A::value_type;
  static constexpr int trial_order = sum_order(A::trial_order, B::trial_order);
  static constexpr int test_order = sum_order(A::test_order, B::test_order);
  A a;
  B b;
  double sign = 1.0;
  void bind_cell(const CellContext& c) { a.bind_cell(c), b.bind_cell(c); }
  void prepare(const QpContext& q) { a.prepare(q), b.prepare(q); }
  value_type eval(const QpContext& q, int i, int j) const { return a.eval(q, i, j) + sign * b.eval(q, i, j); }
};

template <Expr A, Expr B>
struct Product {
  using value_type = decltype(detail::multiply_values(std::declval<typename A::value_type>(),
                                                      std::declval<typename B::value_type>()));
  static constexpr int trial_order = product_order(A::trial_order, B::trial_order);
  static constexpr int test_order = product_order(A::test_order, B::test_order);
  A a;
  B b;
  void bind_cell(const CellContext& c) { a.bind_cell(c), b.bind_cell(c); }
  void prepare(const QpContext& q) { a.prepare(q), b.prepare(q); }
  value_type eval(const QpContext& q, int i, int j) const { return detail::multiply_values(a.eval(q, i, j), b.eval(q, i, j)); }
};

template <Expr A, Expr B>
struct Dot {
  static_assert(std::is_same_v<typename A::value_type, Vec3> && std::is_same_v<typename B::value_type, Vec3>,
                "dot() needs two vector-valued operands");
  using value_type = double;
  static constexpr int trial_order = product_order(A::trial_order, B::trial_order);
  static constexpr int test_order = product_order(A::test_order, B::test_order);
  A a;
  B b;
  void bind_cell(const CellContext& c) { a.bind_cell(c), b.bind_cell(c); }
  void prepare(const QpContext& q) { a.prepare(q), b.prepare(q); }
  double eval(const QpContext& q, int i, int j) const { return pfem::dot(a.eval(q, i, j), b.eval(q, i, j)); }
};

/// k-th component of a vector-valued expression, e.g. partial derivative
/// d/dx_k of a trial function is component(grad(u), k).
template <Expr A>
struct Component {
  static_assert(std::is_same_v<typename A::value_type, Vec3>, "component() needs a vector operand");
  using value_type = double;
  static constexpr int trial_order = A::trial_order, test_order = A::test_order;
  A a;
  int k;
  void bind_cell(const CellContext& c) { a.bind_cell(c); }
  void prepare(const QpContext& q) { a.prepare(q); }
  double eval(const QpContext& q, int i, int j) const { return a.eval(q, i, j)[static_cast<std::size_t>(k)]; }
};

template <Expr A, Expr B>
Sum<A, B> operator+(A a, B b) {
  return {std::move(a), std::move(b), 1.0};
}
template <Expr A, Expr B>
Sum<A, B> operator-(A a, B b) {
  return {std::move(a), std::move(b), -1.0};
}
template <Expr A, Expr B>
Product<A, B> operator*(A a, B b) {
  return {std::move(a), std::move(b)};
}
template <Expr A>
Product<Constant, A> operator*(double s, A a) {
  return {Constant(s), std::move(a)};
}
template <Expr A>
Product<A, Constant> operator*(A a, double s) {
  return {std::move(a), Constant(s)};
}
template <Expr A>
Product<Constant, A> operator-(A a) {
  return {Constant(-1.0), std::move(a)};
}
template <Expr A, Expr B>
Dot<A, B> dot(A a, B b) {
  return {std::move(a), std::move(b)};
}
template <Expr A>
Component<A> component(A a, int k) {
  return {std::move(a), k};
}

}  // namespace pfem::form
