#include <gtest/gtest.h>

#include "support.hpp"

using namespace pfem;
using namespace pfem::test;

namespace {

RankMapPtr block_map(Index n, int k) {
  std::vector<Rank> owner(n);
  for (Index i = 0; i < n; ++i) owner[i] = static_cast<Rank>(i * static_cast<Index>(k) / n);
  return RankMap::unique(std::move(owner), k);
}

DistMatrix dense_to_dist(const Dense& d, int k) {
  std::vector<Triplet> t;
  for (Index i = 0; i < d.size(); ++i)
    for (Index j = 0; j < d.size(); ++j)
      if (d[i][j] != 0.0) t.push_back({i, j, d[i][j]});
  const auto m = block_map(d.size(), k);
  return DistMatrix::scatter(m, m, CsrMatrix::from_triplets(d.size(), d.size(), std::move(t)));
}

DirichletDofs dofs_of(std::vector<Index> d, std::vector<double> v) { return {std::move(d), std::move(v)}; }

PoissonConfig small_poisson(bool symmetrize) {
  PoissonConfig c;
  c.dim = 2;
  c.n = 8;
  c.degree = 2;
  c.n_ranks = 3;
  c.symmetrize = symmetrize;
  c.dirichlet_markers = {1, 2, 3};
  c.neumann_markers = {4};
  c.solver = {KrylovMethod::gmres, 1e-12, 2000, 60, PreconditionerKind::schwarz, 1, SubdomainSolverKind::sparse_lu};
  return c;
}

}  // namespace

TEST(ResolveDirichlet, WholeBoundaryCounts) {
  for (int n : {2, 5}) {
    const Mesh m = box_mesh(2, n);
    const DofMap V = build_dofmap(m, make_partition(m, 2), FiniteElement(1, 2));
    const auto bc = resolve_dirichlet(m, V, BCSet{}.dirichlet(1, 5.0).dirichlet(2, 5.0).dirichlet(3, 5.0).dirichlet(4, 5.0));
    EXPECT_EQ(bc.size(), static_cast<Index>(4 * n));
    for (double v : bc.values) EXPECT_EQ(v, 5.0);
    EXPECT_TRUE(std::is_sorted(bc.dofs.begin(), bc.dofs.end()));
  }
  // One side of the unit cube: (n+1)^2 vertices.
  const Mesh c = box_mesh(3, 4);
  const DofMap V = build_dofmap(c, make_partition(c, 1), FiniteElement(1, 3));
  const auto bc = resolve_dirichlet(c, V, BCSet{}.dirichlet(1, 0.0));
  EXPECT_EQ(bc.size(), 25u);
  for (Index d : bc.dofs) EXPECT_EQ(c.vertices[d][0], 0.0);
}

TEST(ResolveDirichlet, P2MidpointsSeeTheFunction) {
  const Mesh m = box_mesh(2, 3);
  const DofMap V = build_dofmap(m, make_partition(m, 1), FiniteElement(2, 2));
  const auto bc = resolve_dirichlet(m, V, BCSet{}.dirichlet(3, [](const Point& x) {
    const double v = x[0] + x[1];
    return Vec3{v, v, v};
  }));
  EXPECT_EQ(bc.size(), 7u);  // 4 vertices + 3 edge midpoints on y = 0
  int midpoints = 0;
  for (std::size_t k = 0; k < bc.size(); ++k) {
    const Point& x = V.dof_points[bc.dofs[k]];
    EXPECT_EQ(x[1], 0.0);
    EXPECT_DOUBLE_EQ(bc.values[k], x[0] + x[1]);
    midpoints += bc.dofs[k] >= V.n_vertices;
  }
  EXPECT_EQ(midpoints, 3);
}

TEST(ResolveDirichlet, VectorSpaceComponents) {
  const Mesh m = box_mesh(2, 2);
  const DofMap S = build_dofmap(m, make_partition(m, 1), FiniteElement(1, 2));
  const DofMap V = with_components(S, 2);
  const auto bc = resolve_dirichlet(m, V, BCSet{}.dirichlet(4, [](const Point&) { return Vec3{1.0, -2.0, 0.0}; }));
  ASSERT_EQ(bc.size(), 6u);
  for (std::size_t k = 0; k < bc.size(); ++k) EXPECT_EQ(bc.values[k], bc.dofs[k] < S.n_scalar ? 1.0 : -2.0);
}

TEST(ResolveDirichlet, LowestMarkerWinsOnSharedDofs) {
  const Mesh m = box_mesh(2, 2);
  const DofMap V = build_dofmap(m, make_partition(m, 1), FiniteElement(1, 2));
  const auto bc = resolve_dirichlet(m, V, BCSet{}.dirichlet(3, 7.0).dirichlet(1, 1.0));
  for (std::size_t k = 0; k < bc.size(); ++k) {
    const Point& x = V.dof_points[bc.dofs[k]];
    EXPECT_EQ(bc.values[k], x[0] == 0.0 ? 1.0 : 7.0);
  }
}

TEST(ResolveDirichlet, UnknownOrDuplicateMarkerIsConfigError) {
  const Mesh m = box_mesh(2, 2);
  const DofMap V = build_dofmap(m, make_partition(m, 1), FiniteElement(1, 2));
  EXPECT_THROW(resolve_dirichlet(m, V, BCSet{}.dirichlet(9, 0.0)), ConfigError);
  EXPECT_THROW(resolve_dirichlet(m, V, BCSet{}.neumann(9, {})), ConfigError);
  EXPECT_THROW(resolve_dirichlet(m, V, BCSet{}.dirichlet(1, 0.0).dirichlet(1, 1.0)), ConfigError);
}

TEST(ApplyDirichlet, HandOracle3x3) {
  const Dense a{{4, -1, 0}, {-1, 4, -1}, {0, -1, 4}};
  const DirichletDofs bc = dofs_of({0}, {2.0});
  {
    DistMatrix m = dense_to_dist(a, 1);
    DistVector b = DistVector::scatter(m.row_map_ptr(), std::vector<double>{1, 1, 1});
    const auto c = apply_dirichlet(m, b, bc, false);
    ASSERT_EQ(c, std::vector<double>{4.0});
    EXPECT_EQ(to_dense(m), (Dense{{4, 0, 0}, {-1, 4, -1}, {0, -1, 4}}));
    EXPECT_EQ(b.gather(), (std::vector<double>{8, 1, 1}));
  }
  {
    DistMatrix m = dense_to_dist(a, 2);
    DistVector b = DistVector::scatter(m.row_map_ptr(), std::vector<double>{1, 1, 1});
    apply_dirichlet(m, b, bc, true);
    EXPECT_EQ(to_dense(m), (Dense{{4, 0, 0}, {0, 4, -1}, {0, -1, 4}}));
    EXPECT_EQ(b.gather(), (std::vector<double>{8, 3, 1}));
  }
}

TEST(ApplyDirichlet, ZeroDiagonalFallsBackToOne) {
  CsrMatrix a = CsrMatrix::from_pattern(2, 2, {0, 2, 4}, {0, 1, 0, 1});
  a.vals = {0.0, 3.0, 1.0, 2.0};
  const auto map = block_map(2, 1);
  DistMatrix m = DistMatrix::scatter(map, map, a);
  DistVector b(map, 1.0);
  EXPECT_EQ(apply_dirichlet(m, b, dofs_of({0}, {-3.0}), false), std::vector<double>{1.0});
  EXPECT_EQ(b.gather()[0], -3.0);
}

TEST(ApplyDirichlet, SymmetricIdempotentAndTouchesOnlyDirichletRows) {
  PoissonConfig cfg = small_poisson(true);
  cfg.dirichlet_markers = {};
  cfg.neumann_markers = {};
  PoissonSystem raw = assemble_poisson(cfg);
  const Mesh& m = raw.mesh;
  const auto bc = resolve_dirichlet(m, *raw.space, BCSet{}.dirichlet(1, 1.0).dirichlet(3, [](const Point& x) {
    return Vec3{x[0], x[0], x[0]};
  }));
  const Dense before = to_dense(raw.a);
  const auto is_bc = bc.dense(raw.a.n_rows());

  for (bool sym : {false, true}) {
    DistMatrix a = raw.a;
    DistVector b = raw.b;
    const auto c1 = apply_dirichlet(a, b, bc, sym);
    const Dense once = to_dense(a);
    const auto b_once = b.gather();
    const auto c2 = apply_dirichlet(a, b, bc, sym);
    EXPECT_EQ(c1, c2);
    EXPECT_EQ(to_dense(a), once);
    EXPECT_EQ(b.gather(), b_once);
    for (Index i = 0; i < once.size(); ++i) {
      if (std::isnan(is_bc[i])) {
        for (Index j = 0; j < once.size(); ++j)
          if (!sym || std::isnan(is_bc[j])) {
            EXPECT_EQ(once[i][j], before[i][j]);
          }
      } else {
        for (Index j = 0; j < once.size(); ++j) EXPECT_EQ(once[i][j], i == j ? std::abs(before[i][i]) : 0.0);
      }
    }
    if (sym) {
      for (Index i = 0; i < once.size(); ++i)
        for (Index j = 0; j < i; ++j) EXPECT_EQ(once[i][j], once[j][i]);
    }
  }
}

TEST(ApplyDirichlet, DirichletValuesRecoveredBySolve) {
  for (bool sym : {false, true}) {
    PoissonConfig cfg = small_poisson(sym);
    PoissonSystem sys = assemble_poisson(cfg);
    DistVector x(sys.a.row_map_ptr());
    const auto st = solve(sys.a, sys.b, x, cfg.solver);
    ASSERT_TRUE(st.converged);
    for (std::size_t k = 0; k < sys.dirichlet.size(); ++k)
      EXPECT_NEAR(x.at(sys.dirichlet.dofs[k]), sys.dirichlet.values[k], 1e-10);
  }
}

TEST(ApplyDirichlet, SymmetrizedAndPlainGiveTheSameSolution) {
  std::vector<double> sols[2];
  for (bool sym : {false, true}) {
    PoissonConfig cfg = small_poisson(sym);
    PoissonSystem sys = assemble_poisson(cfg);
    DistVector x(sys.a.row_map_ptr());
    ASSERT_TRUE(solve(sys.a, sys.b, x, cfg.solver).converged);
    sols[sym] = x.gather();
  }
  for (Index i = 0; i < sols[0].size(); ++i) EXPECT_NEAR(sols[0][i], sols[1][i], 1e-9);
}

TEST(ApplyDirichlet, MissingDiagonalIsPatternError) {
  CsrMatrix a = CsrMatrix::from_pattern(2, 2, {0, 1, 2}, {1, 0});
  a.vals = {1.0, 1.0};
  const auto map = block_map(2, 1);
  DistMatrix m = DistMatrix::scatter(map, map, a);
  DistVector b(map);
  EXPECT_THROW(apply_dirichlet(m, b, dofs_of({0}, {1.0}), false), PatternError);
}
