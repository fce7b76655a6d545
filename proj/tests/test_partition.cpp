#include <gtest/gtest.h>

#include <algorithm>
#include <queue>
#include <random>
#include <set>

#include "pfem/mesh.hpp"
#include "pfem/partition.hpp"

using namespace pfem;

namespace {

Mesh two_tets() {
  Mesh m;
  m.dim = 3;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  m.cell_vertices = {0, 1, 2, 3, 1, 2, 3, 4};
  if (signed_cell_volume(m, 1) < 0) std::swap(m.cell_vertices[6], m.cell_vertices[7]);
  return m;
}

Mesh box(int dim, int n) {
  BoxSpec b;
  b.dim = dim;
  b.subdivisions = {n, n, dim == 3 ? n : 1};
  return generate_box(b);
}

DualGraph path_graph(Index n) {
  DualGraph g;
  g.adjacency.resize(n);
  for (Index i = 0; i + 1 < n; ++i) {
    g.adjacency[i].push_back(i + 1);
    g.adjacency[i + 1].push_back(i);
  }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
  return g;
}

// All-pairs oracle: cells i != j are adjacent iff they share dim vertices.
std::vector<std::set<Index>> brute_force_adjacency(const Mesh& m) {
  std::vector<std::set<Index>> adj(m.n_cells());
  for (Index i = 0; i < m.n_cells(); ++i)
    for (Index j = 0; j < m.n_cells(); ++j) {
      if (i == j) continue;
      int shared = 0;
      for (Index a : m.cell(i))
        for (Index b : m.cell(j)) shared += a == b;
      if (shared == m.dim) adj[i].insert(j);
    }
  return adj;
}

// Reference halo: plain BFS from the owned set, `depth` layers.
std::vector<Index> reference_halo(const DualGraph& g, const std::vector<Index>& owned, int depth) {
  std::vector<int> dist(g.n_elements(), -1);
  std::queue<Index> q;
  for (Index e : owned) {
    dist[e] = 0;
    q.push(e);
  }
  while (!q.empty()) {
    const Index e = q.front();
    q.pop();
    if (dist[e] == depth) continue;
    for (Index nb : g.adjacency[e])
      if (dist[nb] < 0) {
        dist[nb] = dist[e] + 1;
        q.push(nb);
      }
  }
  std::vector<Index> out;
  for (Index e = 0; e < g.n_elements(); ++e)
    if (dist[e] >= 0) out.push_back(e);
  return out;
}

void expect_disjoint_cover(const Partition& p) {
  std::vector<int> seen(p.n_elements(), 0);
  for (int r = 0; r < p.n_ranks; ++r)
    for (Index e : p.owned_elements[static_cast<std::size_t>(r)]) {
      ++seen[e];
      EXPECT_EQ(p.owner[e], r);
    }
  for (int s : seen) EXPECT_EQ(s, 1);
}

}  // namespace

TEST(DualGraph, TwoTetsShareOneFace) {
  const DualGraph g = build_dual_graph(two_tets());
  ASSERT_EQ(g.n_elements(), 2u);
  EXPECT_EQ(g.adjacency[0], std::vector<Index>{1});
  EXPECT_EQ(g.adjacency[1], std::vector<Index>{0});
}

TEST(DualGraph, CubeIsSymmetricWithEvenDegreeSum) {
  const DualGraph g = build_dual_graph(box(3, 1));
  std::size_t total = 0;
  for (Index i = 0; i < g.n_elements(); ++i) {
    total += g.adjacency[i].size();
    for (Index j : g.adjacency[i]) {
      EXPECT_NE(i, j);
      EXPECT_TRUE(std::binary_search(g.adjacency[j].begin(), g.adjacency[j].end(), i));
    }
  }
  EXPECT_EQ(total % 2, 0u);
}

TEST(DualGraph, MatchesBruteForceFaceMatching) {
  for (int dim : {2, 3}) {
    const Mesh m = box(dim, dim == 2 ? 4 : 2);
    const DualGraph g = build_dual_graph(m);
    const auto oracle = brute_force_adjacency(m);
    for (Index i = 0; i < m.n_cells(); ++i) {
      EXPECT_EQ(std::set<Index>(g.adjacency[i].begin(), g.adjacency[i].end()), oracle[i]);
      EXPECT_GE(g.adjacency[i].size(), 1u);
      EXPECT_LE(g.adjacency[i].size(), static_cast<std::size_t>(dim + 1));
    }
  }
}

TEST(PartitionGreedy, SingleRankOwnsEverything) {
  const DualGraph g = build_dual_graph(box(2, 3));
  const Partition p = partition_greedy(g, 1);
  for (Rank r : p.owner) EXPECT_EQ(r, 0);
  EXPECT_EQ(p.local_elements[0].size(), g.n_elements());
}

TEST(PartitionGreedy, PathGraphSplitsInHalves) {
  // Greedy trace: seed at element 0 (degree 1, lowest index), BFS absorbs
  // 0..3, then the second part is seeded at 4.
  const Partition p = partition_greedy(path_graph(8), 2);
  EXPECT_EQ(p.owned_elements[0], (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_EQ(p.owned_elements[1], (std::vector<Index>{4, 5, 6, 7}));
}

TEST(PartitionGreedy, SingletonParts) {
  const DualGraph g = build_dual_graph(box(2, 2));
  const Partition p = partition_greedy(g, static_cast<int>(g.n_elements()));
  for (const auto& part : p.owned_elements) EXPECT_EQ(part.size(), 1u);
  expect_disjoint_cover(p);
}

TEST(PartitionGreedy, TooManyRanksRejected) {
  EXPECT_THROW(partition_greedy(path_graph(3), 4), ConfigError);
  EXPECT_THROW(partition_greedy(path_graph(3), 0), ConfigError);
}

TEST(PartitionGreedy, BalancedOnConnectedMeshes) {
  for (int n_ranks : {2, 3, 4, 5, 8}) {
    const Partition p = partition_greedy(build_dual_graph(box(3, 4)), n_ranks);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& part : p.owned_elements) {
      lo = std::min(lo, part.size());
      hi = std::max(hi, part.size());
    }
    EXPECT_LE(static_cast<double>(hi) / static_cast<double>(lo), 1.5) << n_ranks;
  }
}

TEST(PartitionGreedy, DisconnectedGraphHasNoEmptyRank) {
  DualGraph g = path_graph(4);
  g.adjacency.resize(8);
  for (Index i = 4; i + 1 < 8; ++i) {
    g.adjacency[i].push_back(i + 1);
    g.adjacency[i + 1].push_back(i);
  }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
  const Partition p = partition_greedy(g, 3);
  for (const auto& part : p.owned_elements) EXPECT_FALSE(part.empty());
  expect_disjoint_cover(p);
}

TEST(AddHalo, DepthZeroIsIdentity) {
  const DualGraph g = build_dual_graph(box(2, 4));
  const Partition p = partition_greedy(g, 3);
  const Partition h = add_halo(p, g, 0);
  EXPECT_EQ(h.local_elements, p.local_elements);
  EXPECT_EQ(h.owner, p.owner);
}

TEST(AddHalo, TwoElementsTwoRanks) {
  const DualGraph g = build_dual_graph(two_tets());
  const Partition h = add_halo(partition_greedy(g, 2), g, 1);
  EXPECT_EQ(h.local_elements[0], (std::vector<Index>{0, 1}));
  EXPECT_EQ(h.local_elements[1], (std::vector<Index>{0, 1}));
}

TEST(AddHalo, MatchesReferenceBfs) {
  const DualGraph g = build_dual_graph(box(3, 3));
  const Partition p = partition_greedy(g, 4);
  for (int depth : {1, 2}) {
    const Partition h = add_halo(p, g, depth);
    EXPECT_EQ(h.owner, p.owner);
    for (int r = 0; r < 4; ++r)
      EXPECT_EQ(h.local_elements[static_cast<std::size_t>(r)],
                reference_halo(g, p.owned_elements[static_cast<std::size_t>(r)], depth));
  }
}

TEST(AddHalo, NegativeDepthRejected) {
  const DualGraph g = path_graph(4);
  EXPECT_THROW(add_halo(partition_greedy(g, 2), g, -1), ConfigError);
}

TEST(RestrictMesh, SingleRankIsIsomorphic) {
  const Mesh m = box(3, 2);
  const RankMesh rm = restrict_mesh(m, trivial_partition(m.n_cells()), 0);
  EXPECT_EQ(rm.mesh.n_vertices(), m.n_vertices());
  EXPECT_EQ(rm.mesh.n_cells(), m.n_cells());
  EXPECT_EQ(rm.mesh.n_boundary_faces(), m.n_boundary_faces());
  EXPECT_NO_THROW(validate(rm.mesh));
}

TEST(RestrictMesh, VertexMapsRoundTrip) {
  const Mesh m = box(3, 1);
  const Partition p = partition_greedy(build_dual_graph(m), 2);
  for (Rank r = 0; r < 2; ++r) {
    const RankMesh rm = restrict_mesh(m, p, r);
    for (Index l = 0; l < rm.vertex_to_global.size(); ++l) {
      const Index g = rm.vertex_to_global[l];
      const auto it = std::find(rm.vertex_to_global.begin(), rm.vertex_to_global.end(), g);
      EXPECT_EQ(static_cast<Index>(it - rm.vertex_to_global.begin()), l);
      EXPECT_EQ(rm.mesh.vertices[l], m.vertices[g]);
    }
    for (Index c = 0; c < rm.mesh.n_cells(); ++c) {
      const auto lc = rm.mesh.cell(c);
      const auto gc = m.cell(rm.cell_to_global[c]);
      for (std::size_t k = 0; k < lc.size(); ++k) EXPECT_EQ(rm.vertex_to_global[lc[k]], gc[k]);
    }
  }
}

TEST(RestrictMesh, OwnedVolumesSumToTotal) {
  const Mesh m = box(3, 3);
  const Partition p = add_halo(partition_greedy(build_dual_graph(m), 4), build_dual_graph(m), 1);
  double sum = 0.0;
  for (Rank r = 0; r < 4; ++r) {
    const RankMesh rm = restrict_mesh(m, p, r);
    for (Index c = 0; c < rm.mesh.n_cells(); ++c) {
      const Index g = rm.cell_to_global[c];
      EXPECT_EQ(cell_volume(rm.mesh, c), cell_volume(m, g));  // bitwise
      if (p.owner[g] == r) sum += cell_volume(rm.mesh, c);
    }
  }
  EXPECT_NEAR(sum, total_volume(m), 1e-12);
}

TEST(RestrictMesh, InterfaceFacesNotMarked) {
  const Mesh m = box(2, 4);
  const Partition p = partition_greedy(build_dual_graph(m), 2);
  std::size_t faces = 0;
  for (Rank r = 0; r < 2; ++r) {
    const RankMesh rm = restrict_mesh(m, p, r);
    faces += rm.mesh.n_boundary_faces();
    for (Index f = 0; f < rm.mesh.n_boundary_faces(); ++f) {
      // every retained face lies on the outer boundary of the unit square
      bool on_boundary = false;
      for (std::size_t k = 0; k < 2; ++k) {
        bool all = true;
        for (double plane : {0.0, 1.0}) {
          all = true;
          for (Index v : rm.mesh.face(f)) all = all && rm.mesh.vertices[v][k] == plane;
          if (all) break;
        }
        on_boundary = on_boundary || all;
      }
      EXPECT_TRUE(on_boundary);
    }
  }
  EXPECT_EQ(faces, m.n_boundary_faces());
}

TEST(PartitionProperties, RandomizedCoverDeterminismAndHaloMonotone) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const int dim = trial % 2 ? 2 : 3;
    const int n = dim == 2 ? 2 + static_cast<int>(rng() % 14) : 1 + static_cast<int>(rng() % 4);
    const Mesh m = box(dim, n);
    ASSERT_LE(m.n_cells(), 500u);
    const DualGraph g = build_dual_graph(m);
    const int n_ranks = 1 + static_cast<int>(rng() % std::min<Index>(8, g.n_elements()));
    const unsigned seed = static_cast<unsigned>(rng() % 5);
    const Partition p = partition_greedy(g, n_ranks, seed);
    expect_disjoint_cover(p);
    EXPECT_EQ(partition_greedy(g, n_ranks, seed).owner, p.owner);
    Partition prev = p;
    for (int depth = 1; depth <= 3; ++depth) {
      const Partition h = add_halo(p, g, depth);
      for (int r = 0; r < n_ranks; ++r) {
        const auto& a = prev.local_elements[static_cast<std::size_t>(r)];
        const auto& b = h.local_elements[static_cast<std::size_t>(r)];
        EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
      }
      prev = h;
    }
  }
}
