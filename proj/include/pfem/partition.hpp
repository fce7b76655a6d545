#pragma once

/// \file partition.hpp
/// \brief Element dual graph, greedy graph-growing partitioner, ghost halos
/// and per-rank submesh extraction.

#include <deque>
#include <limits>
#include <vector>

#include "mesh.hpp"

namespace pfem {

/// Face adjacency between cells. Neighbor lists are sorted.
struct DualGraph {
  std::vector<std::vector<Index>> adjacency;

  Index n_elements() const { return adjacency.size(); }
};

inline DualGraph build_dual_graph(const Mesh& mesh) {
  DualGraph g;
  g.adjacency.resize(mesh.n_cells());
  const auto table = build_face_table(mesh);
  for (const auto& [key, cells] : table) {
    for (std::size_t a = 0; a < cells.size(); ++a)
      for (std::size_t b = a + 1; b < cells.size(); ++b) {
        g.adjacency[cells[a].first].push_back(cells[b].first);
        g.adjacency[cells[b].first].push_back(cells[a].first);
      }
  }
  for (auto& adj : g.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  return g;
}

struct Partition {
  int n_ranks = 1;
  std::vector<Rank> owner;                         // element -> rank
  std::vector<std::vector<Index>> owned_elements;  // sorted
  std::vector<std::vector<Index>> local_elements;  // sorted, owned + halo
  int halo_depth = 0;

  Index n_elements() const { return owner.size(); }
};

namespace detail {
inline Partition partition_from_owner(std::vector<Rank> owner, int n_ranks) {
  Partition p;
  p.n_ranks = n_ranks;
  p.owned_elements.resize(static_cast<std::size_t>(n_ranks));
  for (Index e = 0; e < owner.size(); ++e) p.owned_elements[static_cast<std::size_t>(owner[e])].push_back(e);
  p.local_elements = p.owned_elements;
  p.owner = std::move(owner);
  return p;
}
}  // namespace detail

/// Every element owned by rank 0.
inline Partition trivial_partition(Index n_elements) {
  return detail::partition_from_owner(std::vector<Rank>(n_elements, 0), 1);
}

/// Greedy graph growing.
///
/// Parts are grown one at a time. Each part is seeded at the unassigned
/// element of minimum unassigned degree (ties: lowest index, rotated by
/// `seed` among the tied candidates) and grown breadth-first, neighbors in
/// increasing index order, until it holds ceil(remaining / remaining_ranks)
/// elements. When the frontier runs dry before that (disconnected graph or an
/// enclosed pocket) the part is reseeded with the same rule.
inline Partition partition_greedy(const DualGraph& graph, int n_ranks, unsigned seed = 0) {
  const Index n = graph.n_elements();
  if (n_ranks < 1) throw ConfigError("n_ranks must be >= 1");
  if (n == 0) throw ConfigError("cannot partition an empty graph");
  if (static_cast<Index>(n_ranks) > n) throw ConfigError("n_ranks exceeds the number of elements");

  constexpr Rank unassigned = -1;
  std::vector<Rank> owner(n, unassigned);
  std::vector<Index> free_degree(n);
  for (Index e = 0; e < n; ++e) free_degree[e] = graph.adjacency[e].size();
  std::vector<char> queued(n, 0);

  auto pick_seed = [&]() {
    Index best = std::numeric_limits<Index>::max();
    std::vector<Index> candidates;
    for (Index e = 0; e < n; ++e) {
      if (owner[e] != unassigned) continue;
      if (free_degree[e] < best) {
        best = free_degree[e];
        candidates.clear();
      }
      if (free_degree[e] == best) candidates.push_back(e);
    }
    return candidates[seed % candidates.size()];
  };

  Index remaining = n;
  for (int r = 0; r < n_ranks; ++r) {
    const Index left = static_cast<Index>(n_ranks - r);
    const Index target = (remaining + left - 1) / left;
    Index count = 0;
    std::deque<Index> frontier;
    while (count < target) {
      if (frontier.empty()) {
        const Index s = pick_seed();
        frontier.push_back(s);
        queued[s] = 1;
      }
      const Index e = frontier.front();
      frontier.pop_front();
      owner[e] = r;
      ++count;
      for (Index nb : graph.adjacency[e]) {
        --free_degree[nb];
        if (owner[nb] == unassigned && !queued[nb]) {
          queued[nb] = 1;
          frontier.push_back(nb);
        }
      }
    }
    for (Index e : frontier) queued[e] = 0;
    remaining -= count;
  }
  return detail::partition_from_owner(std::move(owner), n_ranks);
}

/// Expands every rank's local element set by `depth` face-adjacency layers.
/// Ownership is unchanged.
inline Partition add_halo(const Partition& partition, const DualGraph& graph, int depth) {
  if (depth < 0) throw ConfigError("halo depth must be non-negative");
  Partition out = partition;
  out.halo_depth = partition.halo_depth + depth;
  if (depth == 0) return out;
  const Index n = graph.n_elements();
  for (int r = 0; r < partition.n_ranks; ++r) {
    std::vector<char> in(n, 0);
    std::vector<Index> layer = partition.local_elements[static_cast<std::size_t>(r)];
    for (Index e : layer) in[e] = 1;
    for (int d = 0; d < depth; ++d) {
      std::vector<Index> next;
      for (Index e : layer)
        for (Index nb : graph.adjacency[e])
          if (!in[nb]) {
            in[nb] = 1;
            next.push_back(nb);
          }
      layer = std::move(next);
    }
    auto& local = out.local_elements[static_cast<std::size_t>(r)];
    local.clear();
    for (Index e = 0; e < n; ++e)
      if (in[e]) local.push_back(e);
  }
  return out;
}

/// Submesh induced by one rank's local elements plus maps back to global
/// indices. Vertices keep increasing global order.
struct RankMesh {
  Mesh mesh;
  std::vector<Index> cell_to_global;
  std::vector<Index> vertex_to_global;
};

/// Only faces of the global boundary are kept as boundary faces; interface
/// faces between ranks stay unmarked.
inline RankMesh restrict_mesh(const Mesh& mesh, const Partition& partition, Rank rank) {
  if (rank < 0 || rank >= partition.n_ranks) throw ConfigError("rank out of range");
  const auto& cells = partition.local_elements[static_cast<std::size_t>(rank)];
  RankMesh out;
  out.mesh.dim = mesh.dim;
  out.cell_to_global = cells;

  std::vector<Index> g2l(mesh.n_vertices(), static_cast<Index>(-1));
  for (Index c : cells)
    for (Index v : mesh.cell(c)) g2l[v] = 0;
  for (Index v = 0; v < mesh.n_vertices(); ++v)
    if (g2l[v] == 0) {
      g2l[v] = out.vertex_to_global.size();
      out.vertex_to_global.push_back(v);
      out.mesh.vertices.push_back(mesh.vertices[v]);
    }

  std::vector<Index> buf;
  for (Index c : cells) {
    buf.clear();
    for (Index v : mesh.cell(c)) buf.push_back(g2l[v]);
    if (mesh.cell_markers.empty())
      out.mesh.add_cell(buf);
    else
      out.mesh.add_cell(buf, mesh.cell_markers[c]);
  }

  std::vector<char> local(mesh.n_cells(), 0);
  for (Index c : cells) local[c] = 1;
  const auto owners = boundary_face_owners(mesh);
  for (Index f = 0; f < mesh.n_boundary_faces(); ++f) {
    if (!local[owners[f].cell]) continue;
    buf.clear();
    for (Index v : mesh.face(f)) buf.push_back(g2l[v]);
    out.mesh.add_face(buf, mesh.face_markers[f]);
  }
  return out;
}

}  // namespace pfem
