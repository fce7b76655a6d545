#pragma once

/// \file dofmap.hpp
/// \brief Global DoF numbering plus per-rank repeated and unique maps.
///
/// Numbering is independent of the rank count: vertex DoF [0, n_v), then
/// (P2) edge DoF [n_v, n_v + n_e) with edges in lexicographic order of their
/// sorted vertex pair. A DoF belongs to the lowest rank that owns an element
/// touching it. Vector-valued spaces are blocked by component:
/// global = component * n_scalar + scalar.

#include <memory>

#include "distributed.hpp"
#include "fe.hpp"
#include "mesh.hpp"
#include "partition.hpp"

namespace pfem {

struct DofMap {
  FiniteElement element{1, 2};
  int n_components = 1;
  Index n_vertices = 0;
  std::vector<std::array<Index, 2>> edges;
  Index n_scalar = 0;
  int dofs_per_cell = 0;
  std::vector<Index> cell_dofs;   // scalar DoF per mesh cell, flat
  std::vector<Point> dof_points;  // per scalar DoF
  std::vector<Rank> scalar_owner;
  std::shared_ptr<const Partition> partition;
  RankMapPtr unique_map;
  RankMapPtr repeated_map;

  Index global_size() const { return n_scalar * static_cast<Index>(n_components); }
  int n_ranks() const { return partition->n_ranks; }
  std::span<const Index> cell(Index c) const {
    return {cell_dofs.data() + c * static_cast<Index>(dofs_per_cell), static_cast<Index>(dofs_per_cell)};
  }
  Index global(Index scalar, int component) const {
    return static_cast<Index>(component) * n_scalar + scalar;
  }
  std::span<const Index> repeated(Rank r) const { return repeated_map->indices(r); }
  std::span<const Index> unique(Rank r) const { return unique_map->indices(r); }
  Rank owner(Index g) const { return unique_map->owner(g); }
};

namespace detail {
inline RankMapPtr expand_repeated(const std::vector<std::vector<Index>>& scalar, Index n_scalar, int ncomp) {
  std::vector<std::vector<Index>> idx(scalar.size());
  for (std::size_t r = 0; r < scalar.size(); ++r) {
    idx[r].reserve(scalar[r].size() * static_cast<std::size_t>(ncomp));
    for (int c = 0; c < ncomp; ++c)
      for (Index s : scalar[r]) idx[r].push_back(static_cast<Index>(c) * n_scalar + s);
  }
  return RankMap::repeated(n_scalar * static_cast<Index>(ncomp), std::move(idx));
}

inline RankMapPtr expand_unique(const std::vector<Rank>& scalar_owner, int ncomp, int n_ranks) {
  std::vector<Rank> owner;
  owner.reserve(scalar_owner.size() * static_cast<std::size_t>(ncomp));
  for (int c = 0; c < ncomp; ++c) owner.insert(owner.end(), scalar_owner.begin(), scalar_owner.end());
  return RankMap::unique(std::move(owner), n_ranks);
}
}  // namespace detail

inline DofMap build_dofmap(const Mesh& mesh, const Partition& partition, const FiniteElement& element,
                           int n_components = 1) {
  if (element.dim() != mesh.dim) throw ConfigError("element dimension does not match mesh dimension");
  if (partition.n_elements() != mesh.n_cells()) throw ConfigError("partition does not match mesh");
  if (n_components < 1) throw ConfigError("n_components must be >= 1");
  DofMap dm;
  dm.element = element;
  dm.n_components = n_components;
  dm.n_vertices = mesh.n_vertices();
  dm.dofs_per_cell = element.n_local_dof();
  dm.partition = std::make_shared<const Partition>(partition);
  const Index nc = mesh.n_cells();

  if (element.degree() == 2) {
    dm.edges.reserve(nc * static_cast<Index>(element.n_edges()));
    for (Index c = 0; c < nc; ++c) {
      const auto v = mesh.cell(c);
      for (int e = 0; e < element.n_edges(); ++e) {
        const auto le = element.edge(e);
        Index a = v[static_cast<std::size_t>(le[0])], b = v[static_cast<std::size_t>(le[1])];
        if (a > b) std::swap(a, b);
        dm.edges.push_back({a, b});
      }
    }
    std::sort(dm.edges.begin(), dm.edges.end());
    dm.edges.erase(std::unique(dm.edges.begin(), dm.edges.end()), dm.edges.end());
  }
  dm.n_scalar = dm.n_vertices + dm.edges.size();

  dm.cell_dofs.resize(nc * static_cast<Index>(dm.dofs_per_cell));
  for (Index c = 0; c < nc; ++c) {
    const auto v = mesh.cell(c);
    Index* out = dm.cell_dofs.data() + c * static_cast<Index>(dm.dofs_per_cell);
    for (int k = 0; k <= mesh.dim; ++k) out[k] = v[static_cast<std::size_t>(k)];
    if (element.degree() == 2) {
      for (int e = 0; e < element.n_edges(); ++e) {
        const auto le = element.edge(e);
        Index a = v[static_cast<std::size_t>(le[0])], b = v[static_cast<std::size_t>(le[1])];
        if (a > b) std::swap(a, b);
        const std::array<Index, 2> key{a, b};
        const auto it = std::lower_bound(dm.edges.begin(), dm.edges.end(), key);
        out[mesh.dim + 1 + e] = dm.n_vertices + static_cast<Index>(it - dm.edges.begin());
      }
    }
  }

  dm.dof_points.resize(dm.n_scalar);
  for (Index v = 0; v < dm.n_vertices; ++v) dm.dof_points[v] = mesh.vertices[v];
  for (Index e = 0; e < dm.edges.size(); ++e)
    dm.dof_points[dm.n_vertices + e] = 0.5 * (mesh.vertices[dm.edges[e][0]] + mesh.vertices[dm.edges[e][1]]);

  const int nr = partition.n_ranks;
  dm.scalar_owner.assign(dm.n_scalar, nr);
  for (Index c = 0; c < nc; ++c) {
    const Rank o = partition.owner[c];
    for (Index d : dm.cell(c)) dm.scalar_owner[d] = std::min(dm.scalar_owner[d], o);
  }
  for (Rank o : dm.scalar_owner)
    if (o >= nr) throw InvariantViolation("DoF not touched by any element");

  std::vector<std::vector<Index>> rep(static_cast<std::size_t>(nr));
  for (int r = 0; r < nr; ++r)
    for (Index c : partition.local_elements[static_cast<std::size_t>(r)])
      for (Index d : dm.cell(c)) rep[static_cast<std::size_t>(r)].push_back(d);
  for (auto& idx : rep) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  }
  dm.repeated_map = detail::expand_repeated(rep, dm.n_scalar, n_components);
  dm.unique_map = detail::expand_unique(dm.scalar_owner, n_components, nr);
  return dm;
}

/// Same scalar numbering with n components.
inline DofMap with_components(const DofMap& scalar, int n_components) {
  DofMap dm = scalar;
  dm.n_components = n_components;
  std::vector<std::vector<Index>> rep(static_cast<std::size_t>(scalar.n_ranks()));
  for (int r = 0; r < scalar.n_ranks(); ++r) {
    for (Index g : scalar.repeated(r))
      if (g < scalar.n_scalar) rep[static_cast<std::size_t>(r)].push_back(g);
  }
  dm.repeated_map = detail::expand_repeated(rep, dm.n_scalar, n_components);
  dm.unique_map = detail::expand_unique(dm.scalar_owner, n_components, scalar.n_ranks());
  return dm;
}

}  // namespace pfem
