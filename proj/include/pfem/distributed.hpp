#pragma once

/// \file distributed.hpp
/// \brief Rank index maps and row-partitioned vectors.
///
/// A RankMap lists, per rank, the sorted global indices that rank stores.
/// A unique map assigns each global index to exactly one rank; a repeated map
/// may list interface indices on several ranks. Data movement between the two
/// goes through the explicit import/export phases below, never through direct
/// cross-rank writes.

#include <algorithm>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "core.hpp"

namespace pfem {

class RankMap {
 public:
  /// Unique map from an owner array.
  static std::shared_ptr<const RankMap> unique(std::vector<Rank> owner, int n_ranks) {
    auto m = std::make_shared<RankMap>();
    m->global_size_ = owner.size();
    m->indices_.resize(static_cast<std::size_t>(n_ranks));
    m->local_.resize(owner.size());
    for (Index g = 0; g < owner.size(); ++g) {
      const Rank r = owner[g];
      if (r < 0 || r >= n_ranks) throw InvariantViolation("unique map owner out of range");
      auto& idx = m->indices_[static_cast<std::size_t>(r)];
      m->local_[g] = idx.size();
      idx.push_back(g);
    }
    m->owner_ = std::move(owner);
    return m;
  }

  /// Repeated map; per-rank index lists are sorted and deduplicated here.
  static std::shared_ptr<const RankMap> repeated(Index global_size, std::vector<std::vector<Index>> indices) {
    auto m = std::make_shared<RankMap>();
    m->global_size_ = global_size;
    for (auto& idx : indices) {
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      if (!idx.empty() && idx.back() >= global_size) throw InvariantViolation("repeated map index out of range");
    }
    m->indices_ = std::move(indices);
    return m;
  }

  /// Single-rank unique map over [0, n).
  static std::shared_ptr<const RankMap> serial(Index n) { return unique(std::vector<Rank>(n, 0), 1); }

  Index global_size() const { return global_size_; }
  int n_ranks() const { return static_cast<int>(indices_.size()); }
  bool is_unique() const { return !owner_.empty() || global_size_ == 0; }

  std::span<const Index> indices(Rank r) const { return indices_[static_cast<std::size_t>(r)]; }
  Index local_size(Rank r) const { return indices_[static_cast<std::size_t>(r)].size(); }

  /// Unique maps only.
  Rank owner(Index g) const { return owner_[g]; }
  Index owner_local(Index g) const { return local_[g]; }
  std::span<const Rank> owners() const { return owner_; }

  /// Position of global index g in rank r's list, or -1 when absent.
  std::ptrdiff_t find(Rank r, Index g) const {
    if (is_unique()) return owner_[g] == r ? static_cast<std::ptrdiff_t>(local_[g]) : -1;
    const auto& idx = indices_[static_cast<std::size_t>(r)];
    auto it = std::lower_bound(idx.begin(), idx.end(), g);
    return it != idx.end() && *it == g ? it - idx.begin() : -1;
  }

  bool same_layout(const RankMap& o) const { return global_size_ == o.global_size_ && indices_ == o.indices_; }

  RankMap() = default;

 private:
  Index global_size_ = 0;
  std::vector<std::vector<Index>> indices_;
  std::vector<Rank> owner_;
  std::vector<Index> local_;
};

using RankMapPtr = std::shared_ptr<const RankMap>;

/// Row-partitioned dense vector. Its mode (unique or repeated) follows from
/// the map it is built on.
class DistVector {
 public:
  DistVector() = default;
  explicit DistVector(RankMapPtr map, double value = 0.0) : map_(std::move(map)) {
    data_.resize(static_cast<std::size_t>(map_->n_ranks()));
    for (int r = 0; r < map_->n_ranks(); ++r) data_[static_cast<std::size_t>(r)].assign(map_->local_size(r), value);
  }

  const RankMap& map() const { return *map_; }
  const RankMapPtr& map_ptr() const { return map_; }
  bool is_unique() const { return map_->is_unique(); }
  int n_ranks() const { return map_->n_ranks(); }
  Index size() const { return map_->global_size(); }

  std::vector<double>& local(Rank r) { return data_[static_cast<std::size_t>(r)]; }
  const std::vector<double>& local(Rank r) const { return data_[static_cast<std::size_t>(r)]; }

  /// Global array assembled on the coordinator (unique mode).
  std::vector<double> gather() const {
    std::vector<double> out(size(), 0.0);
    for (int r = 0; r < n_ranks(); ++r) {
      const auto idx = map_->indices(r);
      const auto& d = local(r);
      for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = d[k];
    }
    return out;
  }

  /// Distributes a global array over the map (valid for either mode).
  static DistVector scatter(RankMapPtr map, std::span<const double> global) {
    DistVector v(map);
    for (int r = 0; r < v.n_ranks(); ++r) {
      const auto idx = map->indices(r);
      auto& d = v.local(r);
      for (std::size_t k = 0; k < idx.size(); ++k) d[k] = global[idx[k]];
    }
    return v;
  }

  /// Value at global index g (unique mode; coordinator-side helper).
  double at(Index g) const { return data_[static_cast<std::size_t>(map_->owner(g))][map_->owner_local(g)]; }

 private:
  RankMapPtr map_;
  std::vector<std::vector<double>> data_;
};

// ---------------------------------------------------------------------------
// Vector algebra. Reductions combine per-rank partial sums in rank order.
// ---------------------------------------------------------------------------

inline double dot(const DistVector& a, const DistVector& b) {
  std::vector<double> partial(static_cast<std::size_t>(a.n_ranks()), 0.0);
  for_each_rank(a.n_ranks(), [&](Rank r) {
    const auto& x = a.local(r);
    const auto& y = b.local(r);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    partial[static_cast<std::size_t>(r)] = s;
  });
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

inline double norm2(const DistVector& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const DistVector& a) {
  double m = 0.0;
  for (int r = 0; r < a.n_ranks(); ++r)
    for (double x : a.local(r)) m = std::max(m, std::abs(x));
  return m;
}

/// y += alpha * x
inline void axpy(DistVector& y, double alpha, const DistVector& x) {
  for_each_rank(y.n_ranks(), [&](Rank r) {
    auto& yy = y.local(r);
    const auto& xx = x.local(r);
    for (std::size_t i = 0; i < yy.size(); ++i) yy[i] += alpha * xx[i];
  });
}

/// y = alpha * x + beta * y
inline void axpby(DistVector& y, double alpha, const DistVector& x, double beta) {
  for_each_rank(y.n_ranks(), [&](Rank r) {
    auto& yy = y.local(r);
    const auto& xx = x.local(r);
    for (std::size_t i = 0; i < yy.size(); ++i) yy[i] = alpha * xx[i] + beta * yy[i];
  });
}

inline void scale(DistVector& y, double alpha) {
  for_each_rank(y.n_ranks(), [&](Rank r) {
    for (auto& v : y.local(r)) v *= alpha;
  });
}

inline void fill(DistVector& y, double value) {
  for (int r = 0; r < y.n_ranks(); ++r) std::fill(y.local(r).begin(), y.local(r).end(), value);
}

/// Element-wise product y_i *= d_i.
inline void pointwise_multiply(DistVector& y, const DistVector& d) {
  for_each_rank(y.n_ranks(), [&](Rank r) {
    auto& yy = y.local(r);
    const auto& dd = d.local(r);
    for (std::size_t i = 0; i < yy.size(); ++i) yy[i] *= dd[i];
  });
}

/// Import phase: repeated-mode copy of a unique vector. Every holder of an
/// interface entry receives the owner's value.
inline DistVector import_to(const DistVector& unique, RankMapPtr repeated) {
  const RankMap& um = unique.map();
  DistVector out(repeated);
  for_each_rank(out.n_ranks(), [&](Rank r) {
    const auto idx = repeated->indices(r);
    auto& d = out.local(r);
    for (std::size_t k = 0; k < idx.size(); ++k) d[k] = unique.local(um.owner(idx[k]))[um.owner_local(idx[k])];
  });
  return out;
}

/// Export phase: sums repeated-mode contributions into their owners. Each
/// owner adds incoming values in increasing source-rank order.
inline DistVector export_add(const DistVector& repeated, RankMapPtr unique) {
  DistVector out(unique);
  const RankMap& rm = repeated.map();
  // Outboxes: per (source, target) list of (owner-local index, value).
  const int n = out.n_ranks();
  std::vector<std::vector<std::vector<std::pair<Index, double>>>> outbox(
      static_cast<std::size_t>(n), std::vector<std::vector<std::pair<Index, double>>>(static_cast<std::size_t>(n)));
  for_each_rank(n, [&](Rank s) {
    const auto idx = rm.indices(s);
    const auto& d = repeated.local(s);
    for (std::size_t k = 0; k < idx.size(); ++k)
      outbox[static_cast<std::size_t>(s)][static_cast<std::size_t>(unique->owner(idx[k]))].emplace_back(
          unique->owner_local(idx[k]), d[k]);
  });
  for_each_rank(n, [&](Rank t) {
    auto& d = out.local(t);
    for (int s = 0; s < n; ++s)
      for (const auto& [i, v] : outbox[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]) d[i] += v;
  });
  return out;
}

/// Same global values on another unique map (coordinator-level redistribution).
inline DistVector redistribute(const DistVector& v, RankMapPtr map) {
  const auto g = v.gather();
  return DistVector::scatter(std::move(map), g);
}

}  // namespace pfem
