#pragma once

/// \file core.hpp
/// \brief Basic types, error classes, logging and the in-process rank executor.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

namespace pfem {

using Index = std::size_t;
using Rank = int;

/// Three-component point/vector. 2D data keeps z = 0.
struct Vec3 {
  std::array<double, 3> v{0.0, 0.0, 0.0};

  constexpr double& operator[](std::size_t i) { return v[i]; }
  constexpr double operator[](std::size_t i) const { return v[i]; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) a.v[i] += b.v[i];
    return a;
  }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) a.v[i] -= b.v[i];
    return a;
  }
  friend constexpr Vec3 operator-(Vec3 a) {
    for (auto& x : a.v) x = -x;
    return a;
  }
  friend constexpr Vec3 operator*(double s, Vec3 a) {
    for (auto& x : a.v) x *= s;
    return a;
  }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

using Point = Vec3;

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Errors. The CLI maps ConfigError/ParseError to exit code 2 and
// SolverDivergence to exit code 3.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct FormStructureError : Error {
  using Error::Error;
};

struct PatternError : Error {
  using Error::Error;
};

struct FactorizationError : Error {
  using Error::Error;
};

struct SolverDivergence : Error {
  using Error::Error;
};

struct InvariantViolation : Error {
  using Error::Error;
};

inline spdlog::logger& log() { return *spdlog::default_logger_raw(); }

// ---------------------------------------------------------------------------
// Rank executor. Each simulated rank is a unit of work; workers only decide
// how many threads run them. Results never depend on the worker count.
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<int>& worker_count_ref() {
  static std::atomic<int> count{1};
  return count;
}
}  // namespace detail

inline int worker_count() { return detail::worker_count_ref().load(); }
inline void set_worker_count(int n) { detail::worker_count_ref().store(std::max(1, n)); }

/// Runs fn(r) for r in [0, n_ranks). Ranks are dealt round-robin
/// to the worker threads; returning acts as a barrier.
template <class Fn>
void for_each_rank(int n_ranks, Fn&& fn) {
  const int workers = std::min(worker_count(), n_ranks);
  if (workers <= 1) {
    for (int r = 0; r < n_ranks; ++r) fn(r);
    return;
  }
  // First failure by rank index is rethrown on the calling thread.
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_ranks));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int r = w; r < n_ranks; r += workers) {
          try {
            fn(r);
          } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pfem
