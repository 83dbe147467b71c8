#pragma once

// Shared numeric plumbing: deterministic RNG streams, the parallel-for used by
// every Monte-Carlo / ensemble kernel (with a serial reference path), and a
// handful of small statistics helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace groupkit {

// ---------------------------------------------------------------------------
// Error types. Config/shape problems use std::invalid_argument; the types
// below mark numerical failures (CLI exit code 3).
// ---------------------------------------------------------------------------

struct NoRootError : std::runtime_error {
  double residual;
  NoRootError(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

struct DivergenceError : std::runtime_error {
  int epoch;
  DivergenceError(const std::string& msg, int at_epoch)
      : std::runtime_error(msg), epoch(at_epoch) {}
};

struct BoundInapplicableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UndefinedPrecisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularKernelError : std::runtime_error {
  double condition_estimate;
  SingularKernelError(const std::string& msg, double cond)
      : std::runtime_error(msg), condition_estimate(cond) {}
};

// ---------------------------------------------------------------------------
// Rng: xoshiro256++ seeded through splitmix64. No default construction; every
// stream is derived from an explicit (seed, stream) pair so that work items
// scheduled in parallel draw exactly the same numbers as in a serial run.
// std::* distributions are implementation-defined, so uniform/normal/shuffle
// are generated here to keep outputs byte-identical across reruns.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Independent substream: hash-mixes the ids into the seed.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id,
                    std::uint64_t item_id = 0) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x) ^ (stream_id * 0x9e3779b97f4a7c15ULL);
    std::uint64_t b = splitmix64(a) ^ (item_id * 0xbf58476d1ce4e5b9ULL);
    return Rng(splitmix64(b));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pair cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform integer in [0, n). Lemire multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Parallel-for. jobs <= 1 runs the serial reference loop; jobs == 0 picks the
// process default (GROUPKIT_JOBS env or core count). Bodies must only write
// to their own index slot so results are schedule-independent.
// ---------------------------------------------------------------------------

int default_jobs();
void set_default_jobs(int jobs);
int resolve_jobs(int jobs);  // 0 -> default_jobs(), otherwise clamped >= 1

template <class Fn>
void serial_for(std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  jobs = resolve_jobs(jobs);
#ifdef _OPENMP
  if (jobs > 1 && n > 1) {
    const std::int64_t count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(jobs)
    for (std::int64_t i = 0; i < count; ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  serial_for(n, fn);
}

// ---------------------------------------------------------------------------
// Small statistics helpers.
// ---------------------------------------------------------------------------

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Population variance (divide by n).
inline double population_variance(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Sample variance (divide by n-1).
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Empirical CDF with midrank ties: F(x_i) = (midrank_i - 0.5) / n, where
// midrank is the average 1-based rank of the tied block.
std::vector<double> midrank_cdf(const std::vector<double>& values);

// Rank-based AUROC of scores for predicting labels == 1 (midrank ties).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// In-place Cholesky of a dense symmetric positive-definite matrix (row-major
// n*n, lower factor returned in-place). Throws SingularKernelError when a
// pivot drops to <= 0.
void cholesky_factor(std::vector<double>& a, std::size_t n);
// Solves L L^T x = b given the factor from cholesky_factor.
std::vector<double> cholesky_solve(const std::vector<double>& chol, std::size_t n,
                                   std::vector<double> b);

}  // namespace groupkit
