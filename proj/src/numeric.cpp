#include "groupkit/numeric.hpp"

#include <atomic>
#include <numeric>
#include <thread>

namespace groupkit {

namespace {

int jobs_from_env() {
  if (const char* env = std::getenv("GROUPKIT_JOBS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
#endif
}

std::atomic<int> g_default_jobs{0};

}  // namespace

int default_jobs() {
  int v = g_default_jobs.load();
  if (v == 0) {
    v = jobs_from_env();
    g_default_jobs.store(v);
  }
  return v;
}

void set_default_jobs(int jobs) { g_default_jobs.store(jobs < 1 ? 0 : jobs); }

int resolve_jobs(int jobs) {
  if (jobs == 0) return default_jobs();
  return jobs < 1 ? 1 : jobs;
}

std::vector<double> midrank_cdf(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> cdf(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 share midrank (i + j + 2) / 2.
    const double midrank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      cdf[order[k]] = (midrank - 0.5) / static_cast<double>(n);
    }
    i = j + 1;
  }
  return cdf;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("auroc: scores/labels size mismatch");
  }
  const std::vector<double> cdf = midrank_cdf(scores);
  const double n = static_cast<double>(scores.size());
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += cdf[i] * n + 0.5;  // back to 1-based midrank
      ++n_pos;
    }
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auroc: needs both classes present");
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) *
                                  static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

void cholesky_factor(std::vector<double>& a, std::size_t n) {
  if (a.size() != n * n) {
    throw std::invalid_argument("cholesky_factor: bad matrix size");
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a[i * n + i]);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) {
      const double cond = max_diag / std::max(d, 1e-300);
      throw SingularKernelError(
          "cholesky_factor: matrix not positive definite (pivot " +
              std::to_string(d) + ", condition estimate ~" + std::to_string(cond) +
              ")",
          cond);
    }
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
}

std::vector<double> cholesky_solve(const std::vector<double>& chol, std::size_t n,
                                   std::vector<double> b) {
  if (chol.size() != n * n || b.size() != n) {
    throw std::invalid_argument("cholesky_solve: size mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= chol[i * n + k] * b[k];
    b[i] = s / chol[i * n + i];
  }
  for (std::size_t ii = n; ii > 0; --ii) {  // backward: L^T x = y
    const std::size_t i = ii - 1;
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= chol[k * n + i] * b[k];
    b[i] = s / chol[i * n + i];
  }
  return b;
}

}  // namespace groupkit
