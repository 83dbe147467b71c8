#include "groupkit/ridge.hpp"

#include <cmath>
#include <stdexcept>

#include "groupkit/numeric.hpp"

namespace groupkit::ridge {

namespace {

// Jackknife SE of a statistic given its leave-one-out values.
double jackknife_se(const std::vector<double>& loo) {
  const std::size_t n = loo.size();
  const double m = mean_of(loo);
  double s = 0.0;
  for (double x : loo) s += (x - m) * (x - m);
  return std::sqrt(s * static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

void RidgeOrthogonalProblem::validate() const {
  if (theta.empty()) throw std::invalid_argument("ridge: no groups");
  if (sigma.size() != 1 && sigma.size() != theta.size()) {
    throw std::invalid_argument("ridge: sigma must have length 1 or |G|");
  }
  if (group_sizes.size() != theta.size()) {
    throw std::invalid_argument("ridge: group_sizes length mismatch");
  }
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("ridge: sigma entries must be > 0");
    }
  }
  for (int n_g : group_sizes) {
    if (n_g < 1) throw std::invalid_argument("ridge: group sizes must be >= 1");
  }
  if (ridge < 0.0 || !std::isfinite(ridge)) {
    throw std::invalid_argument("ridge: regularizer must be >= 0");
  }
}

Decomposition closed_form(const RidgeOrthogonalProblem& problem, std::size_t g) {
  problem.validate();
  if (g >= problem.groups()) throw std::invalid_argument("ridge: bad group index");
  const double n_g = problem.group_sizes[g];
  const double lambda = problem.ridge;
  const double sg = problem.sigma_for(g);
  const double denom = (n_g + lambda) * (n_g + lambda);
  Decomposition d;
  d.noise = sg * sg;
  d.bias = (lambda * problem.theta[g]) * (lambda * problem.theta[g]) / denom;
  d.variance = sg * sg * n_g / denom;
  return d;
}

McDecomposition monte_carlo(const RidgeOrthogonalProblem& problem, std::size_t g,
                            int trials, std::uint64_t seed, int jobs) {
  problem.validate();
  if (g >= problem.groups()) throw std::invalid_argument("ridge: bad group index");
  if (trials < 1000) {
    throw std::invalid_argument("ridge: monte_carlo needs trials >= 1000");
  }
  const int n_g = problem.group_sizes[g];
  const double lambda = problem.ridge;
  const double theta = problem.theta[g];
  const double sg = problem.sigma_for(g);

  std::vector<double> beta(trials);      // ridge estimate per dataset draw
  std::vector<double> sq_noise(trials);  // held-out squared residual per draw
  parallel_for(static_cast<std::size_t>(trials), jobs, [&](std::size_t t) {
    Rng rng = Rng::stream(seed, g, t);
    double ysum = 0.0;
    for (int i = 0; i < n_g; ++i) ysum += theta + sg * rng.normal();
    const double ybar = ysum / n_g;
    beta[t] = n_g * ybar / (n_g + lambda);
    const double eps = sg * rng.normal();  // fresh test observation
    sq_noise[t] = eps * eps;
  });

  double beta_sum = 0.0, beta_sq = 0.0, noise_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    beta_sum += beta[t];
    beta_sq += beta[t] * beta[t];
    noise_sum += sq_noise[t];
  }
  const double tn = trials;
  const double beta_mean = beta_sum / tn;

  McDecomposition out;
  out.estimate.noise = noise_sum / tn;
  out.estimate.bias = (theta - beta_mean) * (theta - beta_mean);
  out.estimate.variance = (beta_sq - beta_sum * beta_sum / tn) / (tn - 1.0);

  // Leave-one-out values from running sums.
  std::vector<double> loo_noise(trials), loo_bias(trials), loo_var(trials);
  for (int t = 0; t < trials; ++t) {
    loo_noise[t] = (noise_sum - sq_noise[t]) / (tn - 1.0);
    const double m = (beta_sum - beta[t]) / (tn - 1.0);
    loo_bias[t] = (theta - m) * (theta - m);
    loo_var[t] = (beta_sq - beta[t] * beta[t] -
                  (beta_sum - beta[t]) * (beta_sum - beta[t]) / (tn - 1.0)) /
                 (tn - 2.0);
  }
  out.se.noise = jackknife_se(loo_noise);
  out.se.bias = jackknife_se(loo_bias);
  out.se.variance = jackknife_se(loo_var);
  return out;
}

double excess_bias(const RidgeOrthogonalProblem& problem, std::size_t g,
                   double gamma_g, double gamma_star, double n) {
  problem.validate();
  if (g >= problem.groups()) throw std::invalid_argument("ridge: bad group index");
  if (!(gamma_g > 0.0 && gamma_g < 1.0 && gamma_star > 0.0 && gamma_star < 1.0)) {
    throw std::invalid_argument("ridge: prevalences must lie in (0, 1)");
  }
  if (n * gamma_g < 1.0) {
    throw std::invalid_argument("ridge: n too small (n*gamma_g < 1)");
  }
  return problem.ridge * problem.theta[g] * (gamma_star - gamma_g) /
         (n * gamma_star * gamma_g);
}

}  // namespace groupkit::ridge
