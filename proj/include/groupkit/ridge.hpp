#pragma once

// Exact noise-bias-variance decomposition for ridge regression under an
// orthogonal (one-hot group) design, with a Monte-Carlo estimator as the
// ground-truth cross-check. Squared error only, which is the Bregman
// specialization the closed forms are derived under.

#include <cstdint>
#include <vector>

namespace groupkit::ridge {

struct RidgeOrthogonalProblem {
  std::vector<double> theta;     // true per-group effects
  std::vector<double> sigma;     // per-group noise std; length 1 = homogeneous
  std::vector<int> group_sizes;  // n_g, all >= 1
  double ridge = 0.0;            // regularizer lambda, >= 0

  void validate() const;
  std::size_t groups() const { return theta.size(); }
  double sigma_for(std::size_t g) const {
    return sigma.size() == 1 ? sigma[0] : sigma[g];
  }
};

struct Decomposition {
  double noise = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double total() const { return noise + bias + variance; }
};

struct McDecomposition {
  Decomposition estimate;
  Decomposition se;  // jackknife standard errors, per component
};

// (sigma_g^2, (lambda*theta_g)^2/(n_g+lambda)^2, sigma_g^2*n_g/(n_g+lambda)^2)
Decomposition closed_form(const RidgeOrthogonalProblem& problem, std::size_t g);

// Simulates y_i = theta_g + eps over `trials` dataset draws, fits the ridge
// estimator beta_g = n_g * ybar_g / (n_g + lambda), and estimates noise from
// held-out draws, bias as (theta_g - mean beta)^2, variance as var(beta).
// Per-trial RNG streams derive from (seed, trial), so results do not depend
// on the parallel schedule.
McDecomposition monte_carlo(const RidgeOrthogonalProblem& problem, std::size_t g,
                            int trials, std::uint64_t seed, int jobs = 0);

// First-order excess bias lambda*theta_g*(gamma_star - gamma_g)/(n*gamma_star*
// gamma_g) of training at prevalence gamma_g instead of gamma_star.
double excess_bias(const RidgeOrthogonalProblem& problem, std::size_t g,
                   double gamma_g, double gamma_star, double n);

}  // namespace groupkit::ridge
