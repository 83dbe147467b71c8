#pragma once

// Cantelli-type tail-group detection bounds for the rank-based estimator
// I(F(l) > q), plus Monte-Carlo verification of their validity. Works on
// abstract per-group loss distributions, decoupled from any learner.

#include <cstdint>
#include <optional>
#include <vector>

namespace groupkit {
class Rng;
}

namespace groupkit::detect {

struct LossDistribution {
  enum class Kind { kGaussian, kLogNormal };
  Kind kind = Kind::kGaussian;
  double a = 0.0;  // mean (Gaussian) or log-mean (log-normal)
  double b = 1.0;  // std (Gaussian) or log-std (log-normal), > 0

  static LossDistribution gaussian(double mean, double sd);
  static LossDistribution log_normal(double mu_log, double sigma_log);

  double mean() const;
  double variance() const;
  double cdf(double x) const;
  double sample(Rng& rng) const;
};

// Majority (g=0) and minority (g=1) loss distributions with E[l1] > E[l0].
struct GroupLossModel {
  LossDistribution dist0;
  LossDistribution dist1;
  double gamma0 = 0.85;  // majority prevalence, in (0, 1)

  void validate() const;
  double loss_gap() const { return dist1.mean() - dist0.mean(); }  // d > 0
};

struct BoundReport {
  double q = 0.0;
  double d = 0.0;
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double f0_mu0 = 0.0;          // P(l0 <= mu0)
  double z_lower = 0.0;
  double precision_lower = 0.0;  // chained bound on P(g=1 | F(l) > q)
  double q_max = 0.0;            // upper end of the admissible q range
};

// (1-g0)^2 + g0(1-g0)/(1-q) * z^2/(z^2+1) with z = (mean - q)/sqrt(var).
// Requires q < mean_F0l1 (so z > 0); otherwise BoundInapplicableError.
double precision_lower_bound(double mean_F0l1, double var_F0l1, double gamma0,
                             double q);

// (2/F0(mu0)) * sqrt((s1^2+d^2)/s1^2) * (d^2/((s0^2+s1^2)+d^2) - q).
// Requires d > 0 and q in (0, d^2/(d^2+s0^2+s1^2)).
double z_lower_bound(double d, double sigma0, double sigma1, double f0_mu0,
                     double q);

// Chains z_lower_bound into precision_lower_bound for the model.
BoundReport chained_bound(const GroupLossModel& model, double q);

struct PrecisionEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t flagged = 0;
};

// Draws group-then-loss samples, ranks by the pooled empirical CDF (midrank
// ties), and returns the minority fraction among examples with rank > q.
PrecisionEstimate empirical_precision(const GroupLossModel& model, double q,
                                      std::size_t samples, std::uint64_t seed,
                                      int jobs = 0);

struct MomentsF0L1 {
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> closed_form_mean;  // two-Gaussian case only
};

// Monte-Carlo moments of F0(l1) using the analytic CDF of dist0 at draws of
// l1; for a Gaussian pair also returns the closed form Phi(d/sqrt(s0^2+s1^2)).
MomentsF0L1 moments_F0l1(const GroupLossModel& model, std::size_t samples,
                         std::uint64_t seed, int jobs = 0);

}  // namespace groupkit::detect
