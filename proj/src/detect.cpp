#include "groupkit/detect.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "groupkit/numeric.hpp"

namespace groupkit::detect {

LossDistribution LossDistribution::gaussian(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("gaussian: sd must be > 0");
  return LossDistribution{Kind::kGaussian, mean, sd};
}

LossDistribution LossDistribution::log_normal(double mu_log, double sigma_log) {
  if (!(sigma_log > 0.0)) {
    throw std::invalid_argument("log_normal: sigma must be > 0");
  }
  return LossDistribution{Kind::kLogNormal, mu_log, sigma_log};
}

double LossDistribution::mean() const {
  switch (kind) {
    case Kind::kGaussian:
      return a;
    case Kind::kLogNormal:
      return std::exp(a + 0.5 * b * b);
  }
  return 0.0;
}

double LossDistribution::variance() const {
  switch (kind) {
    case Kind::kGaussian:
      return b * b;
    case Kind::kLogNormal:
      return (std::exp(b * b) - 1.0) * std::exp(2.0 * a + b * b);
  }
  return 0.0;
}

double LossDistribution::cdf(double x) const {
  switch (kind) {
    case Kind::kGaussian:
      return normal_cdf((x - a) / b);
    case Kind::kLogNormal:
      if (x <= 0.0) return 0.0;
      return normal_cdf((std::log(x) - a) / b);
  }
  return 0.0;
}

double LossDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kGaussian:
      return a + b * rng.normal();
    case Kind::kLogNormal:
      return std::exp(a + b * rng.normal());
  }
  return 0.0;
}

void GroupLossModel::validate() const {
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) {
    throw std::invalid_argument("GroupLossModel: gamma0 must lie in (0, 1)");
  }
  if (!(loss_gap() > 0.0)) {
    throw std::invalid_argument(
        "GroupLossModel: requires E[l1] > E[l0] (loss dominance d > 0)");
  }
  if (!std::isfinite(dist0.variance()) || !std::isfinite(dist1.variance())) {
    throw std::invalid_argument("GroupLossModel: variances must be finite");
  }
}

double precision_lower_bound(double mean_F0l1, double var_F0l1, double gamma0,
                             double q) {
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) {
    throw std::invalid_argument("precision_lower_bound: gamma0 in (0, 1)");
  }
  if (!(var_F0l1 > 0.0)) {
    throw std::invalid_argument("precision_lower_bound: variance must be > 0");
  }
  if (!(q > 0.0 && q < mean_F0l1)) {
    throw BoundInapplicableError(
        "precision_lower_bound: requires 0 < q < E[F0(l1)] = " +
        std::to_string(mean_F0l1));
  }
  const double z = (mean_F0l1 - q) / std::sqrt(var_F0l1);
  return (1.0 - gamma0) * (1.0 - gamma0) +
         gamma0 * (1.0 - gamma0) / (1.0 - q) * (z * z / (z * z + 1.0));
}

double z_lower_bound(double d, double sigma0, double sigma1, double f0_mu0,
                     double q) {
  if (!(d > 0.0)) {
    throw BoundInapplicableError("z_lower_bound: requires d > 0");
  }
  if (!(sigma0 > 0.0 && sigma1 > 0.0) || !(f0_mu0 > 0.0 && f0_mu0 <= 1.0)) {
    throw std::invalid_argument("z_lower_bound: bad sigma or F0(mu0)");
  }
  const double q_max = d * d / (d * d + sigma0 * sigma0 + sigma1 * sigma1);
  if (!(q > 0.0 && q < q_max)) {
    throw BoundInapplicableError("z_lower_bound: q outside (0, " +
                                 std::to_string(q_max) + ")");
  }
  return 2.0 / f0_mu0 * std::sqrt((sigma1 * sigma1 + d * d) / (sigma1 * sigma1)) *
         (q_max - q);
}

BoundReport chained_bound(const GroupLossModel& model, double q) {
  model.validate();
  BoundReport report;
  report.q = q;
  report.d = model.loss_gap();
  report.sigma0 = std::sqrt(model.dist0.variance());
  report.sigma1 = std::sqrt(model.dist1.variance());
  report.f0_mu0 = model.dist0.cdf(model.dist0.mean());
  report.q_max = report.d * report.d /
                 (report.d * report.d + report.sigma0 * report.sigma0 +
                  report.sigma1 * report.sigma1);
  report.z_lower =
      z_lower_bound(report.d, report.sigma0, report.sigma1, report.f0_mu0, q);
  // Chain: z >= z_lower and the precision bound is increasing in z, so
  // feeding (q + z_lower * 1) as a synthetic mean with unit variance
  // reproduces z = z_lower exactly.
  report.precision_lower =
      precision_lower_bound(q + report.z_lower, 1.0, model.gamma0, q);
  // A lower bound on a probability is informative only below 1; past that the
  // (q, gamma0) combination is outside the theorem's regime (the minority
  // mass overwhelms the 1-q flag budget).
  if (report.precision_lower > 1.0) {
    throw BoundInapplicableError(
        "chained_bound: bound " + std::to_string(report.precision_lower) +
        " exceeds 1; q = " + std::to_string(q) +
        " is outside the informative range for gamma0 = " +
        std::to_string(model.gamma0));
  }
  return report;
}

PrecisionEstimate empirical_precision(const GroupLossModel& model, double q,
                                      std::size_t samples, std::uint64_t seed,
                                      int jobs) {
  model.validate();
  if (samples < 10000) {
    throw std::invalid_argument("empirical_precision: needs samples >= 10^4");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("empirical_precision: q must lie in (0, 1)");
  }
  std::vector<double> losses(samples);
  std::vector<char> minority(samples);
  parallel_for(samples, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, 0xdecafULL, i);
    const bool is_minority = rng.uniform() >= model.gamma0;
    minority[i] = is_minority ? 1 : 0;
    losses[i] = is_minority ? model.dist1.sample(rng) : model.dist0.sample(rng);
  });
  const std::vector<double> cdf = midrank_cdf(losses);
  std::size_t flagged = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (cdf[i] > q) {
      ++flagged;
      hits += minority[i];
    }
  }
  if (flagged == 0) {
    throw UndefinedPrecisionError(
        "empirical_precision: no examples flagged at q = " + std::to_string(q));
  }
  PrecisionEstimate est;
  est.flagged = flagged;
  est.value = static_cast<double>(hits) / static_cast<double>(flagged);
  est.se = std::sqrt(std::max(est.value * (1.0 - est.value), 1e-12) /
                     static_cast<double>(flagged));
  return est;
}

MomentsF0L1 moments_F0l1(const GroupLossModel& model, std::size_t samples,
                         std::uint64_t seed, int jobs) {
  model.validate();
  if (samples < 10000) {
    throw std::invalid_argument("moments_F0l1: needs samples >= 10^4");
  }
  std::vector<double> values(samples);
  parallel_for(samples, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, 0xf011ULL, i);
    values[i] = model.dist0.cdf(model.dist1.sample(rng));
  });
  MomentsF0L1 m;
  m.mean = mean_of(values);
  m.variance = sample_variance(values);
  if (model.dist0.kind == LossDistribution::Kind::kGaussian &&
      model.dist1.kind == LossDistribution::Kind::kGaussian) {
    const double pooled = std::sqrt(model.dist0.b * model.dist0.b +
                                    model.dist1.b * model.dist1.b);
    m.closed_form_mean = normal_cdf(model.loss_gap() / pooled);
  }
  return m;
}

}  // namespace groupkit::detect
