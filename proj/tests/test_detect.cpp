#include "doctest.h"

#include <cmath>

#include "groupkit/detect.hpp"
#include "groupkit/numeric.hpp"

using namespace groupkit;
using namespace groupkit::detect;

namespace {

GroupLossModel paper_setting() {
  // gamma0 = 0.85, d = 1, sigma0 = sigma1 = 0.15, F0(mu0) = 0.5
  GroupLossModel m;
  m.dist0 = LossDistribution::gaussian(0.0, 0.15);
  m.dist1 = LossDistribution::gaussian(1.0, 0.15);
  m.gamma0 = 0.85;
  return m;
}

GroupLossModel random_gaussian_model(Rng& rng) {
  // Dataset-bias regime: clear majority, comparable group spreads (the
  // chained bound is informative there; see chained_bound's gate).
  GroupLossModel m;
  const double mu0 = rng.uniform(0.0, 1.0);
  const double d = rng.uniform(0.3, 2.0);
  const double s0 = rng.uniform(0.05, 0.5);
  const double s1 = std::clamp(s0 * rng.uniform(1.0 / 3.0, 3.0), 0.05, 0.5);
  m.dist0 = LossDistribution::gaussian(mu0, s0);
  m.dist1 = LossDistribution::gaussian(mu0 + d, s1);
  m.gamma0 = rng.uniform(0.75, 0.95);
  return m;
}

}  // namespace

TEST_CASE("precision_lower_bound limits") {
  SUBCASE("vanishing majority pushes the bound to 1") {
    const double b = precision_lower_bound(0.9, 1e-6, 1e-9, 0.5);
    CHECK(b == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("vanishing variance saturates the Cantelli factor") {
    const double gamma0 = 0.8;
    const double q = 0.6;
    const double b = precision_lower_bound(0.9, 1e-16, gamma0, q);
    const double limit =
        (1 - gamma0) * (1 - gamma0) + gamma0 * (1 - gamma0) / (1 - q);
    CHECK(b == doctest::Approx(limit).epsilon(1e-9));
  }
  SUBCASE("inapplicable when q >= mean") {
    CHECK_THROWS_AS(precision_lower_bound(0.5, 0.01, 0.8, 0.6),
                    BoundInapplicableError);
  }
}

TEST_CASE("z_lower_bound") {
  SUBCASE("zero at the upper edge of the q range") {
    const double d = 1.0, s = 0.3;
    const double q_max = d * d / (d * d + 2 * s * s);
    CHECK(z_lower_bound(d, s, s, 0.5, q_max * (1 - 1e-12)) ==
          doctest::Approx(0.0).epsilon(1e-6));
    CHECK_THROWS_AS(z_lower_bound(d, s, s, 0.5, q_max + 1e-6),
                    BoundInapplicableError);
  }
  SUBCASE("monotone increasing in d on a grid") {
    double prev = 0.0;
    for (double d : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      const double z = z_lower_bound(d, 0.2, 0.2, 0.5, 0.4);
      CHECK(z > prev);
      prev = z;
    }
  }
}

TEST_CASE("paper worked setting gives a chained bound above 0.9") {
  const auto model = paper_setting();
  const auto report = chained_bound(model, 0.9);
  CHECK(report.q_max > 0.9);  // q = 0.9 admissible: 1/(1+0.045) = 0.9569
  CHECK(report.z_lower > 1.5);
  CHECK(report.precision_lower > 0.9);
  // and the empirical precision clears the bound
  const auto emp = empirical_precision(model, 0.9, 40000, 99);
  CHECK(emp.value + 2.0 * emp.se >= report.precision_lower);
  CHECK(emp.value > 0.95);
}

TEST_CASE("empirical precision sanity limits") {
  SUBCASE("identical-looking losses give precision ~ 1 - gamma0") {
    GroupLossModel m;
    m.dist0 = LossDistribution::gaussian(0.0, 0.2);
    m.dist1 = LossDistribution::gaussian(1e-4, 0.2);  // keeps d > 0
    m.gamma0 = 0.7;
    const auto est = empirical_precision(m, 0.5, 60000, 5);
    CHECK(est.value == doctest::Approx(0.3).epsilon(0.05));
  }
  SUBCASE("fully separated distributions give precision ~ 1") {
    GroupLossModel m;
    m.dist0 = LossDistribution::gaussian(0.0, 0.05);
    m.dist1 = LossDistribution::gaussian(5.0, 0.05);
    m.gamma0 = 0.85;  // gamma1 = 0.15 >= 1 - q
    const auto est = empirical_precision(m, 0.9, 40000, 6);
    CHECK(est.value == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("validation") {
    const auto m = paper_setting();
    CHECK_THROWS_AS(empirical_precision(m, 0.9, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(empirical_precision(m, 1.5, 20000, 1), std::invalid_argument);
  }
}

TEST_CASE("moments of F0(l1)") {
  SUBCASE("equal Gaussians give mean 1/2 (closed form)") {
    GroupLossModel m;
    m.dist0 = LossDistribution::gaussian(0.0, 0.3);
    m.dist1 = LossDistribution::gaussian(1e-9, 0.3);
    m.gamma0 = 0.8;
    const auto mom = moments_F0l1(m, 20000, 3);
    REQUIRE(mom.closed_form_mean.has_value());
    CHECK(*mom.closed_form_mean == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(mom.mean == doctest::Approx(0.5).epsilon(0.02));
  }
  SUBCASE("paper pair: mean = Phi(1/sqrt(0.045))") {
    const auto mom = moments_F0l1(paper_setting(), 20000, 4);
    REQUIRE(mom.closed_form_mean.has_value());
    CHECK(*mom.closed_form_mean ==
          doctest::Approx(normal_cdf(1.0 / std::sqrt(0.045))).epsilon(1e-12));
    CHECK(mom.mean == doctest::Approx(*mom.closed_form_mean).epsilon(0.01));
  }
  SUBCASE("MC mean respects the theoretical lower bound d^2/(s^2+d^2)") {
    Rng rng(83);
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = random_gaussian_model(rng);
      const double d = m.loss_gap();
      const double s2 = m.dist0.variance() + m.dist1.variance();
      const auto mom = moments_F0l1(m, 20000, 100 + trial);
      CHECK(mom.mean + 0.02 >= d * d / (s2 + d * d));
    }
  }
  SUBCASE("mean increases with d and decreases with sigma1") {
    double prev = 0.0;
    for (double d : {0.2, 0.5, 1.0, 2.0}) {
      GroupLossModel m;
      m.dist0 = LossDistribution::gaussian(0.0, 0.3);
      m.dist1 = LossDistribution::gaussian(d, 0.3);
      m.gamma0 = 0.8;
      const auto mom = moments_F0l1(m, 20000, 9);
      CHECK(mom.mean > prev);
      prev = mom.mean;
    }
    double prev_s = 1.0;
    for (double s1 : {0.1, 0.3, 0.8, 2.0}) {
      GroupLossModel m;
      m.dist0 = LossDistribution::gaussian(0.0, 0.3);
      m.dist1 = LossDistribution::gaussian(1.0, s1);
      m.gamma0 = 0.8;
      const auto mom = moments_F0l1(m, 20000, 10);
      CHECK(mom.mean < prev_s);
      prev_s = mom.mean;
    }
  }
}

TEST_CASE("chained bound validity on random Gaussian configs") {
  Rng rng(91);
  int accepted = 0;
  int attempts = 0;
  while (accepted < 25 && attempts < 500) {
    ++attempts;
    const auto model = random_gaussian_model(rng);
    const double q_max = model.loss_gap() * model.loss_gap() /
                         (model.loss_gap() * model.loss_gap() +
                          model.dist0.variance() + model.dist1.variance());
    const double q = rng.uniform(0.05 * q_max, 0.95 * q_max);
    BoundReport report;
    try {
      report = chained_bound(model, q);
    } catch (const BoundInapplicableError&) {
      continue;  // bound uninformative for this (q, gamma0)
    }
    const auto emp = empirical_precision(model, q, 20000, 500 + accepted);
    CHECK(emp.value + 2.0 * emp.se >= report.precision_lower);
    ++accepted;
  }
  CHECK(accepted == 25);
}

TEST_CASE("chained bound rejects the uninformative regime") {
  // Minority mass far beyond the flag budget pushes the published bound past
  // 1, where it stops being a valid probability lower bound.
  GroupLossModel m;
  m.dist0 = LossDistribution::gaussian(0.0, 0.2);
  m.dist1 = LossDistribution::gaussian(1.8, 0.2);
  m.gamma0 = 0.71;
  CHECK_THROWS_AS(chained_bound(m, 0.9), BoundInapplicableError);
}

TEST_CASE("log-normal distribution support") {
  GroupLossModel m;
  m.dist0 = LossDistribution::log_normal(-2.0, 0.4);
  m.dist1 = LossDistribution::log_normal(-0.5, 0.4);
  m.gamma0 = 0.8;
  m.validate();
  CHECK(m.loss_gap() > 0.0);
  // CDF matches the sample distribution roughly at the median
  Rng rng(13);
  std::size_t below = 0;
  const double med0 = std::exp(-2.0);
  for (int i = 0; i < 20000; ++i) {
    if (m.dist0.sample(rng) <= med0) ++below;
  }
  CHECK(static_cast<double>(below) / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(m.dist0.cdf(med0) == doctest::Approx(0.5));
  // empirical precision still defined
  const auto est = empirical_precision(m, 0.8, 20000, 77);
  CHECK(est.value > 1.0 - m.gamma0 - 0.05);
}

TEST_CASE("model validation rejects d <= 0") {
  GroupLossModel m;
  m.dist0 = LossDistribution::gaussian(1.0, 0.2);
  m.dist1 = LossDistribution::gaussian(0.5, 0.2);
  m.gamma0 = 0.8;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
