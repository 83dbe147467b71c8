#include "doctest.h"

#include <cmath>
#include <vector>

#include "groupkit/numeric.hpp"
#include "groupkit/ridge.hpp"

using namespace groupkit;
using namespace groupkit::ridge;

namespace {

RidgeOrthogonalProblem random_problem(Rng& rng, bool heterogeneous) {
  RidgeOrthogonalProblem p;
  const std::size_t groups = 1 + rng.below(3);
  for (std::size_t g = 0; g < groups; ++g) {
    p.theta.push_back(rng.uniform(-2.0, 2.0));
    p.group_sizes.push_back(static_cast<int>(3 + rng.below(40)));
    if (heterogeneous) p.sigma.push_back(rng.uniform(0.3, 2.0));
  }
  if (!heterogeneous) p.sigma.push_back(rng.uniform(0.3, 2.0));
  p.ridge = rng.uniform(0.0, 8.0);
  return p;
}

}  // namespace

TEST_CASE("closed form: unregularized limit") {
  RidgeOrthogonalProblem p;
  p.theta = {1.7};
  p.sigma = {0.9};
  p.group_sizes = {12};
  p.ridge = 0.0;
  const auto d = closed_form(p, 0);
  CHECK(d.bias == doctest::Approx(0.0));
  CHECK(d.variance == doctest::Approx(0.9 * 0.9 / 12.0));
  CHECK(d.noise == doctest::Approx(0.81));
}

TEST_CASE("closed form: plug-in values") {
  RidgeOrthogonalProblem p;
  p.theta = {2.0};
  p.sigma = {1.0};
  p.group_sizes = {10};
  p.ridge = 5.0;
  const auto d = closed_form(p, 0);
  CHECK(d.noise == doctest::Approx(1.0));
  CHECK(d.bias == doctest::Approx(100.0 / 225.0));
  CHECK(d.variance == doctest::Approx(10.0 / 225.0));
}

TEST_CASE("closed form: large-sample limit") {
  RidgeOrthogonalProblem p;
  p.theta = {2.0};
  p.sigma = {1.0};
  p.group_sizes = {10000000};
  p.ridge = 5.0;
  const auto d = closed_form(p, 0);
  CHECK(d.bias < 1e-10);
  CHECK(d.variance < 1e-5);
}

TEST_CASE("monte carlo agrees with the closed form within 3 SE") {
  Rng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const bool het = trial % 2 == 1;
    const auto p = random_problem(rng, het);
    const std::size_t g = rng.below(p.groups());
    const auto exact = closed_form(p, g);
    const auto mc = monte_carlo(p, g, 4000, 1000 + trial);
    CHECK(std::abs(mc.estimate.noise - exact.noise) <= 3.0 * mc.se.noise);
    CHECK(std::abs(mc.estimate.bias - exact.bias) <=
          3.0 * mc.se.bias + 1e-4);  // slack for the tiny O(Var/T) bias
    CHECK(std::abs(mc.estimate.variance - exact.variance) <= 3.0 * mc.se.variance);
    CHECK(std::abs(mc.estimate.total() - exact.total()) <=
          3.0 * (mc.se.noise + mc.se.bias + mc.se.variance) + 1e-4);
  }
}

TEST_CASE("monte carlo: zero effect means zero bias") {
  RidgeOrthogonalProblem p;
  p.theta = {0.0, 0.0};
  p.sigma = {0.5};
  p.group_sizes = {20, 8};
  p.ridge = 3.0;
  const auto mc = monte_carlo(p, 1, 5000, 7);
  CHECK(mc.estimate.bias < 5e-3);
}

TEST_CASE("monte carlo: heterogeneous noise tracked per group") {
  RidgeOrthogonalProblem p;
  p.theta = {1.0, 1.0};
  p.sigma = {0.4, 1.6};
  p.group_sizes = {25, 25};
  p.ridge = 2.0;
  const auto mc0 = monte_carlo(p, 0, 4000, 11);
  const auto mc1 = monte_carlo(p, 1, 4000, 11);
  CHECK(std::abs(mc0.estimate.noise - 0.16) <= 3.0 * mc0.se.noise);
  CHECK(std::abs(mc1.estimate.noise - 2.56) <= 3.0 * mc1.se.noise);
}

TEST_CASE("monte carlo: input validation") {
  RidgeOrthogonalProblem p;
  p.theta = {1.0};
  p.sigma = {1.0};
  p.group_sizes = {5};
  CHECK_THROWS_AS(monte_carlo(p, 0, 500, 1), std::invalid_argument);
  CHECK_THROWS_AS(monte_carlo(p, 3, 2000, 1), std::invalid_argument);
}

TEST_CASE("excess bias") {
  RidgeOrthogonalProblem p;
  p.theta = {1.0, 0.8};
  p.sigma = {1.0};
  p.group_sizes = {10, 10};
  p.ridge = 5.0;

  SUBCASE("zero at matched prevalence") {
    CHECK(excess_bias(p, 0, 0.25, 0.25, 1e4) == doctest::Approx(0.0));
  }
  SUBCASE("positive when underrepresented with positive effect") {
    CHECK(excess_bias(p, 0, 0.05, 0.5, 1e4) > 0.0);
    CHECK(excess_bias(p, 0, 0.9, 0.5, 1e4) < 0.0);
  }
  SUBCASE("first-order match against the closed-form bias gap") {
    // |sqrt(bias)(n_g = gamma n) - sqrt(bias)(n_g = gamma* n)| at n = 1e4,
    // lambda = 5: the approximation must land within 10% relative.
    const double n = 1e4;
    const double gamma_g = 0.1;
    const double gamma_star = 0.5;
    const double lambda = p.ridge;
    const double theta = p.theta[0];
    const double exact = std::abs(lambda * theta / (gamma_g * n + lambda) -
                                  lambda * theta / (gamma_star * n + lambda));
    const double approx = excess_bias(p, 0, gamma_g, gamma_star, n);
    CHECK(std::abs(approx - exact) <= 0.1 * exact);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(excess_bias(p, 0, 0.0, 0.5, 1e4), std::invalid_argument);
    CHECK_THROWS_AS(excess_bias(p, 0, 1e-7, 0.5, 100), std::invalid_argument);
  }
}

TEST_CASE("bias increases and variance decreases in lambda") {
  RidgeOrthogonalProblem p;
  p.theta = {1.5};
  p.sigma = {1.0};
  p.group_sizes = {30};
  double prev_bias = -1.0;
  double prev_var = 2.0;
  for (double lambda : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    p.ridge = lambda;
    const auto d = closed_form(p, 0);
    CHECK(d.bias >= prev_bias);
    CHECK(d.variance <= prev_var);
    prev_bias = d.bias;
    prev_var = d.variance;
  }
}
