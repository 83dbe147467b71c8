#include "groupkit/alloc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "groupkit/numeric.hpp"

namespace groupkit::alloc {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": group count mismatch");
}

double shared_p(const std::vector<GroupScalingLaw>& laws, const char* caller) {
  if (laws.empty()) throw std::invalid_argument(std::string(caller) + ": no groups");
  const double p = laws[0].p;
  for (const auto& law : laws) {
    law.validate();
    if (law.p != p) {
      throw std::invalid_argument(
          std::string(caller) +
          ": groups have different exponents p; use weighted_allocation_general_p");
    }
  }
  return p;
}

// Floor raw proportional masses at kAllocFloor and normalize to the simplex.
Allocation normalize_floored(std::vector<double> raw) {
  double sum = 0.0;
  for (double& x : raw) {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument("allocation: non-finite or negative mass");
    }
    sum += x;
  }
  if (sum <= 0.0) throw std::invalid_argument("allocation: all masses are zero");
  for (double& x : raw) x = std::max(x / sum, kAllocFloor);
  sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  for (double& x : raw) x /= sum;
  return Allocation(std::move(raw));
}

double nuisance(const GroupScalingLaw& law, double n) {
  return law.tau * std::pow(n, -law.q) + law.delta;
}

// Frontier objective on a raw (clamped) alpha vector; used by the oracle so
// it can probe points slightly off the simplex without ctor validation.
double frontier_risk_raw(const std::vector<GroupScalingLaw>& laws,
                         const GroupDistribution& gamma,
                         const std::vector<double>& alpha, double n,
                         double omega) {
  double pop = 0.0;
  double worst = 0.0;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    const double a = std::max(alpha[g], kAllocFloor);
    const double r = laws[g].c * std::pow(a * n, -laws[g].p) + nuisance(laws[g], n);
    pop += gamma[g] * r;
    worst = std::max(worst, r);
  }
  return omega * pop + (1.0 - omega) * worst;
}

}  // namespace

WeightedRiskWeights::WeightedRiskWeights(std::vector<double> weights)
    : w(std::move(weights)) {
  if (w.empty()) throw std::invalid_argument("WeightedRiskWeights: empty");
  bool any_positive = false;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument("WeightedRiskWeights: entries must be >= 0");
    }
    any_positive |= x > 0.0;
  }
  if (!any_positive) {
    throw std::invalid_argument("WeightedRiskWeights: at least one entry must be > 0");
  }
}

Allocation weighted_allocation_shared_p(const std::vector<GroupScalingLaw>& laws,
                                        const WeightedRiskWeights& w) {
  require_same_size(laws.size(), w.size(), "weighted_allocation_shared_p");
  const double p = shared_p(laws, "weighted_allocation_shared_p");
  std::vector<double> raw(laws.size());
  bool any = false;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    const double wc = w[g] * laws[g].c;
    raw[g] = wc > 0.0 ? std::pow(wc, 1.0 / (p + 1.0)) : 0.0;
    any |= wc > 0.0;
  }
  if (!any) {
    throw std::invalid_argument(
        "weighted_allocation_shared_p: all w_g * c_g are zero");
  }
  return normalize_floored(std::move(raw));
}

Allocation weighted_allocation_general_p(const std::vector<GroupScalingLaw>& laws,
                                         const WeightedRiskWeights& w, double n) {
  require_same_size(laws.size(), w.size(), "weighted_allocation_general_p");
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("weighted_allocation_general_p: n must be > 0");
  }
  // Stationarity gives alpha_g = (K_g / lambda)^(1/(p_g+1)) with
  // K_g = w_g c_g p_g n^-p_g; with heterogeneous exponents the lambda factor
  // does not cancel under normalization, so solve sum_g alpha_g(lambda) = 1
  // for lambda directly.
  std::vector<double> k(laws.size());
  bool any = false;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    laws[g].validate();
    k[g] = w[g] * laws[g].c * laws[g].p * std::pow(n, -laws[g].p);
    any |= k[g] > 0.0;
  }
  if (!any) {
    throw std::invalid_argument(
        "weighted_allocation_general_p: all w_g * c_g are zero");
  }
  const auto mass_sum = [&](double log_lambda) {
    double s = 0.0;
    for (std::size_t g = 0; g < laws.size(); ++g) {
      if (k[g] <= 0.0) continue;
      s += std::exp((std::log(k[g]) - log_lambda) / (laws[g].p + 1.0));
    }
    return s;
  };
  double lo = -700.0, hi = 700.0;  // log lambda; mass_sum is decreasing
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (mass_sum(mid) > 1.0 ? lo : hi) = mid;
  }
  const double log_lambda = 0.5 * (lo + hi);
  std::vector<double> raw(laws.size());
  for (std::size_t g = 0; g < laws.size(); ++g) {
    raw[g] = k[g] > 0.0
                 ? std::exp((std::log(k[g]) - log_lambda) / (laws[g].p + 1.0))
                 : 0.0;
  }
  return normalize_floored(std::move(raw));
}

Allocation worstcase_allocation_shared_all(const std::vector<GroupScalingLaw>& laws) {
  const double p = shared_p(laws, "worstcase_allocation_shared_all");
  for (const auto& law : laws) {
    if (law.q != laws[0].q || law.tau != laws[0].tau || law.delta != laws[0].delta) {
      throw std::invalid_argument(
          "worstcase_allocation_shared_all: heterogeneous tau/q/delta; use "
          "worstcase_allocation_shared_p");
    }
  }
  std::vector<double> raw(laws.size());
  for (std::size_t g = 0; g < laws.size(); ++g) {
    raw[g] = laws[g].c > 0.0 ? std::pow(laws[g].c, 1.0 / p) : 0.0;
  }
  return normalize_floored(std::move(raw));
}

WorstCaseSolution worstcase_allocation_shared_p(
    const std::vector<GroupScalingLaw>& laws, double n) {
  const double p = shared_p(laws, "worstcase_allocation_shared_p");
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("worstcase_allocation_shared_p: n must be > 0");
  }
  const std::size_t groups = laws.size();

  double max_nu = 0.0;
  bool any_c = false;
  std::vector<double> nu(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    nu[g] = nuisance(laws[g], n);
    max_nu = std::max(max_nu, nu[g]);
    any_c |= laws[g].c > 0.0;
  }
  if (!any_c) {
    throw std::invalid_argument(
        "worstcase_allocation_shared_p: all groups have c = 0, the objective "
        "does not depend on alpha");
  }

  // log-residual of the implicit equation sum_g (c_g l_g)^(1/p) = n; strictly
  // decreasing in lambda on (max_nu, inf).
  const auto log_residual = [&](double lambda) {
    double t = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      if (laws[g].c <= 0.0) continue;
      const double l = 1.0 / (lambda - nu[g]);
      t += std::pow(laws[g].c * l, 1.0 / p);
    }
    return std::log(t) - std::log(n);
  };

  // Bracket: geometric width expansion above lambda0, contraction toward
  // max_nu if the root sits below lambda0.
  const double lambda0 = max_nu > 0.0 ? max_nu * (1.0 + 1e-6) : 1e-12;
  double scale = 0.0;  // group term at uniform allocation bounds lambda* above
  for (std::size_t g = 0; g < groups; ++g) {
    scale = std::max(scale,
                     laws[g].c * std::pow(n / static_cast<double>(groups), -p));
  }
  double lo = lambda0;
  double hi = lambda0;
  double f_lo = log_residual(lo);
  if (f_lo >= 0.0) {
    const double width0 = std::max(scale, lambda0 * 1e-6);
    double width = width0;
    double f_hi;
    for (;;) {
      hi = lambda0 + width;
      f_hi = log_residual(hi);
      if (f_hi <= 0.0) break;
      width *= 2.0;
      if (width > 1e3 * width0) {
        throw NoRootError(
            "worstcase_allocation_shared_p: no sign change after expanding the "
            "bracket to 1000x its initial width (residual " +
                std::to_string(f_hi) + ")",
            f_hi);
      }
    }
  } else {
    // Root below lambda0: contract toward max_nu where the residual -> +inf.
    double gap = lambda0 - max_nu;
    for (;;) {
      gap *= 0.5;
      lo = max_nu + gap;
      f_lo = log_residual(lo);
      if (f_lo >= 0.0) break;
      if (gap < 1e-300 || lo <= max_nu) {
        throw NoRootError(
            "worstcase_allocation_shared_p: bracket collapsed onto the nuisance "
            "level (residual " + std::to_string(f_lo) + ")",
            f_lo);
      }
    }
    hi = lambda0;
  }

  for (int iter = 0; iter < 500; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = log_residual(mid);
    if (std::abs(f_mid) <= 1e-12 || hi - lo <= 1e-15 * hi) {
      lo = hi = mid;
      break;
    }
    if (f_mid > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double lambda = 0.5 * (lo + hi);

  WorstCaseSolution sol;
  sol.lambda = lambda;
  sol.residual = std::abs(log_residual(lambda));
  sol.l.resize(groups);
  std::vector<double> raw_alpha(groups), raw_v(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    sol.l[g] = 1.0 / (lambda - nu[g]);
    if (laws[g].c > 0.0) {
      raw_alpha[g] = std::pow(laws[g].c * sol.l[g], 1.0 / p);
      raw_v[g] = std::pow(laws[g].c, 1.0 / p) * std::pow(sol.l[g], (p + 1.0) / p);
    }
  }
  sol.alpha = normalize_floored(std::move(raw_alpha));
  const double v_sum = std::accumulate(raw_v.begin(), raw_v.end(), 0.0);
  sol.v = std::move(raw_v);
  for (double& x : sol.v) x /= v_sum;
  return sol;
}

FrontierSolution frontier_allocation(const std::vector<GroupScalingLaw>& laws,
                                     const GroupDistribution& gamma, double n,
                                     double omega) {
  const double p = shared_p(laws, "frontier_allocation");
  require_same_size(laws.size(), gamma.size(), "frontier_allocation");
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("frontier_allocation: omega must lie in [0, 1]");
  }
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("frontier_allocation: n must be > 0");
  }
  const std::size_t groups = laws.size();

  FrontierSolution sol;
  sol.omega = omega;
  sol.sort_key.resize(groups);
  bool any_c = false;
  for (std::size_t g = 0; g < groups; ++g) {
    sol.sort_key[g] = laws[g].c > 0.0
                          ? gamma[g] * std::pow(laws[g].c, -1.0 / p)
                          : std::numeric_limits<double>::infinity();
    any_c |= laws[g].c > 0.0;
  }
  if (!any_c) {
    throw std::invalid_argument(
        "frontier_allocation: all groups have c = 0, the objective does not "
        "depend on alpha");
  }

  // Ascending by normalized representation; ties stable by group index, so
  // tied groups join the prefix together (the equalization step is a no-op
  // between them).
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sol.sort_key[a] < sol.sort_key[b];
  });

  sol.theta.assign(groups, omega);
  double sum_theta_gamma = 0.0;
  for (std::size_t g = 0; g < groups; ++g) sum_theta_gamma += omega * gamma[g];

  if (sum_theta_gamma < 1.0 - 1e-15) {
    // Raise the common level m = key_g * theta_g of the prefix {g_1..g_k}
    // until either sum theta*gamma = 1 or the next key is reached; then grow
    // the prefix. Equivalent to scaling the prefix by the largest factor
    // t >= 1 allowed by conditions (i)/(ii) of the construction.
    double tail_gamma = 0.0;  // sum of gamma over non-prefix groups
    for (std::size_t g = 0; g < groups; ++g) tail_gamma += gamma[g];
    double prefix_inv = 0.0;  // sum over prefix of gamma_j / key_j
    std::size_t k = 0;
    while (k < groups) {
      tail_gamma -= gamma[order[k]];
      prefix_inv += gamma[order[k]] / sol.sort_key[order[k]];
      ++k;
      const double level_full = (1.0 - omega * tail_gamma) / prefix_inv;
      const double level_next = k < groups
                                    ? sol.sort_key[order[k]] * omega
                                    : std::numeric_limits<double>::infinity();
      if (level_full <= level_next) {
        for (std::size_t j = 0; j < k; ++j) {
          sol.theta[order[j]] = level_full / sol.sort_key[order[j]];
        }
        break;
      }
      for (std::size_t j = 0; j < k; ++j) {
        sol.theta[order[j]] = level_next / sol.sort_key[order[j]];
      }
    }
  }

  std::vector<double> raw(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const double mass = gamma[g] * laws[g].c * sol.theta[g];
    raw[g] = mass > 0.0 ? std::pow(mass, 1.0 / (p + 1.0)) : 0.0;
  }
  sol.alpha = normalize_floored(std::move(raw));
  for (std::size_t g = 0; g < groups; ++g) {
    if (sol.theta[g] > omega + std::max(1e-15, 1e-12 * omega)) {
      sol.underrep_set.push_back(g);
    }
  }
  std::sort(sol.underrep_set.begin(), sol.underrep_set.end());
  sol.risk = scaling::frontier_risk(laws, gamma, sol.alpha, n,
                                    TradeoffWeight::from_omega(omega));
  return sol;
}

std::vector<std::size_t> sufficient_underrep(
    const std::vector<GroupScalingLaw>& laws, const GroupDistribution& gamma,
    const TradeoffWeight& omega_pair, double n, const std::vector<double>& l) {
  const double p = shared_p(laws, "sufficient_underrep");
  require_same_size(laws.size(), gamma.size(), "sufficient_underrep");
  require_same_size(laws.size(), l.size(), "sufficient_underrep (l)");
  if (omega_pair.omega_acc <= 0.0) {
    throw std::invalid_argument(
        "sufficient_underrep: omega_1 must be > 0 (ratio undefined)");
  }
  (void)n;
  std::vector<double> mass(laws.size());
  double denom = 0.0;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    if (!(l[g] > 0.0)) {
      throw std::invalid_argument("sufficient_underrep: l_g must be > 0");
    }
    mass[g] = std::pow(laws[g].c, 1.0 / p) * std::pow(l[g], (p + 1.0) / p);
    denom += mass[g];
  }
  if (denom <= 0.0) {
    throw std::invalid_argument("sufficient_underrep: all c_g are zero");
  }
  const double ratio = omega_pair.omega_fair / omega_pair.omega_acc;
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    if (gamma[g] < ratio * mass[g] / denom) out.push_back(g);
  }
  return out;
}

double selection_threshold(const std::vector<GroupScalingLaw>& laws,
                           const GroupDistribution& gamma,
                           const std::vector<std::size_t>& underrep_set,
                           const TradeoffWeight& omega_pair, double n) {
  const double p = shared_p(laws, "selection_threshold");
  require_same_size(laws.size(), gamma.size(), "selection_threshold");
  for (const auto& law : laws) {
    if (law.q != laws[0].q || law.tau != laws[0].tau || law.delta != laws[0].delta) {
      throw std::invalid_argument(
          "selection_threshold: requires shared p, q, tau, delta");
    }
  }
  if (underrep_set.empty()) {
    throw std::invalid_argument("selection_threshold: underrep set is empty");
  }
  if (omega_pair.omega_acc <= 0.0) {
    throw std::invalid_argument("selection_threshold: omega_1 must be > 0");
  }
  double gamma_b = 0.0;
  double c_b = 0.0;
  for (std::size_t g : underrep_set) {
    if (g >= laws.size()) {
      throw std::invalid_argument("selection_threshold: group index out of range");
    }
    gamma_b += gamma[g];
    c_b += std::pow(laws[g].c, 1.0 / p);
  }
  if (c_b <= 0.0) {
    throw std::invalid_argument(
        "selection_threshold: sum of c_g^(1/p) over B is zero (delta-only laws)");
  }
  const double ratio = omega_pair.omega_fair / omega_pair.omega_acc;
  const double big_c = std::pow((ratio + gamma_b) / c_b, -p);
  return big_c * std::pow(n, -p) + laws[0].tau * std::pow(n, -laws[0].q) +
         laws[0].delta;
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

std::vector<double> project_to_simplex(std::vector<double> v) {
  // Euclidean projection: sort descending, find the largest k with
  // u_k + (1 - sum_{j<=k} u_j)/k > 0, shift and clip.
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double running = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    running += u[k];
    const double candidate = (1.0 - running) / static_cast<double>(k + 1);
    if (u[k] + candidate > 0.0) shift = candidate;
  }
  for (double& x : v) x = std::max(x + shift, 0.0);
  return v;
}

OracleResult oracle_minimize_frontier(const std::vector<GroupScalingLaw>& laws,
                                      const GroupDistribution& gamma, double n,
                                      double omega, double tolerance,
                                      const OracleOptions& options) {
  require_same_size(laws.size(), gamma.size(), "oracle_minimize_frontier");
  if (laws.size() > 6) {
    throw std::invalid_argument("oracle_minimize_frontier: supports <= 6 groups");
  }
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("oracle_minimize_frontier: omega must lie in [0, 1]");
  }
  for (const auto& law : laws) law.validate();
  const std::size_t groups = laws.size();

  const auto objective = [&](const std::vector<double>& a) {
    return frontier_risk_raw(laws, gamma, a, n, omega);
  };

  // Subgradient: population term is smooth; the worst-case term contributes
  // through the first argmax group.
  const auto subgradient = [&](const std::vector<double>& a) {
    std::vector<double> grad(groups, 0.0);
    std::size_t worst_g = 0;
    double worst = -1.0;
    for (std::size_t g = 0; g < groups; ++g) {
      const double x = std::max(a[g], kAllocFloor);
      const double r = laws[g].c * std::pow(x * n, -laws[g].p) + nuisance(laws[g], n);
      const double dr = -laws[g].p * laws[g].c * std::pow(x * n, -laws[g].p - 1.0) * n;
      grad[g] += omega * gamma[g] * dr;
      if (r > worst) {
        worst = r;
        worst_g = g;
      }
    }
    const double x = std::max(a[worst_g], kAllocFloor);
    grad[worst_g] += (1.0 - omega) * -laws[worst_g].p * laws[worst_g].c *
                     std::pow(x * n, -laws[worst_g].p - 1.0) * n;
    return grad;
  };

  constexpr std::uint64_t kOracleSeed = 0x6f7261636c65ULL;
  struct Restart {
    std::vector<double> alpha;
    double risk = std::numeric_limits<double>::infinity();
  };
  std::vector<Restart> results(static_cast<std::size_t>(options.restarts));

  parallel_for(results.size(), options.jobs, [&](std::size_t r) {
    Rng rng = Rng::stream(kOracleSeed, 1, r);
    std::vector<double> a(groups);
    if (r == 0) {
      std::fill(a.begin(), a.end(), 1.0 / static_cast<double>(groups));
    } else {
      double sum = 0.0;
      for (double& x : a) {
        x = -std::log(std::max(rng.uniform(), 1e-300));
        sum += x;
      }
      for (double& x : a) x /= sum;
    }

    // Curvature probe for the initial step size (1/L).
    double lipschitz = 1.0;
    {
      const double h = 1e-5;
      const std::vector<double> g0 = subgradient(a);
      for (std::size_t g = 0; g < groups; ++g) {
        std::vector<double> shifted = a;
        shifted[g] = std::max(shifted[g] - h, kAllocFloor);
        shifted = project_to_simplex(shifted);
        const std::vector<double> g1 = subgradient(shifted);
        for (std::size_t j = 0; j < groups; ++j) {
          lipschitz = std::max(lipschitz, std::abs(g1[j] - g0[j]) / h);
        }
      }
    }

    double step = 1.0 / lipschitz;
    double best = objective(a);
    for (int iter = 0; iter < options.max_iters; ++iter) {
      const std::vector<double> grad = subgradient(a);
      std::vector<double> next(groups);
      double risk_next;
      double s = step;
      for (int bt = 0; bt < 40; ++bt) {  // backtrack until improvement
        for (std::size_t g = 0; g < groups; ++g) next[g] = a[g] - s * grad[g];
        next = project_to_simplex(next);
        risk_next = objective(next);
        if (risk_next < best) break;
        s *= 0.5;
      }
      if (risk_next >= best - 1e-16 * std::abs(best)) break;
      a = next;
      best = risk_next;
    }

    // Pattern polish over pairwise exchange directions with shrinking scale;
    // localizes the optimum past the kink of the max term.
    for (double s = 1e-1; s >= 1e-8; s *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t i = 0; i < groups; ++i) {
          for (std::size_t j = 0; j < groups; ++j) {
            if (i == j || a[j] < s) continue;
            std::vector<double> cand = a;
            cand[i] += s;
            cand[j] -= s;
            const double risk = objective(cand);
            if (risk < best) {
              a = std::move(cand);
              best = risk;
              improved = true;
            }
          }
        }
      }
    }
    results[r].alpha = std::move(a);
    results[r].risk = best;
  });

  std::size_t winner = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r].risk < results[winner].risk) winner = r;
  }

  OracleResult out;
  out.risk = results[winner].risk;
  out.alpha = normalize_floored(std::move(results[winner].alpha));
  // Convergence heuristic: restart agreement within the requested tolerance.
  if (results.size() > 1) {
    std::size_t agreeing = 0;
    for (const auto& res : results) {
      if (res.risk <= out.risk + std::max(tolerance, 1e-12) *
                                     std::max(1.0, std::abs(out.risk))) {
        ++agreeing;
      }
    }
    out.converged = agreeing >= 2;
  }
  return out;
}

}  // namespace groupkit::alloc
