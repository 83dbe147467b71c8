#include "groupkit/scaling.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace groupkit::scaling {

namespace {

void check_simplex(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty");
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x <= 0.0) {
      throw std::invalid_argument(std::string(what) +
                                  ": entries must be finite and > 0");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string(what) + ": entries sum to " +
                                std::to_string(sum) + ", expected 1 (1e-12)");
  }
}

}  // namespace

void GroupScalingLaw::validate() const {
  if (!(std::isfinite(c) && std::isfinite(p) && std::isfinite(tau) &&
        std::isfinite(q) && std::isfinite(delta))) {
    throw std::invalid_argument("GroupScalingLaw: non-finite coefficient");
  }
  if (p <= 0.0 || q <= 0.0) {
    throw std::invalid_argument("GroupScalingLaw: p and q must be > 0");
  }
  if (c < 0.0 || tau < 0.0 || delta < 0.0) {
    throw std::invalid_argument("GroupScalingLaw: c, tau, delta must be >= 0");
  }
  if (!(min_group_size >= 1.0)) {
    throw std::invalid_argument("GroupScalingLaw: min_group_size must be >= 1");
  }
}

GroupDistribution::GroupDistribution(std::vector<double> g) : gamma(std::move(g)) {
  check_simplex(gamma, "GroupDistribution");
}

Allocation::Allocation(std::vector<double> a) : alpha(std::move(a)) {
  check_simplex(alpha, "Allocation");
}

TradeoffWeight::TradeoffWeight(double acc, double fair)
    : omega_acc(acc), omega_fair(fair) {
  if (!(std::isfinite(acc) && std::isfinite(fair)) || acc < 0.0 || fair < 0.0) {
    throw std::invalid_argument("TradeoffWeight: weights must be finite and >= 0");
  }
  if (acc == 0.0 && fair == 0.0) {
    throw std::invalid_argument("TradeoffWeight: weights must not both be zero");
  }
}

TradeoffWeight TradeoffWeight::from_omega(double omega) {
  if (!std::isfinite(omega) || omega < 0.0 || omega > 1.0) {
    throw std::invalid_argument("TradeoffWeight: omega must lie in [0, 1]");
  }
  return TradeoffWeight(omega, 1.0 - omega);
}

double group_risk(const GroupScalingLaw& law, double n_g, double n) {
  law.validate();
  if (!(std::isfinite(n_g) && std::isfinite(n))) {
    throw std::invalid_argument("group_risk: non-finite sample size");
  }
  if (n_g <= 0.0 || n <= 0.0) {
    throw std::invalid_argument("group_risk: sample sizes must be > 0");
  }
  if (n_g > n * (1.0 + 1e-12)) {
    throw std::invalid_argument("group_risk: n_g must not exceed n");
  }
  return law.c * std::pow(n_g, -law.p) + law.tau * std::pow(n, -law.q) +
         law.delta;
}

GroupRisk group_risk_checked(const GroupScalingLaw& law, double n_g, double n) {
  return GroupRisk{group_risk(law, n_g, n), n_g < law.min_group_size};
}

double population_risk(const std::vector<GroupScalingLaw>& laws,
                       const GroupDistribution& gamma, const Allocation& alpha,
                       double n) {
  if (laws.size() != gamma.size() || laws.size() != alpha.size()) {
    throw std::invalid_argument("population_risk: group count mismatch");
  }
  double risk = 0.0;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    risk += gamma[g] * group_risk(laws[g], alpha[g] * n, n);
  }
  return risk;
}

double worst_case_risk(const std::vector<GroupScalingLaw>& laws,
                       const Allocation& alpha, double n) {
  if (laws.size() != alpha.size()) {
    throw std::invalid_argument("worst_case_risk: group count mismatch");
  }
  double worst = 0.0;
  for (std::size_t g = 0; g < laws.size(); ++g) {
    worst = std::max(worst, group_risk(laws[g], alpha[g] * n, n));
  }
  return worst;
}

double frontier_risk(const std::vector<GroupScalingLaw>& laws,
                     const GroupDistribution& gamma, const Allocation& alpha,
                     double n, const TradeoffWeight& w) {
  double risk = 0.0;
  if (w.omega_acc != 0.0) risk += w.omega_acc * population_risk(laws, gamma, alpha, n);
  if (w.omega_fair != 0.0) risk += w.omega_fair * worst_case_risk(laws, alpha, n);
  return risk;
}

bool any_below_min_size(const std::vector<GroupScalingLaw>& laws,
                        const Allocation& alpha, double n) {
  for (std::size_t g = 0; g < laws.size(); ++g) {
    if (alpha[g] * n < laws[g].min_group_size) return true;
  }
  return false;
}

LawSet parse_law_set(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("law set: invalid JSON: ") + e.what());
  }
  if (!j.contains("laws") || !j["laws"].is_array() || j["laws"].empty()) {
    throw std::invalid_argument("law set: missing non-empty \"laws\" array");
  }
  LawSet set;
  for (const auto& lj : j["laws"]) {
    GroupScalingLaw law;
    law.c = lj.at("c").get<double>();
    law.p = lj.at("p").get<double>();
    law.tau = lj.value("tau", 0.0);
    law.q = lj.value("q", 1.0);
    law.delta = lj.value("delta", 0.0);
    law.min_group_size = lj.value("min_group_size", 1.0);
    law.validate();
    set.laws.push_back(law);
  }
  if (!j.contains("gamma") || !j["gamma"].is_array()) {
    throw std::invalid_argument("law set: missing \"gamma\" array");
  }
  std::vector<double> gamma = j["gamma"].get<std::vector<double>>();
  if (gamma.size() != set.laws.size()) {
    throw std::invalid_argument("law set: gamma length must match laws length");
  }
  set.gamma = GroupDistribution(std::move(gamma));
  return set;
}

LawSet load_law_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("law set: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_law_set(ss.str());
}

}  // namespace groupkit::scaling
