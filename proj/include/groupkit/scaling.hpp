#pragma once

// Group-specific generalization-error scaling laws and the risk objectives
// built on them: per-group risk c*n_g^-p + tau*n^-q + delta, the
// prevalence-weighted population risk, the worst-group risk, and their convex
// combination (the accuracy/robustness frontier risk).
//
// All functions here are pure over immutable values; n and n_g are reals so
// the solvers in alloc stay smooth (integer flooring happens only at dataset
// construction time in alsim).

#include <cstddef>
#include <string>
#include <vector>

namespace groupkit::scaling {

struct GroupScalingLaw {
  double c = 1.0;     // multiplicative difficulty, >= 0
  double p = 1.0;     // group-size exponent, > 0
  double tau = 0.0;   // aggregate coefficient, >= 0
  double q = 1.0;     // aggregate exponent, > 0
  double delta = 0.0; // irreducible risk, >= 0
  double min_group_size = 1.0;  // M_g, >= 1

  void validate() const;
};

// Simplex vector of population prevalences; entries > 0, sum to 1 (1e-12).
struct GroupDistribution {
  std::vector<double> gamma;

  GroupDistribution() = default;
  explicit GroupDistribution(std::vector<double> g);
  std::size_t size() const { return gamma.size(); }
  double operator[](std::size_t g) const { return gamma[g]; }
};

// Simplex vector of training-set group fractions; same invariants.
struct Allocation {
  std::vector<double> alpha;

  Allocation() = default;
  explicit Allocation(std::vector<double> a);
  std::size_t size() const { return alpha.size(); }
  double operator[](std::size_t g) const { return alpha[g]; }
};

// (omega_acc, omega_fair), not both zero. The single-parameter form of the
// frontier definition is (omega, 1-omega).
struct TradeoffWeight {
  double omega_acc = 1.0;
  double omega_fair = 0.0;

  TradeoffWeight() = default;
  TradeoffWeight(double acc, double fair);
  static TradeoffWeight from_omega(double omega);
};

struct GroupRisk {
  double value = 0.0;
  bool below_min_size = false;  // warning, not an error: solvers probe corners
};

// r(n_g, n) = c*n_g^-p + tau*n^-q + delta. Requires finite inputs, n_g <= n.
double group_risk(const GroupScalingLaw& law, double n_g, double n);
GroupRisk group_risk_checked(const GroupScalingLaw& law, double n_g, double n);

// sum_g gamma_g * r(alpha_g * n, n)
double population_risk(const std::vector<GroupScalingLaw>& laws,
                       const GroupDistribution& gamma, const Allocation& alpha,
                       double n);

// max_g r(alpha_g * n, n)
double worst_case_risk(const std::vector<GroupScalingLaw>& laws,
                       const Allocation& alpha, double n);

// omega_acc * population_risk + omega_fair * worst_case_risk
double frontier_risk(const std::vector<GroupScalingLaw>& laws,
                     const GroupDistribution& gamma, const Allocation& alpha,
                     double n, const TradeoffWeight& w);

// True when any group is below its min_group_size at this allocation.
bool any_below_min_size(const std::vector<GroupScalingLaw>& laws,
                        const Allocation& alpha, double n);

// JSON schema for a scaling-law set (used by the CLI):
//   {"laws": [{"c":..,"p":..,"tau":..,"q":..,"delta":..,"min_group_size":..}],
//    "gamma": [..]}
// min_group_size defaults to 1 when omitted.
struct LawSet {
  std::vector<GroupScalingLaw> laws;
  GroupDistribution gamma;
};
LawSet parse_law_set(const std::string& json_text);
LawSet load_law_set(const std::string& path);

}  // namespace groupkit::scaling
