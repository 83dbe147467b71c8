#pragma once

// Closed-form and algorithmic solvers for optimal group-size allocation under
// weighted, worst-case, and frontier risk objectives, plus an independent
// numeric oracle (multi-start projected subgradient + pattern polish) used to
// verify the closed forms.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "groupkit/scaling.hpp"

namespace groupkit::alloc {

using scaling::Allocation;
using scaling::GroupDistribution;
using scaling::GroupScalingLaw;
using scaling::TradeoffWeight;

// Groups assigned zero mass by a formula receive this floor, then the vector
// is renormalized (Allocation requires strictly positive entries).
inline constexpr double kAllocFloor = 1e-12;

// Non-negative per-group weights; at least one entry > 0 (need not sum to 1).
struct WeightedRiskWeights {
  std::vector<double> w;

  WeightedRiskWeights() = default;
  explicit WeightedRiskWeights(std::vector<double> weights);
  std::size_t size() const { return w.size(); }
  double operator[](std::size_t g) const { return w[g]; }
};

// Saddle point of the adversarially weighted worst-case risk.
//   l_g = 1/(lambda - (tau_g n^-q_g + delta_g)) > 0
//   alpha_g ∝ (c_g l_g)^(1/p),  v_g ∝ c_g^(1/p) l_g^((p+1)/p)
// lambda is the equalized group risk (the minimax value of the group terms).
struct WorstCaseSolution {
  Allocation alpha;
  std::vector<double> v;       // adversarial weights, on the simplex (1e-10)
  double lambda = 0.0;         // Lagrange multiplier / equalized risk level
  std::vector<double> l;       // l_g coefficients
  double residual = 0.0;       // |log lhs - log rhs| of the implicit equation
};

// Frontier solution: theta are up-sampling factors (>= omega, with theta_g >
// omega exactly for the underrepresented prefix B), sort_key the normalized
// representation gamma_g * c_g^(-1/p) the prefix ordering is based on.
struct FrontierSolution {
  Allocation alpha;
  std::vector<double> theta;
  std::vector<std::size_t> underrep_set;  // B, sorted ascending by index
  double risk = 0.0;
  std::vector<double> sort_key;
  double omega = 1.0;
};

// alpha_g ∝ (w_g c_g)^(1/(p+1)); requires a shared exponent p.
Allocation weighted_allocation_shared_p(const std::vector<GroupScalingLaw>& laws,
                                        const WeightedRiskWeights& w);

// alpha_g ∝ (w_g c_g p_g n^(-p_g))^(1/(p_g+1)); per-group exponents allowed.
Allocation weighted_allocation_general_p(const std::vector<GroupScalingLaw>& laws,
                                         const WeightedRiskWeights& w, double n);

// alpha_g ∝ c_g^(1/p); requires shared p, q, tau, delta.
Allocation worstcase_allocation_shared_all(const std::vector<GroupScalingLaw>& laws);

// Full worst-case solver for shared p with heterogeneous (tau, q, delta):
// finds lambda by bracketed bisection on the implicit equation
//   sum_g (c_g l_g(lambda))^(1/p) = n
// (the stationarity + simplex condition of the saddle point; at the root all
// active group risks equal lambda), then alpha_g ∝ (c_g l_g)^(1/p).
WorstCaseSolution worstcase_allocation_shared_p(
    const std::vector<GroupScalingLaw>& laws, double n);

// Iterative up-sampling construction for the frontier objective
// omega * population + (1 - omega) * worst-case, shared p.
FrontierSolution frontier_allocation(const std::vector<GroupScalingLaw>& laws,
                                     const GroupDistribution& gamma, double n,
                                     double omega);

// {g : gamma_g < (w2/w1) * c_g^(1/p) l_g^((p+1)/p) / sum_G c^(1/p) l^((p+1)/p)}
// A guaranteed subset of the frontier solution's underrepresented set.
std::vector<std::size_t> sufficient_underrep(
    const std::vector<GroupScalingLaw>& laws, const GroupDistribution& gamma,
    const TradeoffWeight& omega_pair, double n, const std::vector<double>& l);

// Threshold t_n such that group g's empirical risk c_g (gamma_g n)^-p + tau
// n^-q + delta exceeds t_n iff g satisfies the underrepresentation inequality.
// Requires shared p, q, tau, delta and nonempty B.
double selection_threshold(const std::vector<GroupScalingLaw>& laws,
                           const GroupDistribution& gamma,
                           const std::vector<std::size_t>& underrep_set,
                           const TradeoffWeight& omega_pair, double n);

// ---------------------------------------------------------------------------
// Independent numeric oracle. Multi-start projected subgradient descent with
// Euclidean simplex projection, polished by a shrinking pattern search over
// pairwise exchange directions. Restarts are independent and run through
// parallel_for with a deterministic min-by-(risk, restart) reduction.
// ---------------------------------------------------------------------------

struct OracleOptions {
  int restarts = 50;
  int max_iters = 300;
  int jobs = 0;  // 0 -> default
};

struct OracleResult {
  Allocation alpha;
  double risk = 0.0;
  bool converged = true;  // false -> best-so-far returned with a warning
};

OracleResult oracle_minimize_frontier(const std::vector<GroupScalingLaw>& laws,
                                      const GroupDistribution& gamma, double n,
                                      double omega, double tolerance,
                                      const OracleOptions& options = {});

// Euclidean projection onto the probability simplex (used by the oracle;
// exposed for tests).
std::vector<double> project_to_simplex(std::vector<double> v);

}  // namespace groupkit::alloc
