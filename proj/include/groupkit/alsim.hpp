#pragma once

// Synthetic biased-data generation (two majority clusters off-diagonal, two
// tiny minority clusters on-diagonal), the active-learning loop with the four
// sampling signals, reweighted final-model training, and accuracy/robustness
// frontier tracing over a (t, lambda_up) grid.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "groupkit/learner.hpp"

namespace groupkit::alsim {

struct Cluster {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};  // row-major 2x2, PSD
  std::size_t count = 0;
  int label = 0;  // class y
  int group = 0;
  bool minority = false;
};

struct SyntheticSpec2D {
  std::vector<Cluster> clusters;
  std::uint64_t seed = 0;

  void validate() const;
  // Majority clusters off-diagonal, minority clusters on the diagonal; four
  // groups = class x majority/minority. Defaults follow the desk-scale
  // protocol (2450 majority per class; 25 minority per class, configurable
  // down to the <5 stress regime).
  static SyntheticSpec2D default_task(std::size_t majority_per_class = 2450,
                                      std::size_t minority_per_class = 25,
                                      std::uint64_t seed = 0);
};

struct Dataset2D {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<int> group;
  std::vector<int> minority;  // b = I(g in B)

  std::size_t size() const { return x.size(); }
};

// Deterministic Gaussian-mixture sampling (Cholesky of each covariance).
Dataset2D gen_2d(const SyntheticSpec2D& spec);

enum class Signal { kRandom, kMargin, kDiversity, kVariance, kPredictedUnderrep };
Signal signal_from_string(const std::string& name);
std::string to_string(Signal s);

enum class UnderrepSource { kIdentity, kGap, kError };
UnderrepSource underrep_source_from_string(const std::string& name);
std::string to_string(UnderrepSource s);

// The four acquisition scores. Inputs are per-member, per-example tensors:
//   margin = 2*|mean_k p_k(y|x) - 0.5|            (acquire lowest)
//   predicted_underrep = mean_k p_k(b|x)          (acquire highest)
//   diversity = population Var_k(p_k(y|x))        (acquire highest, K >= 2)
//   variance = mean_k v_k(x)                      (acquire highest)
// `v` may be empty when the variance signal is not needed.
struct SignalScores {
  std::vector<double> margin;
  std::vector<double> predicted_underrep;
  std::vector<double> diversity;
  std::vector<double> variance;
};
SignalScores signals(const std::vector<std::vector<double>>& p_y,
                     const std::vector<std::vector<double>>& p_b,
                     const std::vector<std::vector<double>>& v);

struct ALConfig {
  std::size_t initial_labeled = 200;
  int rounds = 5;
  std::size_t batch_per_round = 50;
  Signal signal = Signal::kVariance;
  UnderrepSource underrep_source = UnderrepSource::kIdentity;
  int ensemble_size = 5;
  learner::MLPSpec model;
  learner::TrainConfig train;
  int selfplay_folds = 10;   // stage-I K (gap/error sources)
  int selfplay_splits = 1;   // stage-I m
  double kernel_bandwidth = 1.0;
  double kernel_jitter = 1e-6;
  std::uint64_t seed = 0;
  int jobs = 0;

  void validate(std::size_t pool_size) const;
};

struct RoundMetrics {
  int round = 0;
  std::size_t labeled_size = 0;
  double tail_rate = 0.0;  // cumulative acquired minority / pool minority
  double accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  double combined = 0.0;  // (acc + wga) / 2
};

struct ALResult {
  std::vector<RoundMetrics> rounds;
  std::vector<std::size_t> sampled_order;    // acquisition log, in order
  std::vector<std::size_t> labeled_indices;  // final labeled set
  std::vector<double> final_scores;          // underrep scores for that set
};

// Runs the two-stage loop: (optional) self-play estimation of b targets on
// the labeled set, introspective ensemble training, pool scoring, top-batch
// acquisition with ties broken by lowest example index.
ALResult run_al_loop(const Dataset2D& pool, const Dataset2D& test,
                     const ALConfig& config);

// Indices of the k best eligible examples (lowest_first for margin), ties by
// lowest index. Exposed for the oracle-signal invariant tests.
std::vector<std::size_t> acquire_top(const std::vector<double>& scores,
                                     std::size_t k,
                                     const std::vector<char>& eligible,
                                     bool lowest_first);

// Weighted ERM: weight lambda_up where score > t, 1 elsewhere. An empty
// up-weighted set degrades to plain ERM with `erm_fallback` set.
learner::IntrospectiveModel reweighted_train(
    const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
    const std::vector<double>& underrep_scores, double t, double lambda_up,
    const learner::MLPSpec& spec, const learner::TrainConfig& config,
    bool* erm_fallback = nullptr);

struct Evaluation {
  double accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  double combined() const { return 0.5 * (accuracy + worst_group_accuracy); }
};
Evaluation evaluate_model(const learner::IntrospectiveModel& model,
                          const Dataset2D& test);

struct FrontierCell {
  double t = 0.0;
  double lambda_up = 1.0;
  double accuracy = 0.0;
  double worst_group_accuracy = 0.0;
  double combined = 0.0;
  bool ok = false;
  bool pareto = false;
  std::string error;
};

struct FrontierTrace {
  std::vector<FrontierCell> cells;

  // Best combined accuracy over successful cells.
  double best_combined() const;
};

// Trains one reweighted model per (t, lambda_up) cell, evaluates on the test
// set, and marks the Pareto-efficient (accuracy, worst-group) subset.
// Per-cell failures are recorded, not fatal.
FrontierTrace trace_frontier(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys,
                             const std::vector<double>& underrep_scores,
                             const std::vector<double>& t_grid,
                             const std::vector<double>& lambda_grid,
                             const learner::MLPSpec& spec,
                             const learner::TrainConfig& config,
                             const Dataset2D& test, int jobs = 0);

}  // namespace groupkit::alsim
