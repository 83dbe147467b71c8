#pragma once

// Cross-validated ensemble training and the self-play generalization-gap
// estimator, with the naive training-error estimator as baseline and the
// early-stopping rule on the out-of-sample loss curve. Per-epoch predictions
// are stored so the gap can be read off at the early-stop epoch without
// retraining.

#include <cstdint>
#include <vector>

#include "groupkit/learner.hpp"

namespace groupkit::selfplay {

// K folds; member j trains on folds {j, j+1, ..., j+m-1 mod K}, so every
// example has exactly m in-sample members and K-m out-of-sample members.
struct FoldAssignment {
  int num_folds = 10;         // K
  int splits_per_member = 1;  // m, in [1, K)
  std::vector<int> fold_of;   // per example

  bool member_sees_fold(int member, int fold) const {
    const int diff = (fold - member + num_folds) % num_folds;
    return diff < splits_per_member;
  }
  bool in_sample(int member, std::size_t example) const {
    return member_sees_fold(member, fold_of[example]);
  }
  void validate() const;
};

FoldAssignment make_folds(std::size_t n, int K, int m, std::uint64_t seed);

struct EarlyStop {
  int epoch = 0;
  bool stabilized = true;  // false -> argmin fallback was used
};

// First epoch whose trailing window (length `window`) has mean <= eps and
// max-min <= eps/2; argmin epoch with stabilized=false when no window
// qualifies.
EarlyStop early_stop_epoch(const std::vector<double>& loss_curve, int window = 5,
                           double eps = 0.1);

struct CvEnsemble {
  FoldAssignment folds;
  std::vector<learner::IntrospectiveModel> members;  // final-epoch state
  // prob_y[member][epoch][example]: sigma(f_y) on every example
  std::vector<std::vector<std::vector<double>>> prob_y;
  std::vector<double> oos_loss_curve;  // mean |y_i - p| over out-of-sample pairs
};

// Trains K ERM members on their assigned folds (embarrassingly parallel,
// per-member seeds derived from spec/config seeds and the member index).
CvEnsemble train_cv_ensemble(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys,
                             const FoldAssignment& folds,
                             const learner::MLPSpec& spec,
                             const learner::TrainConfig& config, int jobs = 0);

struct GapEstimates {
  std::vector<double> gap;          // b-hat per example, in [0, 1]
  std::vector<double> naive_error;  // in-sample |y - p| baseline, in [0, 1]
  int stop_epoch = 0;
  bool stop_stabilized = true;
};

// At the early-stop epoch: f_in = mean in-sample probability, gap_i = mean
// over out-of-sample members k of |f_in(x_i) - p_k(x_i)|, naive_error_i =
// mean over in-sample members of |y_i - p_k(x_i)|.
GapEstimates gap_estimate(const CvEnsemble& ensemble,
                          const std::vector<double>& ys, int window = 5,
                          double eps = 0.1);

// Label 1 iff the midrank empirical-CDF position of gap_i exceeds q.
std::vector<int> rank_threshold_labels(const std::vector<double>& gaps, double q);

}  // namespace groupkit::selfplay
