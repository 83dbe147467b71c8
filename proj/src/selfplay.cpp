#include "groupkit/selfplay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "groupkit/numeric.hpp"

namespace groupkit::selfplay {

void FoldAssignment::validate() const {
  if (num_folds < 2) {
    throw std::invalid_argument("FoldAssignment: K must be >= 2");
  }
  if (splits_per_member < 1 || splits_per_member >= num_folds) {
    throw std::invalid_argument("FoldAssignment: m must satisfy 1 <= m < K");
  }
  if (fold_of.empty()) {
    throw std::invalid_argument("FoldAssignment: no examples");
  }
  for (int f : fold_of) {
    if (f < 0 || f >= num_folds) {
      throw std::invalid_argument("FoldAssignment: fold index out of range");
    }
  }
  // With 1 <= m < K every example has >= 1 in-sample and >= 1 out-of-sample
  // member by construction; nothing else to check.
}

FoldAssignment make_folds(std::size_t n, int K, int m, std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("make_folds: K must be >= 2");
  if (m < 1 || m >= K) {
    throw std::invalid_argument("make_folds: m must satisfy 1 <= m < K");
  }
  if (n < static_cast<std::size_t>(K)) {
    throw std::invalid_argument("make_folds: needs n >= K");
  }
  FoldAssignment folds;
  folds.num_folds = K;
  folds.splits_per_member = m;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, 0xf01d5ULL);
  rng.shuffle(order);
  folds.fold_of.resize(n);
  // Round-robin over the shuffled order keeps fold sizes within one.
  for (std::size_t pos = 0; pos < n; ++pos) {
    folds.fold_of[order[pos]] = static_cast<int>(pos % K);
  }
  return folds;
}

EarlyStop early_stop_epoch(const std::vector<double>& loss_curve, int window,
                           double eps) {
  if (window < 1) throw std::invalid_argument("early_stop: window must be >= 1");
  if (loss_curve.size() < static_cast<std::size_t>(window)) {
    throw std::invalid_argument("early_stop: curve shorter than the window");
  }
  for (std::size_t t = window - 1; t < loss_curve.size(); ++t) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = t + 1 - window; i <= t; ++i) {
      sum += loss_curve[i];
      lo = std::min(lo, loss_curve[i]);
      hi = std::max(hi, loss_curve[i]);
    }
    if (sum / window <= eps && hi - lo <= 0.5 * eps) {
      return EarlyStop{static_cast<int>(t), true};
    }
  }
  const auto it = std::min_element(loss_curve.begin(), loss_curve.end());
  return EarlyStop{static_cast<int>(it - loss_curve.begin()), false};
}

CvEnsemble train_cv_ensemble(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys,
                             const FoldAssignment& folds,
                             const learner::MLPSpec& spec,
                             const learner::TrainConfig& config, int jobs) {
  folds.validate();
  if (xs.size() != ys.size() || xs.size() != folds.fold_of.size()) {
    throw std::invalid_argument("train_cv_ensemble: size mismatch");
  }
  const int K = folds.num_folds;
  const std::size_t n = xs.size();

  CvEnsemble ensemble;
  ensemble.folds = folds;
  ensemble.members.resize(K);
  ensemble.prob_y.assign(K, {});

  parallel_for(static_cast<std::size_t>(K), jobs, [&](std::size_t member) {
    std::vector<std::vector<double>> mx;
    std::vector<double> my;
    for (std::size_t i = 0; i < n; ++i) {
      if (folds.in_sample(static_cast<int>(member), i)) {
        mx.push_back(xs[i]);
        my.push_back(ys[i]);
      }
    }
    learner::MLPSpec member_spec = spec;
    member_spec.init_seed = Rng::stream(spec.init_seed, 0xc0feULL, member).next_u64();
    learner::TrainConfig member_config = config;
    member_config.shuffle_seed =
        Rng::stream(config.shuffle_seed, 0x5afeULL, member).next_u64();

    auto& snapshots = ensemble.prob_y[member];
    snapshots.assign(config.epochs, std::vector<double>(n, 0.0));
    learner::TrainHooks hooks;
    hooks.on_epoch = [&](int epoch, const learner::IntrospectiveModel& m) {
      for (std::size_t i = 0; i < n; ++i) {
        snapshots[epoch][i] = m.prob_y(xs[i]);
      }
    };
    ensemble.members[member] =
        learner::train_erm(mx, my, member_spec, member_config, hooks);
  });

  ensemble.oos_loss_curve.assign(config.epochs, 0.0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (int k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!folds.in_sample(k, i)) {
          sum += std::abs(ys[i] - ensemble.prob_y[k][epoch][i]);
          ++pairs;
        }
      }
    }
    ensemble.oos_loss_curve[epoch] = sum / static_cast<double>(pairs);
  }
  return ensemble;
}

GapEstimates gap_estimate(const CvEnsemble& ensemble,
                          const std::vector<double>& ys, int window,
                          double eps) {
  ensemble.folds.validate();
  const int K = ensemble.folds.num_folds;
  const std::size_t n = ensemble.folds.fold_of.size();
  if (ys.size() != n) throw std::invalid_argument("gap_estimate: ys size mismatch");
  if (static_cast<int>(ensemble.prob_y.size()) != K) {
    throw std::invalid_argument("gap_estimate: prediction store size mismatch");
  }

  const EarlyStop stop = early_stop_epoch(ensemble.oos_loss_curve, window, eps);
  GapEstimates out;
  out.stop_epoch = stop.epoch;
  out.stop_stabilized = stop.stabilized;
  out.gap.assign(n, 0.0);
  out.naive_error.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    double f_in = 0.0;
    int in_count = 0;
    for (int k = 0; k < K; ++k) {
      if (ensemble.folds.in_sample(k, i)) {
        f_in += ensemble.prob_y[k][stop.epoch][i];
        ++in_count;
      }
    }
    if (in_count == 0 || in_count == K) {
      throw std::invalid_argument(
          "gap_estimate: example " + std::to_string(i) +
          " violates the fold invariant (needs in- and out-of-sample members)");
    }
    f_in /= in_count;

    double gap = 0.0;
    double naive = 0.0;
    for (int k = 0; k < K; ++k) {
      const double p = ensemble.prob_y[k][stop.epoch][i];
      if (ensemble.folds.in_sample(k, i)) {
        naive += std::abs(ys[i] - p);
      } else {
        gap += std::abs(f_in - p);
      }
    }
    out.gap[i] = gap / (K - in_count);
    out.naive_error[i] = naive / in_count;
  }
  return out;
}

std::vector<int> rank_threshold_labels(const std::vector<double>& gaps, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("rank_threshold_labels: q must lie in (0, 1)");
  }
  const std::vector<double> cdf = midrank_cdf(gaps);
  std::vector<int> labels(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) labels[i] = cdf[i] > q ? 1 : 0;
  return labels;
}

}  // namespace groupkit::selfplay
