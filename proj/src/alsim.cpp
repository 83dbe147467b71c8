#include "groupkit/alsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "groupkit/numeric.hpp"
#include "groupkit/selfplay.hpp"

namespace groupkit::alsim {

namespace {

// Lower Cholesky of a symmetric PSD 2x2; zero covariance is allowed
// (degenerate clusters collapse onto their mean).
std::array<double, 3> chol2x2(const std::array<double, 4>& cov) {
  const double a = cov[0], b = cov[1], c = cov[2], d = cov[3];
  if (std::abs(b - c) > 1e-12 * std::max({1.0, std::abs(b), std::abs(c)})) {
    throw std::invalid_argument("gen_2d: covariance must be symmetric");
  }
  if (a < 0.0 || d < 0.0) {
    throw std::invalid_argument("gen_2d: covariance must be PSD");
  }
  const double l11 = std::sqrt(a);
  double l21 = 0.0;
  if (l11 > 0.0) {
    l21 = b / l11;
  } else if (b != 0.0) {
    throw std::invalid_argument("gen_2d: covariance must be PSD");
  }
  const double rem = d - l21 * l21;
  if (rem < -1e-12) {
    throw std::invalid_argument("gen_2d: covariance must be PSD");
  }
  return {l11, l21, std::sqrt(std::max(rem, 0.0))};
}

}  // namespace

void SyntheticSpec2D::validate() const {
  if (clusters.empty()) {
    throw std::invalid_argument("SyntheticSpec2D: no clusters");
  }
  for (const auto& cl : clusters) {
    if (cl.count < 1) {
      throw std::invalid_argument("SyntheticSpec2D: cluster counts must be >= 1");
    }
    chol2x2(cl.cov);  // throws for non-PSD
  }
}

SyntheticSpec2D SyntheticSpec2D::default_task(std::size_t majority_per_class,
                                              std::size_t minority_per_class,
                                              std::uint64_t seed) {
  SyntheticSpec2D spec;
  spec.seed = seed;
  const double maj_var = 0.4 * 0.4;
  const double min_var = 0.5 * 0.5;
  // x1 is the core feature (weakly separates the classes), x2 the spurious
  // one: strongly aligned with the label on the majority clusters and
  // reversed on the tiny minority clusters sitting on the diagonal. A model
  // that leans on x2 classifies the minorities wrong, and the minority spread
  // is broad enough that a handful of examples does not pin them down.
  // groups: 0 = (y=0, majority), 1 = (y=1, majority),
  //         2 = (y=0, minority), 3 = (y=1, minority)
  spec.clusters.push_back(
      {{-1.0, 2.0}, {maj_var, 0.0, 0.0, maj_var}, majority_per_class, 0, 0, false});
  spec.clusters.push_back(
      {{1.0, -2.0}, {maj_var, 0.0, 0.0, maj_var}, majority_per_class, 1, 1, false});
  spec.clusters.push_back(
      {{-0.9, -2.0}, {min_var, 0.0, 0.0, min_var}, minority_per_class, 0, 2, true});
  spec.clusters.push_back(
      {{0.9, 2.0}, {min_var, 0.0, 0.0, min_var}, minority_per_class, 1, 3, true});
  return spec;
}

Dataset2D gen_2d(const SyntheticSpec2D& spec) {
  spec.validate();
  Dataset2D data;
  for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
    const auto& cl = spec.clusters[c];
    const auto l = chol2x2(cl.cov);
    Rng rng = Rng::stream(spec.seed, 0x2dULL, c);
    for (std::size_t i = 0; i < cl.count; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      data.x.push_back(
          {cl.mean[0] + l[0] * z1, cl.mean[1] + l[1] * z1 + l[2] * z2});
      data.y.push_back(cl.label);
      data.group.push_back(cl.group);
      data.minority.push_back(cl.minority ? 1 : 0);
    }
  }
  return data;
}

Signal signal_from_string(const std::string& name) {
  if (name == "random") return Signal::kRandom;
  if (name == "margin") return Signal::kMargin;
  if (name == "diversity") return Signal::kDiversity;
  if (name == "variance") return Signal::kVariance;
  if (name == "predicted_underrep") return Signal::kPredictedUnderrep;
  throw std::invalid_argument("unknown signal: " + name);
}

std::string to_string(Signal s) {
  switch (s) {
    case Signal::kRandom: return "random";
    case Signal::kMargin: return "margin";
    case Signal::kDiversity: return "diversity";
    case Signal::kVariance: return "variance";
    case Signal::kPredictedUnderrep: return "predicted_underrep";
  }
  return "?";
}

UnderrepSource underrep_source_from_string(const std::string& name) {
  if (name == "identity") return UnderrepSource::kIdentity;
  if (name == "gap") return UnderrepSource::kGap;
  if (name == "error") return UnderrepSource::kError;
  throw std::invalid_argument("unknown underrep source: " + name);
}

std::string to_string(UnderrepSource s) {
  switch (s) {
    case UnderrepSource::kIdentity: return "identity";
    case UnderrepSource::kGap: return "gap";
    case UnderrepSource::kError: return "error";
  }
  return "?";
}

SignalScores signals(const std::vector<std::vector<double>>& p_y,
                     const std::vector<std::vector<double>>& p_b,
                     const std::vector<std::vector<double>>& v) {
  if (p_y.empty()) throw std::invalid_argument("signals: needs K >= 1 members");
  const std::size_t k = p_y.size();
  const std::size_t n = p_y[0].size();
  SignalScores out;
  out.margin.resize(n);
  out.diversity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t m = 0; m < k; ++m) mean += p_y[m][i];
    mean /= static_cast<double>(k);
    out.margin[i] = 2.0 * std::abs(mean - 0.5);
    double var = 0.0;  // population variance over members
    for (std::size_t m = 0; m < k; ++m) {
      var += (p_y[m][i] - mean) * (p_y[m][i] - mean);
    }
    out.diversity[i] = var / static_cast<double>(k);
  }
  if (k < 2) out.diversity.clear();  // Diversity requires K >= 2

  if (!p_b.empty()) {
    out.predicted_underrep.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (std::size_t m = 0; m < p_b.size(); ++m) mean += p_b[m][i];
      out.predicted_underrep[i] = mean / static_cast<double>(p_b.size());
    }
  }
  if (!v.empty()) {
    out.variance.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mean = 0.0;
      for (std::size_t m = 0; m < v.size(); ++m) mean += v[m][i];
      out.variance[i] = mean / static_cast<double>(v.size());
    }
  }
  return out;
}

void ALConfig::validate(std::size_t pool_size) const {
  if (initial_labeled < 1 || rounds < 1 || batch_per_round < 1) {
    throw std::invalid_argument("ALConfig: counts must be >= 1");
  }
  if (initial_labeled + static_cast<std::size_t>(rounds) * batch_per_round >
      pool_size) {
    throw std::invalid_argument(
        "ALConfig: initial_labeled + rounds*batch exceeds the pool size");
  }
  if (ensemble_size < 1) {
    throw std::invalid_argument("ALConfig: ensemble_size must be >= 1");
  }
  if (signal == Signal::kDiversity && ensemble_size < 2) {
    throw std::invalid_argument("ALConfig: diversity needs an ensemble (K >= 2)");
  }
  train.validate();
  model.validate();
}

std::vector<std::size_t> acquire_top(const std::vector<double>& scores,
                                     std::size_t k,
                                     const std::vector<char>& eligible,
                                     bool lowest_first) {
  if (scores.size() != eligible.size()) {
    throw std::invalid_argument("acquire_top: size mismatch");
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (eligible[i]) candidates.push_back(i);
  }
  k = std::min(k, candidates.size());
  // Stable score order with index tie-break: sort on (score, index).
  std::sort(candidates.begin(), candidates.end(),
            [&](std::size_t a, std::size_t b) {
              if (scores[a] != scores[b]) {
                return lowest_first ? scores[a] < scores[b]
                                    : scores[a] > scores[b];
              }
              return a < b;
            });
  candidates.resize(k);
  return candidates;
}

learner::IntrospectiveModel reweighted_train(
    const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
    const std::vector<double>& underrep_scores, double t, double lambda_up,
    const learner::MLPSpec& spec, const learner::TrainConfig& config,
    bool* erm_fallback) {
  if (underrep_scores.size() != xs.size()) {
    throw std::invalid_argument("reweighted_train: score size mismatch");
  }
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::invalid_argument("reweighted_train: t must lie in (0, 1]");
  }
  if (!(lambda_up >= 1.0)) {
    throw std::invalid_argument("reweighted_train: lambda_up must be >= 1");
  }
  std::vector<double> weights(xs.size(), 1.0);
  std::size_t upweighted = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (underrep_scores[i] > t) {
      weights[i] = lambda_up;
      ++upweighted;
    }
  }
  if (erm_fallback != nullptr) *erm_fallback = upweighted == 0;
  learner::TrainHooks hooks;
  hooks.example_weights = &weights;
  return learner::train_erm(xs, ys, spec, config, hooks);
}

Evaluation evaluate_model(const learner::IntrospectiveModel& model,
                          const Dataset2D& test) {
  std::map<int, std::pair<std::size_t, std::size_t>> per_group;  // hits, total
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool correct = (model.prob_y(test.x[i]) > 0.5) == (test.y[i] > 0.5);
    hits += correct;
    auto& bucket = per_group[test.group[i]];
    bucket.first += correct;
    bucket.second += 1;
  }
  Evaluation eval;
  eval.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  eval.worst_group_accuracy = 1.0;
  for (const auto& [group, bucket] : per_group) {
    eval.worst_group_accuracy = std::min(
        eval.worst_group_accuracy,
        static_cast<double>(bucket.first) / static_cast<double>(bucket.second));
  }
  return eval;
}

namespace {

struct EnsembleOutputs {
  std::vector<std::vector<double>> p_y;
  std::vector<std::vector<double>> p_b;
  std::vector<std::vector<double>> v;
};

// Mean ensemble evaluation on the test set.
Evaluation evaluate_ensemble(const std::vector<learner::IntrospectiveModel>& members,
                             const Dataset2D& test, int jobs) {
  std::vector<double> mean_p(test.size(), 0.0);
  parallel_for(test.size(), jobs, [&](std::size_t i) {
    double p = 0.0;
    for (const auto& m : members) p += m.prob_y(test.x[i]);
    mean_p[i] = p / static_cast<double>(members.size());
  });
  std::map<int, std::pair<std::size_t, std::size_t>> per_group;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool correct = (mean_p[i] > 0.5) == (test.y[i] > 0.5);
    hits += correct;
    auto& bucket = per_group[test.group[i]];
    bucket.first += correct;
    bucket.second += 1;
  }
  Evaluation eval;
  eval.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  eval.worst_group_accuracy = 1.0;
  for (const auto& [group, bucket] : per_group) {
    eval.worst_group_accuracy = std::min(
        eval.worst_group_accuracy,
        static_cast<double>(bucket.first) / static_cast<double>(bucket.second));
  }
  return eval;
}

std::vector<double> stage_one_scores(const std::vector<std::vector<double>>& xs,
                                     const std::vector<double>& ys,
                                     const ALConfig& config, int round) {
  const auto folds = selfplay::make_folds(
      xs.size(), config.selfplay_folds, config.selfplay_splits,
      Rng::stream(config.seed, 0x57a9e1ULL, static_cast<std::uint64_t>(round))
          .next_u64());
  learner::MLPSpec spec = config.model;
  spec.init_seed = Rng::stream(config.seed, 0x57a9e2ULL, round).next_u64();
  learner::TrainConfig train = config.train;
  train.shuffle_seed = Rng::stream(config.seed, 0x57a9e3ULL, round).next_u64();
  const auto ensemble =
      selfplay::train_cv_ensemble(xs, ys, folds, spec, train, config.jobs);
  const auto est = selfplay::gap_estimate(ensemble, ys);
  return config.underrep_source == UnderrepSource::kGap ? est.gap
                                                        : est.naive_error;
}

}  // namespace

ALResult run_al_loop(const Dataset2D& pool, const Dataset2D& test,
                     const ALConfig& config) {
  config.validate(pool.size());
  const std::size_t n = pool.size();

  // Seeded initial labeled set.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng init_rng = Rng::stream(config.seed, 0x1417ULL);
  init_rng.shuffle(order);
  std::vector<char> labeled(n, 0);
  for (std::size_t i = 0; i < config.initial_labeled; ++i) labeled[order[i]] = 1;

  std::size_t pool_minority = 0;  // denominator of the tail sampling rate
  for (std::size_t i = 0; i < n; ++i) {
    if (!labeled[i] && pool.minority[i] == 1) ++pool_minority;
  }

  ALResult result;
  std::size_t acquired_minority = 0;

  for (int round = 0; round < config.rounds; ++round) {
    // Current labeled set, in index order.
    std::vector<std::size_t> labeled_idx;
    std::vector<std::vector<double>> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < n; ++i) {
      if (labeled[i]) {
        labeled_idx.push_back(i);
        lx.push_back(pool.x[i]);
        ly.push_back(pool.y[i]);
      }
    }

    // Stage I: underrepresentation targets for the labeled set.
    std::vector<double> b_targets(labeled_idx.size(), 0.0);
    switch (config.underrep_source) {
      case UnderrepSource::kIdentity:
        for (std::size_t j = 0; j < labeled_idx.size(); ++j) {
          b_targets[j] = pool.minority[labeled_idx[j]];
        }
        break;
      case UnderrepSource::kGap:
      case UnderrepSource::kError:
        b_targets = stage_one_scores(lx, ly, config, round);
        break;
    }

    // Stage II: introspective ensemble on the labeled set.
    std::vector<learner::IntrospectiveModel> members(config.ensemble_size);
    parallel_for(static_cast<std::size_t>(config.ensemble_size), config.jobs,
                 [&](std::size_t m) {
                   learner::MLPSpec spec = config.model;
                   spec.init_seed =
                       Rng::stream(config.seed, 0xa11ULL * (round + 1), m)
                           .next_u64();
                   learner::TrainConfig train = config.train;
                   train.shuffle_seed =
                       Rng::stream(config.seed, 0xa12ULL * (round + 1), m)
                           .next_u64();
                   members[m] =
                       learner::train_introspective(lx, ly, b_targets, spec, train);
                 });

    // Score the unlabeled pool.
    std::vector<std::size_t> unlabeled;
    for (std::size_t i = 0; i < n; ++i) {
      if (!labeled[i]) unlabeled.push_back(i);
    }
    std::vector<double> pool_scores(n, 0.0);
    const bool lowest_first = config.signal == Signal::kMargin;
    if (config.signal == Signal::kRandom) {
      for (std::size_t i : unlabeled) {
        pool_scores[i] =
            Rng::stream(config.seed, 0x7a2d0ULL + round, i).uniform();
      }
    } else {
      EnsembleOutputs outputs;
      outputs.p_y.assign(config.ensemble_size, std::vector<double>(unlabeled.size()));
      outputs.p_b.assign(config.ensemble_size, std::vector<double>(unlabeled.size()));
      std::vector<learner::VarianceEstimator> estimators;
      if (config.signal == Signal::kVariance) {
        outputs.v.assign(config.ensemble_size, std::vector<double>(unlabeled.size()));
        for (int m = 0; m < config.ensemble_size; ++m) {
          estimators.push_back(learner::fit_variance(
              members[m], lx, config.kernel_bandwidth, config.kernel_jitter));
        }
      }
      parallel_for(unlabeled.size(), config.jobs, [&](std::size_t j) {
        const auto& x = pool.x[unlabeled[j]];
        for (int m = 0; m < config.ensemble_size; ++m) {
          const auto f = members[m].forward(x);
          outputs.p_y[m][j] = 1.0 / (1.0 + std::exp(-f.logit_y));
          outputs.p_b[m][j] = 1.0 / (1.0 + std::exp(-f.logit_b));
          if (config.signal == Signal::kVariance) {
            outputs.v[m][j] = estimators[m].variance_at_embedding(f.embedding);
          }
        }
      });
      const SignalScores scores = signals(outputs.p_y, outputs.p_b, outputs.v);
      const std::vector<double>* chosen = nullptr;
      switch (config.signal) {
        case Signal::kMargin: chosen = &scores.margin; break;
        case Signal::kDiversity: chosen = &scores.diversity; break;
        case Signal::kVariance: chosen = &scores.variance; break;
        case Signal::kPredictedUnderrep: chosen = &scores.predicted_underrep; break;
        case Signal::kRandom: break;
      }
      for (std::size_t j = 0; j < unlabeled.size(); ++j) {
        pool_scores[unlabeled[j]] = (*chosen)[j];
      }
    }

    // Acquire.
    std::vector<char> eligible(n, 0);
    for (std::size_t i : unlabeled) eligible[i] = 1;
    const auto batch =
        acquire_top(pool_scores, config.batch_per_round, eligible, lowest_first);
    for (std::size_t i : batch) {
      labeled[i] = 1;
      result.sampled_order.push_back(i);
      acquired_minority += pool.minority[i] == 1;
    }

    RoundMetrics metrics;
    metrics.round = round + 1;
    metrics.labeled_size = labeled_idx.size() + batch.size();
    metrics.tail_rate =
        pool_minority == 0
            ? 0.0
            : static_cast<double>(acquired_minority) / pool_minority;
    const Evaluation eval = evaluate_ensemble(members, test, config.jobs);
    metrics.accuracy = eval.accuracy;
    metrics.worst_group_accuracy = eval.worst_group_accuracy;
    metrics.combined = eval.combined();
    result.rounds.push_back(metrics);

    if (batch.size() < config.batch_per_round) break;  // pool exhausted
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (labeled[i]) result.labeled_indices.push_back(i);
  }

  // Final underrepresentation scores for the sampled dataset.
  switch (config.underrep_source) {
    case UnderrepSource::kIdentity:
      for (std::size_t i : result.labeled_indices) {
        result.final_scores.push_back(pool.minority[i]);
      }
      break;
    case UnderrepSource::kGap:
    case UnderrepSource::kError: {
      std::vector<std::vector<double>> lx;
      std::vector<double> ly;
      for (std::size_t i : result.labeled_indices) {
        lx.push_back(pool.x[i]);
        ly.push_back(pool.y[i]);
      }
      result.final_scores = stage_one_scores(lx, ly, config, config.rounds);
      break;
    }
  }
  return result;
}

double FrontierTrace::best_combined() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& cell : cells) {
    if (cell.ok) best = std::max(best, cell.combined);
  }
  return best;
}

FrontierTrace trace_frontier(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys,
                             const std::vector<double>& underrep_scores,
                             const std::vector<double>& t_grid,
                             const std::vector<double>& lambda_grid,
                             const learner::MLPSpec& spec,
                             const learner::TrainConfig& config,
                             const Dataset2D& test, int jobs) {
  if (t_grid.empty() || lambda_grid.empty()) {
    throw std::invalid_argument("trace_frontier: empty grid");
  }
  FrontierTrace trace;
  trace.cells.resize(t_grid.size() * lambda_grid.size());
  parallel_for(trace.cells.size(), jobs, [&](std::size_t cell_idx) {
    FrontierCell& cell = trace.cells[cell_idx];
    cell.t = t_grid[cell_idx / lambda_grid.size()];
    cell.lambda_up = lambda_grid[cell_idx % lambda_grid.size()];
    try {
      const auto model = reweighted_train(xs, ys, underrep_scores, cell.t,
                                          cell.lambda_up, spec, config);
      const Evaluation eval = evaluate_model(model, test);
      cell.accuracy = eval.accuracy;
      cell.worst_group_accuracy = eval.worst_group_accuracy;
      cell.combined = eval.combined();
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  // Pareto flags: a successful cell is efficient when no other successful
  // cell weakly dominates it with at least one strict improvement.
  for (auto& cell : trace.cells) {
    if (!cell.ok) continue;
    cell.pareto = true;
    for (const auto& other : trace.cells) {
      if (!other.ok || &other == &cell) continue;
      const bool weakly =
          other.accuracy >= cell.accuracy &&
          other.worst_group_accuracy >= cell.worst_group_accuracy;
      const bool strictly =
          other.accuracy > cell.accuracy ||
          other.worst_group_accuracy > cell.worst_group_accuracy;
      if (weakly && strictly) {
        cell.pareto = false;
        break;
      }
    }
  }
  return trace;
}

}  // namespace groupkit::alsim
