#include "groupkit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "groupkit/alloc.hpp"
#include "groupkit/alsim.hpp"
#include "groupkit/detect.hpp"
#include "groupkit/io.hpp"
#include "groupkit/learner.hpp"
#include "groupkit/numeric.hpp"
#include "groupkit/ridge.hpp"
#include "groupkit/scaling.hpp"
#include "groupkit/selfplay.hpp"

namespace groupkit::cli {

namespace {

constexpr const char* kVersion = "groupkit 0.1.0";

nlohmann::json load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return j;
}

// Seeds not pinned in the config derive from the --seed flag through fixed
// stream tags, so one flag reproduces the whole run.
std::uint64_t derived_seed(std::uint64_t base, std::uint64_t tag) {
  return Rng::stream(base, tag).next_u64();
}

learner::MLPSpec parse_model(const nlohmann::json& j, std::uint64_t base_seed) {
  learner::MLPSpec spec;
  spec.input_dim = 2;
  spec.hidden_dims = {16, 16};
  spec.embed_dim = 8;
  spec.init_seed = derived_seed(base_seed, 0x90de1ULL);
  if (j.contains("model")) {
    const auto& m = j["model"];
    spec.input_dim = m.value("input_dim", spec.input_dim);
    if (m.contains("hidden_dims")) {
      spec.hidden_dims = m["hidden_dims"].get<std::vector<int>>();
    }
    spec.embed_dim = m.value("embed_dim", spec.embed_dim);
    if (m.contains("activation")) {
      spec.activation =
          learner::activation_from_string(m["activation"].get<std::string>());
    }
    spec.residual = m.value("residual", false);
    if (m.contains("init_seed")) {
      spec.init_seed = m["init_seed"].get<std::uint64_t>();
    }
  }
  spec.validate();
  return spec;
}

learner::TrainConfig parse_train(const nlohmann::json& j, std::uint64_t base_seed) {
  learner::TrainConfig config;
  config.learning_rate = 0.3;
  config.epochs = 30;
  config.batch_size = 32;
  config.shuffle_seed = derived_seed(base_seed, 0x7ea12ULL);
  if (j.contains("train")) {
    const auto& t = j["train"];
    config.learning_rate = t.value("learning_rate", config.learning_rate);
    config.epochs = t.value("epochs", config.epochs);
    config.batch_size = t.value("batch_size", config.batch_size);
    config.l2 = t.value("l2", 0.0);
    config.momentum = t.value("momentum", 0.0);
    if (t.contains("shuffle_seed")) {
      config.shuffle_seed = t["shuffle_seed"].get<std::uint64_t>();
    }
  }
  config.validate();
  return config;
}

alsim::SyntheticSpec2D parse_task(const nlohmann::json& j, const char* key,
                                  std::uint64_t default_seed) {
  if (!j.contains(key)) {
    return alsim::SyntheticSpec2D::default_task(2450, 25, default_seed);
  }
  const auto& t = j[key];
  if (t.contains("clusters")) {
    alsim::SyntheticSpec2D spec;
    spec.seed = t.value("seed", default_seed);
    for (const auto& cj : t["clusters"]) {
      alsim::Cluster cl;
      const auto mean = cj.at("mean").get<std::vector<double>>();
      if (mean.size() != 2) {
        throw std::invalid_argument("task cluster mean must have 2 entries");
      }
      cl.mean = {mean[0], mean[1]};
      const auto cov = cj.at("cov").get<std::vector<double>>();
      if (cov.size() != 4) {
        throw std::invalid_argument(
            "task cluster cov must be [a11, a12, a21, a22]");
      }
      cl.cov = {cov[0], cov[1], cov[2], cov[3]};
      cl.count = cj.at("count").get<std::size_t>();
      cl.label = cj.at("label").get<int>();
      cl.group = cj.at("group").get<int>();
      cl.minority = cj.value("minority", false);
      spec.clusters.push_back(cl);
    }
    spec.validate();
    return spec;
  }
  return alsim::SyntheticSpec2D::default_task(
      t.value("majority_per_class", std::size_t{2450}),
      t.value("minority_per_class", std::size_t{25}),
      t.value("seed", default_seed));
}

detect::LossDistribution parse_distribution(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") {
    return detect::LossDistribution::gaussian(j.at("mean").get<double>(),
                                              j.at("sd").get<double>());
  }
  if (type == "log_normal") {
    return detect::LossDistribution::log_normal(j.at("mu_log").get<double>(),
                                                j.at("sigma_log").get<double>());
  }
  throw std::invalid_argument("unknown distribution type: " + type);
}

double simplex_residual(const std::vector<double>& v) {
  return std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0);
}

io::JsonValue warnings_json(const std::vector<scaling::GroupScalingLaw>& laws,
                            const scaling::Allocation& alpha, double n) {
  io::JsonValue warnings = io::JsonValue::array();
  for (std::size_t g = 0; g < laws.size(); ++g) {
    if (alpha[g] * n < laws[g].min_group_size) {
      warnings.push(io::JsonValue::string(
          "group " + std::to_string(g) + ": allocated size " +
          io::format_double(alpha[g] * n) + " is below min_group_size " +
          io::format_double(laws[g].min_group_size)));
    }
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// allocate / worstcase / frontier
// ---------------------------------------------------------------------------

struct AllocateArgs {
  std::string config_path;
  std::string out_path;
  std::string objective = "weighted";
  double omega = 0.5;
  double n = 1000.0;
};

int run_allocate(const AllocateArgs& args) {
  const auto set = scaling::load_law_set(args.config_path);
  const auto config = load_config(args.config_path);
  io::JsonValue out = io::JsonValue::object();
  out.set("objective", io::JsonValue::string(args.objective));
  out.set("n", io::JsonValue::number(args.n));

  if (args.objective == "weighted") {
    std::vector<double> w = set.gamma.gamma;
    if (config.contains("weights")) {
      w = config["weights"].get<std::vector<double>>();
    }
    const alloc::WeightedRiskWeights weights(w);
    bool shared = true;
    for (const auto& law : set.laws) shared &= law.p == set.laws[0].p;
    const scaling::Allocation alpha =
        shared ? alloc::weighted_allocation_shared_p(set.laws, weights)
               : alloc::weighted_allocation_general_p(set.laws, weights, args.n);
    double risk = 0.0;
    for (std::size_t g = 0; g < set.laws.size(); ++g) {
      risk += w[g] * scaling::group_risk(set.laws[g], alpha[g] * args.n, args.n);
    }
    out.set("alpha", io::JsonValue::number_array(alpha.alpha));
    out.set("risk", io::JsonValue::number(risk));
    io::JsonValue kkt = io::JsonValue::object();
    kkt.set("alpha_simplex", io::JsonValue::number(simplex_residual(alpha.alpha)));
    // Stationarity: w_g c_g p_g (alpha_g n)^-(p_g+1) * n equal across groups
    // holding w_g c_g > 0.
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t g = 0; g < set.laws.size(); ++g) {
      const double wc = w[g] * set.laws[g].c;
      if (wc <= 0.0) continue;
      const double stat = wc * set.laws[g].p *
                          std::pow(alpha[g] * args.n, -set.laws[g].p - 1.0) *
                          args.n;
      lo = std::min(lo, stat);
      hi = std::max(hi, stat);
    }
    kkt.set("stationarity_spread", io::JsonValue::number((hi - lo) / hi));
    out.set("kkt_residuals", kkt);
    out.set("warnings", warnings_json(set.laws, alpha, args.n));
  } else if (args.objective == "worstcase") {
    const auto sol = alloc::worstcase_allocation_shared_p(set.laws, args.n);
    out.set("alpha", io::JsonValue::number_array(sol.alpha.alpha));
    out.set("lambda", io::JsonValue::number(sol.lambda));
    out.set("v", io::JsonValue::number_array(sol.v));
    out.set("l", io::JsonValue::number_array(sol.l));
    out.set("risk", io::JsonValue::number(
                        scaling::worst_case_risk(set.laws, sol.alpha, args.n)));
    io::JsonValue kkt = io::JsonValue::object();
    kkt.set("implicit_equation", io::JsonValue::number(sol.residual));
    kkt.set("alpha_simplex", io::JsonValue::number(simplex_residual(sol.alpha.alpha)));
    kkt.set("v_simplex", io::JsonValue::number(simplex_residual(sol.v)));
    out.set("kkt_residuals", kkt);
    out.set("warnings", warnings_json(set.laws, sol.alpha, args.n));
  } else if (args.objective == "frontier") {
    const auto sol =
        alloc::frontier_allocation(set.laws, set.gamma, args.n, args.omega);
    out.set("omega", io::JsonValue::number(args.omega));
    out.set("alpha", io::JsonValue::number_array(sol.alpha.alpha));
    out.set("theta", io::JsonValue::number_array(sol.theta));
    out.set("underrep_set", io::JsonValue::index_array(sol.underrep_set));
    out.set("sort_key", io::JsonValue::number_array(sol.sort_key));
    out.set("risk", io::JsonValue::number(sol.risk));
    io::JsonValue kkt = io::JsonValue::object();
    kkt.set("alpha_simplex", io::JsonValue::number(simplex_residual(sol.alpha.alpha)));
    double theta_gamma = 0.0;
    double theta_min = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < sol.theta.size(); ++g) {
      theta_gamma += sol.theta[g] * set.gamma[g];
      theta_min = std::min(theta_min, sol.theta[g] - args.omega);
    }
    kkt.set("theta_gamma", io::JsonValue::number(std::abs(theta_gamma - 1.0)));
    kkt.set("theta_minus_omega_min", io::JsonValue::number(theta_min));
    out.set("kkt_residuals", kkt);
    out.set("warnings", warnings_json(set.laws, sol.alpha, args.n));
  } else {
    throw std::invalid_argument("unknown objective: " + args.objective);
  }

  io::write_text_file(args.out_path, out.dump());
  std::printf("%s: wrote %s (%zu groups)\n", args.objective.c_str(),
              args.out_path.c_str(), set.laws.size());
  return 0;
}

// ---------------------------------------------------------------------------
// ridge-decompose
// ---------------------------------------------------------------------------

int run_ridge(const std::string& config_path, const std::string& out_path,
              int trials, std::uint64_t seed, int jobs) {
  const auto config = load_config(config_path);
  ridge::RidgeOrthogonalProblem problem;
  problem.theta = config.at("theta").get<std::vector<double>>();
  problem.sigma = config.at("sigma").get<std::vector<double>>();
  problem.group_sizes = config.at("group_sizes").get<std::vector<int>>();
  problem.ridge = config.at("ridge").get<double>();
  problem.validate();

  io::CsvWriter csv({"group", "noise", "bias", "variance", "total", "mc_noise",
                     "mc_bias", "mc_variance", "se_noise", "se_bias",
                     "se_variance"});
  for (std::size_t g = 0; g < problem.groups(); ++g) {
    const auto exact = ridge::closed_form(problem, g);
    const auto mc = ridge::monte_carlo(problem, g, trials, seed, jobs);
    csv.row({io::CsvWriter::cell(g), io::CsvWriter::cell(exact.noise),
             io::CsvWriter::cell(exact.bias), io::CsvWriter::cell(exact.variance),
             io::CsvWriter::cell(exact.total()),
             io::CsvWriter::cell(mc.estimate.noise),
             io::CsvWriter::cell(mc.estimate.bias),
             io::CsvWriter::cell(mc.estimate.variance),
             io::CsvWriter::cell(mc.se.noise), io::CsvWriter::cell(mc.se.bias),
             io::CsvWriter::cell(mc.se.variance)});
  }
  io::write_text_file(out_path, csv.str());
  std::printf("ridge-decompose: wrote %s (%zu groups, %d trials)\n",
              out_path.c_str(), problem.groups(), trials);
  return 0;
}

// ---------------------------------------------------------------------------
// detect-bound
// ---------------------------------------------------------------------------

int run_detect(const std::string& config_path, const std::string& out_path,
               std::size_t samples, std::uint64_t seed, int jobs) {
  const auto config = load_config(config_path);
  detect::GroupLossModel model;
  model.dist0 = parse_distribution(config.at("dist0"));
  model.dist1 = parse_distribution(config.at("dist1"));
  model.gamma0 = config.at("gamma0").get<double>();
  const double q = config.at("q").get<double>();

  const auto report = detect::chained_bound(model, q);
  const auto empirical = detect::empirical_precision(model, q, samples, seed, jobs);
  const auto moments = detect::moments_F0l1(model, samples, seed + 1, jobs);

  io::JsonValue out = io::JsonValue::object();
  out.set("q", io::JsonValue::number(report.q));
  out.set("d", io::JsonValue::number(report.d));
  out.set("sigma0", io::JsonValue::number(report.sigma0));
  out.set("sigma1", io::JsonValue::number(report.sigma1));
  out.set("F0_mu0", io::JsonValue::number(report.f0_mu0));
  out.set("z_lower", io::JsonValue::number(report.z_lower));
  out.set("precision_lower", io::JsonValue::number(report.precision_lower));
  io::JsonValue range = io::JsonValue::array();
  range.push(io::JsonValue::number(0.0));
  range.push(io::JsonValue::number(report.q_max));
  out.set("q_valid_range", range);
  out.set("empirical_precision", io::JsonValue::number(empirical.value));
  out.set("empirical_se", io::JsonValue::number(empirical.se));
  out.set("flagged", io::JsonValue::integer(static_cast<long long>(empirical.flagged)));
  io::JsonValue mom = io::JsonValue::object();
  mom.set("mean", io::JsonValue::number(moments.mean));
  mom.set("variance", io::JsonValue::number(moments.variance));
  if (moments.closed_form_mean.has_value()) {
    mom.set("closed_form_mean", io::JsonValue::number(*moments.closed_form_mean));
  }
  out.set("moments_F0l1", mom);
  io::write_text_file(out_path, out.dump());
  std::printf("detect-bound: wrote %s (bound=%.6f, empirical=%.6f)\n",
              out_path.c_str(), report.precision_lower, empirical.value);
  return 0;
}

// ---------------------------------------------------------------------------
// selfplay-estimate
// ---------------------------------------------------------------------------

int run_selfplay(const std::string& config_path, const std::string& out_path,
                 std::uint64_t seed, int jobs) {
  const auto config = load_config(config_path);
  const auto task = parse_task(config, "task", derived_seed(seed, 0x7a5cULL));
  auto data = alsim::gen_2d(task);

  const double flip_rate = config.value("label_flip_rate", 0.0);
  if (flip_rate > 0.0) {
    Rng rng = Rng::stream(seed, 0xf11b5ULL);
    for (double& y : data.y) {
      if (rng.uniform() < flip_rate) y = 1.0 - y;
    }
  }

  const int folds_k = config.value("folds", 10);
  const int splits = config.value("splits_per_member", 1);
  const double q = config.value("q", 0.9);
  auto model = parse_model(config, seed);
  const auto train = parse_train(config, seed);

  const auto folds =
      selfplay::make_folds(data.size(), folds_k, splits, derived_seed(seed, 0xf01dULL));
  const auto ensemble =
      selfplay::train_cv_ensemble(data.x, data.y, folds, model, train, jobs);
  const auto est = selfplay::gap_estimate(ensemble, data.y);
  const auto ranks = midrank_cdf(est.gap);
  const auto labels = selfplay::rank_threshold_labels(est.gap, q);

  io::CsvWriter csv(
      {"example_id", "group", "y", "gap", "naive_error", "rank", "label_at_q"});
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv.row({io::CsvWriter::cell(i), io::CsvWriter::cell(data.group[i]),
             io::CsvWriter::cell(data.y[i]), io::CsvWriter::cell(est.gap[i]),
             io::CsvWriter::cell(est.naive_error[i]),
             io::CsvWriter::cell(ranks[i]), io::CsvWriter::cell(labels[i])});
  }
  io::write_text_file(out_path, csv.str());
  std::printf(
      "selfplay-estimate: wrote %s (n=%zu, stop_epoch=%d%s)\n", out_path.c_str(),
      data.size(), est.stop_epoch, est.stop_stabilized ? "" : ", unstabilized");
  return 0;
}

// ---------------------------------------------------------------------------
// simulate-al
// ---------------------------------------------------------------------------

alsim::ALConfig parse_al_config(const nlohmann::json& config, std::uint64_t seed,
                                int jobs) {
  alsim::ALConfig al;
  al.model = parse_model(config, seed);
  al.train = parse_train(config, seed);
  al.seed = derived_seed(seed, 0xa1ULL);
  al.jobs = jobs;
  if (config.contains("al")) {
    const auto& a = config["al"];
    al.initial_labeled = a.value("initial_labeled", al.initial_labeled);
    al.rounds = a.value("rounds", al.rounds);
    al.batch_per_round = a.value("batch_per_round", al.batch_per_round);
    if (a.contains("signal")) {
      al.signal = alsim::signal_from_string(a["signal"].get<std::string>());
    }
    if (a.contains("underrep_source")) {
      al.underrep_source = alsim::underrep_source_from_string(
          a["underrep_source"].get<std::string>());
    }
    al.ensemble_size = a.value("ensemble_size", al.ensemble_size);
    al.selfplay_folds = a.value("selfplay_folds", al.selfplay_folds);
    al.selfplay_splits = a.value("selfplay_splits", al.selfplay_splits);
    al.kernel_bandwidth = a.value("kernel_bandwidth", al.kernel_bandwidth);
    al.kernel_jitter = a.value("kernel_jitter", al.kernel_jitter);
  }
  return al;
}

int run_simulate_al(const std::string& config_path, const std::string& out_path,
                    std::uint64_t seed, int jobs) {
  const auto config = load_config(config_path);
  const auto pool = alsim::gen_2d(
      parse_task(config, "task", derived_seed(seed, 0x9001ULL)));
  nlohmann::json test_default;
  const auto test_spec =
      config.contains("test_task")
          ? parse_task(config, "test_task", derived_seed(seed, 0x9002ULL))
          : alsim::SyntheticSpec2D::default_task(4900, 100,
                                                 derived_seed(seed, 0x9002ULL));
  const auto test = alsim::gen_2d(test_spec);
  const auto al = parse_al_config(config, seed, jobs);
  const auto result = alsim::run_al_loop(pool, test, al);

  io::CsvWriter csv({"round", "labeled_size", "tail_rate", "acc",
                     "worst_group_acc", "combined"});
  for (const auto& r : result.rounds) {
    csv.row({io::CsvWriter::cell(r.round), io::CsvWriter::cell(r.labeled_size),
             io::CsvWriter::cell(r.tail_rate), io::CsvWriter::cell(r.accuracy),
             io::CsvWriter::cell(r.worst_group_accuracy),
             io::CsvWriter::cell(r.combined)});
  }
  io::write_text_file(out_path, csv.str());
  std::printf("simulate-al: wrote %s (%zu rounds, final tail rate %.4f)\n",
              out_path.c_str(), result.rounds.size(),
              result.rounds.empty() ? 0.0 : result.rounds.back().tail_rate);
  return 0;
}

// ---------------------------------------------------------------------------
// trace-frontier
// ---------------------------------------------------------------------------

int run_trace_frontier(const std::string& config_path, const std::string& out_path,
                       std::uint64_t seed, int jobs) {
  const auto config = load_config(config_path);
  const auto data = alsim::gen_2d(
      parse_task(config, "task", derived_seed(seed, 0x9101ULL)));
  const auto test_spec =
      config.contains("test_task")
          ? parse_task(config, "test_task", derived_seed(seed, 0x9102ULL))
          : alsim::SyntheticSpec2D::default_task(4900, 100,
                                                 derived_seed(seed, 0x9102ULL));
  const auto test = alsim::gen_2d(test_spec);

  // Underrepresentation scores for the reweighting rule.
  std::vector<double> scores(data.size(), 0.0);
  const std::string source = config.value("underrep_source", std::string("identity"));
  if (source == "identity") {
    for (std::size_t i = 0; i < data.size(); ++i) scores[i] = data.minority[i];
  } else if (source == "gap" || source == "error") {
    const auto folds = selfplay::make_folds(
        data.size(), config.value("selfplay_folds", 10),
        config.value("selfplay_splits", 1), derived_seed(seed, 0x9103ULL));
    const auto ensemble = selfplay::train_cv_ensemble(
        data.x, data.y, folds, parse_model(config, seed),
        parse_train(config, seed), jobs);
    const auto est = selfplay::gap_estimate(ensemble, data.y);
    scores = source == "gap" ? est.gap : est.naive_error;
  } else {
    throw std::invalid_argument("unknown underrep_source: " + source);
  }

  std::vector<double> t_grid{0.05, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> lambda_grid;
  if (config.contains("grid")) {
    const auto& g = config["grid"];
    if (g.contains("t")) t_grid = g["t"].get<std::vector<double>>();
    if (g.contains("log_lambda")) {
      for (double ll : g["log_lambda"].get<std::vector<double>>()) {
        lambda_grid.push_back(std::exp(ll));
      }
    }
  }
  if (lambda_grid.empty()) {
    for (double ll : {0.0, 1.0, 2.0, 3.0, 4.0}) lambda_grid.push_back(std::exp(ll));
  }

  const auto trace =
      alsim::trace_frontier(data.x, data.y, scores, t_grid, lambda_grid,
                            parse_model(config, seed + 1),
                            parse_train(config, seed + 1), test, jobs);

  io::CsvWriter csv({"t", "lambda_up", "acc", "wga", "combined", "pareto_flag"});
  for (const auto& cell : trace.cells) {
    csv.row({io::CsvWriter::cell(cell.t), io::CsvWriter::cell(cell.lambda_up),
             io::CsvWriter::cell(cell.accuracy),
             io::CsvWriter::cell(cell.worst_group_accuracy),
             io::CsvWriter::cell(cell.combined),
             io::CsvWriter::cell(cell.pareto ? 1 : 0)});
  }
  io::write_text_file(out_path, csv.str());
  std::printf("trace-frontier: wrote %s (%zu cells, best combined %.4f)\n",
              out_path.c_str(), trace.cells.size(), trace.best_combined());
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"group-aware training-data allocation and underrepresentation "
               "estimation toolkit"};
  app.set_version_flag("--version", kVersion);
  int jobs = 0;
  std::uint64_t seed = 0;
  app.add_option("--jobs", jobs, "worker parallelism cap (default: all cores, "
                                 "or GROUPKIT_JOBS)");
  app.add_option("--seed", seed, "base seed; every stochastic output derives "
                                 "from it");
  app.fallthrough();  // allow --seed/--jobs after the subcommand name
  app.require_subcommand(1);

  AllocateArgs alloc_args;
  auto* allocate = app.add_subcommand("allocate", "optimal group-size allocation");
  allocate->add_option("--config", alloc_args.config_path, "scaling-law set JSON")
      ->required();
  allocate->add_option("--out", alloc_args.out_path, "output JSON path")->required();
  allocate->add_option("--objective", alloc_args.objective,
                       "weighted | worstcase | frontier");
  allocate->add_option("--omega", alloc_args.omega, "frontier accuracy weight");
  allocate->add_option("--n", alloc_args.n, "total sample size");

  AllocateArgs worstcase_args;
  auto* worstcase = app.add_subcommand("worstcase", "worst-case optimal allocation");
  worstcase->add_option("--config", worstcase_args.config_path, "scaling-law set")
      ->required();
  worstcase->add_option("--out", worstcase_args.out_path, "output JSON")->required();
  worstcase->add_option("--n", worstcase_args.n, "total sample size");

  AllocateArgs frontier_args;
  auto* frontier = app.add_subcommand("frontier", "frontier-optimal allocation");
  frontier->add_option("--config", frontier_args.config_path, "scaling-law set")
      ->required();
  frontier->add_option("--out", frontier_args.out_path, "output JSON")->required();
  frontier->add_option("--omega", frontier_args.omega, "accuracy weight in [0,1]");
  frontier->add_option("--n", frontier_args.n, "total sample size");

  std::string ridge_config, ridge_out;
  int ridge_trials = 10000;
  auto* ridge_cmd = app.add_subcommand("ridge-decompose",
                                       "noise-bias-variance decomposition");
  ridge_cmd->add_option("--config", ridge_config, "ridge problem JSON")->required();
  ridge_cmd->add_option("--out", ridge_out, "output CSV")->required();
  ridge_cmd->add_option("--trials", ridge_trials, "Monte-Carlo trials");

  std::string detect_config, detect_out;
  std::size_t detect_samples = 20000;
  auto* detect_cmd = app.add_subcommand("detect-bound",
                                        "tail-group detection bounds");
  detect_cmd->add_option("--config", detect_config, "loss model JSON")->required();
  detect_cmd->add_option("--out", detect_out, "output JSON")->required();
  detect_cmd->add_option("--samples", detect_samples, "Monte-Carlo samples");

  std::string sp_config, sp_out;
  auto* sp_cmd = app.add_subcommand("selfplay-estimate",
                                    "cross-validated generalization-gap labels");
  sp_cmd->add_option("--config", sp_config, "task/ensemble JSON")->required();
  sp_cmd->add_option("--out", sp_out, "output CSV")->required();

  std::string al_config, al_out;
  auto* al_cmd = app.add_subcommand("simulate-al", "active-learning simulation");
  al_cmd->add_option("--config", al_config, "AL config JSON")->required();
  al_cmd->add_option("--out", al_out, "output CSV")->required();

  std::string tf_config, tf_out;
  auto* tf_cmd = app.add_subcommand("trace-frontier",
                                    "accuracy/robustness frontier sweep");
  tf_cmd->add_option("--config", tf_config, "trace config JSON")->required();
  tf_cmd->add_option("--out", tf_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (jobs != 0) set_default_jobs(jobs);

  try {
    if (allocate->parsed()) return run_allocate(alloc_args);
    if (worstcase->parsed()) {
      worstcase_args.objective = "worstcase";
      return run_allocate(worstcase_args);
    }
    if (frontier->parsed()) {
      frontier_args.objective = "frontier";
      return run_allocate(frontier_args);
    }
    if (ridge_cmd->parsed()) {
      return run_ridge(ridge_config, ridge_out, ridge_trials, seed, jobs);
    }
    if (detect_cmd->parsed()) {
      return run_detect(detect_config, detect_out, detect_samples, seed, jobs);
    }
    if (sp_cmd->parsed()) return run_selfplay(sp_config, sp_out, seed, jobs);
    if (al_cmd->parsed()) return run_simulate_al(al_config, al_out, seed, jobs);
    if (tf_cmd->parsed()) return run_trace_frontier(tf_config, tf_out, seed, jobs);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 2;
}

}  // namespace groupkit::cli
