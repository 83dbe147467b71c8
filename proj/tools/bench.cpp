// Serial-vs-OpenMP benchmark for the data-parallel kernels: ridge Monte
// Carlo, detection sampling, the allocation oracle's restarts, CV-ensemble
// training, and the frontier grid sweep. Results are identical across the
// two paths (per-work-item RNG streams); this target measures the speedup.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "groupkit/alloc.hpp"
#include "groupkit/alsim.hpp"
#include "groupkit/detect.hpp"
#include "groupkit/numeric.hpp"
#include "groupkit/ridge.hpp"
#include "groupkit/selfplay.hpp"

using namespace groupkit;

namespace {

double seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void report(const char* name, double serial, double parallel, int jobs) {
  std::printf("%-24s serial %8.3fs   %d jobs %8.3fs   speedup %.2fx\n", name,
              serial, jobs, parallel, serial / parallel);
}

template <class Fn>
double timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return seconds(start);
}

}  // namespace

int main(int argc, char** argv) {
  const int jobs = argc > 1 ? std::atoi(argv[1]) : default_jobs();
  std::printf("groupkit kernel benchmark (parallel path: %d jobs)\n\n", jobs);

  {
    ridge::RidgeOrthogonalProblem problem;
    problem.theta = {1.0, -0.7, 0.3};
    problem.sigma = {0.8, 1.1, 0.6};
    problem.group_sizes = {200, 50, 400};
    problem.ridge = 5.0;
    const double serial =
        timed([&] { ridge::monte_carlo(problem, 1, 200000, 1, 1); });
    const double parallel =
        timed([&] { ridge::monte_carlo(problem, 1, 200000, 1, jobs); });
    report("ridge monte carlo", serial, parallel, jobs);
  }

  {
    detect::GroupLossModel model;
    model.dist0 = detect::LossDistribution::gaussian(0.0, 0.15);
    model.dist1 = detect::LossDistribution::gaussian(1.0, 0.15);
    model.gamma0 = 0.85;
    const double serial =
        timed([&] { detect::empirical_precision(model, 0.9, 2000000, 2, 1); });
    const double parallel =
        timed([&] { detect::empirical_precision(model, 0.9, 2000000, 2, jobs); });
    report("detect sampling", serial, parallel, jobs);
  }

  {
    std::vector<scaling::GroupScalingLaw> laws(4);
    laws[0].c = 0.5;
    laws[1].c = 1.5;
    laws[2].c = 2.5;
    laws[3].c = 0.9;
    for (auto& law : laws) law.p = 0.8;
    const scaling::GroupDistribution gamma(
        std::vector<double>{0.4, 0.3, 0.2, 0.1});
    alloc::OracleOptions serial_opts;
    serial_opts.restarts = 200;
    serial_opts.jobs = 1;
    alloc::OracleOptions parallel_opts = serial_opts;
    parallel_opts.jobs = jobs;
    const double serial = timed([&] {
      alloc::oracle_minimize_frontier(laws, gamma, 500, 0.5, 1e-6, serial_opts);
    });
    const double parallel = timed([&] {
      alloc::oracle_minimize_frontier(laws, gamma, 500, 0.5, 1e-6, parallel_opts);
    });
    report("allocation oracle", serial, parallel, jobs);
  }

  {
    const auto data = alsim::gen_2d(alsim::SyntheticSpec2D::default_task(600, 25, 3));
    const auto folds = selfplay::make_folds(data.size(), 10, 1, 4);
    learner::MLPSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {16, 16};
    spec.embed_dim = 8;
    spec.init_seed = 5;
    learner::TrainConfig config;
    config.learning_rate = 0.3;
    config.epochs = 30;
    config.batch_size = 32;
    config.shuffle_seed = 6;
    const double serial = timed(
        [&] { selfplay::train_cv_ensemble(data.x, data.y, folds, spec, config, 1); });
    const double parallel = timed([&] {
      selfplay::train_cv_ensemble(data.x, data.y, folds, spec, config, jobs);
    });
    report("cv ensemble", serial, parallel, jobs);
  }

  {
    const auto data = alsim::gen_2d(alsim::SyntheticSpec2D::default_task(400, 20, 7));
    const auto test = alsim::gen_2d(alsim::SyntheticSpec2D::default_task(400, 50, 8));
    std::vector<double> scores(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) scores[i] = data.minority[i];
    learner::MLPSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {16};
    spec.embed_dim = 8;
    spec.init_seed = 9;
    learner::TrainConfig config;
    config.learning_rate = 0.3;
    config.epochs = 25;
    config.batch_size = 32;
    config.shuffle_seed = 10;
    const std::vector<double> t_grid{0.05, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> lambda_grid{1.0, 2.7, 7.4, 20.1};
    const double serial = timed([&] {
      alsim::trace_frontier(data.x, data.y, scores, t_grid, lambda_grid, spec,
                            config, test, 1);
    });
    const double parallel = timed([&] {
      alsim::trace_frontier(data.x, data.y, scores, t_grid, lambda_grid, spec,
                            config, test, jobs);
    });
    report("frontier grid", serial, parallel, jobs);
  }

  return 0;
}
