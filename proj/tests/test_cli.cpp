#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "groupkit/cli.hpp"
#include "groupkit/io.hpp"
#include "json.hpp"

using groupkit::cli::dispatch;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"groupkit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string write_config(const std::string& name, const std::string& content) {
  const std::string path = temp_path(name);
  groupkit::io::write_text_file(path, content);
  return path;
}

const char* kLawSet = R"({
  "laws": [
    {"c": 1.0, "p": 1.0, "tau": 0.2, "q": 1.0, "delta": 0.00},
    {"c": 4.0, "p": 1.0, "tau": 0.2, "q": 1.0, "delta": 0.05},
    {"c": 0.5, "p": 1.0, "tau": 0.2, "q": 1.0, "delta": 0.01}
  ],
  "gamma": [0.6, 0.1, 0.3]
})";

// Small synthetic task so CLI tests stay fast.
const char* kSelfplayConfig = R"({
  "task": {"majority_per_class": 40, "minority_per_class": 5, "seed": 4},
  "folds": 5,
  "splits_per_member": 1,
  "label_flip_rate": 0.1,
  "q": 0.9,
  "model": {"hidden_dims": [8], "embed_dim": 4},
  "train": {"epochs": 8, "learning_rate": 0.3, "batch_size": 16}
})";

const char* kAlConfig = R"({
  "task": {"majority_per_class": 60, "minority_per_class": 6, "seed": 5},
  "test_task": {"majority_per_class": 80, "minority_per_class": 20, "seed": 6},
  "al": {
    "initial_labeled": 30, "rounds": 2, "batch_per_round": 10,
    "signal": "margin", "underrep_source": "identity", "ensemble_size": 2
  },
  "model": {"hidden_dims": [8], "embed_dim": 4},
  "train": {"epochs": 8, "learning_rate": 0.3, "batch_size": 16}
})";

const char* kTraceConfig = R"({
  "task": {"majority_per_class": 50, "minority_per_class": 6, "seed": 7},
  "test_task": {"majority_per_class": 80, "minority_per_class": 20, "seed": 8},
  "grid": {"t": [0.5, 1.0], "log_lambda": [0.0, 2.0]},
  "model": {"hidden_dims": [8], "embed_dim": 4},
  "train": {"epochs": 8, "learning_rate": 0.3, "batch_size": 16}
})";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({"no-such-command"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"allocate", "--config", "/nonexistent.json", "--out",
             temp_path("x.json")}) == 2);
  CHECK(run({"frontier", "--config", write_config("laws.json", kLawSet)}) ==
        2);  // missing --out
}

TEST_CASE("--version exits cleanly") { CHECK(run({"--version"}) == 0); }

TEST_CASE("numerical failures exit with code 3") {
  // q far above the admissible range makes the bound inapplicable.
  const std::string config = write_config("detect_bad.json", R"({
    "dist0": {"type": "gaussian", "mean": 0.0, "sd": 0.5},
    "dist1": {"type": "gaussian", "mean": 0.3, "sd": 0.5},
    "gamma0": 0.8,
    "q": 0.9
  })");
  CHECK(run({"detect-bound", "--config", config, "--out",
             temp_path("detect_bad_out.json")}) == 3);
}

TEST_CASE("frontier subcommand emits a parseable solution") {
  const std::string config = write_config("laws.json", kLawSet);
  const std::string out = temp_path("frontier_sol.json");
  CHECK(run({"frontier", "--config", config, "--omega", "0.5", "--n", "500",
             "--out", out}) == 0);
  const auto j = nlohmann::json::parse(groupkit::io::read_text_file(out));
  CHECK(j.at("objective") == "frontier");
  CHECK(j.at("alpha").size() == 3);
  CHECK(j.at("theta").size() == 3);
  CHECK(j.at("risk").get<double>() > 0.0);
  CHECK(j.at("kkt_residuals").at("theta_gamma").get<double>() <= 1e-10);
  // group 1 is rare and hard: must be in the underrepresented set
  bool has_group_1 = false;
  for (const auto& g : j.at("underrep_set")) has_group_1 |= g.get<int>() == 1;
  CHECK(has_group_1);
}

TEST_CASE("allocate objectives and outputs") {
  const std::string config = write_config("laws.json", kLawSet);
  SUBCASE("weighted") {
    const std::string out = temp_path("weighted_sol.json");
    CHECK(run({"allocate", "--config", config, "--objective", "weighted",
               "--n", "500", "--out", out}) == 0);
    const auto j = nlohmann::json::parse(groupkit::io::read_text_file(out));
    CHECK(j.at("alpha").size() == 3);
    CHECK(j.at("kkt_residuals").at("stationarity_spread").get<double>() < 1e-9);
  }
  SUBCASE("worstcase carries the multiplier and adversarial weights") {
    const std::string out = temp_path("worstcase_sol.json");
    CHECK(run({"worstcase", "--config", config, "--n", "500", "--out", out}) == 0);
    const auto j = nlohmann::json::parse(groupkit::io::read_text_file(out));
    CHECK(j.at("lambda").get<double>() > 0.0);
    CHECK(j.at("v").size() == 3);
    CHECK(j.at("kkt_residuals").at("implicit_equation").get<double>() <= 1e-8);
  }
}

TEST_CASE("ridge-decompose CSV round trip") {
  const std::string config = write_config("ridge.json", R"({
    "theta": [1.0, -0.5],
    "sigma": [0.8, 1.2],
    "group_sizes": [12, 30],
    "ridge": 3.0
  })");
  const std::string out = temp_path("ridge_out.csv");
  CHECK(run({"ridge-decompose", "--config", config, "--trials", "2000",
             "--seed", "9", "--out", out}) == 0);
  const std::string text = groupkit::io::read_text_file(out);
  CHECK(text.rfind("group,noise,bias,variance,total,mc_noise,mc_bias,"
                   "mc_variance,se_noise,se_bias,se_variance\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 groups
}

TEST_CASE("detect-bound emits the report and empirical check") {
  const std::string config = write_config("detect.json", R"({
    "dist0": {"type": "gaussian", "mean": 0.0, "sd": 0.15},
    "dist1": {"type": "gaussian", "mean": 1.0, "sd": 0.15},
    "gamma0": 0.85,
    "q": 0.9
  })");
  const std::string out = temp_path("detect_out.json");
  CHECK(run({"detect-bound", "--config", config, "--samples", "20000", "--seed",
             "3", "--out", out}) == 0);
  const auto j = nlohmann::json::parse(groupkit::io::read_text_file(out));
  CHECK(j.at("precision_lower").get<double>() > 0.9);
  CHECK(j.at("empirical_precision").get<double>() >=
        j.at("precision_lower").get<double>());
  CHECK(j.at("moments_F0l1").contains("closed_form_mean"));
}

TEST_CASE("selfplay-estimate CSV") {
  const std::string config = write_config("selfplay.json", kSelfplayConfig);
  const std::string out = temp_path("selfplay_out.csv");
  CHECK(run({"selfplay-estimate", "--config", config, "--seed", "11", "--out",
             out}) == 0);
  const std::string text = groupkit::io::read_text_file(out);
  CHECK(text.rfind("example_id,group,y,gap,naive_error,rank,label_at_q\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 91);  // header + 90 rows
}

TEST_CASE("simulate-al and trace-frontier CSVs") {
  const std::string al_out = temp_path("al_out.csv");
  CHECK(run({"simulate-al", "--config", write_config("al.json", kAlConfig),
             "--seed", "13", "--out", al_out}) == 0);
  const std::string al_text = groupkit::io::read_text_file(al_out);
  CHECK(al_text.rfind("round,labeled_size,tail_rate,acc,worst_group_acc,combined\n",
                      0) == 0);
  CHECK(std::count(al_text.begin(), al_text.end(), '\n') == 3);

  const std::string tf_out = temp_path("tf_out.csv");
  CHECK(run({"trace-frontier", "--config", write_config("tf.json", kTraceConfig),
             "--seed", "17", "--out", tf_out}) == 0);
  const std::string tf_text = groupkit::io::read_text_file(tf_out);
  CHECK(tf_text.rfind("t,lambda_up,acc,wga,combined,pareto_flag\n", 0) == 0);
  CHECK(std::count(tf_text.begin(), tf_text.end(), '\n') == 5);  // 2x2 grid
}

TEST_CASE("reruns with identical config and seed are byte-identical") {
  const std::string laws = write_config("laws.json", kLawSet);
  const std::string ridge = write_config("ridge.json", R"({
    "theta": [1.0], "sigma": [1.0], "group_sizes": [10], "ridge": 2.0
  })");
  const std::string detect = write_config("detect.json", R"({
    "dist0": {"type": "gaussian", "mean": 0.0, "sd": 0.15},
    "dist1": {"type": "gaussian", "mean": 1.0, "sd": 0.15},
    "gamma0": 0.85, "q": 0.9
  })");
  const std::string selfplay = write_config("selfplay.json", kSelfplayConfig);
  const std::string al = write_config("al.json", kAlConfig);
  const std::string tf = write_config("tf.json", kTraceConfig);

  const std::vector<std::vector<std::string>> cases{
      {"allocate", "--config", laws, "--objective", "weighted", "--out", "%"},
      {"worstcase", "--config", laws, "--n", "300", "--out", "%"},
      {"frontier", "--config", laws, "--omega", "0.3", "--out", "%"},
      {"ridge-decompose", "--config", ridge, "--trials", "1500", "--seed", "5",
       "--out", "%"},
      {"detect-bound", "--config", detect, "--samples", "15000", "--seed", "6",
       "--out", "%"},
      {"selfplay-estimate", "--config", selfplay, "--seed", "7", "--out", "%"},
      {"simulate-al", "--config", al, "--seed", "8", "--out", "%"},
      {"trace-frontier", "--config", tf, "--seed", "9", "--out", "%"},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const std::string out_a = temp_path("rerun_a_" + std::to_string(c));
    const std::string out_b = temp_path("rerun_b_" + std::to_string(c));
    auto args_a = cases[c];
    auto args_b = cases[c];
    for (auto& a : args_a) {
      if (a == "%") a = out_a;
    }
    for (auto& b : args_b) {
      if (b == "%") b = out_b;
    }
    REQUIRE(run(args_a) == 0);
    REQUIRE(run(args_b) == 0);
    CHECK(groupkit::io::read_text_file(out_a) ==
          groupkit::io::read_text_file(out_b));
  }
}

TEST_CASE("no unseeded randomness in the sources") {
  // Every RNG must flow through groupkit::Rng with an explicit seed; these
  // tokens would smuggle in nondeterminism.
  namespace fs = std::filesystem;
  const std::vector<std::string> forbidden{"std::random_device", "srand(",
                                           "rand()", "mt19937"};
  for (const char* dir : {"/src", "/include/groupkit", "/tools"}) {
    for (const auto& entry :
         fs::recursive_directory_iterator(std::string(GROUPKIT_SOURCE_DIR) + dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string text = groupkit::io::read_text_file(entry.path().string());
      for (const auto& token : forbidden) {
        INFO(entry.path().string(), " contains ", token);
        CHECK(text.find(token) == std::string::npos);
      }
    }
  }
}
