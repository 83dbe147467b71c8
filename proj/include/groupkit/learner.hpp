#pragma once

// Small feed-forward models trained from scratch: a shared embedding MLP with
// a label head and an underrepresentation ("bias") head, plain SGD (optional
// momentum), plus an exact RBF-kernel posterior variance estimator over the
// learned embeddings. Gradients are hand-derived and checked against finite
// differences in the tests, which is why the optimizer stays plain.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace groupkit::learner {

enum class Activation { kRelu, kTanh };
Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct MLPSpec {
  int input_dim = 2;
  std::vector<int> hidden_dims = {16, 16};
  int embed_dim = 8;
  Activation activation = Activation::kTanh;
  std::uint64_t init_seed = 0;
  // Skip connections h + act(Wh + b) on hidden layers whose input and output
  // widths match; layers with differing widths stay plain.
  bool residual = false;

  void validate() const;
  // input, hidden..., embed
  std::vector<int> layer_dims() const;
};

struct ForwardResult {
  double logit_y = 0.0;
  double logit_b = 0.0;
  std::vector<double> embedding;
};

// Shared embedding h plus the two linear heads (beta_y, b_y), (beta_b, b_b).
// Hidden layers apply the activation; the embedding output stays linear.
struct IntrospectiveModel {
  MLPSpec spec;
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;
  std::vector<double> beta_y;
  double b_y = 0.0;
  std::vector<double> beta_b;
  double b_b = 0.0;

  static IntrospectiveModel init(const MLPSpec& spec);

  std::vector<double> embedding(const std::vector<double>& x) const;
  ForwardResult forward(const std::vector<double>& x) const;
  double prob_y(const std::vector<double>& x) const;
  double prob_b(const std::vector<double>& x) const;
  std::size_t parameter_count() const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t shuffle_seed = 0;
  double l2 = 0.0;        // applied to weight matrices and heads, not biases
  double momentum = 0.0;  // 0.9 enables the optional heavy-ball term

  void validate() const;
};

// Flat parameter view used by the finite-difference oracle and save/load.
std::vector<double> flatten_parameters(const IntrospectiveModel& model);
void unflatten_parameters(IntrospectiveModel& model,
                          const std::vector<double>& flat);

// Mean over the batch of [BCE(y, logit_y) (+ BCE(b, logit_b))] with optional
// per-example weights, plus 0.5*l2*||W||^2. `bs` may be null for ERM.
double batch_loss(const IntrospectiveModel& model,
                  const std::vector<std::vector<double>>& xs,
                  const std::vector<double>& ys, const std::vector<double>* bs,
                  const std::vector<double>* example_weights, double l2);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // flat, same layout as flatten_parameters
};
LossGrad batch_loss_grad(const IntrospectiveModel& model,
                         const std::vector<std::vector<double>>& xs,
                         const std::vector<double>& ys,
                         const std::vector<double>* bs,
                         const std::vector<double>* example_weights, double l2);

struct TrainHooks {
  // Optional per-example weights, aligned with the full dataset.
  const std::vector<double>* example_weights = nullptr;
  // Called after each epoch with the current model state.
  std::function<void(int epoch, const IntrospectiveModel&)> on_epoch;
};

// Two-head objective; b targets may be soft values in [0, 1].
IntrospectiveModel train_introspective(const std::vector<std::vector<double>>& xs,
                                       const std::vector<double>& ys,
                                       const std::vector<double>& bs,
                                       const MLPSpec& spec,
                                       const TrainConfig& config,
                                       const TrainHooks& hooks = {});

// Label head only; the bias head keeps its initialization. Identical code
// path with the b term removed, so it reproduces introspective trajectories
// bit-for-bit when that term is absent.
IntrospectiveModel train_erm(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys, const MLPSpec& spec,
                             const TrainConfig& config,
                             const TrainHooks& hooks = {});

struct BiasAwarenessGap {
  double embed_dist = 0.0;   // ||h(x1) - h(x2)||_2
  double lower_bound = 0.0;  // |f_b(x1) - f_b(x2)| / ||beta_b||_2
};
BiasAwarenessGap bias_awareness_gap(const IntrospectiveModel& model,
                                    const std::vector<double>& x1,
                                    const std::vector<double>& x2);

// Exact kernel posterior variance on embeddings:
//   v(x) = k(x,x) - k_x^T (K + jitter I)^-1 k_x,
// k(a,b) = exp(-||a-b||^2 / (2 bandwidth^2)), reference points subsampled to
// at most 512 by a deterministic stride.
struct VarianceEstimator {
  double bandwidth = 1.0;
  double jitter = 1e-6;
  std::vector<std::vector<double>> ref_embeddings;
  std::vector<double> chol;  // lower Cholesky factor of K + jitter I

  double variance_at_embedding(const std::vector<double>& h) const;
  double variance(const IntrospectiveModel& model,
                  const std::vector<double>& x) const;
};

VarianceEstimator fit_variance(const IntrospectiveModel& model,
                               const std::vector<std::vector<double>>& train_x,
                               double bandwidth, double jitter);

// Model round-trip as decimal-text JSON (layer shapes + flat parameters).
void save_model_json(const IntrospectiveModel& model, const std::string& path);
IntrospectiveModel load_model_json(const std::string& path);

}  // namespace groupkit::learner
