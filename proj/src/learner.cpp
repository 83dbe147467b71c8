#include "groupkit/learner.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "groupkit/numeric.hpp"
#include "json.hpp"

namespace groupkit::learner {

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

// Numerically stable BCE with logits: max(z,0) - z*t + log(1+exp(-|z|)).
double bce(double target, double logit) {
  return std::max(logit, 0.0) - logit * target +
         std::log1p(std::exp(-std::abs(logit)));
}

double act(double z, Activation a) {
  return a == Activation::kRelu ? std::max(z, 0.0) : std::tanh(z);
}

double act_grad(double z, Activation a) {
  if (a == Activation::kRelu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

// Per-example forward pass keeping pre-activations for backprop.
struct Trace {
  std::vector<std::vector<double>> pre;   // per layer, before activation
  std::vector<std::vector<double>> post;  // per layer, after activation
};

void forward_trace(const IntrospectiveModel& m, const std::vector<double>& x,
                   Trace& trace) {
  const auto dims = m.spec.layer_dims();
  const std::size_t layers = m.weights.size();
  trace.pre.resize(layers);
  trace.post.resize(layers);
  const std::vector<double>* in = &x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int out_dim = dims[l + 1];
    const int in_dim = dims[l];
    trace.pre[l].assign(out_dim, 0.0);
    for (int o = 0; o < out_dim; ++o) {
      double z = m.biases[l][o];
      const double* row = &m.weights[l][static_cast<std::size_t>(o) * in_dim];
      for (int i = 0; i < in_dim; ++i) z += row[i] * (*in)[i];
      trace.pre[l][o] = z;
    }
    const bool last = l + 1 == layers;  // embedding output stays linear
    trace.post[l] = trace.pre[l];
    if (!last) {
      for (double& z : trace.post[l]) z = act(z, m.spec.activation);
      if (m.spec.residual && in_dim == out_dim) {
        for (int o = 0; o < out_dim; ++o) trace.post[l][o] += (*in)[o];
      }
    }
    in = &trace.post[l];
  }
}

struct GradBuffers {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> beta_y;
  double b_y = 0.0;
  std::vector<double> beta_b;
  double b_b = 0.0;

  explicit GradBuffers(const IntrospectiveModel& m) {
    weights.resize(m.weights.size());
    biases.resize(m.biases.size());
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      weights[l].assign(m.weights[l].size(), 0.0);
      biases[l].assign(m.biases[l].size(), 0.0);
    }
    beta_y.assign(m.beta_y.size(), 0.0);
    beta_b.assign(m.beta_b.size(), 0.0);
  }
};

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

void MLPSpec::validate() const {
  if (input_dim < 1 || embed_dim < 1) {
    throw std::invalid_argument("MLPSpec: dims must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("MLPSpec: hidden dims must be >= 1");
  }
}

std::vector<int> MLPSpec::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(embed_dim);
  return dims;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  }
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
  if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
  }
}

IntrospectiveModel IntrospectiveModel::init(const MLPSpec& spec) {
  spec.validate();
  IntrospectiveModel m;
  m.spec = spec;
  Rng rng = Rng::stream(spec.init_seed, 0x1217ULL);
  const auto dims = spec.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in_dim = dims[l];
    const int out_dim = dims[l + 1];
    const double s = std::sqrt(6.0 / (in_dim + out_dim));
    std::vector<double> w(static_cast<std::size_t>(in_dim) * out_dim);
    for (double& x : w) x = rng.uniform(-s, s);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out_dim, 0.0);
  }
  const double s_head = std::sqrt(6.0 / (spec.embed_dim + 1));
  m.beta_y.resize(spec.embed_dim);
  m.beta_b.resize(spec.embed_dim);
  for (double& x : m.beta_y) x = rng.uniform(-s_head, s_head);
  for (double& x : m.beta_b) x = rng.uniform(-s_head, s_head);
  return m;
}

std::vector<double> IntrospectiveModel::embedding(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != spec.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Trace trace;
  forward_trace(*this, x, trace);
  return trace.post.back();
}

ForwardResult IntrospectiveModel::forward(const std::vector<double>& x) const {
  ForwardResult out;
  out.embedding = embedding(x);
  out.logit_y = b_y;
  out.logit_b = b_b;
  for (int i = 0; i < spec.embed_dim; ++i) {
    out.logit_y += beta_y[i] * out.embedding[i];
    out.logit_b += beta_b[i] * out.embedding[i];
  }
  return out;
}

double IntrospectiveModel::prob_y(const std::vector<double>& x) const {
  return sigmoid(forward(x).logit_y);
}

double IntrospectiveModel::prob_b(const std::vector<double>& x) const {
  return sigmoid(forward(x).logit_b);
}

std::size_t IntrospectiveModel::parameter_count() const {
  std::size_t count = beta_y.size() + beta_b.size() + 2;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += weights[l].size() + biases[l].size();
  }
  return count;
}

std::vector<double> flatten_parameters(const IntrospectiveModel& m) {
  std::vector<double> flat;
  flat.reserve(m.parameter_count());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    flat.insert(flat.end(), m.weights[l].begin(), m.weights[l].end());
    flat.insert(flat.end(), m.biases[l].begin(), m.biases[l].end());
  }
  flat.insert(flat.end(), m.beta_y.begin(), m.beta_y.end());
  flat.push_back(m.b_y);
  flat.insert(flat.end(), m.beta_b.begin(), m.beta_b.end());
  flat.push_back(m.b_b);
  return flat;
}

void unflatten_parameters(IntrospectiveModel& m, const std::vector<double>& flat) {
  if (flat.size() != m.parameter_count()) {
    throw std::invalid_argument("unflatten_parameters: size mismatch");
  }
  std::size_t pos = 0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    std::copy(flat.begin() + pos, flat.begin() + pos + m.weights[l].size(),
              m.weights[l].begin());
    pos += m.weights[l].size();
    std::copy(flat.begin() + pos, flat.begin() + pos + m.biases[l].size(),
              m.biases[l].begin());
    pos += m.biases[l].size();
  }
  std::copy(flat.begin() + pos, flat.begin() + pos + m.beta_y.size(),
            m.beta_y.begin());
  pos += m.beta_y.size();
  m.b_y = flat[pos++];
  std::copy(flat.begin() + pos, flat.begin() + pos + m.beta_b.size(),
            m.beta_b.begin());
  pos += m.beta_b.size();
  m.b_b = flat[pos++];
}

namespace {

double l2_penalty(const IntrospectiveModel& m, double l2) {
  if (l2 == 0.0) return 0.0;
  double ss = 0.0;
  for (const auto& w : m.weights) {
    for (double x : w) ss += x * x;
  }
  for (double x : m.beta_y) ss += x * x;
  for (double x : m.beta_b) ss += x * x;
  return 0.5 * l2 * ss;
}

// Shared forward/backward over a batch. Gradient buffers may be null when
// only the loss is needed.
double batch_pass(const IntrospectiveModel& m,
                  const std::vector<std::vector<double>>& xs,
                  const std::vector<double>& ys, const std::vector<double>* bs,
                  const std::vector<double>* example_weights, double l2,
                  const std::vector<std::size_t>* batch_indices,
                  GradBuffers* grads) {
  const auto dims = m.spec.layer_dims();
  const std::size_t layers = m.weights.size();
  const std::size_t batch =
      batch_indices != nullptr ? batch_indices->size() : xs.size();
  if (batch == 0) return 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  double loss = 0.0;
  Trace trace;
  std::vector<double> delta, delta_prev;
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const std::size_t idx = batch_indices != nullptr ? (*batch_indices)[bi] : bi;
    const std::vector<double>& x = xs[idx];
    if (static_cast<int>(x.size()) != m.spec.input_dim) {
      throw std::invalid_argument("train: input dimension mismatch");
    }
    const double weight =
        example_weights != nullptr ? (*example_weights)[idx] : 1.0;
    forward_trace(m, x, trace);
    const std::vector<double>& h = trace.post.back();

    double logit_y = m.b_y, logit_b = m.b_b;
    for (int i = 0; i < m.spec.embed_dim; ++i) {
      logit_y += m.beta_y[i] * h[i];
      logit_b += m.beta_b[i] * h[i];
    }
    loss += weight * bce(ys[idx], logit_y) * inv_batch;
    if (bs != nullptr) loss += weight * bce((*bs)[idx], logit_b) * inv_batch;
    if (grads == nullptr) continue;

    const double gy = weight * (sigmoid(logit_y) - ys[idx]) * inv_batch;
    const double gb =
        bs != nullptr ? weight * (sigmoid(logit_b) - (*bs)[idx]) * inv_batch : 0.0;

    // Heads.
    delta.assign(m.spec.embed_dim, 0.0);
    for (int i = 0; i < m.spec.embed_dim; ++i) {
      grads->beta_y[i] += gy * h[i];
      delta[i] += gy * m.beta_y[i];
      if (bs != nullptr) {
        grads->beta_b[i] += gb * h[i];
        delta[i] += gb * m.beta_b[i];
      }
    }
    grads->b_y += gy;
    if (bs != nullptr) grads->b_b += gb;

    // Backprop through the stack; embedding layer has no activation.
    std::vector<double> skip;
    for (std::size_t li = layers; li-- > 0;) {
      const int out_dim = dims[li + 1];
      const int in_dim = dims[li];
      const bool residual_here =
          m.spec.residual && li + 1 != layers && in_dim == out_dim;
      if (residual_here) skip = delta;  // dL/dpost flows around the block
      if (li + 1 != layers) {
        for (int o = 0; o < out_dim; ++o) {
          delta[o] *= act_grad(trace.pre[li][o], m.spec.activation);
        }
      }
      const std::vector<double>& input =
          li == 0 ? x : trace.post[li - 1];
      for (int o = 0; o < out_dim; ++o) {
        const double d = delta[o];
        grads->biases[li][o] += d;
        double* wrow = &grads->weights[li][static_cast<std::size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) wrow[i] += d * input[i];
      }
      if (li == 0) break;
      delta_prev.assign(in_dim, 0.0);
      for (int o = 0; o < out_dim; ++o) {
        const double d = delta[o];
        const double* wrow = &m.weights[li][static_cast<std::size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) delta_prev[i] += d * wrow[i];
      }
      if (residual_here) {
        for (int i = 0; i < in_dim; ++i) delta_prev[i] += skip[i];
      }
      delta.swap(delta_prev);
    }
  }

  loss += l2_penalty(m, l2);
  if (grads != nullptr && l2 > 0.0) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
        grads->weights[l][i] += l2 * m.weights[l][i];
      }
    }
    for (int i = 0; i < m.spec.embed_dim; ++i) {
      grads->beta_y[i] += l2 * m.beta_y[i];
      grads->beta_b[i] += l2 * m.beta_b[i];
    }
  }
  return loss;
}

std::vector<double> flatten_grads(const IntrospectiveModel& m,
                                  const GradBuffers& g) {
  std::vector<double> flat;
  flat.reserve(m.parameter_count());
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    flat.insert(flat.end(), g.weights[l].begin(), g.weights[l].end());
    flat.insert(flat.end(), g.biases[l].begin(), g.biases[l].end());
  }
  flat.insert(flat.end(), g.beta_y.begin(), g.beta_y.end());
  flat.push_back(g.b_y);
  flat.insert(flat.end(), g.beta_b.begin(), g.beta_b.end());
  flat.push_back(g.b_b);
  return flat;
}

IntrospectiveModel train_impl(const std::vector<std::vector<double>>& xs,
                              const std::vector<double>& ys,
                              const std::vector<double>* bs, const MLPSpec& spec,
                              const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (xs.size() != ys.size() || xs.empty()) {
    throw std::invalid_argument("train: xs/ys size mismatch or empty");
  }
  if (bs != nullptr) {
    if (bs->size() != xs.size()) {
      throw std::invalid_argument("train: bs size mismatch");
    }
    for (double b : *bs) {
      if (!(b >= 0.0 && b <= 1.0)) {
        throw std::invalid_argument("train: b targets must lie in [0, 1]");
      }
    }
  }
  if (hooks.example_weights != nullptr &&
      hooks.example_weights->size() != xs.size()) {
    throw std::invalid_argument("train: example_weights size mismatch");
  }

  IntrospectiveModel model = IntrospectiveModel::init(spec);
  std::vector<double> params = flatten_parameters(model);
  std::vector<double> velocity(params.size(), 0.0);

  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::stream(config.shuffle_seed, 0x5eedULL, epoch);
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + config.batch_size);
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + end);
      GradBuffers grads(model);
      const double loss = batch_pass(model, xs, ys, bs, hooks.example_weights,
                                     config.l2, &batch, &grads);
      if (!std::isfinite(loss)) {
        throw DivergenceError(
            "train: non-finite loss at epoch " + std::to_string(epoch), epoch);
      }
      const std::vector<double> flat_grads = flatten_grads(model, grads);
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] -
                      config.learning_rate * flat_grads[i];
        params[i] += velocity[i];
      }
      unflatten_parameters(model, params);
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, model);
  }
  return model;
}

}  // namespace

double batch_loss(const IntrospectiveModel& model,
                  const std::vector<std::vector<double>>& xs,
                  const std::vector<double>& ys, const std::vector<double>* bs,
                  const std::vector<double>* example_weights, double l2) {
  return batch_pass(model, xs, ys, bs, example_weights, l2, nullptr, nullptr);
}

LossGrad batch_loss_grad(const IntrospectiveModel& model,
                         const std::vector<std::vector<double>>& xs,
                         const std::vector<double>& ys,
                         const std::vector<double>* bs,
                         const std::vector<double>* example_weights, double l2) {
  GradBuffers grads(model);
  LossGrad out;
  out.loss =
      batch_pass(model, xs, ys, bs, example_weights, l2, nullptr, &grads);
  out.grad = flatten_grads(model, grads);
  return out;
}

IntrospectiveModel train_introspective(const std::vector<std::vector<double>>& xs,
                                       const std::vector<double>& ys,
                                       const std::vector<double>& bs,
                                       const MLPSpec& spec,
                                       const TrainConfig& config,
                                       const TrainHooks& hooks) {
  return train_impl(xs, ys, &bs, spec, config, hooks);
}

IntrospectiveModel train_erm(const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys, const MLPSpec& spec,
                             const TrainConfig& config, const TrainHooks& hooks) {
  return train_impl(xs, ys, nullptr, spec, config, hooks);
}

BiasAwarenessGap bias_awareness_gap(const IntrospectiveModel& model,
                                    const std::vector<double>& x1,
                                    const std::vector<double>& x2) {
  double norm_sq = 0.0;
  for (double w : model.beta_b) norm_sq += w * w;
  if (norm_sq <= 0.0) {
    throw std::invalid_argument("bias_awareness_gap: ||beta_b|| is zero");
  }
  const ForwardResult f1 = model.forward(x1);
  const ForwardResult f2 = model.forward(x2);
  BiasAwarenessGap gap;
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < f1.embedding.size(); ++i) {
    const double d = f1.embedding[i] - f2.embedding[i];
    dist_sq += d * d;
  }
  gap.embed_dist = std::sqrt(dist_sq);
  gap.lower_bound = std::abs(f1.logit_b - f2.logit_b) / std::sqrt(norm_sq);
  return gap;
}

double VarianceEstimator::variance_at_embedding(const std::vector<double>& h) const {
  const std::size_t refs = ref_embeddings.size();
  std::vector<double> k(refs);
  for (std::size_t i = 0; i < refs; ++i) {
    double dist_sq = 0.0;
    for (std::size_t d = 0; d < h.size(); ++d) {
      const double diff = h[d] - ref_embeddings[i][d];
      dist_sq += diff * diff;
    }
    k[i] = std::exp(-dist_sq / (2.0 * bandwidth * bandwidth));
  }
  const std::vector<double> solved = cholesky_solve(chol, refs, k);
  double quad = 0.0;
  for (std::size_t i = 0; i < refs; ++i) quad += k[i] * solved[i];
  // k(x, x) = 1 for the RBF kernel; posterior variance is >= 0 in exact
  // arithmetic, clamp roundoff.
  return std::max(1.0 - quad, 0.0);
}

double VarianceEstimator::variance(const IntrospectiveModel& model,
                                   const std::vector<double>& x) const {
  return variance_at_embedding(model.embedding(x));
}

VarianceEstimator fit_variance(const IntrospectiveModel& model,
                               const std::vector<std::vector<double>>& train_x,
                               double bandwidth, double jitter) {
  if (train_x.size() < 2) {
    throw std::invalid_argument("fit_variance: needs at least 2 training points");
  }
  if (!(bandwidth > 0.0) || !(jitter > 0.0)) {
    throw std::invalid_argument("fit_variance: bandwidth and jitter must be > 0");
  }
  VarianceEstimator est;
  est.bandwidth = bandwidth;
  est.jitter = jitter;

  constexpr std::size_t kMaxRefs = 512;
  const std::size_t stride = (train_x.size() + kMaxRefs - 1) / kMaxRefs;
  for (std::size_t i = 0; i < train_x.size(); i += stride) {
    est.ref_embeddings.push_back(model.embedding(train_x[i]));
  }

  const std::size_t refs = est.ref_embeddings.size();
  est.chol.assign(refs * refs, 0.0);
  for (std::size_t i = 0; i < refs; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double dist_sq = 0.0;
      for (std::size_t d = 0; d < est.ref_embeddings[i].size(); ++d) {
        const double diff = est.ref_embeddings[i][d] - est.ref_embeddings[j][d];
        dist_sq += diff * diff;
      }
      const double k = std::exp(-dist_sq / (2.0 * bandwidth * bandwidth));
      est.chol[i * refs + j] = k;
      est.chol[j * refs + i] = k;
    }
    est.chol[i * refs + i] += jitter;
  }
  cholesky_factor(est.chol, refs);  // throws SingularKernelError when needed
  return est;
}

void save_model_json(const IntrospectiveModel& model, const std::string& path) {
  nlohmann::ordered_json j;
  j["input_dim"] = model.spec.input_dim;
  j["hidden_dims"] = model.spec.hidden_dims;
  j["embed_dim"] = model.spec.embed_dim;
  j["activation"] = to_string(model.spec.activation);
  j["residual"] = model.spec.residual;
  j["init_seed"] = model.spec.init_seed;
  j["parameters"] = flatten_parameters(model);
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("save_model_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

IntrospectiveModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_model_json: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("load_model_json: ") + e.what());
  }
  MLPSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  spec.embed_dim = j.at("embed_dim").get<int>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  spec.residual = j.value("residual", false);
  spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  IntrospectiveModel model = IntrospectiveModel::init(spec);
  unflatten_parameters(model, j.at("parameters").get<std::vector<double>>());
  return model;
}

}  // namespace groupkit::learner
