#include "lenkit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "lenkit/errors.hpp"
#include "lenkit/rng.hpp"

namespace lenkit {

// ---------------------------------------------------------------------------
// Elementary layers

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_size()) {
    throw DimensionError("dense_forward: input has " + std::to_string(x.cols()) +
                         " columns, layer expects " + std::to_string(layer.in_size()));
  }
  if (layer.bias.size() != layer.out_size()) {
    throw DimensionError("dense_forward: bias length " + std::to_string(layer.bias.size()) +
                         " does not match " + std::to_string(layer.out_size()) + " outputs");
  }
  Matrix y(x.rows(), layer.out_size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t o = 0; o < layer.out_size(); ++o) {
      double acc = layer.bias[o];
      for (std::size_t j = 0; j < layer.in_size(); ++j) {
        acc += x.at(i, j) * layer.weights.at(o, j);
      }
      y.at(i, o) = acc;
    }
  }
  return y;
}

Matrix leaky_relu(const Matrix& x, double slope) {
  if (slope < 0.0) throw DomainError("leaky_relu: slope must be nonnegative");
  Matrix y = x;
  for (double& v : y.values()) {
    if (v < 0.0) v *= slope;
  }
  return y;
}

Matrix sigmoid(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return y;
}

// ---------------------------------------------------------------------------
// Entropy attention layer

Attention entropy_attention(const EntropyLinearLayer& layer) {
  if (layer.temperature <= 0.0) throw DomainError("entropy layer temperature must be positive");
  const std::size_t C = layer.n_classes;
  const std::size_t k = layer.n_concepts;
  Attention att{Matrix(C, k), Matrix(C, k)};
  for (std::size_t c = 0; c < C; ++c) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      hi = std::max(hi, layer.gamma.at(c, j) / layer.temperature);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double e = std::exp(layer.gamma.at(c, j) / layer.temperature - hi);
      att.alpha.at(c, j) = e;
      sum += e;
    }
    double peak = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      att.alpha.at(c, j) /= sum;
      peak = std::max(peak, att.alpha.at(c, j));
    }
    for (std::size_t j = 0; j < k; ++j) {
      att.alpha_norm.at(c, j) = att.alpha.at(c, j) / peak;
    }
  }
  return att;
}

namespace {

void check_concept_range(const Matrix& x) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double v = x.at(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError("concept value " + std::to_string(v) + " at row " + std::to_string(i) +
                          ", column " + std::to_string(j) + " lies outside [0, 1]");
      }
    }
  }
}

}  // namespace

std::vector<Matrix> entropy_forward(const EntropyLinearLayer& layer, const Matrix& x) {
  if (x.cols() != layer.n_concepts) {
    throw DimensionError("entropy_forward: input has " + std::to_string(x.cols()) +
                         " concepts, layer expects " + std::to_string(layer.n_concepts));
  }
  check_concept_range(x);
  Attention att = entropy_attention(layer);
  std::vector<Matrix> out;
  out.reserve(layer.n_classes);
  for (std::size_t c = 0; c < layer.n_classes; ++c) {
    Matrix masked(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        masked.at(i, j) = x.at(i, j) * att.alpha_norm.at(c, j);
      }
    }
    DenseLayer view{layer.weights[c], {layer.bias.row(c).begin(), layer.bias.row(c).end()}};
    out.push_back(dense_forward(view, masked));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entropy model forward

namespace {

Matrix trunk_stage_forward(const TrunkStage& stage, const Matrix& input, double slope) {
  if (std::holds_alternative<DenseLayer>(stage)) {
    return dense_forward(std::get<DenseLayer>(stage), input);
  }
  return leaky_relu(input, slope);
}

struct ForwardCache {
  Attention att;
  std::vector<Matrix> masked;                    // per class, n x k
  std::vector<std::vector<Matrix>> stage_io;     // per class: entry output, then each stage's output
  Matrix logits;                                 // n x C
};

ForwardCache forward_cached(const EntropyModel& model, const Matrix& x) {
  ForwardCache cache;
  cache.att = entropy_attention(model.entry);
  if (x.cols() != model.entry.n_concepts) {
    throw DimensionError("model_forward: input has " + std::to_string(x.cols()) +
                         " concepts, model expects " + std::to_string(model.entry.n_concepts));
  }
  check_concept_range(x);

  const std::size_t C = model.entry.n_classes;
  cache.logits = Matrix(x.rows(), C);
  cache.masked.reserve(C);
  cache.stage_io.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    Matrix masked(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        masked.at(i, j) = x.at(i, j) * cache.att.alpha_norm.at(c, j);
      }
    }
    DenseLayer entry_view{model.entry.weights[c],
                          {model.entry.bias.row(c).begin(), model.entry.bias.row(c).end()}};
    std::vector<Matrix> io;
    io.reserve(model.trunk.size() + 1);
    io.push_back(dense_forward(entry_view, masked));
    for (const TrunkStage& stage : model.trunk) {
      io.push_back(trunk_stage_forward(stage, io.back(), model.leaky_slope));
    }
    const Matrix& final_out = io.back();
    if (final_out.cols() != 1) {
      throw DimensionError("model trunk must end with a single output per class channel, got " +
                           std::to_string(final_out.cols()));
    }
    for (std::size_t i = 0; i < x.rows(); ++i) cache.logits.at(i, c) = final_out.at(i, 0);
    cache.masked.push_back(std::move(masked));
    cache.stage_io.push_back(std::move(io));
  }
  return cache;
}

}  // namespace

Matrix model_forward(const EntropyModel& model, const Matrix& x) {
  return forward_cached(model, x).logits;
}

std::vector<int> predict(const EntropyModel& model, const Matrix& x) {
  Matrix logits = model_forward(model, x);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("accuracy: prediction and label counts differ");
  }
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// Losses

LossGrad cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.rows();
  const std::size_t C = logits.cols();
  if (labels.size() != n) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " logit rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
    }
  }
  LossGrad out;
  out.grad = Matrix(n, C);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double hi = logits.at(i, 0);
    for (std::size_t c = 1; c < C; ++c) hi = std::max(hi, logits.at(i, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(logits.at(i, c) - hi);
    const double log_sum = hi + std::log(sum);
    total += log_sum - logits.at(i, static_cast<std::size_t>(labels[i]));
    for (std::size_t c = 0; c < C; ++c) {
      double p = std::exp(logits.at(i, c) - log_sum);
      out.grad.at(i, c) = (p - (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0)) /
                          static_cast<double>(n);
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

double entropy_logic_loss(const EntropyLinearLayer& layer) {
  Attention att = entropy_attention(layer);
  double total = 0.0;
  for (std::size_t c = 0; c < layer.n_classes; ++c) {
    for (std::size_t j = 0; j < layer.n_concepts; ++j) {
      double p = att.alpha.at(c, j);
      if (p > 0.0) total -= p * std::log(p);
    }
  }
  return total;
}

double entropy_logic_loss(const EntropyModel& model) { return entropy_logic_loss(model.entry); }

double total_loss(const EntropyModel& model, const Matrix& x, const std::vector<int>& labels,
                  double entropy_weight) {
  Matrix logits = model_forward(model, x);
  LossGrad ce = cross_entropy_loss(logits, labels);
  return ce.loss + entropy_weight * entropy_logic_loss(model);
}

// ---------------------------------------------------------------------------
// Backward

std::vector<double*> parameter_refs(EntropyModel& model) {
  std::vector<double*> refs;
  for (double& v : model.entry.gamma.values()) refs.push_back(&v);
  for (Matrix& w : model.entry.weights) {
    for (double& v : w.values()) refs.push_back(&v);
  }
  for (double& v : model.entry.bias.values()) refs.push_back(&v);
  for (TrunkStage& stage : model.trunk) {
    if (auto* dense = std::get_if<DenseLayer>(&stage)) {
      for (double& v : dense->weights.values()) refs.push_back(&v);
      for (double& v : dense->bias) refs.push_back(&v);
    }
  }
  return refs;
}

namespace {

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> grads;
};

BackwardResult backward_with_loss(const EntropyModel& model, const Matrix& x,
                                  const std::vector<int>& labels, double entropy_weight) {
  ForwardCache cache = forward_cached(model, x);
  LossGrad ce = cross_entropy_loss(cache.logits, labels);

  const std::size_t C = model.entry.n_classes;
  const std::size_t k = model.entry.n_concepts;
  const std::size_t n = x.rows();

  Matrix d_gamma(C, k);
  std::vector<Matrix> d_entry_w;
  for (const Matrix& w : model.entry.weights) d_entry_w.emplace_back(w.rows(), w.cols());
  Matrix d_entry_b(C, model.entry.hidden_units);

  std::vector<Matrix> d_trunk_w;
  std::vector<std::vector<double>> d_trunk_b;
  for (const TrunkStage& stage : model.trunk) {
    if (const auto* dense = std::get_if<DenseLayer>(&stage)) {
      d_trunk_w.emplace_back(dense->weights.rows(), dense->weights.cols());
      d_trunk_b.emplace_back(dense->bias.size(), 0.0);
    } else {
      d_trunk_w.emplace_back();
      d_trunk_b.emplace_back();
    }
  }

  for (std::size_t c = 0; c < C; ++c) {
    // Gradient flowing into this class channel's scalar output.
    Matrix d_act(n, 1);
    for (std::size_t i = 0; i < n; ++i) d_act.at(i, 0) = ce.grad.at(i, c);

    for (std::size_t s = model.trunk.size(); s-- > 0;) {
      const Matrix& input = cache.stage_io[c][s];
      if (const auto* dense = std::get_if<DenseLayer>(&model.trunk[s])) {
        for (std::size_t o = 0; o < dense->out_size(); ++o) {
          for (std::size_t i = 0; i < n; ++i) {
            const double g = d_act.at(i, o);
            d_trunk_b[s][o] += g;
            for (std::size_t j = 0; j < dense->in_size(); ++j) {
              d_trunk_w[s].at(o, j) += g * input.at(i, j);
            }
          }
        }
        Matrix d_in(n, dense->in_size());
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < dense->in_size(); ++j) {
            double acc = 0.0;
            for (std::size_t o = 0; o < dense->out_size(); ++o) {
              acc += d_act.at(i, o) * dense->weights.at(o, j);
            }
            d_in.at(i, j) = acc;
          }
        }
        d_act = std::move(d_in);
      } else {
        for (std::size_t i = 0; i < d_act.rows(); ++i) {
          for (std::size_t j = 0; j < d_act.cols(); ++j) {
            if (input.at(i, j) <= 0.0) d_act.at(i, j) *= model.leaky_slope;
          }
        }
      }
    }

    // d_act is now the gradient at the entry layer's output (n x h).
    const Matrix& masked = cache.masked[c];
    const Matrix& w = model.entry.weights[c];
    for (std::size_t o = 0; o < model.entry.hidden_units; ++o) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = d_act.at(i, o);
        d_entry_b.at(c, o) += g;
        for (std::size_t j = 0; j < k; ++j) {
          d_entry_w[c].at(o, j) += g * masked.at(i, j);
        }
      }
    }

    // Gradient with respect to the attention mask values.
    std::vector<double> d_nu(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t o = 0; o < model.entry.hidden_units; ++o) {
          acc += d_act.at(i, o) * w.at(o, j);
        }
        d_nu[j] += acc * x.at(i, j);
      }
    }

    // alpha_norm = alpha / alpha[m], the gradient of the chosen maximum
    // entry collects the quotient-rule terms of all others.
    std::size_t m = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (cache.att.alpha.at(c, j) > cache.att.alpha.at(c, m)) m = j;
    }
    const double peak = cache.att.alpha.at(c, m);
    std::vector<double> d_alpha(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (j == m) continue;
      d_alpha[j] = d_nu[j] / peak;
      d_alpha[m] -= d_nu[j] * cache.att.alpha.at(c, j) / (peak * peak);
    }

    // Softmax Jacobian, then the entropy penalty's own analytic term.
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += cache.att.alpha.at(c, j) * d_alpha[j];
    double plogp_sum = 0.0;
    std::vector<double> plogp(k, 0.0);
    if (entropy_weight != 0.0) {
      for (std::size_t j = 0; j < k; ++j) {
        const double p = cache.att.alpha.at(c, j);
        plogp[j] = p > 0.0 ? p * std::log(p) : 0.0;
        plogp_sum += plogp[j];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double p = cache.att.alpha.at(c, j);
      double ds = p * (d_alpha[j] - dot);
      if (entropy_weight != 0.0) {
        ds += entropy_weight * (-plogp[j] + p * plogp_sum);
      }
      d_gamma.at(c, j) = ds / model.entry.temperature;
    }
  }

  BackwardResult result;
  result.loss = ce.loss + entropy_weight * entropy_logic_loss(model.entry);
  result.grads.reserve(d_gamma.size());
  for (double v : d_gamma.values()) result.grads.push_back(v);
  for (const Matrix& gw : d_entry_w) {
    for (double v : gw.values()) result.grads.push_back(v);
  }
  for (double v : d_entry_b.values()) result.grads.push_back(v);
  for (std::size_t s = 0; s < model.trunk.size(); ++s) {
    if (std::holds_alternative<DenseLayer>(model.trunk[s])) {
      for (double v : d_trunk_w[s].values()) result.grads.push_back(v);
      for (double v : d_trunk_b[s]) result.grads.push_back(v);
    }
  }
  return result;
}

}  // namespace

std::vector<double> backward(const EntropyModel& model, const Matrix& x,
                             const std::vector<int>& labels, double entropy_weight) {
  return backward_with_loss(model, x, labels, entropy_weight).grads;
}

// ---------------------------------------------------------------------------
// AdamW

void adamw_step(std::span<double* const> params, std::span<const double> grads, AdamState& state,
                const TrainConfig& config) {
  if (params.size() != grads.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adamw_step: optimizer state sized for a different parameter count");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& p = *params[i];
    const double g = grads[i];
    p *= 1.0 - config.learning_rate * config.weight_decay;
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    p -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(EntropyModel model, const Matrix& x, const std::vector<int>& labels,
                  const TrainConfig& config) {
  if (x.rows() == 0) throw DomainError("train: empty dataset");
  TrainResult result;
  result.loss_history.reserve(config.epochs);
  std::vector<double*> params = parameter_refs(model);
  AdamState state;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    BackwardResult step = backward_with_loss(model, x, labels, config.entropy_weight);
    if (!std::isfinite(step.loss)) {
      throw TrainingError("training diverged: loss " + std::to_string(step.loss) + " at epoch " +
                          std::to_string(epoch));
    }
    result.loss_history.push_back(step.loss);
    adamw_step(params, step.grads, state, config);
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Model construction

namespace {

DenseLayer make_dense(std::size_t out, std::size_t in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer{Matrix(out, in), std::vector<double>(out)};
  for (double& v : layer.weights.values()) v = rng.uniform(-bound, bound);
  for (double& v : layer.bias) v = rng.uniform(-bound, bound);
  return layer;
}

}  // namespace

EntropyModel make_entropy_model(std::size_t n_concepts, const std::vector<std::size_t>& hidden,
                                std::size_t n_classes, std::uint64_t seed, double temperature,
                                double leaky_slope) {
  if (n_concepts == 0 || n_classes == 0) {
    throw DomainError("make_entropy_model: needs at least one concept and one class");
  }
  if (hidden.empty()) throw DomainError("make_entropy_model: needs at least one hidden size");
  if (temperature <= 0.0) throw DomainError("make_entropy_model: temperature must be positive");

  Rng rng(seed);
  EntropyModel model;
  model.leaky_slope = leaky_slope;
  model.entry.n_concepts = n_concepts;
  model.entry.hidden_units = hidden[0];
  model.entry.n_classes = n_classes;
  model.entry.temperature = temperature;
  model.entry.gamma = Matrix(n_classes, n_concepts);  // zero: uniform attention
  const double bound = 1.0 / std::sqrt(static_cast<double>(n_concepts));
  for (std::size_t c = 0; c < n_classes; ++c) {
    Matrix w(hidden[0], n_concepts);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    model.entry.weights.push_back(std::move(w));
  }
  model.entry.bias = Matrix(n_classes, hidden[0]);
  for (double& v : model.entry.bias.values()) v = rng.uniform(-bound, bound);

  std::size_t prev = hidden[0];
  for (std::size_t i = 1; i <= hidden.size(); ++i) {
    model.trunk.emplace_back(Activation::LeakyRelu);
    std::size_t next = i < hidden.size() ? hidden[i] : 1;
    model.trunk.emplace_back(make_dense(next, prev, rng));
    prev = next;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Psi networks

PsiNetwork make_psi_network(std::size_t n_concepts, const std::vector<std::size_t>& hidden,
                            std::size_t n_classes, std::uint64_t seed,
                            std::size_t fan_in_limit) {
  if (n_concepts == 0 || n_classes == 0) {
    throw DomainError("make_psi_network: needs at least one concept and one class");
  }
  if (fan_in_limit == 0) throw DomainError("make_psi_network: fan-in limit must be positive");
  Rng rng(seed);
  PsiNetwork net;
  net.fan_in_limit = fan_in_limit;
  std::size_t prev = n_concepts;
  for (std::size_t h : hidden) {
    net.layers.push_back(make_dense(h, prev, rng));
    prev = h;
  }
  net.layers.push_back(make_dense(n_classes, prev, rng));
  for (const DenseLayer& layer : net.layers) {
    net.weight_mask.emplace_back(layer.weights.rows(), layer.weights.cols(), 1.0);
  }
  return net;
}

namespace {

struct PsiCache {
  std::vector<Matrix> pre;  // pre-activations per layer
  std::vector<Matrix> act;  // act[0] = input, act[l+1] = sigmoid(pre[l])
};

PsiCache psi_forward_cached(const PsiNetwork& network, const Matrix& x) {
  if (network.layers.empty()) throw DomainError("psi network has no layers");
  check_concept_range(x);
  PsiCache cache;
  cache.act.push_back(x);
  for (const DenseLayer& layer : network.layers) {
    cache.pre.push_back(dense_forward(layer, cache.act.back()));
    cache.act.push_back(sigmoid(cache.pre.back()));
  }
  return cache;
}

Matrix one_hot(const std::vector<int>& labels, std::size_t n_classes) {
  Matrix y(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw DomainError("label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(n_classes) + ")");
    }
    y.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

struct PsiBackwardResult {
  double loss = 0.0;
  std::vector<double> grads;
};

PsiBackwardResult psi_backward_with_loss(const PsiNetwork& network, const Matrix& x,
                                         const std::vector<int>& labels) {
  PsiCache cache = psi_forward_cached(network, x);
  const std::size_t n = x.rows();
  const std::size_t C = network.layers.back().out_size();
  if (labels.size() != n) {
    throw DimensionError("psi loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  Matrix target = one_hot(labels, C);
  const Matrix& z = cache.pre.back();
  const double scale = 1.0 / static_cast<double>(n * C);

  // Stable binary cross entropy from the pre-activations.
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double zi = z.at(i, c);
      const double yi = target.at(i, c);
      loss += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    }
  }
  loss *= scale;

  // d loss / d pre of the output layer: (sigmoid(z) - y) / (n C).
  Matrix d_pre(n, C);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      d_pre.at(i, c) = (cache.act.back().at(i, c) - target.at(i, c)) * scale;
    }
  }

  std::vector<Matrix> d_w(network.layers.size());
  std::vector<std::vector<double>> d_b(network.layers.size());
  for (std::size_t l = network.layers.size(); l-- > 0;) {
    const DenseLayer& layer = network.layers[l];
    const Matrix& input = cache.act[l];
    d_w[l] = Matrix(layer.weights.rows(), layer.weights.cols());
    d_b[l].assign(layer.bias.size(), 0.0);
    for (std::size_t o = 0; o < layer.out_size(); ++o) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = d_pre.at(i, o);
        d_b[l][o] += g;
        for (std::size_t j = 0; j < layer.in_size(); ++j) {
          d_w[l].at(o, j) += g * input.at(i, j);
        }
      }
    }
    // Frozen weights receive no gradient.
    for (std::size_t idx = 0; idx < d_w[l].values().size(); ++idx) {
      d_w[l].values()[idx] *= network.weight_mask[l].values()[idx];
    }
    if (l > 0) {
      Matrix d_act(n, layer.in_size());
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < layer.in_size(); ++j) {
          double acc = 0.0;
          for (std::size_t o = 0; o < layer.out_size(); ++o) {
            acc += d_pre.at(i, o) * layer.weights.at(o, j);
          }
          d_act.at(i, j) = acc;
        }
      }
      d_pre = Matrix(n, layer.in_size());
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < layer.in_size(); ++j) {
          const double a = cache.act[l].at(i, j);
          d_pre.at(i, j) = d_act.at(i, j) * a * (1.0 - a);
        }
      }
    }
  }

  PsiBackwardResult result;
  result.loss = loss;
  for (std::size_t l = 0; l < network.layers.size(); ++l) {
    for (double v : d_w[l].values()) result.grads.push_back(v);
    for (double v : d_b[l]) result.grads.push_back(v);
  }
  return result;
}

void apply_mask(PsiNetwork& network) {
  for (std::size_t l = 0; l < network.layers.size(); ++l) {
    auto& values = network.layers[l].weights.values();
    const auto& mask = network.weight_mask[l].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (mask[i] == 0.0) values[i] = 0.0;
    }
  }
}

void psi_train_loop(PsiNetwork& network, const Matrix& x, const std::vector<int>& labels,
                    const TrainConfig& config, std::size_t epochs, AdamState& state,
                    std::vector<double>& history) {
  std::vector<double*> params = parameter_refs(network);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    PsiBackwardResult step = psi_backward_with_loss(network, x, labels);
    if (!std::isfinite(step.loss)) {
      throw TrainingError("training diverged: loss " + std::to_string(step.loss) + " at epoch " +
                          std::to_string(history.size()));
    }
    history.push_back(step.loss);
    adamw_step(params, step.grads, state, config);
    apply_mask(network);
  }
}

}  // namespace

Matrix psi_forward(const PsiNetwork& network, const Matrix& x) {
  return psi_forward_cached(network, x).act.back();
}

std::vector<int> psi_predict(const PsiNetwork& network, const Matrix& x) {
  Matrix out = psi_forward(network, x);
  std::vector<int> pred(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.cols(); ++c) {
      if (out.at(i, c) > out.at(i, best)) best = c;
    }
    pred[i] = static_cast<int>(best);
  }
  return pred;
}

std::vector<double*> parameter_refs(PsiNetwork& network) {
  std::vector<double*> refs;
  for (DenseLayer& layer : network.layers) {
    for (double& v : layer.weights.values()) refs.push_back(&v);
    for (double& v : layer.bias) refs.push_back(&v);
  }
  return refs;
}

double psi_loss(const PsiNetwork& network, const Matrix& x, const std::vector<int>& labels) {
  return psi_backward_with_loss(network, x, labels).loss;
}

std::vector<double> psi_backward(const PsiNetwork& network, const Matrix& x,
                                 const std::vector<int>& labels) {
  return psi_backward_with_loss(network, x, labels).grads;
}

PsiTrainResult psi_train(PsiNetwork network, const Matrix& x, const std::vector<int>& labels,
                         const TrainConfig& config) {
  if (x.rows() == 0) throw DomainError("psi_train: empty dataset");
  PsiTrainResult result;
  AdamState state;
  psi_train_loop(network, x, labels, config, config.epochs, state, result.loss_history);
  result.network = std::move(network);
  return result;
}

PsiTrainResult psi_train_prune(PsiNetwork network, const Matrix& x,
                               const std::vector<int>& labels, const TrainConfig& config,
                               std::size_t fan_in) {
  if (fan_in == 0) throw DomainError("psi_train_prune: fan-in must be at least 1");
  if (x.rows() == 0) throw DomainError("psi_train_prune: empty dataset");

  PsiTrainResult result;
  AdamState state;
  const std::size_t dense_epochs = config.epochs / 2;
  psi_train_loop(network, x, labels, config, dense_epochs, state, result.loss_history);

  network.fan_in_limit = fan_in;
  for (std::size_t l = 0; l < network.layers.size(); ++l) {
    DenseLayer& layer = network.layers[l];
    if (fan_in >= layer.in_size()) {
      result.warnings.push_back("layer " + std::to_string(l) + ": fan-in " +
                                std::to_string(fan_in) + " >= input width " +
                                std::to_string(layer.in_size()) + ", pruning skipped");
      continue;
    }
    for (std::size_t o = 0; o < layer.out_size(); ++o) {
      std::vector<std::size_t> order(layer.in_size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(layer.weights.at(o, a)) > std::abs(layer.weights.at(o, b));
      });
      for (std::size_t r = fan_in; r < order.size(); ++r) {
        layer.weights.at(o, order[r]) = 0.0;
        network.weight_mask[l].at(o, order[r]) = 0.0;
      }
    }
  }

  psi_train_loop(network, x, labels, config, config.epochs - dense_epochs, state,
                 result.loss_history);
  result.network = std::move(network);
  return result;
}

}  // namespace lenkit
