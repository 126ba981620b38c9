#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lenkit/matrix.hpp"

namespace lenkit {

// ---------------------------------------------------------------------------
// Layers

struct DenseLayer {
  Matrix weights;            // out x in
  std::vector<double> bias;  // out

  std::size_t in_size() const { return weights.cols(); }
  std::size_t out_size() const { return weights.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

// Y = X * W^T + b, one output row per input row.
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);

// Elementwise max(v, slope * v). slope must be >= 0.
Matrix leaky_relu(const Matrix& x, double slope);

Matrix sigmoid(const Matrix& x);

// Per-class concept attention layer. Each class c owns a row of relevance
// logits gamma[c] and a linear map weights[c] (h x k) applied to the masked
// concepts.
struct EntropyLinearLayer {
  std::size_t n_concepts = 0;   // k
  std::size_t hidden_units = 0; // h
  std::size_t n_classes = 0;    // C
  Matrix gamma;                 // C x k relevance logits
  std::vector<Matrix> weights;  // per class, h x k
  Matrix bias;                  // C x h
  double temperature = 1.0;

  bool operator==(const EntropyLinearLayer&) const = default;
};

struct Attention {
  Matrix alpha;       // C x k, softmax(gamma / temperature); rows sum to 1
  Matrix alpha_norm;  // C x k, alpha / row max; row max is exactly 1
};

Attention entropy_attention(const EntropyLinearLayer& layer);

// Per-class activations: for class c, (X masked by alpha_norm[c]) through
// that class's linear map. Concept values must lie in [0, 1].
std::vector<Matrix> entropy_forward(const EntropyLinearLayer& layer, const Matrix& x);

// ---------------------------------------------------------------------------
// Entropy model

enum class Activation { LeakyRelu };

using TrunkStage = std::variant<DenseLayer, Activation>;

// Entry attention layer followed by a trunk shared across class channels.
// The trunk's final dense layer emits one scalar per channel; the scalars
// form the logit row.
struct EntropyModel {
  EntropyLinearLayer entry;
  std::vector<TrunkStage> trunk;
  double leaky_slope = 0.01;

  bool operator==(const EntropyModel&) const = default;
};

// Builds the standard architecture: entry layer with hidden[0] units, then
// dense layers hidden[0] -> hidden[1] -> ... -> 1 with LeakyReLU in between.
// Weights and biases are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from
// the seed; gamma starts at zero (uniform attention).
EntropyModel make_entropy_model(std::size_t n_concepts, const std::vector<std::size_t>& hidden,
                                std::size_t n_classes, std::uint64_t seed,
                                double temperature = 1.0, double leaky_slope = 0.01);

// Logits, shape n x C.
Matrix model_forward(const EntropyModel& model, const Matrix& x);

std::vector<int> predict(const EntropyModel& model, const Matrix& x);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Losses

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // same shape as the logits
};

// Mean over rows of -log softmax(logits)[label]; grad is (softmax - onehot)/n.
LossGrad cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels);

// Total Shannon entropy of the attention rows, in [0, C ln k]. Uniform
// relevance attains the upper bound; one-hot relevance drives it to zero.
double entropy_logic_loss(const EntropyLinearLayer& layer);
double entropy_logic_loss(const EntropyModel& model);

// Cross entropy plus entropy_weight times the attention entropy.
double total_loss(const EntropyModel& model, const Matrix& x, const std::vector<int>& labels,
                  double entropy_weight);

// ---------------------------------------------------------------------------
// Gradients and optimization

// Pointers to every trainable scalar, in a fixed order: gamma row-major,
// then per-class entry weights, entry bias, then trunk dense layers
// (weights row-major, then bias) in trunk order.
std::vector<double*> parameter_refs(EntropyModel& model);

// Exact gradient of total_loss with respect to every parameter, aligned
// with parameter_refs.
std::vector<double> backward(const EntropyModel& model, const Matrix& x,
                             const std::vector<int>& labels, double entropy_weight);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 1001;
  double entropy_weight = 1e-5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<double> m;  // first moments
  std::vector<double> v;  // second moments
  std::size_t step = 0;
};

// Decoupled-weight-decay Adam update with bias correction. Decay is applied
// to the parameter before the moment update, scaled by the learning rate.
void adamw_step(std::span<double* const> params, std::span<const double> grads, AdamState& state,
                const TrainConfig& config);

struct TrainResult {
  EntropyModel model;
  std::vector<double> loss_history;  // one entry per epoch, pre-update loss
};

// Full-batch training for config.epochs epochs. Deterministic. Throws
// TrainingError when the loss stops being finite.
TrainResult train(EntropyModel model, const Matrix& x, const std::vector<int>& labels,
                  const TrainConfig& config);

// ---------------------------------------------------------------------------
// Psi networks: sigmoid layers pruned to a small fan-in per neuron

struct PsiNetwork {
  std::vector<DenseLayer> layers;   // sigmoid after every layer
  std::vector<Matrix> weight_mask;  // 1 = trainable, 0 = frozen at zero
  std::size_t fan_in_limit = 2;

  bool operator==(const PsiNetwork&) const = default;
};

PsiNetwork make_psi_network(std::size_t n_concepts, const std::vector<std::size_t>& hidden,
                            std::size_t n_classes, std::uint64_t seed,
                            std::size_t fan_in_limit = 2);

// Sigmoid activations of the output layer, shape n x C.
Matrix psi_forward(const PsiNetwork& network, const Matrix& x);

std::vector<int> psi_predict(const PsiNetwork& network, const Matrix& x);

std::vector<double*> parameter_refs(PsiNetwork& network);

// Mean binary cross entropy of the output sigmoids against one-hot labels.
double psi_loss(const PsiNetwork& network, const Matrix& x, const std::vector<int>& labels);

// Gradient of psi_loss aligned with parameter_refs; masked weights get a
// zero gradient.
std::vector<double> psi_backward(const PsiNetwork& network, const Matrix& x,
                                 const std::vector<int>& labels);

struct PsiTrainResult {
  PsiNetwork network;
  std::vector<double> loss_history;
  std::vector<std::string> warnings;
};

// Plain full-batch training, no pruning.
PsiTrainResult psi_train(PsiNetwork network, const Matrix& x, const std::vector<int>& labels,
                         const TrainConfig& config);

// Train dense for the first half of the epochs, keep only the fan_in
// largest-magnitude incoming weights of every neuron, then fine-tune with
// the zeros frozen. Layers whose input width is at most fan_in are left
// dense (with a warning).
PsiTrainResult psi_train_prune(PsiNetwork network, const Matrix& x,
                               const std::vector<int>& labels, const TrainConfig& config,
                               std::size_t fan_in);

}  // namespace lenkit
