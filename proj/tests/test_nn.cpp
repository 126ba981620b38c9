#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lenkit/errors.hpp"
#include "lenkit/nn.hpp"
#include "lenkit/rng.hpp"
#include "testutil.hpp"

using namespace lenkit;

namespace {

const Matrix kXorX = Matrix::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
const std::vector<int> kXorY{0, 1, 1, 0};

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

EntropyModel random_model(Rng& rng, std::size_t k, std::size_t h, std::size_t c) {
  EntropyModel model = make_entropy_model(k, {h, 3}, c, rng.raw());
  // Random attention logits: ties in the row max make the mask gradient
  // direction ambiguous, which finite differences cannot probe.
  for (double& v : model.entry.gamma.values()) v = rng.uniform(-2.0, 2.0);
  return model;
}

}  // namespace

TEST_CASE("dense_forward computes X W^T + b") {
  DenseLayer identity{Matrix::from_rows({{1, 0}, {0, 1}}), {0, 0}};
  CHECK(dense_forward(identity, Matrix::from_rows({{3, 4}})) == Matrix::from_rows({{3, 4}}));

  DenseLayer sum{Matrix::from_rows({{1, 1}}), {1}};
  CHECK(dense_forward(sum, Matrix::from_rows({{2, 3}})) == Matrix::from_rows({{6}}));

  CHECK_THROWS_AS(dense_forward(sum, Matrix::from_rows({{1, 2, 3}})), DimensionError);
}

TEST_CASE("dense_forward matches a hand matrix product") {
  Rng rng(3);
  DenseLayer layer{random_matrix(rng, 4, 3, -1, 1), {0.1, -0.2, 0.3, -0.4}};
  Matrix x = random_matrix(rng, 5, 3, -1, 1);
  Matrix y = dense_forward(layer, x);
  REQUIRE(y.rows() == 5);
  REQUIRE(y.cols() == 4);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t o = 0; o < 4; ++o) {
      double expected = layer.bias[o];
      for (std::size_t j = 0; j < 3; ++j) expected += x.at(i, j) * layer.weights.at(o, j);
      CHECK(y.at(i, o) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("leaky_relu basics") {
  CHECK(leaky_relu(Matrix::from_rows({{-1, 2}}), 0.01) == Matrix::from_rows({{-0.01, 2}}));
  CHECK(leaky_relu(Matrix::from_rows({{0}}), 0.01) == Matrix::from_rows({{0}}));
  Rng rng(5);
  Matrix x = random_matrix(rng, 3, 4, -2, 2);
  CHECK(leaky_relu(x, 1.0) == x);
  CHECK_THROWS_AS(leaky_relu(x, -0.5), DomainError);
}

TEST_CASE("entropy_attention softmax values") {
  EntropyLinearLayer layer;
  layer.n_concepts = 2;
  layer.hidden_units = 1;
  layer.n_classes = 1;
  layer.gamma = Matrix(1, 2);
  layer.weights = {Matrix(1, 2)};
  layer.bias = Matrix(1, 1);

  Attention uniform = entropy_attention(layer);
  CHECK(uniform.alpha.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(uniform.alpha.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(uniform.alpha_norm.at(0, 0) == 1.0);
  CHECK(uniform.alpha_norm.at(0, 1) == 1.0);

  layer.gamma.at(0, 0) = std::log(2.0);
  Attention skew = entropy_attention(layer);
  CHECK(skew.alpha.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(skew.alpha.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(skew.alpha_norm.at(0, 0) == 1.0);
  CHECK(skew.alpha_norm.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("entropy_attention rows sum to one and peak at one") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    EntropyLinearLayer layer;
    layer.n_concepts = 1 + rng.below(6);
    layer.hidden_units = 1;
    layer.n_classes = 1 + rng.below(4);
    layer.temperature = 0.5;
    layer.gamma = random_matrix(rng, layer.n_classes, layer.n_concepts, -3, 3);
    for (std::size_t c = 0; c < layer.n_classes; ++c) {
      layer.weights.emplace_back(1, layer.n_concepts);
    }
    layer.bias = Matrix(layer.n_classes, 1);

    Attention att = entropy_attention(layer);
    for (std::size_t c = 0; c < layer.n_classes; ++c) {
      double sum = 0.0;
      double peak = 0.0;
      for (std::size_t j = 0; j < layer.n_concepts; ++j) {
        sum += att.alpha.at(c, j);
        peak = std::max(peak, att.alpha_norm.at(c, j));
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(peak == 1.0);
    }
  }
}

TEST_CASE("entropy_forward applies the attention mask") {
  EntropyLinearLayer layer;
  layer.n_concepts = 2;
  layer.hidden_units = 2;
  layer.n_classes = 2;
  layer.gamma = Matrix(2, 2);  // uniform: no masking
  layer.weights = {Matrix::from_rows({{1, 0}, {0, 1}}), Matrix::from_rows({{1, 1}, {0, 1}})};
  layer.bias = Matrix(2, 2);

  Matrix x = Matrix::from_rows({{0.25, 0.75}, {1, 0}});
  auto out = entropy_forward(layer, x);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == x);  // identity weights, no mask
  CHECK(out[1].at(0, 0) == doctest::Approx(1.0));

  // A dominant logit masks the other concept to (numerically) nothing.
  layer.gamma.at(0, 0) = 50.0;
  auto masked = entropy_forward(layer, x);
  CHECK(masked[0].at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(masked[0].at(0, 1)) < 1e-12);

  CHECK_THROWS_AS(entropy_forward(layer, Matrix::from_rows({{1.5, 0}})), DomainError);
  CHECK_THROWS_AS(entropy_forward(layer, Matrix::from_rows({{0.5}})), DimensionError);
}

TEST_CASE("entropy_forward matches the composed oracle") {
  Rng rng(13);
  EntropyLinearLayer layer;
  layer.n_concepts = 4;
  layer.hidden_units = 3;
  layer.n_classes = 2;
  layer.gamma = random_matrix(rng, 2, 4, -1, 1);
  layer.weights = {random_matrix(rng, 3, 4, -1, 1), random_matrix(rng, 3, 4, -1, 1)};
  layer.bias = random_matrix(rng, 2, 3, -1, 1);
  Matrix x = random_matrix(rng, 6, 4, 0, 1);

  auto out = entropy_forward(layer, x);
  Attention att = entropy_attention(layer);
  for (std::size_t c = 0; c < 2; ++c) {
    Matrix masked(6, 4);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        masked.at(i, j) = x.at(i, j) * att.alpha_norm.at(c, j);
      }
    }
    DenseLayer dense{layer.weights[c], {layer.bias.row(c).begin(), layer.bias.row(c).end()}};
    Matrix expected = dense_forward(dense, masked);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t o = 0; o < 3; ++o) {
        CHECK(out[c].at(i, o) == doctest::Approx(expected.at(i, o)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("model_forward squeezes one logit per class channel") {
  EntropyModel model = make_entropy_model(2, {3}, 2, 1);
  // Zero trunk weights: every logit equals the trunk bias.
  auto& dense = std::get<DenseLayer>(model.trunk[1]);
  for (double& v : dense.weights.values()) v = 0.0;
  dense.bias[0] = 0.75;
  Matrix logits = model_forward(model, kXorX);
  REQUIRE(logits.rows() == 4);
  REQUIRE(logits.cols() == 2);
  for (double v : logits.values()) CHECK(v == doctest::Approx(0.75));
}

TEST_CASE("cross_entropy_loss values and gradient") {
  LossGrad uniform = cross_entropy_loss(Matrix::from_rows({{0, 0}}), {1});
  CHECK(uniform.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  LossGrad saturated = cross_entropy_loss(Matrix::from_rows({{1000, 0}}), {0});
  CHECK(saturated.loss == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy_loss(Matrix::from_rows({{0, 0}}), {2}), DomainError);

  Rng rng(17);
  Matrix logits = random_matrix(rng, 5, 3, -2, 2);
  std::vector<int> labels{0, 2, 1, 1, 0};
  LossGrad out = cross_entropy_loss(logits, labels);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      double fd = testutil::central_difference(
          [&] { return cross_entropy_loss(logits, labels).loss; }, &logits.at(i, c), 1e-5);
      CHECK(testutil::gradients_close(out.grad.at(i, c), fd, 1e-4));
    }
  }
}

TEST_CASE("entropy_logic_loss bounds and oracle") {
  EntropyModel model = make_entropy_model(2, {2}, 2, 0);
  // gamma starts at zero: the entropy sits exactly at C ln k.
  CHECK(entropy_logic_loss(model) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  model.entry.gamma.at(0, 0) = 50.0;
  model.entry.gamma.at(1, 1) = 50.0;
  CHECK(entropy_logic_loss(model) < 1e-10);

  Rng rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    EntropyModel m = make_entropy_model(1 + rng.below(5), {2}, 1 + rng.below(3), rng.raw());
    for (double& v : m.entry.gamma.values()) v = rng.uniform(-4, 4);
    Attention att = entropy_attention(m.entry);
    double expected = 0.0;
    for (std::size_t c = 0; c < m.entry.n_classes; ++c) {
      for (std::size_t j = 0; j < m.entry.n_concepts; ++j) {
        double p = att.alpha.at(c, j);
        if (p > 0) expected -= p * std::log(p);
      }
    }
    CHECK(entropy_logic_loss(m) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(entropy_logic_loss(m) >= 0.0);
    CHECK(entropy_logic_loss(m) <=
          m.entry.n_classes * std::log(double(m.entry.n_concepts)) + 1e-12);
  }
}

TEST_CASE("backward is exact against central differences") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t k = 2 + rng.below(3);
    std::size_t h = 2 + rng.below(4);
    std::size_t c = 2 + rng.below(2);
    EntropyModel model = random_model(rng, k, h, c);
    std::size_t n = 3 + rng.below(4);
    Matrix x = random_matrix(rng, n, k, 0, 1);
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(int(rng.below(c)));
    const double lambda = 0.01;

    std::vector<double> grads = backward(model, x, labels, lambda);
    std::vector<double*> params = parameter_refs(model);
    REQUIRE(grads.size() == params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      double fd = testutil::central_difference(
          [&] { return total_loss(model, x, labels, lambda); }, params[p], 1e-5);
      INFO("trial ", trial, " parameter ", p);
      CHECK(testutil::gradients_close(grads[p], fd, 1e-4));
    }
  }
}

TEST_CASE("backward: dead trunk leaves gamma untouched") {
  EntropyModel model = make_entropy_model(3, {4}, 2, 7);
  auto& dense = std::get<DenseLayer>(model.trunk[1]);
  for (double& v : dense.weights.values()) v = 0.0;
  Matrix x = Matrix::from_rows({{0.2, 0.8, 0.5}, {0.9, 0.1, 0.3}});
  std::vector<double> grads = backward(model, x, {0, 1}, 0.0);
  for (std::size_t i = 0; i < model.entry.gamma.size(); ++i) {
    CHECK(grads[i] == 0.0);
  }
}

TEST_CASE("backward is invariant to duplicating the batch") {
  Rng rng(37);
  EntropyModel model = random_model(rng, 3, 4, 2);
  Matrix x = random_matrix(rng, 4, 3, 0, 1);
  std::vector<int> labels{0, 1, 1, 0};
  Matrix doubled(8, 3);
  std::vector<int> doubled_labels;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t j = 0; j < 3; ++j) doubled.at(r, j) = x.at(r % 4, j);
  }
  for (std::size_t r = 0; r < 8; ++r) doubled_labels.push_back(labels[r % 4]);

  std::vector<double> g1 = backward(model, x, labels, 1e-3);
  std::vector<double> g2 = backward(model, doubled, doubled_labels, 1e-3);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
  }
}

TEST_CASE("adamw_step fixed point and sign limit") {
  double a = 0.5, b = -1.25;
  std::vector<double*> params{&a, &b};
  AdamState state;
  TrainConfig config;
  config.weight_decay = 0.0;

  std::vector<double> zero{0.0, 0.0};
  adamw_step(params, zero, state, config);
  CHECK(a == 0.5);
  CHECK(b == -1.25);

  // Constant gradient from a fresh state: with m and v both warmed by the
  // same gradient, bias correction makes every step -lr * g / (|g| + eps).
  state = AdamState{};
  std::vector<double> grad{3.0, -0.25};
  for (int step = 0; step < 50; ++step) {
    double prev_a = a, prev_b = b;
    adamw_step(params, grad, state, config);
    CHECK(std::abs((a - prev_a) + config.learning_rate) < 1e-6);
    CHECK(std::abs((b - prev_b) - config.learning_rate) < 1e-6);
  }
}

TEST_CASE("adamw_step single step against a scalar reference") {
  double p0 = 0.4, p1 = -0.7;
  std::vector<double*> params{&p0, &p1};
  std::vector<double> grads{0.3, -1.1};
  AdamState state;
  TrainConfig config;
  config.learning_rate = 0.05;
  config.weight_decay = 0.02;
  adamw_step(params, grads, state, config);

  // Independent reference computation, one scalar at a time.
  auto reference = [&](double theta, double g) {
    theta *= 1.0 - config.learning_rate * config.weight_decay;
    double m = (1.0 - config.beta1) * g;
    double v = (1.0 - config.beta2) * g * g;
    double m_hat = m / (1.0 - config.beta1);
    double v_hat = v / (1.0 - config.beta2);
    return theta - config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  };
  CHECK(p0 == doctest::Approx(reference(0.4, 0.3)).epsilon(1e-12));
  CHECK(p1 == doctest::Approx(reference(-0.7, -1.1)).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("train solves XOR with the reference recipe") {
  TrainConfig config;  // lr 0.01, 1001 epochs, entropy weight 1e-5
  EntropyModel model = make_entropy_model(2, {10, 4}, 2, 0);
  TrainResult result = train(model, kXorX, kXorY, config);
  REQUIRE(result.loss_history.size() == config.epochs);
  CHECK(accuracy(predict(result.model, kXorX), kXorY) == 1.0);
  CHECK(result.loss_history.back() < result.loss_history.front());
}

TEST_CASE("train with zero epochs is the identity") {
  TrainConfig config;
  config.epochs = 0;
  EntropyModel model = make_entropy_model(2, {4}, 2, 3);
  EntropyModel before = model;
  TrainResult result = train(model, kXorX, kXorY, config);
  CHECK(result.model == before);
  CHECK(result.loss_history.empty());
}

TEST_CASE("train is deterministic per seed") {
  TrainConfig config;
  config.epochs = 200;
  TrainResult a = train(make_entropy_model(2, {6}, 2, 42), kXorX, kXorY, config);
  TrainResult b = train(make_entropy_model(2, {6}, 2, 42), kXorX, kXorY, config);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.model == b.model);
}

TEST_CASE("train aborts on divergence") {
  TrainConfig config;
  config.learning_rate = 1e150;
  config.epochs = 50;
  EntropyModel model = make_entropy_model(2, {4}, 2, 0);
  CHECK_THROWS_AS(train(model, kXorX, kXorY, config), TrainingError);
}

TEST_CASE("psi gradients match central differences") {
  Rng rng(43);
  PsiNetwork net = make_psi_network(3, {4}, 2, rng.raw());
  Matrix x = random_matrix(rng, 5, 3, 0, 1);
  std::vector<int> labels{0, 1, 1, 0, 1};
  std::vector<double> grads = psi_backward(net, x, labels);
  std::vector<double*> params = parameter_refs(net);
  REQUIRE(grads.size() == params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    double fd = testutil::central_difference([&] { return psi_loss(net, x, labels); },
                                             params[p], 1e-5);
    CHECK(testutil::gradients_close(grads[p], fd, 1e-4));
  }
}

TEST_CASE("psi_train_prune with a vacuous fan-in equals plain training") {
  Matrix and_x = kXorX;
  std::vector<int> and_y{0, 0, 0, 1};
  TrainConfig config;
  config.epochs = 100;
  PsiNetwork net = make_psi_network(2, {3}, 2, 5);
  PsiTrainResult pruned = psi_train_prune(net, and_x, and_y, config, 99);
  PsiTrainResult plain = psi_train(net, and_x, and_y, config);
  CHECK(pruned.network.layers == plain.network.layers);
  CHECK(pruned.loss_history == plain.loss_history);
  CHECK(pruned.warnings.size() == pruned.network.layers.size());
}

TEST_CASE("psi_train_prune learns AND and satisfies the fan-in invariant") {
  Matrix and_x = kXorX;
  std::vector<int> and_y{0, 0, 0, 1};
  TrainConfig config;
  config.epochs = 2000;
  config.weight_decay = 0.0;
  PsiNetwork net = make_psi_network(2, {4}, 2, 1);
  PsiTrainResult result = psi_train_prune(net, and_x, and_y, config, 2);
  CHECK(accuracy(psi_predict(result.network, and_x), and_y) == 1.0);
  for (std::size_t l = 0; l < result.network.layers.size(); ++l) {
    const DenseLayer& layer = result.network.layers[l];
    for (std::size_t o = 0; o < layer.out_size(); ++o) {
      std::size_t nonzero = 0;
      for (std::size_t j = 0; j < layer.in_size(); ++j) {
        if (layer.weights.at(o, j) != 0.0) ++nonzero;
      }
      CHECK(nonzero <= 2);
    }
  }
}

TEST_CASE("pruned psi weights stay exactly zero through fine-tuning") {
  TrainConfig config;
  config.epochs = 300;
  PsiNetwork net = make_psi_network(3, {5}, 2, 11);
  PsiTrainResult result = psi_train_prune(net, Matrix::from_rows({{0, 0, 1}, {1, 0, 0}, {1, 1, 1}, {0, 1, 0}}),
                                          {0, 1, 1, 0}, config, 2);
  for (std::size_t l = 0; l < result.network.layers.size(); ++l) {
    const Matrix& mask = result.network.weight_mask[l];
    const Matrix& w = result.network.layers[l].weights;
    for (std::size_t i = 0; i < mask.values().size(); ++i) {
      if (mask.values()[i] == 0.0) CHECK(w.values()[i] == 0.0);
    }
  }
}
