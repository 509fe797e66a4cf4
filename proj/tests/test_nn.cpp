#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpml/nn.hpp"
#include "test_util.hpp"

using namespace mpml;
using mpml::testutil::one_hot_targets;
using mpml::testutil::random_batch;
using mpml::testutil::random_model;

TEST_CASE("zero model outputs the uniform distribution") {
  nn::MlpConfig cfg;
  cfg.layer_sizes = {3, 5, 4};
  cfg.seed = 1;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  for (Matrix& w : model.weights) {
    for (double& x : w.v) x = 0.0;
  }
  for (std::vector<double>& b : model.biases) {
    for (double& x : b) x = 0.0;
  }
  Rng rng(2);
  Matrix x = testutil::random_features(6, 3, rng);
  Matrix lp = nn::forward(model, x);
  const double expected = std::log(1.0 / 4.0);
  for (double v : lp.v) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("single linear layer reproduces a hand-computed log-softmax") {
  nn::MlpConfig cfg;
  cfg.layer_sizes = {2, 2};
  cfg.seed = 0;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  model.weights[0](0, 0) = 0.3;
  model.weights[0](0, 1) = -0.2;
  model.weights[0](1, 0) = 5.0;
  model.weights[0](1, 1) = 5.0;
  model.biases[0] = {0.0, 0.0};

  Matrix x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 0.0;
  Matrix lp = nn::forward(model, x);

  // Input (1,0) selects the first weight row; normalize it by hand.
  const double lse = std::log(std::exp(0.3) + std::exp(-0.2));
  CHECK(lp(0, 0) == doctest::Approx(0.3 - lse).epsilon(1e-12));
  CHECK(lp(0, 1) == doctest::Approx(-0.2 - lse).epsilon(1e-12));
}

TEST_CASE("duplicated record gives identical output rows") {
  nn::MlpModel model = random_model({4, 8, 3}, 11);
  Rng rng(3);
  Matrix one = testutil::random_features(1, 4, rng);
  Matrix two(2, 4);
  for (int j = 0; j < 4; ++j) {
    two(0, j) = one(0, j);
    two(1, j) = one(0, j);
  }
  Matrix lp = nn::forward(model, two);
  for (int j = 0; j < 3; ++j) CHECK(lp(0, j) == lp(1, j));
}

TEST_CASE("forward rows are valid log-distributions at every depth") {
  Rng rng(5);
  for (const auto& layers :
       {std::vector<int>{6, 4}, std::vector<int>{6, 10, 4}, std::vector<int>{6, 12, 8, 4}}) {
    nn::MlpModel model = random_model(layers, 17);
    Matrix x = testutil::random_features(9, 6, rng);
    Matrix lp = nn::forward(model, x);
    for (int i = 0; i < lp.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < lp.cols; ++j) sum += std::exp(lp(i, j));
      CHECK(std::fabs(std::log(sum)) < 1e-6);
    }
  }
}

TEST_CASE("forward rejects mismatched feature width") {
  nn::MlpModel model = random_model({4, 3}, 1);
  Matrix x(2, 5);
  CHECK_THROWS_AS(nn::forward(model, x), InputError);
}

TEST_CASE("nll loss: matching near-one-hot prediction contributes zero loss") {
  Matrix lp(1, 4);
  lp(0, 0) = 0.0;  // log 1 at the target class
  lp(0, 1) = -50.0;
  lp(0, 2) = -50.0;
  lp(0, 3) = -50.0;
  Matrix t = one_hot_targets({0}, 4);
  nn::LossGrad lg = nn::nll_loss_and_grad(lp, t);
  CHECK(lg.loss == 0.0);
}

TEST_CASE("nll loss: uniform prediction over K=4 costs log 4") {
  Matrix lp(2, 4);
  for (double& x : lp.v) x = std::log(0.25);
  Matrix t = one_hot_targets({1, 3}, 4);
  nn::LossGrad lg = nn::nll_loss_and_grad(lp, t);
  CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("nll gradient matches central finite differences") {
  Rng rng(7);
  Matrix lp = testutil::random_features(3, 5, rng, -3.0, -0.1);
  std::vector<int> labels = {0, 2, 4};
  Matrix t = one_hot_targets(labels, 5);
  nn::LossGrad lg = nn::nll_loss_and_grad(lp, t);
  const double eps = 1e-6;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) {
      Matrix up = lp, down = lp;
      up(i, j) += eps;
      down(i, j) -= eps;
      const double numeric =
          (nn::nll_loss_and_grad(up, t).loss - nn::nll_loss_and_grad(down, t).loss) / (2 * eps);
      const double analytic = lg.grad(i, j);
      const double mag = std::max({std::fabs(numeric), std::fabs(analytic), 1e-12});
      CHECK(std::fabs(numeric - analytic) / mag < 1e-6);
    }
  }
}

TEST_CASE("nll rejects non-finite input") {
  Matrix lp(1, 2);
  lp(0, 0) = std::nan("");
  lp(0, 1) = -1.0;
  Matrix t = one_hot_targets({0}, 2);
  CHECK_THROWS_AS(nn::nll_loss_and_grad(lp, t), NumericError);
}

TEST_CASE("kl loss is zero when the prediction equals the target") {
  Matrix t(2, 5);
  for (double& x : t.v) x = 0.2;
  Matrix lp(2, 5);
  for (double& x : lp.v) x = std::log(0.2);
  nn::LossGrad lg = nn::kl_to_target_loss_and_grad(lp, t);
  CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("kl against a peaked prediction matches an independent summation") {
  // Uniform target over n=5 against prediction (0.96, 0.01 x 4).
  Matrix t(1, 5);
  for (double& x : t.v) x = 0.2;
  Matrix lp(1, 5);
  lp(0, 0) = std::log(0.96);
  for (int j = 1; j < 5; ++j) lp(0, j) = std::log(0.01);

  double expected = 0.0;
  const double probs[5] = {0.96, 0.01, 0.01, 0.01, 0.01};
  for (int j = 0; j < 5; ++j) expected += 0.2 * std::log(0.2 / probs[j]);

  nn::LossGrad lg = nn::kl_to_target_loss_and_grad(lp, t);
  CHECK(lg.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kl gradient equals the nll gradient") {
  Rng rng(13);
  Matrix lp = testutil::random_features(4, 6, rng, -3.0, -0.1);
  Matrix t(4, 6);
  for (int i = 0; i < 4; ++i) {
    // Arbitrary probability rows.
    double sum = 0.0;
    for (int j = 0; j < 6; ++j) {
      t(i, j) = rng.uniform(0.01, 1.0);
      sum += t(i, j);
    }
    for (int j = 0; j < 6; ++j) t(i, j) /= sum;
  }
  nn::LossGrad kl = nn::kl_to_target_loss_and_grad(lp, t);
  nn::LossGrad nll = nn::nll_loss_and_grad(lp, t);
  for (size_t i = 0; i < kl.grad.v.size(); ++i)
    CHECK(std::fabs(kl.grad.v[i] - nll.grad.v[i]) <= 1e-12);
}

TEST_CASE("step with scale 0 only decays the velocity") {
  Rng rng(21);
  nn::MlpConfig cfg;
  cfg.layer_sizes = {3, 4, 2};
  cfg.momentum = 0.5;
  cfg.seed = 9;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  nn::Batch batch = random_batch(5, 3, 2, rng);

  // Fresh model: velocity zero, so nothing may move.
  nn::MlpModel before = model;
  nn::backward_and_step(model, batch, nn::LossKind::NegLogLikelihood, 0.0);
  CHECK(model.same_parameters(before));

  // Build up velocity, then confirm the zero-scale step applies only the
  // decayed velocity.
  nn::backward_and_step(model, batch, nn::LossKind::NegLogLikelihood, 1.0);
  nn::MlpModel snapshot = model;
  nn::backward_and_step(model, batch, nn::LossKind::NegLogLikelihood, 0.0);
  for (int l = 0; l < model.layer_count(); ++l) {
    for (size_t i = 0; i < model.weights[l].v.size(); ++i) {
      const double expected =
          snapshot.weights[l].v[i] + cfg.momentum * snapshot.weight_velocity[l].v[i];
      CHECK(model.weights[l].v[i] == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("plain sgd step moves every parameter by exactly -lr * grad") {
  Rng rng(23);
  nn::MlpConfig cfg;
  cfg.layer_sizes = {4, 6, 3};
  cfg.momentum = 0.0;
  cfg.learning_rate = 0.05;
  cfg.seed = 31;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  nn::Batch batch = random_batch(7, 4, 3, rng);

  nn::ForwardCache cache;
  Matrix lp = nn::forward_cached(model, batch.features, cache);
  nn::Gradients grads =
      nn::backward(model, cache, nn::nll_loss_and_grad(lp, batch.targets).grad);

  nn::MlpModel stepped = model;
  nn::backward_and_step(stepped, batch, nn::LossKind::NegLogLikelihood, 1.0);
  for (int l = 0; l < model.layer_count(); ++l) {
    for (size_t i = 0; i < model.weights[l].v.size(); ++i) {
      const double expected = model.weights[l].v[i] - cfg.learning_rate * grads.weights[l].v[i];
      CHECK(stepped.weights[l].v[i] == doctest::Approx(expected).epsilon(1e-15));
    }
    for (size_t i = 0; i < model.biases[l].size(); ++i) {
      const double expected = model.biases[l][i] - cfg.learning_rate * grads.biases[l][i];
      CHECK(stepped.biases[l][i] == doctest::Approx(expected).epsilon(1e-15));
    }
  }
}

TEST_CASE("seeded training is bit-deterministic") {
  Rng rng(29);
  nn::Batch data = random_batch(64, 5, 3, rng);
  nn::MlpConfig cfg;
  cfg.layer_sizes = {5, 12, 3};
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 4242;
  nn::MlpModel a = nn::train_classifier(cfg, data);
  nn::MlpModel b = nn::train_classifier(cfg, data);
  CHECK(a.same_parameters(b));
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
}

TEST_CASE("grad_check: linear softmax model") {
  Rng rng(37);
  nn::MlpModel model = random_model({6, 4}, 51);
  nn::Batch batch = random_batch(8, 6, 4, rng);
  CHECK(nn::grad_check(model, batch, 1e-5) < 1e-6);
}

TEST_CASE("grad_check: two hidden layers") {
  Rng rng(41);
  nn::MlpModel model = random_model({5, 8, 6, 3}, 53);
  nn::Batch batch = random_batch(10, 5, 3, rng);
  CHECK(nn::grad_check(model, batch, 1e-5) < 1e-4);
}

TEST_CASE("grad_check on an all-zero batch skips zero first-layer gradients") {
  nn::MlpModel model = random_model({4, 6, 2}, 57);
  nn::Batch batch;
  batch.features = Matrix(3, 4);  // all zeros: no input signal
  batch.targets = one_hot_targets({0, 1, 0}, 2);

  nn::ForwardCache cache;
  Matrix lp = nn::forward_cached(model, batch.features, cache);
  nn::Gradients grads =
      nn::backward(model, cache, nn::nll_loss_and_grad(lp, batch.targets).grad);
  for (double g : grads.weights[0].v) CHECK(g == 0.0);

  CHECK(nn::grad_check(model, batch, 1e-5) < 1e-4);
}

TEST_CASE("full-batch loss is non-increasing with small lr and no momentum") {
  Rng rng(61);
  nn::Batch data = random_batch(24, 6, 3, rng);
  nn::MlpConfig cfg;
  cfg.layer_sizes = {6, 10, 3};
  cfg.learning_rate = 1e-3;
  cfg.momentum = 0.0;
  cfg.seed = 71;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  double prev = 1e300;
  for (int step = 0; step < 50; ++step) {
    const double loss = nn::backward_and_step(model, data, nn::LossKind::NegLogLikelihood, 1.0);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
}

TEST_CASE("batch validation rejects rows that do not sum to one") {
  nn::Batch b;
  b.features = Matrix(1, 2);
  b.targets = Matrix(1, 3);
  b.targets(0, 0) = 0.5;
  b.targets(0, 1) = 0.4;
  CHECK_THROWS_AS(b.validate(), InputError);
}

TEST_CASE("config validation catches bad hyperparameters") {
  nn::MlpConfig cfg;
  cfg.layer_sizes = {4};
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.layer_sizes = {4, 2};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.momentum = 0.5;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}
