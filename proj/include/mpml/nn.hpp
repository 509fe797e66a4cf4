#pragma once

#include <cstdint>
#include <vector>

#include "mpml/common.hpp"

namespace mpml::nn {

enum class LossKind { NegLogLikelihood, KlToTarget };

struct MlpConfig {
  // Full layer widths: input, hidden..., output. Hidden activation is ReLU,
  // output activation is log-softmax.
  std::vector<int> layer_sizes;
  double learning_rate = 0.01;
  double momentum = 0.5;
  int epochs = 20;
  int batch_size = 32;
  uint64_t seed = 0;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  void validate() const;
};

MlpConfig make_config(const std::vector<int>& hidden_sizes, int input_size, int output_size);

struct Batch {
  Matrix features;
  // One row per record: either a one-hot class indicator or an arbitrary
  // probability vector. Each row must sum to 1 within 1e-9.
  Matrix targets;

  int rows() const { return features.rows; }
  void validate() const;
};

struct MlpModel {
  MlpConfig config;
  std::vector<Matrix> weights;  // layer l: [size(l) x size(l+1)]
  std::vector<std::vector<double>> biases;
  std::vector<Matrix> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;

  // Weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from
  // config.seed; velocities zero.
  static MlpModel init(const MlpConfig& cfg);

  int layer_count() const { return static_cast<int>(weights.size()); }
  size_t parameter_count() const;
  bool same_parameters(const MlpModel& other) const;
};

struct ForwardCache {
  // pre[l]: pre-activation of layer l. post[0] is the input; post[l + 1] the
  // activation after layer l (the last one holds log-probabilities).
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

Matrix forward(const MlpModel& model, const Matrix& features);
Matrix forward_cached(const MlpModel& model, const Matrix& features, ForwardCache& cache);

// argmax class per row; ties resolve to the lowest index.
std::vector<int> predict_classes(const MlpModel& model, const Matrix& features);

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // d loss / d logprobs
};

// loss = -(1/rows) * sum_rows sum_k target_k * logprob_k
LossGrad nll_loss_and_grad(const Matrix& logprobs, const Matrix& targets);

// loss = (1/rows) * sum_rows KL(target || exp(logprobs)). The target entropy
// is constant per batch, so the gradient equals the nll gradient.
LossGrad kl_to_target_loss_and_grad(const Matrix& logprobs, const Matrix& targets);

double loss_value(LossKind kind, const Matrix& logprobs, const Matrix& targets);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;  // filled only when requested
};

// Backpropagates an arbitrary gradient w.r.t. the log-probability outputs.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& grad_logprobs,
                   bool want_input_grad = false);

// velocity = momentum * velocity - lr * scale * grad; params += velocity.
// Throws NumericError naming the layer if a gradient is non-finite.
void apply_update(MlpModel& model, const Gradients& grads, double scale);

// One optimizer step on the batch; returns the pre-update loss.
double backward_and_step(MlpModel& model, const Batch& batch, LossKind kind, double scale);

// Worst relative error between analytic gradients and central finite
// differences over every parameter. Pairs where both sides are ~0 are
// skipped. Intended for small models (<= 1e4 parameters).
double grad_check(const MlpModel& model, const Batch& batch, double epsilon,
                  LossKind kind = LossKind::NegLogLikelihood);

// Record order for one epoch: identity permutation shuffled with a seed
// derived from (seed, epoch).
std::vector<int> epoch_order(int n, uint64_t seed, int epoch);

Batch gather_rows(const Batch& full, const std::vector<int>& order, int begin, int end);

// Full seeded SGD loop: per-epoch reshuffle, mini-batches with the last
// partial batch kept, NLL loss.
MlpModel train_classifier(const MlpConfig& cfg, const Batch& data);

}  // namespace mpml::nn
