#include "mpml/nn.hpp"

#include <cmath>
#include <cstring>

#include "mpml/kernels.hpp"

namespace mpml::nn {

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) throw InputError("MlpConfig: need at least 2 layers");
  for (int s : layer_sizes) {
    if (s <= 0) throw InputError("MlpConfig: layer sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw InputError("MlpConfig: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("MlpConfig: momentum must be in [0,1)");
  if (epochs <= 0) throw InputError("MlpConfig: epochs must be positive");
  if (batch_size <= 0) throw InputError("MlpConfig: batch_size must be positive");
}

MlpConfig make_config(const std::vector<int>& hidden_sizes, int input_size, int output_size) {
  MlpConfig cfg;
  cfg.layer_sizes.push_back(input_size);
  for (int h : hidden_sizes) cfg.layer_sizes.push_back(h);
  cfg.layer_sizes.push_back(output_size);
  return cfg;
}

void Batch::validate() const {
  if (features.rows != targets.rows) throw InputError("Batch: feature/target row counts differ");
  for (int i = 0; i < targets.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < targets.cols; ++j) sum += targets(i, j);
    if (std::fabs(sum - 1.0) > 1e-9)
      throw InputError("Batch: target row " + std::to_string(i) + " sums to " +
                       std::to_string(sum) + ", expected 1");
  }
}

MlpModel MlpModel::init(const MlpConfig& cfg) {
  cfg.validate();
  MlpModel m;
  m.config = cfg;
  Rng rng(cfg.seed);
  const int layers = static_cast<int>(cfg.layer_sizes.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const int fan_in = cfg.layer_sizes[static_cast<size_t>(l)];
    const int fan_out = cfg.layer_sizes[static_cast<size_t>(l) + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (double& x : w.v) x = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    std::vector<double> b(static_cast<size_t>(fan_out));
    // Random biases keep pre-activations off the exact ReLU kink, which
    // would otherwise make finite-difference checks ill-defined.
    for (double& x : b) x = rng.uniform(-bound, bound);
    m.biases.push_back(std::move(b));
    m.weight_velocity.emplace_back(fan_in, fan_out);
    m.bias_velocity.emplace_back(static_cast<size_t>(fan_out), 0.0);
  }
  return m;
}

size_t MlpModel::parameter_count() const {
  size_t n = 0;
  for (int l = 0; l < layer_count(); ++l)
    n += weights[static_cast<size_t>(l)].v.size() + biases[static_cast<size_t>(l)].size();
  return n;
}

bool MlpModel::same_parameters(const MlpModel& other) const {
  return weights == other.weights && biases == other.biases;
}

Matrix forward_cached(const MlpModel& model, const Matrix& features, ForwardCache& cache) {
  if (features.cols != model.config.input_size())
    throw InputError("forward: feature width " + std::to_string(features.cols) +
                     " does not match input size " + std::to_string(model.config.input_size()));
  const int layers = model.layer_count();
  cache.pre.assign(static_cast<size_t>(layers), Matrix());
  cache.post.assign(static_cast<size_t>(layers) + 1, Matrix());
  cache.post[0] = features;
  for (int l = 0; l < layers; ++l) {
    const Matrix& in = cache.post[static_cast<size_t>(l)];
    Matrix z(in.rows, model.weights[static_cast<size_t>(l)].cols);
    kernels::matmul(in, model.weights[static_cast<size_t>(l)], z);
    kernels::add_bias_rows(z, model.biases[static_cast<size_t>(l)]);
    cache.pre[static_cast<size_t>(l)] = z;
    if (l + 1 < layers) {
      kernels::relu_inplace(z);
    } else {
      kernels::log_softmax_rows(z);
    }
    cache.post[static_cast<size_t>(l) + 1] = std::move(z);
  }
  return cache.post.back();
}

Matrix forward(const MlpModel& model, const Matrix& features) {
  ForwardCache cache;
  return forward_cached(model, features, cache);
}

std::vector<int> predict_classes(const MlpModel& model, const Matrix& features) {
  Matrix lp = forward(model, features);
  std::vector<int> out(static_cast<size_t>(lp.rows), 0);
  for (int i = 0; i < lp.rows; ++i) {
    const double* r = lp.row(i);
    int best = 0;
    for (int j = 1; j < lp.cols; ++j) {
      if (r[j] > r[best]) best = j;
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

namespace {

void check_loss_inputs(const Matrix& logprobs, const Matrix& targets) {
  if (!logprobs.same_shape(targets)) throw InputError("loss: logprob/target shape mismatch");
  if (logprobs.rows == 0) throw InputError("loss: empty batch");
  if (!logprobs.all_finite() || !targets.all_finite())
    throw NumericError("loss: non-finite input");
}

}  // namespace

LossGrad nll_loss_and_grad(const Matrix& logprobs, const Matrix& targets) {
  check_loss_inputs(logprobs, targets);
  const double inv_rows = 1.0 / logprobs.rows;
  LossGrad out;
  out.grad = Matrix(logprobs.rows, logprobs.cols);
  double loss = 0.0;
  for (int i = 0; i < logprobs.rows; ++i) {
    const double* lp = logprobs.row(i);
    const double* t = targets.row(i);
    double* g = out.grad.row(i);
    for (int j = 0; j < logprobs.cols; ++j) {
      loss -= t[j] * lp[j];
      g[j] = -t[j] * inv_rows;
    }
  }
  out.loss = loss * inv_rows;
  return out;
}

LossGrad kl_to_target_loss_and_grad(const Matrix& logprobs, const Matrix& targets) {
  check_loss_inputs(logprobs, targets);
  const double inv_rows = 1.0 / logprobs.rows;
  LossGrad out;
  out.grad = Matrix(logprobs.rows, logprobs.cols);
  double loss = 0.0;
  for (int i = 0; i < logprobs.rows; ++i) {
    const double* lp = logprobs.row(i);
    const double* t = targets.row(i);
    double* g = out.grad.row(i);
    for (int j = 0; j < logprobs.cols; ++j) {
      if (t[j] > 0.0) loss += t[j] * (std::log(t[j]) - lp[j]);
      // d/d logprob of the KL term; the target-entropy part is constant, so
      // this is exactly the nll gradient.
      g[j] = -t[j] * inv_rows;
    }
  }
  out.loss = loss * inv_rows;
  return out;
}

double loss_value(LossKind kind, const Matrix& logprobs, const Matrix& targets) {
  return kind == LossKind::NegLogLikelihood ? nll_loss_and_grad(logprobs, targets).loss
                                            : kl_to_target_loss_and_grad(logprobs, targets).loss;
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& grad_logprobs,
                   bool want_input_grad) {
  const int layers = model.layer_count();
  const Matrix& logprobs = cache.post.back();
  if (!grad_logprobs.same_shape(logprobs)) throw InputError("backward: output grad shape mismatch");

  Gradients grads;
  grads.weights.assign(static_cast<size_t>(layers), Matrix());
  grads.biases.assign(static_cast<size_t>(layers), {});

  // Through log-softmax: dz = g - softmax(z) * rowsum(g).
  Matrix delta(grad_logprobs.rows, grad_logprobs.cols);
  for (int i = 0; i < delta.rows; ++i) {
    const double* g = grad_logprobs.row(i);
    const double* lp = logprobs.row(i);
    double gsum = 0.0;
    for (int j = 0; j < delta.cols; ++j) gsum += g[j];
    double* d = delta.row(i);
    for (int j = 0; j < delta.cols; ++j) d[j] = g[j] - std::exp(lp[j]) * gsum;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& in = cache.post[static_cast<size_t>(l)];
    Matrix dw(model.weights[static_cast<size_t>(l)].rows, model.weights[static_cast<size_t>(l)].cols);
    kernels::matmul_at_b(in, delta, dw);
    std::vector<double> db;
    kernels::col_sums(delta, db);
    grads.weights[static_cast<size_t>(l)] = std::move(dw);
    grads.biases[static_cast<size_t>(l)] = std::move(db);
    if (l > 0 || want_input_grad) {
      Matrix prev(delta.rows, model.weights[static_cast<size_t>(l)].rows);
      kernels::matmul_a_bt(delta, model.weights[static_cast<size_t>(l)], prev);
      if (l > 0) kernels::relu_mask(cache.pre[static_cast<size_t>(l) - 1], prev);
      delta = std::move(prev);
    }
  }
  if (want_input_grad) grads.input = std::move(delta);
  return grads;
}

void apply_update(MlpModel& model, const Gradients& grads, double scale) {
  const int layers = model.layer_count();
  const double lr = model.config.learning_rate;
  const double mom = model.config.momentum;
  for (int l = 0; l < layers; ++l) {
    const Matrix& gw = grads.weights[static_cast<size_t>(l)];
    const std::vector<double>& gb = grads.biases[static_cast<size_t>(l)];
    if (!gw.all_finite())
      throw NumericError("apply_update: non-finite weight gradient at layer " + std::to_string(l));
    for (double x : gb) {
      if (!std::isfinite(x))
        throw NumericError("apply_update: non-finite bias gradient at layer " + std::to_string(l));
    }
    Matrix& w = model.weights[static_cast<size_t>(l)];
    Matrix& wv = model.weight_velocity[static_cast<size_t>(l)];
    for (size_t i = 0; i < w.v.size(); ++i) {
      wv.v[i] = mom * wv.v[i] - lr * scale * gw.v[i];
      w.v[i] += wv.v[i];
    }
    std::vector<double>& b = model.biases[static_cast<size_t>(l)];
    std::vector<double>& bv = model.bias_velocity[static_cast<size_t>(l)];
    for (size_t i = 0; i < b.size(); ++i) {
      bv[i] = mom * bv[i] - lr * scale * gb[i];
      b[i] += bv[i];
    }
  }
}

double backward_and_step(MlpModel& model, const Batch& batch, LossKind kind, double scale) {
  ForwardCache cache;
  Matrix logprobs = forward_cached(model, batch.features, cache);
  LossGrad lg = kind == LossKind::NegLogLikelihood ? nll_loss_and_grad(logprobs, batch.targets)
                                                   : kl_to_target_loss_and_grad(logprobs, batch.targets);
  Gradients grads = backward(model, cache, lg.grad);
  apply_update(model, grads, scale);
  return lg.loss;
}

double grad_check(const MlpModel& model, const Batch& batch, double epsilon, LossKind kind) {
  ForwardCache cache;
  Matrix logprobs = forward_cached(model, batch.features, cache);
  LossGrad lg = kind == LossKind::NegLogLikelihood ? nll_loss_and_grad(logprobs, batch.targets)
                                                   : kl_to_target_loss_and_grad(logprobs, batch.targets);
  Gradients analytic = backward(model, cache, lg.grad);

  MlpModel probe = model;
  auto loss_at = [&]() {
    return loss_value(kind, forward(probe, batch.features), batch.targets);
  };
  double worst = 0.0;
  auto check_one = [&](double* param, double analytic_grad) {
    const double saved = *param;
    *param = saved + epsilon;
    const double up = loss_at();
    *param = saved - epsilon;
    const double down = loss_at();
    *param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double mag = std::max(std::fabs(analytic_grad), std::fabs(numeric));
    if (mag < 1e-10) return;  // zero-pair: nothing to compare
    worst = std::max(worst, std::fabs(analytic_grad - numeric) / mag);
  };
  for (int l = 0; l < model.layer_count(); ++l) {
    Matrix& w = probe.weights[static_cast<size_t>(l)];
    for (size_t i = 0; i < w.v.size(); ++i)
      check_one(&w.v[i], analytic.weights[static_cast<size_t>(l)].v[i]);
    std::vector<double>& b = probe.biases[static_cast<size_t>(l)];
    for (size_t i = 0; i < b.size(); ++i)
      check_one(&b[i], analytic.biases[static_cast<size_t>(l)][i]);
  }
  return worst;
}

std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
  std::vector<int> order = identity_permutation(n);
  Rng rng(seed_mix(seed, 0x45504f43ULL, static_cast<uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

Batch gather_rows(const Batch& full, const std::vector<int>& order, int begin, int end) {
  Batch out;
  out.features = Matrix(end - begin, full.features.cols);
  out.targets = Matrix(end - begin, full.targets.cols);
  for (int i = begin; i < end; ++i) {
    const int src = order[static_cast<size_t>(i)];
    std::memcpy(out.features.row(i - begin), full.features.row(src),
                sizeof(double) * static_cast<size_t>(full.features.cols));
    std::memcpy(out.targets.row(i - begin), full.targets.row(src),
                sizeof(double) * static_cast<size_t>(full.targets.cols));
  }
  return out;
}

MlpModel train_classifier(const MlpConfig& cfg, const Batch& data) {
  data.validate();
  MlpModel model = MlpModel::init(cfg);
  const int n = data.rows();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = epoch_order(n, cfg.seed, epoch);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      Batch mini = gather_rows(data, order, start, stop);
      backward_and_step(model, mini, LossKind::NegLogLikelihood, 1.0);
    }
  }
  return model;
}

}  // namespace mpml::nn
