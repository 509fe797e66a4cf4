#include "mpml/defense.hpp"

#include <algorithm>
#include <cmath>

#include "mpml/kernels.hpp"

namespace mpml::defense {

void DefenseConfig::validate() const {
  if (!(c_weight > 0.0)) throw InputError("DefenseConfig: c_weight must be positive");
  if (g_steps_per_f_step < 1)
    throw InputError("DefenseConfig: g_steps_per_f_step must be positive");
  for (int h : g_hidden_sizes) {
    if (h <= 0) throw InputError("DefenseConfig: g hidden sizes must be positive");
  }
}

Matrix discriminator_forward(const nn::MlpModel& g, const Matrix& f_outputs) {
  if (f_outputs.cols != g.config.input_size())
    throw InputError("discriminator_forward: f output width " + std::to_string(f_outputs.cols) +
                     " does not match g input size " + std::to_string(g.config.input_size()));
  return nn::forward(g, f_outputs);
}

Matrix one_hot_rows(const std::vector<int>& ids, int width) {
  Matrix out(static_cast<int>(ids.size()), width);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= width) throw InputError("one_hot_rows: id out of range");
    out(static_cast<int>(i), ids[i]) = 1.0;
  }
  return out;
}

Matrix uniform_rows(int rows, int width) {
  Matrix out(rows, width);
  const double p = 1.0 / width;
  for (double& x : out.v) x = p;
  return out;
}

namespace {

nn::MlpConfig discriminator_config(const nn::MlpConfig& f_cfg, const DefenseConfig& cfg,
                                   int n_parties) {
  std::vector<int> hidden = cfg.g_hidden_sizes;
  if (hidden.empty()) {
    // Same layers as f except the first and final ones.
    hidden.assign(f_cfg.layer_sizes.begin() + 1, f_cfg.layer_sizes.end() - 1);
  }
  nn::MlpConfig g_cfg = nn::make_config(hidden, f_cfg.output_size(), n_parties);
  g_cfg.learning_rate = f_cfg.learning_rate;
  g_cfg.momentum = f_cfg.momentum;
  g_cfg.epochs = f_cfg.epochs;
  g_cfg.batch_size = f_cfg.batch_size;
  g_cfg.seed = seed_mix(cfg.seed, 0xD15C0ULL);
  return g_cfg;
}

}  // namespace

nn::Gradients adversarial_f_gradient(const nn::MlpModel& f, const nn::MlpModel& g,
                                     const nn::Batch& batch, const Matrix& party_targets,
                                     const DefenseConfig& cfg, double* composite_loss) {
  nn::ForwardCache f_cache;
  Matrix f_out = nn::forward_cached(f, batch.features, f_cache);
  nn::LossGrad task = nn::nll_loss_and_grad(f_out, batch.targets);

  Matrix d_f_out = task.grad;
  double loss = task.loss;

  if (cfg.c_weight != 0.0) {
    Matrix g_in = f_out;
    if (cfg.feed_probabilities) kernels::exp_inplace(g_in);

    nn::ForwardCache g_cache;
    Matrix g_out = nn::forward_cached(g, g_in, g_cache);
    nn::LossGrad adv = cfg.variant == Variant::OneHotParty
                           ? nn::nll_loss_and_grad(g_out, party_targets)
                           : nn::kl_to_target_loss_and_grad(g_out, party_targets);
    const double sign = cfg.variant == Variant::OneHotParty ? -cfg.c_weight : cfg.c_weight;

    nn::Gradients through_g = nn::backward(g, g_cache, adv.grad, /*want_input_grad=*/true);
    if (cfg.feed_probabilities) {
      // Chain rule through the elementwise exp feeding g.
      for (size_t i = 0; i < through_g.input.v.size(); ++i)
        through_g.input.v[i] *= g_in.v[i];
    }
    for (size_t i = 0; i < d_f_out.v.size(); ++i) d_f_out.v[i] += sign * through_g.input.v[i];
    loss += sign * adv.loss;
  }

  if (composite_loss) *composite_loss = loss;
  return nn::backward(f, f_cache, d_f_out);
}

AdversarialOutcome adversarial_train(const nn::Batch& pooled, const std::vector<int>& party_ids,
                                     int n_parties, const nn::MlpConfig& f_cfg,
                                     const DefenseConfig& cfg) {
  pooled.validate();
  f_cfg.validate();
  if (static_cast<size_t>(pooled.rows()) != party_ids.size())
    throw InputError("adversarial_train: party id count does not match record count");
  if (n_parties < 2) throw InputError("adversarial_train: need at least 2 parties");
  int distinct = 0;
  {
    std::vector<bool> seen(static_cast<size_t>(n_parties), false);
    for (int q : party_ids) {
      if (q < 0 || q >= n_parties) throw InputError("adversarial_train: party id out of range");
      if (!seen[static_cast<size_t>(q)]) {
        seen[static_cast<size_t>(q)] = true;
        ++distinct;
      }
    }
  }
  if (distinct < 2)
    throw InputError("adversarial_train: single party id present, discriminator undefined");

  AdversarialOutcome out;
  out.f = nn::MlpModel::init(f_cfg);
  out.g = nn::MlpModel::init(discriminator_config(f_cfg, cfg, n_parties));

  const int n = pooled.rows();
  for (int epoch = 0; epoch < f_cfg.epochs; ++epoch) {
    std::vector<int> order = nn::epoch_order(n, f_cfg.seed, epoch);
    double f_loss_sum = 0.0, g_loss_sum = 0.0, g_correct = 0.0;
    for (int start = 0; start < n; start += f_cfg.batch_size) {
      const int stop = std::min(n, start + f_cfg.batch_size);
      const int rows = stop - start;
      nn::Batch mini = nn::gather_rows(pooled, order, start, stop);
      std::vector<int> mini_ids(static_cast<size_t>(rows));
      for (int i = start; i < stop; ++i)
        mini_ids[static_cast<size_t>(i - start)] =
            party_ids[static_cast<size_t>(order[static_cast<size_t>(i)])];
      Matrix party_one_hot = one_hot_rows(mini_ids, n_parties);

      // Discriminator updates on f's current outputs.
      Matrix f_out = nn::forward(out.f, mini.features);
      Matrix g_in = f_out;
      if (cfg.feed_probabilities) kernels::exp_inplace(g_in);
      nn::Batch g_batch;
      g_batch.features = g_in;
      g_batch.targets = party_one_hot;
      double g_loss = 0.0;
      for (int s = 0; s < cfg.g_steps_per_f_step; ++s)
        g_loss = nn::backward_and_step(out.g, g_batch, nn::LossKind::NegLogLikelihood, 1.0);
      g_loss_sum += g_loss * rows;

      {
        Matrix g_out = nn::forward(out.g, g_in);
        for (int i = 0; i < rows; ++i) {
          const double* r = g_out.row(i);
          int best = 0;
          for (int j = 1; j < n_parties; ++j) {
            if (r[j] > r[best]) best = j;
          }
          if (best == mini_ids[static_cast<size_t>(i)]) g_correct += 1.0;
        }
      }

      // f update; g's parameters frozen inside adversarial_f_gradient.
      Matrix party_targets = cfg.variant == Variant::OneHotParty
                                 ? party_one_hot
                                 : uniform_rows(rows, n_parties);
      double composite = 0.0;
      nn::Gradients f_grads =
          adversarial_f_gradient(out.f, out.g, mini, party_targets, cfg, &composite);
      nn::apply_update(out.f, f_grads, 1.0);
      f_loss_sum += composite * rows;
    }
    out.trace.f_loss.push_back(f_loss_sum / n);
    out.trace.g_loss.push_back(g_loss_sum / n);
    out.trace.g_accuracy.push_back(g_correct / n);
  }
  return out;
}

AdversarialOutcome adversarial_train(const data::Dataset& pooled,
                                     const std::vector<int>& party_ids, int n_parties,
                                     const nn::MlpConfig& f_cfg, const DefenseConfig& cfg) {
  return adversarial_train(data::encode(pooled), party_ids, n_parties, f_cfg, cfg);
}

}  // namespace mpml::defense
