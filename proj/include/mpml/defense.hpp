#pragma once

#include <cstdint>
#include <vector>

#include "mpml/dataset.hpp"
#include "mpml/nn.hpp"

namespace mpml::defense {

// Target vector handed to the adversarial term of f's objective:
// OneHotParty pushes the discriminator's likelihood of the true party down;
// UniformKL pulls the discriminator's output toward the uniform vector.
enum class Variant { OneHotParty, UniformKL };

struct DefenseConfig {
  Variant variant = Variant::OneHotParty;
  double c_weight = 3.0;
  // Discriminator hidden layers; empty means "same hidden layers as f".
  std::vector<int> g_hidden_sizes;
  int g_steps_per_f_step = 1;
  // Feed exp(logprobs) to the discriminator instead of the log vector.
  bool feed_probabilities = false;
  uint64_t seed = 0;

  void validate() const;  // c_weight > 0; g_steps_per_f_step >= 1
};

struct AdvTrainTrace {
  std::vector<double> f_loss;      // composite objective, per epoch
  std::vector<double> g_loss;      // discriminator nll, per epoch
  std::vector<double> g_accuracy;  // party prediction accuracy, per epoch
};

struct AdversarialOutcome {
  nn::MlpModel f;
  nn::MlpModel g;
  AdvTrainTrace trace;
};

// Discriminator pass over f's output vectors; rows are log-distributions
// over the parties.
Matrix discriminator_forward(const nn::MlpModel& g, const Matrix& f_outputs);

Matrix one_hot_rows(const std::vector<int>& ids, int width);
Matrix uniform_rows(int rows, int width);

// f-step gradient of the composite objective
//   OneHotParty: nll_f - c * nll_g(true parties)
//   UniformKL:   nll_f + c * KL(uniform || g's output)
// with the adversarial term flowing through g into f while g's parameters
// stay frozen.
nn::Gradients adversarial_f_gradient(const nn::MlpModel& f, const nn::MlpModel& g,
                                     const nn::Batch& batch, const Matrix& party_targets,
                                     const DefenseConfig& cfg, double* composite_loss = nullptr);

// Alternating per-batch optimization: g_steps_per_f_step discriminator
// updates, then one f update. Same epoch shuffle scheme as plain training,
// so c_weight = 0 reproduces nn::train_classifier bit for bit.
AdversarialOutcome adversarial_train(const nn::Batch& pooled, const std::vector<int>& party_ids,
                                     int n_parties, const nn::MlpConfig& f_cfg,
                                     const DefenseConfig& cfg);

// Convenience overload for schema-typed data.
AdversarialOutcome adversarial_train(const data::Dataset& pooled,
                                     const std::vector<int>& party_ids, int n_parties,
                                     const nn::MlpConfig& f_cfg, const DefenseConfig& cfg);

}  // namespace mpml::defense
