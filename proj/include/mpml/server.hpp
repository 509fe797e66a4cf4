#pragma once

#include <optional>
#include <vector>

#include "mpml/dataset.hpp"
#include "mpml/defense.hpp"
#include "mpml/nn.hpp"

namespace mpml::server {

enum class Released { MultiParty, Local };

// The local model is released exactly when its error is less than or equal
// to the multi-party model's error on the party's validation set.
Released release_policy(double err_local, double err_multi);

struct ReleaseDecision {
  int party_id = 0;
  Released released = Released::MultiParty;
  double err_multi = 0.0;
  double err_local = 0.0;
};

struct TrainOutcome {
  nn::MlpModel multi_party_model;
  std::vector<nn::MlpModel> local_models;  // ordered by party id
  std::vector<ReleaseDecision> decisions;
  std::optional<nn::MlpModel> discriminator;   // present when a defense ran
  std::optional<defense::AdvTrainTrace> defense_trace;
};

// Fraction of records whose argmax predicted class differs from the label.
double validation_error(const nn::MlpModel& model, const nn::Batch& batch);
double validation_error(const nn::MlpModel& model, const data::Dataset& dataset);

struct EncodedParty {
  int party_id = 0;
  nn::Batch train;
  nn::Batch val;
};

// Trains the multi-party model on the union of the party training sets
// (pooled in party-id order so the result does not depend on the order the
// parties arrive in), one local model per party with the same
// hyperparameters, and applies the release policy on each party's
// validation set.
TrainOutcome train_model(const std::vector<data::PartyData>& parties, const nn::MlpConfig& cfg,
                         const std::optional<defense::DefenseConfig>& defense = std::nullopt);

TrainOutcome train_model_encoded(const std::vector<EncodedParty>& parties,
                                 const nn::MlpConfig& cfg,
                                 const std::optional<defense::DefenseConfig>& defense);

std::vector<ReleaseDecision> release_decisions(const nn::MlpModel& multi,
                                               const std::vector<nn::MlpModel>& locals,
                                               const std::vector<EncodedParty>& parties);

struct PooledData {
  nn::Batch batch;
  std::vector<int> party_ids;  // one per pooled record
};

// Party training sets concatenated in ascending party-id order.
PooledData pool_encoded(const std::vector<EncodedParty>& parties);

// Derived seed for party i's local model; the multi-party model uses
// cfg.seed unchanged.
uint64_t local_model_seed(uint64_t seed, int party_id);

}  // namespace mpml::server
