#include "mpml/server.hpp"

#include <algorithm>
#include <cstring>

namespace mpml::server {

Released release_policy(double err_local, double err_multi) {
  return err_local <= err_multi ? Released::Local : Released::MultiParty;
}

double validation_error(const nn::MlpModel& model, const nn::Batch& batch) {
  if (batch.rows() == 0) throw InputError("validation_error: empty dataset");
  Matrix logprobs = nn::forward(model, batch.features);
  int wrong = 0;
  for (int i = 0; i < logprobs.rows; ++i) {
    const double* r = logprobs.row(i);
    int best = 0;
    for (int j = 1; j < logprobs.cols; ++j) {
      if (r[j] > r[best]) best = j;
    }
    const double* t = batch.targets.row(i);
    int truth = 0;
    for (int j = 1; j < batch.targets.cols; ++j) {
      if (t[j] > t[truth]) truth = j;
    }
    if (best != truth) ++wrong;
  }
  return static_cast<double>(wrong) / logprobs.rows;
}

double validation_error(const nn::MlpModel& model, const data::Dataset& dataset) {
  if (dataset.records.empty()) throw InputError("validation_error: empty dataset");
  return validation_error(model, data::encode(dataset));
}

uint64_t local_model_seed(uint64_t seed, int party_id) {
  return seed_mix(seed, 0x10CA1ULL, static_cast<uint64_t>(party_id));
}

namespace {

nn::Batch concat_batches(const std::vector<const nn::Batch*>& parts) {
  int rows = 0;
  for (const nn::Batch* b : parts) rows += b->rows();
  nn::Batch out;
  out.features = Matrix(rows, parts.front()->features.cols);
  out.targets = Matrix(rows, parts.front()->targets.cols);
  int at = 0;
  for (const nn::Batch* b : parts) {
    if (b->features.cols != out.features.cols || b->targets.cols != out.targets.cols)
      throw InputError("train_model: party batches have mismatched widths");
    std::memcpy(out.features.row(at), b->features.v.data(), sizeof(double) * b->features.v.size());
    std::memcpy(out.targets.row(at), b->targets.v.data(), sizeof(double) * b->targets.v.size());
    at += b->rows();
  }
  return out;
}

}  // namespace

PooledData pool_encoded(const std::vector<EncodedParty>& parties) {
  if (parties.empty()) throw InputError("pool_encoded: no parties");
  std::vector<const EncodedParty*> ordered;
  for (const EncodedParty& p : parties) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const EncodedParty* a, const EncodedParty* b) { return a->party_id < b->party_id; });
  PooledData pooled;
  std::vector<const nn::Batch*> parts;
  for (const EncodedParty* p : ordered) {
    parts.push_back(&p->train);
    for (int r = 0; r < p->train.rows(); ++r) pooled.party_ids.push_back(p->party_id);
  }
  pooled.batch = concat_batches(parts);
  return pooled;
}

std::vector<ReleaseDecision> release_decisions(const nn::MlpModel& multi,
                                               const std::vector<nn::MlpModel>& locals,
                                               const std::vector<EncodedParty>& parties) {
  std::vector<ReleaseDecision> decisions;
  for (size_t i = 0; i < parties.size(); ++i) {
    ReleaseDecision d;
    d.party_id = parties[i].party_id;
    d.err_multi = validation_error(multi, parties[i].val);
    d.err_local = validation_error(locals[i], parties[i].val);
    d.released = release_policy(d.err_local, d.err_multi);
    decisions.push_back(d);
  }
  return decisions;
}

TrainOutcome train_model_encoded(const std::vector<EncodedParty>& parties,
                                 const nn::MlpConfig& cfg,
                                 const std::optional<defense::DefenseConfig>& defense) {
  if (parties.size() < 2) throw InputError("train_model: need at least 2 parties");
  cfg.validate();

  // Canonical pooling order: ascending party id, original record order
  // within a party. Party ids index the discriminator's output, so they
  // must be unique and in range.
  std::vector<const EncodedParty*> ordered;
  for (const EncodedParty& p : parties) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const EncodedParty* a, const EncodedParty* b) { return a->party_id < b->party_id; });
  const int n_parties = static_cast<int>(parties.size());
  for (int i = 0; i < n_parties; ++i) {
    if (ordered[static_cast<size_t>(i)]->party_id < 0 ||
        ordered[static_cast<size_t>(i)]->party_id >= n_parties)
      throw InputError("train_model: party ids must be unique in [0, n)");
    if (i > 0 && ordered[static_cast<size_t>(i)]->party_id ==
                     ordered[static_cast<size_t>(i) - 1]->party_id)
      throw InputError("train_model: duplicate party id");
  }

  PooledData pooled = pool_encoded(parties);

  TrainOutcome outcome;
  if (defense) {
    defense::AdversarialOutcome adv =
        defense::adversarial_train(pooled.batch, pooled.party_ids, n_parties, cfg, *defense);
    outcome.multi_party_model = std::move(adv.f);
    outcome.discriminator = std::move(adv.g);
    outcome.defense_trace = std::move(adv.trace);
  } else {
    outcome.multi_party_model = nn::train_classifier(cfg, pooled.batch);
  }

  // Locals in the callers' party order (which we normalized to id order).
  std::vector<EncodedParty> by_id;
  for (const EncodedParty* p : ordered) by_id.push_back(*p);
  for (const EncodedParty& p : by_id) {
    nn::MlpConfig local_cfg = cfg;
    local_cfg.seed = local_model_seed(cfg.seed, p.party_id);
    outcome.local_models.push_back(nn::train_classifier(local_cfg, p.train));
  }
  outcome.decisions = release_decisions(outcome.multi_party_model, outcome.local_models, by_id);
  return outcome;
}

TrainOutcome train_model(const std::vector<data::PartyData>& parties, const nn::MlpConfig& cfg,
                         const std::optional<defense::DefenseConfig>& defense) {
  if (parties.size() < 2) throw InputError("train_model: need at least 2 parties");
  const data::AttributeSchema& schema = parties.front().train.schema;
  for (const data::PartyData& p : parties) {
    if (!(p.train.schema == schema) || !(p.val.schema == schema))
      throw InputError("train_model: parties do not share a schema");
  }
  std::vector<EncodedParty> encoded;
  for (const data::PartyData& p : parties) {
    EncodedParty e;
    e.party_id = p.party_id;
    e.train = data::encode(p.train);
    e.val = data::encode(p.val);
    encoded.push_back(std::move(e));
  }
  return train_model_encoded(encoded, cfg, defense);
}

}  // namespace mpml::server
