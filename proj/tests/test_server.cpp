#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "mpml/server.hpp"
#include "mpml/synth.hpp"
#include "test_util.hpp"

using namespace mpml;
using mpml::testutil::make_record;
using mpml::testutil::small_schema;

namespace {

data::PartitionResult separable_parties(int n_parties, int per_party, int val, uint64_t seed) {
  data::SynthSpec spec;
  spec.categorical_cardinalities = {4, 4};
  spec.numeric_attributes = 1;
  spec.classes = 3;
  spec.rule_sharpness = 10.0;
  return data::synth_generate_parties(spec, n_parties, per_party, val, seed);
}

nn::MlpConfig small_model_config(const data::AttributeSchema& schema, uint64_t seed) {
  nn::MlpConfig cfg = nn::make_config({16}, data::encoded_width(schema), schema.class_count());
  cfg.epochs = 10;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("release policy: ties and exhaustive comparisons release the local model") {
  // err_local <= err_multi -> Local, otherwise MultiParty; swept over a grid.
  const double grid[] = {0.0, 0.1, 0.25, 0.25, 0.3, 0.5, 0.75, 1.0};
  for (double err_local : grid) {
    for (double err_multi : grid) {
      const server::Released got = server::release_policy(err_local, err_multi);
      if (err_local <= err_multi) {
        CHECK(got == server::Released::Local);
      } else {
        CHECK(got == server::Released::MultiParty);
      }
    }
  }
  CHECK(server::release_policy(0.25, 0.25) == server::Released::Local);
  CHECK(server::release_policy(0.30, 0.25) == server::Released::MultiParty);
  CHECK(server::release_policy(0.25, 0.30) == server::Released::Local);
}

TEST_CASE("validation_error counts argmax mismatches") {
  data::Dataset val;
  val.schema = small_schema();
  // Lookup model predicts by the size attribute: small -> 0, large -> 1.
  nn::MlpConfig cfg;
  cfg.layer_sizes = {6, 3};
  cfg.seed = 0;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  for (double& x : model.weights[0].v) x = 0.0;
  for (double& x : model.biases[0]) x = 0.0;
  model.weights[0](3, 0) = 10.0;
  model.weights[0](4, 1) = 10.0;

  val.records.push_back(make_record(0, 0, 1.0, 0));  // correct
  val.records.push_back(make_record(1, 0, 2.0, 0));  // correct
  val.records.push_back(make_record(2, 1, 3.0, 1));  // correct
  val.records.push_back(make_record(0, 1, 4.0, 2));  // predicted 1, true 2
  CHECK(server::validation_error(model, val) == 0.25);

  data::Dataset empty;
  empty.schema = small_schema();
  CHECK_THROWS_AS(server::validation_error(model, empty), InputError);
}

TEST_CASE("constant model on a balanced set errs at (K-1)/K") {
  data::Dataset val;
  val.schema = small_schema();
  for (int i = 0; i < 30; ++i) val.records.push_back(make_record(i % 3, i % 2, 1.0, i % 3));
  nn::MlpConfig cfg;
  cfg.layer_sizes = {6, 3};
  cfg.seed = 0;
  nn::MlpModel model = nn::MlpModel::init(cfg);
  for (double& x : model.weights[0].v) x = 0.0;
  for (double& x : model.biases[0]) x = 0.0;
  model.biases[0][1] = 8.0;
  CHECK(server::validation_error(model, val) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("without a defense, f_* equals a direct training run bitwise") {
  data::PartitionResult parts = separable_parties(3, 40, 12, 900);
  nn::MlpConfig cfg = small_model_config(parts.shared_val.schema, 1717);

  server::TrainOutcome outcome = server::train_model(parts.parties, cfg);

  data::Dataset pooled;
  pooled.schema = parts.parties[0].train.schema;
  for (const data::PartyData& p : parts.parties) {
    for (const data::Record& r : p.train.records) pooled.records.push_back(r);
  }
  nn::MlpModel direct = nn::train_classifier(cfg, data::encode(pooled));
  CHECK(outcome.multi_party_model.same_parameters(direct));
}

TEST_CASE("party order does not change f_* parameters") {
  data::PartitionResult parts = separable_parties(4, 30, 12, 901);
  nn::MlpConfig cfg = small_model_config(parts.shared_val.schema, 4444);

  server::TrainOutcome a = server::train_model(parts.parties, cfg);

  std::vector<data::PartyData> permuted = {parts.parties[2], parts.parties[0], parts.parties[3],
                                           parts.parties[1]};
  server::TrainOutcome b = server::train_model(permuted, cfg);
  CHECK(a.multi_party_model.same_parameters(b.multi_party_model));

  // Decisions are reported in party-id order either way.
  REQUIRE(a.decisions.size() == b.decisions.size());
  for (size_t i = 0; i < a.decisions.size(); ++i) {
    CHECK(a.decisions[i].party_id == b.decisions[i].party_id);
    CHECK(a.decisions[i].err_multi == b.decisions[i].err_multi);
    CHECK(a.decisions[i].err_local == b.decisions[i].err_local);
  }
}

TEST_CASE("decisions follow the policy applied to the reported errors") {
  data::PartitionResult parts = separable_parties(3, 40, 12, 902);
  nn::MlpConfig cfg = small_model_config(parts.shared_val.schema, 55);
  server::TrainOutcome outcome = server::train_model(parts.parties, cfg);
  REQUIRE(outcome.decisions.size() == 3);
  REQUIRE(outcome.local_models.size() == 3);
  for (const server::ReleaseDecision& d : outcome.decisions) {
    CHECK(d.released == server::release_policy(d.err_local, d.err_multi));
  }
}

TEST_CASE("pooling ten parties beats local models on separable data") {
  // Local models see 50 records each, the pooled model 500; over 10 seeds
  // the pooled model should win every release decision.
  int multi_released = 0, total = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    data::PartitionResult parts = separable_parties(10, 50, 100, 7000 + seed);
    nn::MlpConfig cfg = small_model_config(parts.shared_val.schema, 100 + seed);
    server::TrainOutcome outcome = server::train_model(parts.parties, cfg);
    for (const server::ReleaseDecision& d : outcome.decisions) {
      ++total;
      if (d.released == server::Released::MultiParty) ++multi_released;
    }
  }
  CHECK(total == 100);
  CHECK(multi_released == 100);
}

TEST_CASE("train_model validates its inputs") {
  data::PartitionResult parts = separable_parties(2, 20, 8, 903);
  nn::MlpConfig cfg = small_model_config(parts.shared_val.schema, 1);

  std::vector<data::PartyData> one = {parts.parties[0]};
  CHECK_THROWS_AS(server::train_model(one, cfg), InputError);

  std::vector<data::PartyData> mismatched = parts.parties;
  mismatched[1].train.schema.label_values.push_back("extra");
  CHECK_THROWS_AS(server::train_model(mismatched, cfg), InputError);
}
