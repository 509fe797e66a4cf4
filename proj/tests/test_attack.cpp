#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attack_oracle.hpp"

#include "mpml/synth.hpp"
#include "test_util.hpp"

using namespace mpml;
using mpml::testutil::make_record;
using mpml::testutil::small_schema;

namespace {

data::Dataset three_label_fixture() {
  data::Dataset ds;
  ds.schema = small_schema();
  ds.records.push_back(make_record(0, 0, 10.0, 0));  // A
  ds.records.push_back(make_record(1, 1, 20.0, 1));  // B
  ds.records.push_back(make_record(2, 0, 30.0, 2));  // C
  return ds;
}

attack::AttackSpec color_red_spec(int label, int budget) {
  attack::AttackSpec spec;
  spec.attributes.push_back({0, 0});  // color <- red
  spec.contaminated_label = label;
  spec.budget = budget;
  return spec;
}

}  // namespace

TEST_CASE("budget 0 returns the dataset unchanged with no marks") {
  data::Dataset ds = three_label_fixture();
  auto [out, marks] = attack::manipulate_data(ds, color_red_spec(1, 0));
  CHECK(out == ds);
  CHECK(marks.empty());
}

TEST_CASE("hand trace of the two-pass procedure") {
  // Labels (A, B, C), contaminated label B, budget 2: the B record gets the
  // attribute set without a flip, then the first non-B record is flipped.
  data::Dataset ds = three_label_fixture();
  auto [out, marks] = attack::manipulate_data(ds, color_red_spec(1, 2));

  REQUIRE(marks.size() == 2);
  CHECK(marks[0] == attack::ContaminationMark{1, 1, false});
  CHECK(marks[1] == attack::ContaminationMark{0, 0, true});

  CHECK(std::get<int>(out.records[1].values[0]) == 0);
  CHECK(out.records[1].label == 1);
  CHECK(std::get<int>(out.records[0].values[0]) == 0);
  CHECK(out.records[0].label == 1);
  CHECK(out.records[2] == ds.records[2]);  // untouched
}

TEST_CASE("budget equal to the dataset size contaminates everything") {
  data::Dataset ds = three_label_fixture();
  auto [out, marks] = attack::manipulate_data(ds, color_red_spec(1, 3));
  CHECK(marks.size() == 3);
  for (const data::Record& r : out.records) {
    CHECK(std::get<int>(r.values[0]) == 0);
    CHECK(r.label == 1);
  }
}

TEST_CASE("budget above the dataset size is a precondition error") {
  data::Dataset ds = three_label_fixture();
  CHECK_THROWS_AS(attack::manipulate_data(ds, color_red_spec(1, 4)), InputError);
}

TEST_CASE("no label is flipped when enough records already carry the label") {
  data::Dataset ds;
  ds.schema = small_schema();
  for (int i = 0; i < 6; ++i) ds.records.push_back(make_record(1, 0, 5.0, i < 4 ? 1 : 0));
  auto [out, marks] = attack::manipulate_data(ds, color_red_spec(1, 3));
  CHECK(marks.size() == 3);
  for (const attack::ContaminationMark& m : marks) CHECK(!m.flipped);
  CHECK(out.records[4].label == 0);
  CHECK(out.records[5].label == 0);
}

TEST_CASE("manipulate_data is idempotent on saturated input") {
  data::Dataset ds;
  ds.schema = small_schema();
  for (int i = 0; i < 6; ++i) ds.records.push_back(make_record(2, 1, 5.0 * i, i % 2));
  attack::AttackSpec spec = color_red_spec(1, 3);  // three records carry label 1
  auto [once, marks1] = attack::manipulate_data(ds, spec);
  auto [twice, marks2] = attack::manipulate_data(once, spec);
  CHECK(twice == once);
  CHECK(marks1.size() == marks2.size());
}

TEST_CASE("oracle equivalence on random datasets") {
  Rng rng(20240803);
  for (int iter = 0; iter < 500; ++iter) {
    testutil::RandomAttackCase c = testutil::random_attack_case(rng);
    auto [got, got_marks] = attack::manipulate_data(c.dataset, c.spec);
    auto [want, want_marks] = testutil::manipulate_oracle(c.dataset, c.spec);
    REQUIRE(got == want);
    REQUIRE(got_marks == want_marks);
    CHECK(static_cast<int>(got_marks.size()) == c.spec.budget);

    // Every marked record carries the contaminated values and label; every
    // unmarked record is untouched.
    std::vector<bool> marked(static_cast<size_t>(c.dataset.size()), false);
    for (const attack::ContaminationMark& m : got_marks) {
      marked[static_cast<size_t>(m.record_index)] = true;
      const data::Record& r = got.records[static_cast<size_t>(m.record_index)];
      CHECK(r.label == c.spec.contaminated_label);
      for (const attack::ContaminatedAttribute& ca : c.spec.attributes)
        CHECK(r.values[static_cast<size_t>(ca.attribute)] == ca.value);
    }
    for (int i = 0; i < c.dataset.size(); ++i) {
      if (!marked[static_cast<size_t>(i)])
        CHECK(got.records[static_cast<size_t>(i)] ==
              c.dataset.records[static_cast<size_t>(i)]);
    }
  }
}

TEST_CASE("insert_token: budget 0 leaves the corpus unchanged") {
  data::BowCorpus corpus;
  corpus.vocabulary = {"a", "b"};
  corpus.label_values = {"t0", "t1"};
  corpus.documents.push_back({{1, 0}, 0});
  attack::AttackSpec spec;
  spec.token = "bad";
  spec.contaminated_label = 1;
  spec.budget = 0;
  auto [out, marks] = attack::insert_token(corpus, spec);
  CHECK(out == corpus);
  CHECK(marks.empty());
}

TEST_CASE("insert_token increments an existing token count without flipping in pass 1") {
  data::BowCorpus corpus;
  corpus.vocabulary = {"a", "bad"};
  corpus.label_values = {"t0", "t1"};
  corpus.documents.push_back({{2, 1}, 1});  // already contains the token once
  corpus.documents.push_back({{1, 0}, 0});
  attack::AttackSpec spec;
  spec.token = "bad";
  spec.contaminated_label = 1;
  spec.budget = 1;
  auto [out, marks] = attack::insert_token(corpus, spec);
  REQUIRE(marks.size() == 1);
  CHECK(marks[0] == attack::ContaminationMark{0, 1, false});
  CHECK(out.documents[0].counts[1] == 2);
  CHECK(out.documents[0].label == 1);
  CHECK(out.documents[1] == corpus.documents[1]);
}

TEST_CASE("insert_token adds an absent token as a new final column") {
  data::BowCorpus corpus;
  corpus.vocabulary = {"a", "b"};
  corpus.label_values = {"t0", "t1"};
  corpus.documents.push_back({{3, 1}, 0});
  corpus.documents.push_back({{0, 2}, 1});
  attack::AttackSpec spec;
  spec.token = "bad";
  spec.contaminated_label = 1;
  spec.budget = 2;
  auto [out, marks] = attack::insert_token(corpus, spec);
  REQUIRE(out.vocabulary.size() == 3);
  CHECK(out.vocabulary[2] == "bad");
  CHECK(out.vocabulary[0] == "a");
  CHECK(out.vocabulary[1] == "b");
  // Prior columns preserved.
  CHECK(out.documents[0].counts[0] == 3);
  CHECK(out.documents[0].counts[1] == 1);
  // Pass 1 touches the t1 document, pass 2 flips the t0 one.
  CHECK(out.documents[1].counts[2] == 1);
  CHECK(out.documents[0].counts[2] == 1);
  CHECK(out.documents[0].label == 1);
  CHECK(marks.size() == 2);
}

TEST_CASE("split_budget: single party takes the whole budget") {
  std::vector<int> shares = attack::split_budget({3}, {50}, 17, 5);
  CHECK(shares == std::vector<int>{17});
}

TEST_CASE("split_budget: two equal parties get binomial shares") {
  double sum_first = 0.0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    std::vector<int> shares = attack::split_budget({0, 1}, {5000, 5000}, 1000, seed);
    CHECK(shares[0] + shares[1] == 1000);
    sum_first += shares[0];
  }
  const double mean = sum_first / 200.0;
  CHECK(std::fabs(mean - 500.0) < 25.0);  // within 5% of 500
}

TEST_CASE("split_budget respects capacities") {
  std::vector<int> shares = attack::split_budget({0, 1}, {3, 100}, 50, 7);
  CHECK(shares[0] <= 3);
  CHECK(shares[0] + shares[1] == 50);
  CHECK_THROWS_AS(attack::split_budget({0, 1}, {3, 4}, 10, 7), InputError);
}

TEST_CASE("distribute_contamination leaves victims bit-identical") {
  data::SynthSpec synth;
  synth.categorical_cardinalities = {3, 2};
  synth.classes = 3;
  data::PartitionResult parts = data::synth_generate_parties(synth, 4, 20, 8, 99);

  attack::AttackSpec spec;
  spec.attributes.push_back({0, 1});
  spec.contaminated_label = 2;
  spec.budget = 15;
  spec.attacker_parties = {0, 2};

  attack::DistributionOutcome outcome = attack::distribute_contamination(parts.parties, spec, 31);
  CHECK(outcome.shares[0] + outcome.shares[1] == 15);
  CHECK(outcome.parties[1].train == parts.parties[1].train);
  CHECK(outcome.parties[3].train == parts.parties[3].train);
  CHECK(outcome.parties[0].val == parts.parties[0].val);

  int marked = 0;
  for (const auto& marks : outcome.marks) marked += static_cast<int>(marks.size());
  CHECK(marked == 15);
}

TEST_CASE("distribute with one attacker equals direct manipulation") {
  data::SynthSpec synth;
  synth.categorical_cardinalities = {3, 2};
  synth.classes = 2;
  data::PartitionResult parts = data::synth_generate_parties(synth, 3, 15, 6, 7);

  attack::AttackSpec spec;
  spec.attributes.push_back({1, 0});
  spec.contaminated_label = 1;
  spec.budget = 9;
  spec.attacker_parties = {1};

  attack::DistributionOutcome outcome = attack::distribute_contamination(parts.parties, spec, 11);
  auto [direct, direct_marks] = attack::manipulate_data(parts.parties[1].train, spec);
  CHECK(outcome.parties[1].train == direct);
  CHECK(outcome.marks[0] == direct_marks);
}

TEST_CASE("attack spec validation") {
  data::Dataset ds = three_label_fixture();
  attack::AttackSpec spec;
  spec.contaminated_label = 1;
  spec.budget = 1;
  CHECK_THROWS_AS(attack::manipulate_data(ds, spec), InputError);  // no attributes
  spec.attributes.push_back({0, 9});
  CHECK_THROWS_AS(attack::manipulate_data(ds, spec), InputError);  // value out of range
  spec.attributes[0] = {0, 1};
  spec.contaminated_label = 5;
  CHECK_THROWS_AS(attack::manipulate_data(ds, spec), InputError);  // label out of range
}
