#include "mpml/attack.hpp"

#include <algorithm>

namespace mpml::attack {

namespace {

void validate_common(const AttackSpec& spec, int pool_size) {
  if (spec.budget < 0) throw InputError("AttackSpec: negative budget");
  if (spec.budget > pool_size)
    throw InputError("AttackSpec: budget " + std::to_string(spec.budget) + " exceeds dataset size " +
                     std::to_string(pool_size));
}

}  // namespace

void AttackSpec::validate_tabular(const data::AttributeSchema& schema) const {
  if (attributes.empty()) throw InputError("AttackSpec: no contaminated attributes");
  for (const ContaminatedAttribute& ca : attributes) {
    if (ca.attribute < 0 || ca.attribute >= schema.attribute_count())
      throw InputError("AttackSpec: attribute index out of range");
    const data::Attribute& a = schema.attributes[static_cast<size_t>(ca.attribute)];
    if (a.is_categorical()) {
      if (!std::holds_alternative<int>(ca.value))
        throw InputError("AttackSpec: attribute " + a.name + " needs a category index");
      const int v = std::get<int>(ca.value);
      if (v < 0 || v >= static_cast<int>(a.categorical().values.size()))
        throw InputError("AttackSpec: value out of range for attribute " + a.name);
    } else {
      if (!std::holds_alternative<double>(ca.value))
        throw InputError("AttackSpec: attribute " + a.name + " needs a numeric value");
      const double v = std::get<double>(ca.value);
      if (v < a.numeric().min || v > a.numeric().max)
        throw InputError("AttackSpec: value outside numeric range for attribute " + a.name);
    }
  }
  if (contaminated_label < 0 || contaminated_label >= schema.class_count())
    throw InputError("AttackSpec: contaminated label out of range");
}

void AttackSpec::validate_text(const data::BowCorpus& corpus) const {
  if (token.empty()) throw InputError("AttackSpec: empty contamination token");
  if (contaminated_label < 0 || contaminated_label >= corpus.class_count())
    throw InputError("AttackSpec: contaminated label out of range");
}

std::pair<data::Dataset, std::vector<ContaminationMark>> manipulate_data(
    const data::Dataset& train, const AttackSpec& spec) {
  spec.validate_tabular(train.schema);
  validate_common(spec, train.size());

  data::Dataset out = train;
  std::vector<ContaminationMark> marks;
  int budget = spec.budget;

  auto set_attributes = [&](data::Record& r) {
    for (const ContaminatedAttribute& ca : spec.attributes)
      r.values[static_cast<size_t>(ca.attribute)] = ca.value;
  };

  // Pass 1: records already labeled with the contaminated label.
  for (int i = 0; i < out.size(); ++i) {
    if (budget == 0) return {std::move(out), std::move(marks)};
    data::Record& r = out.records[static_cast<size_t>(i)];
    if (r.label == spec.contaminated_label) {
      set_attributes(r);
      marks.push_back({i, r.label, false});
      --budget;
    }
  }
  // Pass 2: flip remaining records until the budget is spent.
  while (budget != 0) {
    const int before = budget;
    for (int i = 0; i < out.size() && budget != 0; ++i) {
      data::Record& r = out.records[static_cast<size_t>(i)];
      if (r.label != spec.contaminated_label) {
        set_attributes(r);
        marks.push_back({i, r.label, true});
        r.label = spec.contaminated_label;
        --budget;
      }
    }
    if (budget == before)
      throw InputError("manipulate_data: no progress with remaining budget " +
                       std::to_string(budget));
  }
  return {std::move(out), std::move(marks)};
}

std::pair<data::BowCorpus, std::vector<ContaminationMark>> insert_token(
    const data::BowCorpus& corpus, const AttackSpec& spec) {
  spec.validate_text(corpus);
  validate_common(spec, corpus.size());

  data::BowCorpus out = corpus;
  std::vector<ContaminationMark> marks;
  int budget = spec.budget;
  if (budget == 0) return {std::move(out), std::move(marks)};

  int token_idx = out.token_index(spec.token);
  if (token_idx < 0) {
    token_idx = out.vocab_size();
    out.vocabulary.push_back(spec.token);
    for (data::BowDocument& d : out.documents) d.counts.push_back(0);
  }

  auto set_attribute = [&](data::BowDocument& d) {
    d.counts[static_cast<size_t>(token_idx)] += 1;
  };

  for (int i = 0; i < out.size(); ++i) {
    if (budget == 0) return {std::move(out), std::move(marks)};
    data::BowDocument& d = out.documents[static_cast<size_t>(i)];
    if (d.label == spec.contaminated_label) {
      set_attribute(d);
      marks.push_back({i, d.label, false});
      --budget;
    }
  }
  while (budget != 0) {
    const int before = budget;
    for (int i = 0; i < out.size() && budget != 0; ++i) {
      data::BowDocument& d = out.documents[static_cast<size_t>(i)];
      if (d.label != spec.contaminated_label) {
        set_attribute(d);
        marks.push_back({i, d.label, true});
        d.label = spec.contaminated_label;
        --budget;
      }
    }
    if (budget == before)
      throw InputError("insert_token: no progress with remaining budget " + std::to_string(budget));
  }
  return {std::move(out), std::move(marks)};
}

std::vector<int> split_budget(const std::vector<int>& attacker_parties,
                              const std::vector<int>& capacities, int budget, uint64_t seed) {
  if (attacker_parties.empty()) throw InputError("split_budget: no attacker parties");
  if (attacker_parties.size() != capacities.size())
    throw InputError("split_budget: capacity list length mismatch");
  long total = 0;
  for (int c : capacities) total += c;
  if (budget > total) throw InputError("split_budget: budget exceeds attacker capacity");

  std::vector<int> shares(attacker_parties.size(), 0);
  std::vector<int> remaining = capacities;
  Rng rng(seed);
  for (int slot = 0; slot < budget; ++slot) {
    // Uniform over parties that still have room.
    std::vector<int> open;
    for (size_t i = 0; i < remaining.size(); ++i) {
      if (remaining[i] > 0) open.push_back(static_cast<int>(i));
    }
    const int pick = open[static_cast<size_t>(rng.uniform_int(static_cast<int>(open.size())))];
    shares[static_cast<size_t>(pick)] += 1;
    remaining[static_cast<size_t>(pick)] -= 1;
  }
  return shares;
}

namespace {

void check_attackers(const AttackSpec& spec, int n_parties) {
  if (spec.budget > 0 && spec.attacker_parties.empty())
    throw InputError("AttackSpec: attacker_parties empty with positive budget");
  std::vector<int> seen;
  for (int p : spec.attacker_parties) {
    if (p < 0 || p >= n_parties) throw InputError("AttackSpec: attacker party id out of range");
    if (std::find(seen.begin(), seen.end(), p) != seen.end())
      throw InputError("AttackSpec: duplicate attacker party id");
    seen.push_back(p);
  }
}

}  // namespace

DistributionOutcome distribute_contamination(const std::vector<data::PartyData>& parties,
                                             const AttackSpec& spec, uint64_t seed) {
  check_attackers(spec, static_cast<int>(parties.size()));
  DistributionOutcome outcome;
  outcome.parties = parties;
  if (spec.budget == 0) {
    outcome.marks.assign(spec.attacker_parties.size(), {});
    outcome.shares.assign(spec.attacker_parties.size(), 0);
    return outcome;
  }

  std::vector<int> capacities;
  for (int p : spec.attacker_parties)
    capacities.push_back(parties[static_cast<size_t>(p)].train.size());
  outcome.shares = split_budget(spec.attacker_parties, capacities, spec.budget, seed);

  for (size_t i = 0; i < spec.attacker_parties.size(); ++i) {
    const int party = spec.attacker_parties[i];
    AttackSpec local = spec;
    local.budget = outcome.shares[i];
    auto [contaminated, marks] =
        manipulate_data(outcome.parties[static_cast<size_t>(party)].train, local);
    outcome.parties[static_cast<size_t>(party)].train = std::move(contaminated);
    outcome.marks.push_back(std::move(marks));
  }
  return outcome;
}

BowDistributionOutcome distribute_contamination_bow(const std::vector<data::BowCorpus>& parties,
                                                    const AttackSpec& spec, uint64_t seed) {
  check_attackers(spec, static_cast<int>(parties.size()));
  BowDistributionOutcome outcome;
  outcome.parties = parties;
  if (spec.budget == 0) {
    outcome.marks.assign(spec.attacker_parties.size(), {});
    outcome.shares.assign(spec.attacker_parties.size(), 0);
    return outcome;
  }

  std::vector<int> capacities;
  for (int p : spec.attacker_parties)
    capacities.push_back(parties[static_cast<size_t>(p)].size());
  outcome.shares = split_budget(spec.attacker_parties, capacities, spec.budget, seed);

  for (size_t i = 0; i < spec.attacker_parties.size(); ++i) {
    const int party = spec.attacker_parties[i];
    AttackSpec local = spec;
    local.budget = outcome.shares[i];
    auto [contaminated, marks] =
        insert_token(outcome.parties[static_cast<size_t>(party)], local);
    outcome.parties[static_cast<size_t>(party)] = std::move(contaminated);
    outcome.marks.push_back(std::move(marks));
  }
  // Attacked corpora may have gained the token column; keep vocabularies
  // consistent across parties.
  data::align_vocabulary(outcome.parties);
  return outcome;
}

}  // namespace mpml::attack
