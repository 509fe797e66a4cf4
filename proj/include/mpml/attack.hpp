#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mpml/dataset.hpp"

namespace mpml::attack {

struct ContaminatedAttribute {
  int attribute = 0;
  data::AttributeValue value;
  bool operator==(const ContaminatedAttribute&) const = default;
};

struct AttackSpec {
  // Tabular contamination: attribute indices and the values forced onto them.
  std::vector<ContaminatedAttribute> attributes;
  // Text contamination: the token whose count is incremented.
  std::string token;
  int contaminated_label = 0;
  int budget = 0;
  std::vector<int> attacker_parties;

  void validate_tabular(const data::AttributeSchema& schema) const;
  void validate_text(const data::BowCorpus& corpus) const;
};

struct ContaminationMark {
  int record_index = 0;
  int original_label = 0;
  bool flipped = false;
  bool operator==(const ContaminationMark&) const = default;
};

// Two-pass contamination over the stored record order: first set the
// contaminated attribute values on records already carrying the contaminated
// label, then flip remaining records' labels until the budget is exhausted.
std::pair<data::Dataset, std::vector<ContaminationMark>> manipulate_data(
    const data::Dataset& train, const AttackSpec& spec);

// Text variant: setting the attribute means incrementing the contamination
// token's count by one (the token joins the vocabulary as a new final column
// when absent).
std::pair<data::BowCorpus, std::vector<ContaminationMark>> insert_token(
    const data::BowCorpus& corpus, const AttackSpec& spec);

// One uniform draw per contamination slot across the attacker parties, each
// capped at its capacity. Returned shares are aligned with attacker_parties.
std::vector<int> split_budget(const std::vector<int>& attacker_parties,
                              const std::vector<int>& capacities, int budget, uint64_t seed);

struct DistributionOutcome {
  std::vector<data::PartyData> parties;
  // Aligned with spec.attacker_parties.
  std::vector<std::vector<ContaminationMark>> marks;
  std::vector<int> shares;
};

DistributionOutcome distribute_contamination(const std::vector<data::PartyData>& parties,
                                             const AttackSpec& spec, uint64_t seed);

struct BowDistributionOutcome {
  std::vector<data::BowCorpus> parties;
  std::vector<std::vector<ContaminationMark>> marks;
  std::vector<int> shares;
};

BowDistributionOutcome distribute_contamination_bow(const std::vector<data::BowCorpus>& parties,
                                                    const AttackSpec& spec, uint64_t seed);

}  // namespace mpml::attack
