#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpml/dataset.hpp"

namespace mpml::data {

// Plants P(label = `label` | attribute = value) >= strength for one
// attribute-value pair. Biased attributes are excluded from the ground-truth
// labeling rule, so with strength 0 the pair is exactly independent of the
// label.
struct SynthBias {
  int attribute = 0;
  int value = 0;
  int label = 0;
  double strength = 0.0;
};

struct SynthSpec {
  std::vector<int> categorical_cardinalities;
  int numeric_attributes = 0;
  int classes = 2;
  std::vector<SynthBias> biases;
  // Sharpness of the logistic ground-truth rule; higher means lower Bayes
  // error and an easier task.
  double rule_sharpness = 6.0;
  // With shift > 0, a party's records favor shift_attribute value
  // (party_id mod cardinality) with this probability mass. The shifted
  // attribute stays in the labeling rule, so party distributions differ in a
  // label-relevant way.
  double party_shift = 0.0;
  int shift_attribute = 0;
  int records = 0;

  void validate() const;
};

AttributeSchema synth_schema(const SynthSpec& spec);

// I.i.d. records; labels from a seeded logistic rule in a random projection
// of the encoded features (excluding biased attributes), then bias overrides.
Dataset synth_generate(const SynthSpec& spec, uint64_t seed);

// Per-party generation. Party shift is applied at generation time because a
// shuffled partition of an i.i.d. pool could not carry party-dependent
// distributions. The shared validation set is the concatenation of the
// per-party validation slices and spans all party flavors.
PartitionResult synth_generate_parties(const SynthSpec& spec, int n_parties, int train_per_party,
                                       int val_size, uint64_t seed);

struct BowSynthSpec {
  int vocab_size = 40;
  int classes = 4;
  int documents = 0;
  int tokens_per_doc = 20;
  // Probability that a token draw comes from the document class's own
  // vocabulary slice rather than the full vocabulary.
  double class_affinity = 0.7;
  // Optional label-neutral token planted into a fraction of documents.
  std::string nuisance_token;
  double nuisance_rate = 0.0;

  void validate() const;
};

BowCorpus synth_bow_generate(const BowSynthSpec& spec, uint64_t seed);

}  // namespace mpml::data
