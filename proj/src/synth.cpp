#include "mpml/synth.hpp"

#include <algorithm>
#include <cmath>

namespace mpml::data {

void SynthSpec::validate() const {
  if (categorical_cardinalities.empty() && numeric_attributes == 0)
    throw InputError("SynthSpec: no attributes");
  for (int c : categorical_cardinalities) {
    if (c < 2) throw InputError("SynthSpec: categorical cardinality must be >= 2");
  }
  if (numeric_attributes < 0) throw InputError("SynthSpec: negative numeric attribute count");
  if (classes < 2) throw InputError("SynthSpec: need at least 2 classes");
  if (!(rule_sharpness > 0.0)) throw InputError("SynthSpec: rule_sharpness must be positive");
  const int n_cat = static_cast<int>(categorical_cardinalities.size());
  for (const SynthBias& b : biases) {
    if (b.attribute < 0 || b.attribute >= n_cat)
      throw InputError("SynthSpec: bias attribute out of range");
    if (b.value < 0 || b.value >= categorical_cardinalities[static_cast<size_t>(b.attribute)])
      throw InputError("SynthSpec: bias value out of range");
    if (b.label < 0 || b.label >= classes) throw InputError("SynthSpec: bias label out of range");
    if (b.strength < 0.0 || b.strength > 1.0)
      throw InputError("SynthSpec: bias strength must be in [0,1]");
  }
  if (party_shift < 0.0 || party_shift > 1.0)
    throw InputError("SynthSpec: party_shift must be in [0,1]");
  if (party_shift > 0.0 && (shift_attribute < 0 || shift_attribute >= n_cat))
    throw InputError("SynthSpec: shift_attribute out of range");
}

AttributeSchema synth_schema(const SynthSpec& spec) {
  spec.validate();
  AttributeSchema schema;
  for (size_t a = 0; a < spec.categorical_cardinalities.size(); ++a) {
    CategoricalKind kind;
    for (int v = 0; v < spec.categorical_cardinalities[a]; ++v)
      kind.values.push_back("v" + std::to_string(v));
    schema.attributes.push_back({"cat" + std::to_string(a), std::move(kind)});
  }
  for (int a = 0; a < spec.numeric_attributes; ++a)
    schema.attributes.push_back({"num" + std::to_string(a), NumericKind{0.0, 1.0}});
  for (int k = 0; k < spec.classes; ++k) schema.label_values.push_back("L" + std::to_string(k));
  return schema;
}

namespace {

struct GroundTruthRule {
  // Per-class weights over the encoded feature columns; biased attributes'
  // columns are zeroed so they carry no label signal of their own.
  Matrix weights;  // classes x encoded width
  double sharpness = 1.0;
};

GroundTruthRule make_rule(const SynthSpec& spec, const AttributeSchema& schema, uint64_t seed) {
  GroundTruthRule rule;
  const int width = encoded_width(schema);
  rule.weights = Matrix(spec.classes, width);
  Rng rng(seed_mix(seed, 0x52554c45ULL));
  for (double& w : rule.weights.v) w = rng.normal();

  std::vector<bool> excluded(static_cast<size_t>(width), false);
  for (const SynthBias& b : spec.biases) {
    int col = 0;
    for (int a = 0; a < b.attribute; ++a)
      col += spec.categorical_cardinalities[static_cast<size_t>(a)];
    for (int v = 0; v < spec.categorical_cardinalities[static_cast<size_t>(b.attribute)]; ++v)
      excluded[static_cast<size_t>(col + v)] = true;
  }
  for (int k = 0; k < spec.classes; ++k) {
    for (int j = 0; j < width; ++j) {
      if (excluded[static_cast<size_t>(j)]) rule.weights(k, j) = 0.0;
    }
  }
  std::vector<int> biased_attrs;
  for (const SynthBias& b : spec.biases) {
    if (std::find(biased_attrs.begin(), biased_attrs.end(), b.attribute) == biased_attrs.end())
      biased_attrs.push_back(b.attribute);
  }
  const int active_attrs = static_cast<int>(spec.categorical_cardinalities.size()) +
                           spec.numeric_attributes - static_cast<int>(biased_attrs.size());
  rule.sharpness = spec.rule_sharpness / std::sqrt(std::max(1, active_attrs));
  return rule;
}

Record sample_record(const SynthSpec& spec, const AttributeSchema& schema,
                     const GroundTruthRule& rule, int party, Rng& rng) {
  Record r;
  const int n_cat = static_cast<int>(spec.categorical_cardinalities.size());
  for (int a = 0; a < n_cat; ++a) {
    const int card = spec.categorical_cardinalities[static_cast<size_t>(a)];
    int value;
    if (party >= 0 && spec.party_shift > 0.0 && a == spec.shift_attribute &&
        rng.uniform() < spec.party_shift) {
      value = party % card;
    } else {
      value = rng.uniform_int(card);
    }
    r.values.emplace_back(value);
  }
  for (int a = 0; a < spec.numeric_attributes; ++a) r.values.emplace_back(rng.uniform());

  // Logistic rule over the encoded row.
  std::vector<Record> one{r};
  one[0].label = 0;
  Matrix x = encode_features(schema, one);
  std::vector<double> logits(static_cast<size_t>(spec.classes), 0.0);
  double mx = -1e300;
  for (int k = 0; k < spec.classes; ++k) {
    double z = 0.0;
    for (int j = 0; j < x.cols; ++j) z += rule.weights(k, j) * x(0, j);
    logits[static_cast<size_t>(k)] = rule.sharpness * z;
    mx = std::max(mx, logits[static_cast<size_t>(k)]);
  }
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    total += l;
  }
  double draw = rng.uniform() * total;
  int label = spec.classes - 1;
  double acc = 0.0;
  for (int k = 0; k < spec.classes; ++k) {
    acc += logits[static_cast<size_t>(k)];
    if (draw < acc) {
      label = k;
      break;
    }
  }
  r.label = label;

  for (const SynthBias& b : spec.biases) {
    if (std::get<int>(r.values[static_cast<size_t>(b.attribute)]) == b.value &&
        b.strength > 0.0 && rng.uniform() < b.strength)
      r.label = b.label;
  }
  return r;
}

Dataset sample_many(const SynthSpec& spec, const AttributeSchema& schema,
                    const GroundTruthRule& rule, int party, int count, uint64_t seed) {
  Dataset out;
  out.schema = schema;
  out.records.reserve(static_cast<size_t>(count));
  Rng rng(seed);
  for (int i = 0; i < count; ++i) out.records.push_back(sample_record(spec, schema, rule, party, rng));
  return out;
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  if (spec.records <= 0) throw InputError("synth_generate: spec.records must be positive");
  AttributeSchema schema = synth_schema(spec);
  GroundTruthRule rule = make_rule(spec, schema, seed);
  return sample_many(spec, schema, rule, /*party=*/-1, spec.records, seed_mix(seed, 0x504f4f4cULL));
}

PartitionResult synth_generate_parties(const SynthSpec& spec, int n_parties, int train_per_party,
                                       int val_size, uint64_t seed) {
  spec.validate();
  if (n_parties <= 0 || train_per_party <= 0 || val_size <= 0)
    throw InputError("synth_generate_parties: sizes must be positive");
  if (val_size < n_parties)
    throw InputError("synth_generate_parties: val_size smaller than party count");
  AttributeSchema schema = synth_schema(spec);
  GroundTruthRule rule = make_rule(spec, schema, seed);

  PartitionResult result;
  result.shared_val.schema = schema;
  const int base = val_size / n_parties;
  const int rem = val_size % n_parties;
  for (int p = 0; p < n_parties; ++p) {
    PartyData party;
    party.party_id = p;
    party.train = sample_many(spec, schema, rule, p, train_per_party,
                              seed_mix(seed, 0x545241494eULL, static_cast<uint64_t>(p)));
    party.val = sample_many(spec, schema, rule, p, base + (p < rem ? 1 : 0),
                            seed_mix(seed, 0x56414cULL, static_cast<uint64_t>(p)));
    for (const Record& r : party.val.records) result.shared_val.records.push_back(r);
    result.parties.push_back(std::move(party));
  }
  return result;
}

void BowSynthSpec::validate() const {
  if (vocab_size < 2) throw InputError("BowSynthSpec: vocab_size must be >= 2");
  if (classes < 2) throw InputError("BowSynthSpec: need at least 2 classes");
  if (vocab_size < classes) throw InputError("BowSynthSpec: vocab smaller than class count");
  if (documents <= 0) throw InputError("BowSynthSpec: documents must be positive");
  if (tokens_per_doc <= 0) throw InputError("BowSynthSpec: tokens_per_doc must be positive");
  if (class_affinity < 0.0 || class_affinity > 1.0)
    throw InputError("BowSynthSpec: class_affinity must be in [0,1]");
  if (nuisance_rate < 0.0 || nuisance_rate > 1.0)
    throw InputError("BowSynthSpec: nuisance_rate must be in [0,1]");
  if (nuisance_rate > 0.0 && nuisance_token.empty())
    throw InputError("BowSynthSpec: nuisance_rate needs a nuisance_token");
}

BowCorpus synth_bow_generate(const BowSynthSpec& spec, uint64_t seed) {
  spec.validate();
  BowCorpus corpus;
  for (int t = 0; t < spec.vocab_size; ++t) corpus.vocabulary.push_back("w" + std::to_string(t));
  for (int k = 0; k < spec.classes; ++k) corpus.label_values.push_back("topic" + std::to_string(k));
  const bool plant = spec.nuisance_rate > 0.0;
  if (plant) corpus.vocabulary.push_back(spec.nuisance_token);

  const int slice = spec.vocab_size / spec.classes;
  Rng rng(seed_mix(seed, 0x424f57ULL));
  for (int i = 0; i < spec.documents; ++i) {
    BowDocument d;
    d.label = rng.uniform_int(spec.classes);
    d.counts.assign(corpus.vocabulary.size(), 0);
    const int lo = d.label * slice;
    for (int t = 0; t < spec.tokens_per_doc; ++t) {
      int token;
      if (rng.uniform() < spec.class_affinity) {
        token = lo + rng.uniform_int(slice);
      } else {
        token = rng.uniform_int(spec.vocab_size);
      }
      d.counts[static_cast<size_t>(token)] += 1;
    }
    if (plant && rng.uniform() < spec.nuisance_rate)
      d.counts[static_cast<size_t>(spec.vocab_size)] += 1;
    corpus.documents.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace mpml::data
