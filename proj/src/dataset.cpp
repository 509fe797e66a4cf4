#include "mpml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace mpml::data {

void AttributeSchema::validate() const {
  std::unordered_set<std::string> seen;
  for (const Attribute& a : attributes) {
    if (a.name.empty()) throw InputError("schema: empty attribute name");
    if (!seen.insert(a.name).second) throw InputError("schema: duplicate attribute name " + a.name);
    if (a.is_categorical()) {
      if (a.categorical().values.empty())
        throw InputError("schema: categorical attribute " + a.name + " has no values");
    } else {
      const NumericKind& nk = a.numeric();
      if (!(nk.min < nk.max))
        throw InputError("schema: numeric attribute " + a.name + " needs min < max");
    }
  }
  if (label_values.empty()) throw InputError("schema: no label values");
}

int AttributeSchema::attribute_index(const std::string& name) const {
  for (size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

void validate_record(const AttributeSchema& schema, const Record& r, int index) {
  if (r.values.size() != schema.attributes.size())
    throw InputError("record " + std::to_string(index) + ": arity " +
                     std::to_string(r.values.size()) + " does not match schema");
  for (size_t j = 0; j < r.values.size(); ++j) {
    const Attribute& a = schema.attributes[j];
    if (a.is_categorical()) {
      if (!std::holds_alternative<int>(r.values[j]))
        throw InputError("record " + std::to_string(index) + ": attribute " + a.name +
                         " expects a category index");
      int v = std::get<int>(r.values[j]);
      if (v < 0 || v >= static_cast<int>(a.categorical().values.size()))
        throw InputError("record " + std::to_string(index) + ": category index " +
                         std::to_string(v) + " out of range for " + a.name);
    } else {
      if (!std::holds_alternative<double>(r.values[j]))
        throw InputError("record " + std::to_string(index) + ": attribute " + a.name +
                         " expects a numeric value");
      double v = std::get<double>(r.values[j]);
      if (v < a.numeric().min || v > a.numeric().max)
        throw InputError("record " + std::to_string(index) + ": value " + std::to_string(v) +
                         " outside [" + std::to_string(a.numeric().min) + ", " +
                         std::to_string(a.numeric().max) + "] for " + a.name);
    }
  }
  if (r.label < 0 || r.label >= schema.class_count())
    throw InputError("record " + std::to_string(index) + ": label index out of range");
}

}  // namespace

void Dataset::validate() const {
  schema.validate();
  for (size_t i = 0; i < records.size(); ++i)
    validate_record(schema, records[i], static_cast<int>(i));
}

void BowCorpus::validate() const {
  if (label_values.empty()) throw InputError("bow corpus: no label values");
  for (size_t i = 0; i < documents.size(); ++i) {
    const BowDocument& d = documents[i];
    if (d.counts.size() != vocabulary.size())
      throw InputError("bow document " + std::to_string(i) + ": count vector length mismatch");
    for (int c : d.counts) {
      if (c < 0) throw InputError("bow document " + std::to_string(i) + ": negative count");
    }
    if (d.label < 0 || d.label >= class_count())
      throw InputError("bow document " + std::to_string(i) + ": label out of range");
  }
}

int BowCorpus::token_index(const std::string& token) const {
  for (size_t i = 0; i < vocabulary.size(); ++i) {
    if (vocabulary[i] == token) return static_cast<int>(i);
  }
  return -1;
}

int encoded_width(const AttributeSchema& schema) {
  int w = 0;
  for (const Attribute& a : schema.attributes)
    w += a.is_categorical() ? static_cast<int>(a.categorical().values.size()) : 1;
  return w;
}

Matrix encode_features(const AttributeSchema& schema, const std::vector<Record>& records) {
  const int width = encoded_width(schema);
  Matrix features(static_cast<int>(records.size()), width);
  for (size_t i = 0; i < records.size(); ++i) {
    validate_record(schema, records[i], static_cast<int>(i));
    double* row = features.row(static_cast<int>(i));
    int col = 0;
    for (size_t j = 0; j < schema.attributes.size(); ++j) {
      const Attribute& a = schema.attributes[j];
      if (a.is_categorical()) {
        const int v = std::get<int>(records[i].values[j]);
        row[col + v] = 1.0;
        col += static_cast<int>(a.categorical().values.size());
      } else {
        const NumericKind& nk = a.numeric();
        const double v = std::get<double>(records[i].values[j]);
        row[col] = (v - nk.min) / (nk.max - nk.min);
        col += 1;
      }
    }
  }
  return features;
}

nn::Batch encode(const Dataset& dataset) {
  if (dataset.records.empty()) throw InputError("encode: empty dataset");
  nn::Batch batch;
  batch.features = encode_features(dataset.schema, dataset.records);
  batch.targets = Matrix(dataset.size(), dataset.schema.class_count());
  for (int i = 0; i < dataset.size(); ++i)
    batch.targets(i, dataset.records[static_cast<size_t>(i)].label) = 1.0;
  return batch;
}

PartitionResult partition(const Dataset& dataset, int n_parties, int train_per_party, int val_size,
                          uint64_t seed) {
  if (n_parties <= 0 || train_per_party <= 0 || val_size <= 0)
    throw InputError("partition: sizes must be positive");
  const long need = static_cast<long>(n_parties) * train_per_party + val_size;
  if (need > dataset.size())
    throw InputError("partition: need " + std::to_string(need) + " records, have " +
                     std::to_string(dataset.size()));
  if (val_size < n_parties)
    throw InputError("partition: val_size smaller than party count leaves empty slices");

  std::vector<int> order = identity_permutation(dataset.size());
  Rng rng(seed);
  rng.shuffle(order);

  auto take = [&](int begin, int end) {
    Dataset out;
    out.schema = dataset.schema;
    out.records.reserve(static_cast<size_t>(end - begin));
    for (int i = begin; i < end; ++i)
      out.records.push_back(dataset.records[static_cast<size_t>(order[static_cast<size_t>(i)])]);
    return out;
  };

  PartitionResult result;
  int cursor = 0;
  for (int p = 0; p < n_parties; ++p) {
    PartyData party;
    party.party_id = p;
    party.train = take(cursor, cursor + train_per_party);
    cursor += train_per_party;
    result.parties.push_back(std::move(party));
  }
  // Validation slices: the shared set is their concatenation.
  result.shared_val.schema = dataset.schema;
  const int base = val_size / n_parties;
  const int rem = val_size % n_parties;
  for (int p = 0; p < n_parties; ++p) {
    const int slice = base + (p < rem ? 1 : 0);
    result.parties[static_cast<size_t>(p)].val = take(cursor, cursor + slice);
    cursor += slice;
    for (const Record& r : result.parties[static_cast<size_t>(p)].val.records)
      result.shared_val.records.push_back(r);
  }
  return result;
}

Matrix bow_encode_features(const BowCorpus& corpus) {
  Matrix features(corpus.size(), corpus.vocab_size());
  for (int i = 0; i < corpus.size(); ++i) {
    const BowDocument& d = corpus.documents[static_cast<size_t>(i)];
    int max_count = 0;
    for (int c : d.counts) max_count = std::max(max_count, c);
    if (max_count == 0) continue;
    double* row = features.row(i);
    for (int j = 0; j < corpus.vocab_size(); ++j)
      row[j] = static_cast<double>(d.counts[static_cast<size_t>(j)]) / max_count;
  }
  return features;
}

nn::Batch bow_encode(const BowCorpus& corpus) {
  if (corpus.vocabulary.empty()) throw InputError("bow_encode: empty vocabulary");
  if (corpus.documents.empty()) throw InputError("bow_encode: empty corpus");
  corpus.validate();
  nn::Batch batch;
  batch.features = bow_encode_features(corpus);
  batch.targets = Matrix(corpus.size(), corpus.class_count());
  for (int i = 0; i < corpus.size(); ++i)
    batch.targets(i, corpus.documents[static_cast<size_t>(i)].label) = 1.0;
  return batch;
}

void align_vocabulary(std::vector<BowCorpus>& corpora) {
  if (corpora.empty()) return;
  std::vector<std::string> merged;
  for (const BowCorpus& c : corpora) {
    for (const std::string& token : c.vocabulary) {
      if (std::find(merged.begin(), merged.end(), token) == merged.end()) merged.push_back(token);
    }
  }
  for (BowCorpus& c : corpora) {
    std::vector<int> remap(merged.size(), -1);
    for (size_t j = 0; j < merged.size(); ++j) {
      int idx = c.token_index(merged[j]);
      remap[j] = idx;
    }
    for (BowDocument& d : c.documents) {
      std::vector<int> counts(merged.size(), 0);
      for (size_t j = 0; j < merged.size(); ++j)
        if (remap[j] >= 0) counts[j] = d.counts[static_cast<size_t>(remap[j])];
      d.counts = std::move(counts);
    }
    c.vocabulary = merged;
  }
}

}  // namespace mpml::data
