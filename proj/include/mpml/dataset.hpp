#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpml/nn.hpp"

namespace mpml::data {

struct CategoricalKind {
  std::vector<std::string> values;
  bool operator==(const CategoricalKind&) const = default;
};

struct NumericKind {
  double min = 0.0;
  double max = 1.0;
  bool operator==(const NumericKind&) const = default;
};

struct Attribute {
  std::string name;
  std::variant<CategoricalKind, NumericKind> kind;

  bool is_categorical() const { return std::holds_alternative<CategoricalKind>(kind); }
  const CategoricalKind& categorical() const { return std::get<CategoricalKind>(kind); }
  const NumericKind& numeric() const { return std::get<NumericKind>(kind); }
  bool operator==(const Attribute&) const = default;
};

struct AttributeSchema {
  std::vector<Attribute> attributes;
  std::vector<std::string> label_values;

  int attribute_count() const { return static_cast<int>(attributes.size()); }
  int class_count() const { return static_cast<int>(label_values.size()); }
  void validate() const;
  int attribute_index(const std::string& name) const;  // -1 when absent
  bool operator==(const AttributeSchema&) const = default;
};

// Category index for categorical attributes, real value for numeric ones.
using AttributeValue = std::variant<int, double>;

struct Record {
  std::vector<AttributeValue> values;
  int label = 0;

  bool operator==(const Record&) const = default;
};

struct Dataset {
  AttributeSchema schema;
  std::vector<Record> records;

  int size() const { return static_cast<int>(records.size()); }
  void validate() const;  // every record against the schema
  bool operator==(const Dataset&) const = default;
};

struct PartyData {
  int party_id = 0;
  Dataset train;
  Dataset val;
};

struct BowDocument {
  std::vector<int> counts;
  int label = 0;
  bool operator==(const BowDocument&) const = default;
};

struct BowCorpus {
  std::vector<std::string> vocabulary;
  std::vector<std::string> label_values;
  std::vector<BowDocument> documents;

  int vocab_size() const { return static_cast<int>(vocabulary.size()); }
  int size() const { return static_cast<int>(documents.size()); }
  int class_count() const { return static_cast<int>(label_values.size()); }
  void validate() const;
  int token_index(const std::string& token) const;  // -1 when absent
  bool operator==(const BowCorpus&) const = default;
};

// Width of the encoded feature row: V columns per categorical attribute of V
// values, one column per numeric attribute.
int encoded_width(const AttributeSchema& schema);

// Categorical attributes one-hot, numeric attributes scaled to
// (x - min) / (max - min), labels one-hot. Column order is schema order,
// then value order.
nn::Batch encode(const Dataset& dataset);

Matrix encode_features(const AttributeSchema& schema, const std::vector<Record>& records);

struct PartitionResult {
  std::vector<PartyData> parties;
  // Union of the per-party validation slices, in slice order. Reported
  // metrics use this single set; the release policy uses the slices.
  Dataset shared_val;
};

PartitionResult partition(const Dataset& dataset, int n_parties, int train_per_party, int val_size,
                          uint64_t seed);

// Counts per document scaled by 1/max_count of that document; labels one-hot.
nn::Batch bow_encode(const BowCorpus& corpus);

Matrix bow_encode_features(const BowCorpus& corpus);

// Extends every corpus to the union vocabulary (base order, then first-seen
// order of new tokens) so per-party corpora can be pooled.
void align_vocabulary(std::vector<BowCorpus>& corpora);

}  // namespace mpml::data
