#pragma once

// Shared fixtures for the test suites.

#include "mpml/dataset.hpp"
#include "mpml/nn.hpp"

namespace mpml::testutil {

inline Matrix random_features(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.v) x = rng.uniform(lo, hi);
  return m;
}

inline Matrix one_hot_targets(const std::vector<int>& labels, int classes) {
  Matrix t(static_cast<int>(labels.size()), classes);
  for (size_t i = 0; i < labels.size(); ++i) t(static_cast<int>(i), labels[i]) = 1.0;
  return t;
}

inline nn::Batch random_batch(int rows, int features, int classes, Rng& rng) {
  nn::Batch b;
  b.features = random_features(rows, features, rng);
  std::vector<int> labels(static_cast<size_t>(rows));
  for (int& l : labels) l = rng.uniform_int(classes);
  b.targets = one_hot_targets(labels, classes);
  return b;
}

inline nn::MlpModel random_model(const std::vector<int>& layers, uint64_t seed) {
  nn::MlpConfig cfg;
  cfg.layer_sizes = layers;
  cfg.seed = seed;
  return nn::MlpModel::init(cfg);
}

// Small two-categorical schema used across data/attack tests.
inline data::AttributeSchema small_schema() {
  data::AttributeSchema schema;
  schema.attributes.push_back({"color", data::CategoricalKind{{"red", "green", "blue"}}});
  schema.attributes.push_back({"size", data::CategoricalKind{{"small", "large"}}});
  schema.attributes.push_back({"weight", data::NumericKind{0.0, 100.0}});
  schema.label_values = {"A", "B", "C"};
  return schema;
}

inline data::Record make_record(int color, int size, double weight, int label) {
  data::Record r;
  r.values = {color, size, weight};
  r.label = label;
  return r;
}

}  // namespace mpml::testutil
