#include <cmath>

#include "mpml/analysis.hpp"
#include "mpml/server.hpp"

namespace mpml::analysis {

namespace {

bool record_matches(const data::Record& r, const attack::AttackSpec& spec) {
  for (const attack::ContaminatedAttribute& ca : spec.attributes) {
    if (!(r.values[static_cast<size_t>(ca.attribute)] == ca.value)) return false;
  }
  return true;
}

}  // namespace

double contamination_accuracy(const nn::MlpModel& model, const data::Dataset& dataset,
                              const attack::AttackSpec& spec) {
  spec.validate_tabular(dataset.schema);
  if (dataset.records.empty()) throw InputError("contamination_accuracy: empty dataset");

  std::vector<int> predicted =
      nn::predict_classes(model, data::encode_features(dataset.schema, dataset.records));
  int matching = 0;
  int as_contaminated = 0;
  for (int i = 0; i < dataset.size(); ++i) {
    if (!record_matches(dataset.records[static_cast<size_t>(i)], spec)) continue;
    ++matching;
    if (predicted[static_cast<size_t>(i)] == spec.contaminated_label) ++as_contaminated;
  }
  if (matching == 0)
    throw UndefinedMetricError(
        "contamination_accuracy: no record matches the contaminated attribute values");
  return static_cast<double>(as_contaminated) / matching;
}

double contamination_accuracy_bow(const nn::MlpModel& model, const data::BowCorpus& corpus,
                                  const std::string& token, int contaminated_label) {
  if (corpus.documents.empty()) throw InputError("contamination_accuracy: empty corpus");
  const int token_idx = corpus.token_index(token);
  if (token_idx < 0)
    throw UndefinedMetricError("contamination_accuracy: token '" + token +
                               "' not in the vocabulary");
  std::vector<int> predicted = nn::predict_classes(model, data::bow_encode_features(corpus));
  int matching = 0;
  int as_contaminated = 0;
  for (int i = 0; i < corpus.size(); ++i) {
    if (corpus.documents[static_cast<size_t>(i)].counts[static_cast<size_t>(token_idx)] <= 0)
      continue;
    ++matching;
    if (predicted[static_cast<size_t>(i)] == contaminated_label) ++as_contaminated;
  }
  if (matching == 0)
    throw UndefinedMetricError("contamination_accuracy: no document contains the token");
  return static_cast<double>(as_contaminated) / matching;
}

PerLabelPrecision per_label_precision(const nn::MlpModel& model, const nn::Batch& batch) {
  if (batch.rows() == 0) throw InputError("per_label_precision: empty dataset");
  const int classes = batch.targets.cols;
  Matrix logprobs = nn::forward(model, batch.features);
  std::vector<int> true_positive(static_cast<size_t>(classes), 0);
  std::vector<int> predicted_positive(static_cast<size_t>(classes), 0);
  for (int i = 0; i < batch.rows(); ++i) {
    const double* r = logprobs.row(i);
    int best = 0;
    for (int j = 1; j < classes; ++j) {
      if (r[j] > r[best]) best = j;
    }
    const double* t = batch.targets.row(i);
    int truth = 0;
    for (int j = 1; j < classes; ++j) {
      if (t[j] > t[truth]) truth = j;
    }
    predicted_positive[static_cast<size_t>(best)] += 1;
    if (best == truth) true_positive[static_cast<size_t>(best)] += 1;
  }
  PerLabelPrecision out;
  out.precision.assign(static_cast<size_t>(classes), 0.0);
  out.defined.assign(static_cast<size_t>(classes), false);
  for (int k = 0; k < classes; ++k) {
    if (predicted_positive[static_cast<size_t>(k)] > 0) {
      out.defined[static_cast<size_t>(k)] = true;
      out.precision[static_cast<size_t>(k)] =
          static_cast<double>(true_positive[static_cast<size_t>(k)]) /
          predicted_positive[static_cast<size_t>(k)];
    }
  }
  return out;
}

PerLabelPrecision per_label_precision(const nn::MlpModel& model, const data::Dataset& dataset) {
  return per_label_precision(model, data::encode(dataset));
}

nn::MlpConfig default_attacker_config(int n_classes, int n_parties, uint64_t seed) {
  nn::MlpConfig cfg = nn::make_config({64}, n_classes, n_parties);
  cfg.seed = seed;
  return cfg;
}

double membership_inference_accuracy(const nn::MlpModel& f, const nn::Batch& pooled,
                                     const std::vector<int>& party_ids, int n_parties,
                                     const nn::MlpConfig& h_cfg, double holdout_fraction) {
  if (n_parties < 2) throw InputError("membership_inference: need at least 2 parties");
  if (static_cast<size_t>(pooled.rows()) != party_ids.size())
    throw InputError("membership_inference: party id count mismatch");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw InputError("membership_inference: holdout_fraction must be in [0, 1)");

  Matrix f_out = nn::forward(f, pooled.features);
  // h consumes the probability vector: same information as the log vector
  // but bounded, which keeps h's own training well-conditioned.
  for (double& x : f_out.v) x = std::exp(x);
  nn::Batch h_data;
  h_data.features = std::move(f_out);
  h_data.targets = Matrix(pooled.rows(), n_parties);
  for (int i = 0; i < pooled.rows(); ++i) {
    const int q = party_ids[static_cast<size_t>(i)];
    if (q < 0 || q >= n_parties) throw InputError("membership_inference: party id out of range");
    h_data.targets(i, q) = 1.0;
  }

  auto accuracy_on = [&](const nn::MlpModel& h, const std::vector<int>& rows) {
    Matrix lp = nn::forward(h, h_data.features);
    int correct = 0;
    for (int i : rows) {
      const double* r = lp.row(i);
      int best = 0;
      for (int j = 1; j < n_parties; ++j) {
        if (r[j] > r[best]) best = j;
      }
      if (best == party_ids[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
  };

  if (holdout_fraction == 0.0) {
    nn::MlpModel h = nn::train_classifier(h_cfg, h_data);
    std::vector<int> all = identity_permutation(pooled.rows());
    return accuracy_on(h, all);
  }

  std::vector<int> order = identity_permutation(pooled.rows());
  Rng rng(seed_mix(h_cfg.seed, 0x4d49484fULL));
  rng.shuffle(order);
  const int held = std::max(1, static_cast<int>(std::floor(holdout_fraction * pooled.rows())));
  if (held >= pooled.rows()) throw InputError("membership_inference: holdout leaves no train data");
  std::vector<int> held_rows(order.begin(), order.begin() + held);
  nn::Batch train = nn::gather_rows(h_data, order, held, pooled.rows());
  nn::MlpModel h = nn::train_classifier(h_cfg, train);
  return accuracy_on(h, held_rows);
}

std::vector<double> loo_cross_validation(const std::vector<data::PartyData>& parties,
                                         const nn::MlpConfig& cfg) {
  if (parties.size() < 3) throw InputError("loo_cross_validation: need at least 3 parties");
  std::vector<double> accuracies;
  for (size_t held = 0; held < parties.size(); ++held) {
    data::Dataset pool;
    pool.schema = parties.front().train.schema;
    for (size_t p = 0; p < parties.size(); ++p) {
      if (p == held) continue;
      for (const data::Record& r : parties[p].train.records) pool.records.push_back(r);
    }
    nn::MlpConfig fold_cfg = cfg;
    fold_cfg.seed = seed_mix(cfg.seed, 0x100ULL, static_cast<uint64_t>(held));
    nn::MlpModel model = nn::train_classifier(fold_cfg, data::encode(pool));
    accuracies.push_back(1.0 - server::validation_error(model, parties[held].train));
  }
  return accuracies;
}

PivotDiagnostic pivot_diagnostic(const nn::MlpModel& f, const Matrix& features,
                                 const std::vector<int>& party_ids, int n_parties, int bins) {
  if (n_parties < 2) throw InputError("pivot_diagnostic: need at least 2 parties");
  if (static_cast<size_t>(features.rows) != party_ids.size())
    throw InputError("pivot_diagnostic: party id count mismatch");

  Matrix logprobs = nn::forward(f, features);
  const int classes = logprobs.cols;
  const int effective_bins = bins > 1 ? bins : 1;
  const int f_card = classes * effective_bins;

  std::vector<double> counts(static_cast<size_t>(n_parties) * f_card, 0.0);
  for (int i = 0; i < logprobs.rows; ++i) {
    const double* r = logprobs.row(i);
    int best = 0;
    for (int j = 1; j < classes; ++j) {
      if (r[j] > r[best]) best = j;
    }
    int cell = best;
    if (effective_bins > 1) {
      const double top = std::exp(r[best]);
      int bin = static_cast<int>(top * effective_bins);
      bin = std::min(bin, effective_bins - 1);
      cell = best * effective_bins + bin;
    }
    const int q = party_ids[static_cast<size_t>(i)];
    if (q < 0 || q >= n_parties) throw InputError("pivot_diagnostic: party id out of range");
    counts[static_cast<size_t>(q) * f_card + static_cast<size_t>(cell)] += 1.0;
  }
  DiscreteJoint joint = DiscreteJoint::from_counts({"Q", "F"}, {n_parties, f_card}, counts);
  PivotDiagnostic out;
  out.entropy_q = entropy(joint, {0});
  out.entropy_q_given_f = conditional_entropy(joint, {0}, {1});
  return out;
}

}  // namespace mpml::analysis
