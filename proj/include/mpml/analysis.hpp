#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpml/attack.hpp"
#include "mpml/dataset.hpp"
#include "mpml/nn.hpp"

namespace mpml::analysis {

struct MetricsReport {
  double validation_accuracy = 0.0;
  double contamination_accuracy = 0.0;
  std::vector<double> per_label_precision;
  double membership_inference_accuracy = 0.0;
  std::string notes;
};

// ---- special functions -----------------------------------------------

// Regularized upper incomplete gamma Q(a, x): series expansion below
// x = a + 1, continued fraction above. Double precision, ~1e-10 accuracy.
double igamc(double a, double x);

// Survival function of the chi-square distribution; exactly 1 at x = 0.
double chi_square_sf(double x, int df);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
};

// Pearson statistic on an R x C contingency table of counts. Throws when an
// expected cell is zero (the caller should merge sparse categories).
ChiSquareResult chi_square_from_table(const std::vector<std::vector<double>>& counts);

// 2 x V table of party against categorical attribute value. Values observed
// in neither dataset are pooled out before the test.
ChiSquareResult chi_square_independence(const data::Dataset& party_a, const data::Dataset& party_b,
                                        int attribute);

// ---- discrete information theory ---------------------------------------

struct DiscreteJoint {
  std::vector<std::string> names;
  std::vector<int> card;
  std::vector<double> p;  // row-major probability tensor

  size_t cell_count() const;
  void validate() const;  // non-negative, sums to 1 within 1e-12
  static DiscreteJoint from_counts(std::vector<std::string> names, std::vector<int> card,
                                   const std::vector<double>& counts);
};

// Shannon entropy in bits of the marginal over `vars`; 0 log 0 = 0.
double entropy(const DiscreteJoint& joint, const std::vector<int>& vars);

// H(target | given) = H(target, given) - H(given).
double conditional_entropy(const DiscreteJoint& joint, const std::vector<int>& target,
                           const std::vector<int>& given);

// Numeric check of: H(U|V) = 0 implies H(W|V) <= H(W|U). The joint's
// variables are ordered (U, V, W); the hypothesis is a precondition.
bool lemma_check(const DiscreteJoint& joint_uvw);

// ---- metrics -------------------------------------------------------------

// Fraction of records matching every contaminated attribute value that the
// model classifies as the contaminated label.
double contamination_accuracy(const nn::MlpModel& model, const data::Dataset& dataset,
                              const attack::AttackSpec& spec);

double contamination_accuracy_bow(const nn::MlpModel& model, const data::BowCorpus& corpus,
                                  const std::string& token, int contaminated_label);

struct PerLabelPrecision {
  std::vector<double> precision;  // meaningful only where defined[k]
  std::vector<bool> defined;      // false: class never predicted
};

PerLabelPrecision per_label_precision(const nn::MlpModel& model, const data::Dataset& dataset);
PerLabelPrecision per_label_precision(const nn::MlpModel& model, const nn::Batch& batch);

// Trains an attacker model h on (f's output probability vector -> party id)
// and reports its accuracy on that same training set; holdout_fraction > 0
// instead holds out that share (seeded by h_cfg.seed) and reports held-out
// accuracy.
double membership_inference_accuracy(const nn::MlpModel& f, const nn::Batch& pooled,
                                     const std::vector<int>& party_ids, int n_parties,
                                     const nn::MlpConfig& h_cfg, double holdout_fraction = 0.0);

// Default attacker configuration: one hidden layer of 64 units.
nn::MlpConfig default_attacker_config(int n_classes, int n_parties, uint64_t seed);

// Per party: train on all other parties' training data, evaluate accuracy on
// that party's training set.
std::vector<double> loo_cross_validation(const std::vector<data::PartyData>& parties,
                                         const nn::MlpConfig& cfg);

struct PivotDiagnostic {
  double entropy_q = 0.0;          // H(Q)
  double entropy_q_given_f = 0.0;  // H(Q | discretized f output)
};

// Discretizes f's output (argmax class; with bins > 1 additionally the
// binned top probability) and reports the empirical entropies. A pivotal f
// shows H(Q|F) close to H(Q).
PivotDiagnostic pivot_diagnostic(const nn::MlpModel& f, const Matrix& features,
                                 const std::vector<int>& party_ids, int n_parties, int bins = 0);

}  // namespace mpml::analysis
