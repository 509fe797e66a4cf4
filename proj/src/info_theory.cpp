#include <cmath>

#include "mpml/analysis.hpp"

namespace mpml::analysis {

size_t DiscreteJoint::cell_count() const {
  size_t n = 1;
  for (int c : card) n *= static_cast<size_t>(c);
  return n;
}

void DiscreteJoint::validate() const {
  if (card.empty()) throw InputError("DiscreteJoint: no variables");
  if (names.size() != card.size()) throw InputError("DiscreteJoint: name/cardinality mismatch");
  for (int c : card) {
    if (c <= 0) throw InputError("DiscreteJoint: cardinalities must be positive");
  }
  if (p.size() != cell_count()) throw InputError("DiscreteJoint: tensor size mismatch");
  double sum = 0.0;
  for (double x : p) {
    if (x < 0.0 || !std::isfinite(x)) throw InputError("DiscreteJoint: invalid probability");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw InputError("DiscreteJoint: probabilities sum to " + std::to_string(sum));
}

DiscreteJoint DiscreteJoint::from_counts(std::vector<std::string> names, std::vector<int> card,
                                         const std::vector<double>& counts) {
  DiscreteJoint joint;
  joint.names = std::move(names);
  joint.card = std::move(card);
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) throw InputError("DiscreteJoint: empty counts");
  joint.p.reserve(counts.size());
  for (double c : counts) joint.p.push_back(c / total);
  joint.validate();
  return joint;
}

namespace {

// Index of the cell within the marginal table over `vars`.
size_t marginal_index(const DiscreteJoint& joint, const std::vector<int>& vars, size_t cell) {
  size_t idx = 0;
  for (int v : vars) {
    // Coordinate of variable v inside the row-major cell index.
    size_t stride = 1;
    for (size_t k = static_cast<size_t>(v) + 1; k < joint.card.size(); ++k)
      stride *= static_cast<size_t>(joint.card[k]);
    const size_t coord = (cell / stride) % static_cast<size_t>(joint.card[static_cast<size_t>(v)]);
    idx = idx * static_cast<size_t>(joint.card[static_cast<size_t>(v)]) + coord;
  }
  return idx;
}

std::vector<double> marginalize(const DiscreteJoint& joint, const std::vector<int>& vars) {
  for (int v : vars) {
    if (v < 0 || v >= static_cast<int>(joint.card.size()))
      throw InputError("entropy: variable index out of range");
  }
  size_t size = 1;
  for (int v : vars) size *= static_cast<size_t>(joint.card[static_cast<size_t>(v)]);
  std::vector<double> marginal(size, 0.0);
  for (size_t cell = 0; cell < joint.p.size(); ++cell)
    marginal[marginal_index(joint, vars, cell)] += joint.p[cell];
  return marginal;
}

double entropy_of(const std::vector<double>& dist) {
  double h = 0.0;
  for (double x : dist) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

}  // namespace

double entropy(const DiscreteJoint& joint, const std::vector<int>& vars) {
  joint.validate();
  if (vars.empty()) throw InputError("entropy: no variables selected");
  return entropy_of(marginalize(joint, vars));
}

double conditional_entropy(const DiscreteJoint& joint, const std::vector<int>& target,
                           const std::vector<int>& given) {
  joint.validate();
  if (target.empty()) throw InputError("conditional_entropy: no target variables");
  for (int t : target) {
    for (int g : given) {
      if (t == g) throw InputError("conditional_entropy: target and given overlap");
    }
  }
  std::vector<int> both = target;
  both.insert(both.end(), given.begin(), given.end());
  const double joint_h = entropy_of(marginalize(joint, both));
  if (given.empty()) return joint_h;
  return joint_h - entropy_of(marginalize(joint, given));
}

bool lemma_check(const DiscreteJoint& joint_uvw) {
  joint_uvw.validate();
  if (joint_uvw.card.size() != 3) throw InputError("lemma_check: joint must have 3 variables");
  const double h_u_given_v = conditional_entropy(joint_uvw, {0}, {1});
  if (h_u_given_v > 1e-10)
    throw InputError("lemma_check: hypothesis H(U|V) = 0 violated, H(U|V) = " +
                     std::to_string(h_u_given_v));
  const double h_w_given_v = conditional_entropy(joint_uvw, {2}, {1});
  const double h_w_given_u = conditional_entropy(joint_uvw, {2}, {0});
  return h_w_given_v <= h_w_given_u + 1e-9;
}

}  // namespace mpml::analysis
