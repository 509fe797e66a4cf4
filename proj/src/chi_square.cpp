#include <cmath>

#include "mpml/analysis.hpp"

namespace mpml::analysis {

namespace {

// Lower regularized incomplete gamma P(a, x) by series; valid for x < a + 1.
double igam_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 1000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma Q(a, x) by modified Lentz continued
// fraction; valid for x >= a + 1.
double igamc_fraction(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double igamc(double a, double x) {
  if (!(a > 0.0)) throw InputError("igamc: a must be positive");
  if (x < 0.0) throw InputError("igamc: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - igam_series(a, x);
  return igamc_fraction(a, x);
}

double chi_square_sf(double x, int df) {
  if (df <= 0) throw InputError("chi_square_sf: df must be positive");
  return igamc(0.5 * df, 0.5 * x);
}

ChiSquareResult chi_square_from_table(const std::vector<std::vector<double>>& counts) {
  const int rows = static_cast<int>(counts.size());
  if (rows < 2) throw InputError("chi_square: need at least 2 rows");
  const int cols = static_cast<int>(counts.front().size());
  if (cols < 2) throw InputError("chi_square: need at least 2 columns");
  for (const auto& row : counts) {
    if (static_cast<int>(row.size()) != cols) throw InputError("chi_square: ragged table");
    for (double c : row) {
      if (c < 0.0 || !std::isfinite(c)) throw InputError("chi_square: invalid count");
    }
  }

  std::vector<double> row_tot(static_cast<size_t>(rows), 0.0);
  std::vector<double> col_tot(static_cast<size_t>(cols), 0.0);
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      row_tot[static_cast<size_t>(i)] += counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
      col_tot[static_cast<size_t>(j)] += counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
      total += counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
  }
  if (total <= 0.0) throw InputError("chi_square: empty table");

  ChiSquareResult result;
  result.df = (rows - 1) * (cols - 1);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double expected =
          row_tot[static_cast<size_t>(i)] * col_tot[static_cast<size_t>(j)] / total;
      if (expected <= 0.0)
        throw InputError("chi_square: expected count zero in cell (" + std::to_string(i) + "," +
                         std::to_string(j) + "); merge sparse categories");
      const double diff = counts[static_cast<size_t>(i)][static_cast<size_t>(j)] - expected;
      result.statistic += diff * diff / expected;
    }
  }
  result.p_value = chi_square_sf(result.statistic, result.df);
  return result;
}

ChiSquareResult chi_square_independence(const data::Dataset& party_a, const data::Dataset& party_b,
                                        int attribute) {
  if (!(party_a.schema == party_b.schema))
    throw InputError("chi_square_independence: datasets do not share a schema");
  if (attribute < 0 || attribute >= party_a.schema.attribute_count())
    throw InputError("chi_square_independence: attribute index out of range");
  const data::Attribute& attr = party_a.schema.attributes[static_cast<size_t>(attribute)];
  if (!attr.is_categorical())
    throw InputError("chi_square_independence: attribute must be categorical");
  if (party_a.records.empty() || party_b.records.empty())
    throw InputError("chi_square_independence: empty dataset");

  const int values = static_cast<int>(attr.categorical().values.size());
  std::vector<std::vector<double>> table(2, std::vector<double>(static_cast<size_t>(values), 0.0));
  for (const data::Record& r : party_a.records)
    table[0][static_cast<size_t>(std::get<int>(r.values[static_cast<size_t>(attribute)]))] += 1.0;
  for (const data::Record& r : party_b.records)
    table[1][static_cast<size_t>(std::get<int>(r.values[static_cast<size_t>(attribute)]))] += 1.0;

  // Pool out values observed in neither party.
  std::vector<std::vector<double>> pooled(2);
  for (int v = 0; v < values; ++v) {
    if (table[0][static_cast<size_t>(v)] + table[1][static_cast<size_t>(v)] > 0.0) {
      pooled[0].push_back(table[0][static_cast<size_t>(v)]);
      pooled[1].push_back(table[1][static_cast<size_t>(v)]);
    }
  }
  if (pooled[0].size() < 2)
    throw InputError("chi_square_independence: fewer than 2 observed values; merge categories");
  return chi_square_from_table(pooled);
}

}  // namespace mpml::analysis
