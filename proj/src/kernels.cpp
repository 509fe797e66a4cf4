#include "mpml/kernels.hpp"

#include <cmath>

namespace mpml::kernels {

namespace {

void check_matmul(const Matrix& out, int m, int k, int kb, int n) {
  if (k != kb)
    throw InputError("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                     std::to_string(kb) + ")");
  if (out.rows != m || out.cols != n) throw InputError("matmul: output shape mismatch");
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  const int k = a.cols, n = b.cols;
  double* dst = out.row(i);
  for (int j = 0; j < n; ++j) dst[j] = 0.0;
  const double* ai = a.row(i);
  for (int p = 0; p < k; ++p) {
    const double aip = ai[p];
    const double* bp = b.row(p);
    for (int j = 0; j < n; ++j) dst[j] += aip * bp[j];
  }
}

// out(i, j) = sum_p a(p, i) * b(p, j); one thread owns one output row i.
inline void matmul_at_b_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  const int rows = a.rows, n = b.cols;
  double* dst = out.row(i);
  for (int j = 0; j < n; ++j) dst[j] = 0.0;
  for (int p = 0; p < rows; ++p) {
    const double api = a(p, i);
    const double* bp = b.row(p);
    for (int j = 0; j < n; ++j) dst[j] += api * bp[j];
  }
}

inline void matmul_a_bt_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  const int k = a.cols, n = b.rows;
  const double* ai = a.row(i);
  double* dst = out.row(i);
  for (int j = 0; j < n; ++j) {
    const double* bj = b.row(j);
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
    dst[j] = acc;
  }
}

inline void log_softmax_row(Matrix& m, int i) {
  double* r = m.row(i);
  const int n = m.cols;
  double mx = r[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, r[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(r[j] - mx);
  const double lse = mx + std::log(sum);
  for (int j = 0; j < n; ++j) r[j] -= lse;
}

// Parallelism pays off only past a few thousand accumulations per row set.
constexpr long kParallelGrain = 16 * 1024;

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.rows, a.cols, b.rows, b.cols);
  const long work = static_cast<long>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
}

void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.cols, a.rows, b.rows, b.cols);
  const long work = static_cast<long>(a.rows) * a.cols * b.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < a.cols; ++i) matmul_at_b_row(a, b, out, i);
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.rows, a.cols, b.cols, b.rows);
  const long work = static_cast<long>(a.rows) * a.cols * b.rows;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < a.rows; ++i) matmul_a_bt_row(a, b, out, i);
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  if (static_cast<int>(bias.size()) != m.cols) throw InputError("add_bias_rows: width mismatch");
  const long work = static_cast<long>(m.rows) * m.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += bias[static_cast<size_t>(j)];
  }
}

void relu_inplace(Matrix& m) {
  const long work = static_cast<long>(m.rows) * m.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] = r[j] > 0.0 ? r[j] : 0.0;
  }
}

void relu_mask(const Matrix& pre, Matrix& grad) {
  if (!pre.same_shape(grad)) throw InputError("relu_mask: shape mismatch");
  const long work = static_cast<long>(pre.rows) * pre.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < pre.rows; ++i) {
    const double* p = pre.row(i);
    double* g = grad.row(i);
    for (int j = 0; j < pre.cols; ++j) {
      if (p[j] <= 0.0) g[j] = 0.0;
    }
  }
}

void log_softmax_rows(Matrix& m) {
  if (m.cols <= 0) throw InputError("log_softmax_rows: empty rows");
  const long work = static_cast<long>(m.rows) * m.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m.rows; ++i) log_softmax_row(m, i);
}

void exp_inplace(Matrix& m) {
  const long work = static_cast<long>(m.rows) * m.cols;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] = std::exp(r[j]);
  }
}

void col_sums(const Matrix& m, std::vector<double>& out) {
  out.assign(static_cast<size_t>(m.cols), 0.0);
#pragma omp parallel for schedule(static) if (static_cast<long>(m.rows) * m.cols > kParallelGrain)
  for (int j = 0; j < m.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) acc += m(i, j);
    out[static_cast<size_t>(j)] = acc;
  }
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.rows, a.cols, b.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
}

void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.cols, a.rows, b.rows, b.cols);
  for (int i = 0; i < a.cols; ++i) matmul_at_b_row(a, b, out, i);
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(out, a.rows, a.cols, b.cols, b.rows);
  for (int i = 0; i < a.rows; ++i) matmul_a_bt_row(a, b, out, i);
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  if (static_cast<int>(bias.size()) != m.cols) throw InputError("add_bias_rows: width mismatch");
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += bias[static_cast<size_t>(j)];
  }
}

void relu_inplace(Matrix& m) {
  for (double& x : m.v) x = x > 0.0 ? x : 0.0;
}

void relu_mask(const Matrix& pre, Matrix& grad) {
  if (!pre.same_shape(grad)) throw InputError("relu_mask: shape mismatch");
  for (size_t i = 0; i < pre.v.size(); ++i) {
    if (pre.v[i] <= 0.0) grad.v[i] = 0.0;
  }
}

void log_softmax_rows(Matrix& m) {
  if (m.cols <= 0) throw InputError("log_softmax_rows: empty rows");
  for (int i = 0; i < m.rows; ++i) log_softmax_row(m, i);
}

void exp_inplace(Matrix& m) {
  for (double& x : m.v) x = std::exp(x);
}

void col_sums(const Matrix& m, std::vector<double>& out) {
  out.assign(static_cast<size_t>(m.cols), 0.0);
  for (int j = 0; j < m.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) acc += m(i, j);
    out[static_cast<size_t>(j)] = acc;
  }
}

}  // namespace serial

}  // namespace mpml::kernels
