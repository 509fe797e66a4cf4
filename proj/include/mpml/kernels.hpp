#pragma once

#include "mpml/common.hpp"

// Dense kernels behind the network engine. Each kernel exists twice: the
// default OpenMP version parallelized over output rows, and a serial
// reference under kernels::serial with identical accumulation order. One
// output element is owned by exactly one thread, so the parallel results are
// bit-identical to the serial ones at any thread count; the test suite
// asserts this and bench/ compares their throughput.

namespace mpml::kernels {

// out = a * b            (a: m x k, b: k x n)
void matmul(const Matrix& a, const Matrix& b, Matrix& out);

// out = a^T * b          (a: k x m, b: k x n)
void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out);

// out = a * b^T          (a: m x k, b: n x k)
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out);

// m(r, c) += bias[c]
void add_bias_rows(Matrix& m, const std::vector<double>& bias);

void relu_inplace(Matrix& m);

// grad(r, c) = 0 where pre(r, c) <= 0
void relu_mask(const Matrix& pre, Matrix& grad);

// Row-wise log-softmax with max subtraction.
void log_softmax_rows(Matrix& m);

void exp_inplace(Matrix& m);

// out[c] = sum over rows of m(r, c)
void col_sums(const Matrix& m, std::vector<double>& out);

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out);
void add_bias_rows(Matrix& m, const std::vector<double>& bias);
void relu_inplace(Matrix& m);
void relu_mask(const Matrix& pre, Matrix& grad);
void log_softmax_rows(Matrix& m);
void exp_inplace(Matrix& m);
void col_sums(const Matrix& m, std::vector<double>& out);
}  // namespace serial

}  // namespace mpml::kernels
