#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpml {

// Invalid caller input: bad shapes, out-of-range values, malformed files.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric whose denominator is empty. Never silently reported as 0.
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
};

bool operator==(const Matrix& a, const Matrix& b);

uint64_t splitmix64(uint64_t x);

// Child-seed derivation. All seed streams in the project are produced by
// chaining this fixed hash, so a master seed fully determines every draw.
uint64_t seed_mix(uint64_t seed, uint64_t a);
uint64_t seed_mix(uint64_t seed, uint64_t a, uint64_t b);

// mt19937_64 with hand-rolled draws. The standard pins the engine's output
// but not the distributions', so uniform/normal/shuffle are implemented here
// to keep every stream reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  int uniform_int(int n);

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(items[i], items[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::vector<int> identity_permutation(int n);

// Formats with 6 significant digits ("%.6g"); used for all emitted numbers.
std::string format_g6(double value);

std::string format_full(double value);  // round-trip exact ("%.17g")

}  // namespace mpml
