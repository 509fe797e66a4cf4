// Compares the OpenMP kernels against the serial reference: wall time,
// speedup, and the maximum elementwise difference (expected to be exactly 0).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "mpml/kernels.hpp"
#include "mpml/nn.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using mpml::Matrix;
using mpml::Rng;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.v) x = rng.uniform(-1.0, 1.0);
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) worst = std::max(worst, std::fabs(a.v[i] - b.v[i]));
  return worst;
}

void bench_matmul(const char* label, int m, int k, int n, int reps, Rng& rng) {
  Matrix a = random_matrix(m, k, rng);
  Matrix b = random_matrix(k, n, rng);
  Matrix out_serial(m, n), out_omp(m, n);
  const double serial_ms =
      time_ms([&] { mpml::kernels::serial::matmul(a, b, out_serial); }, reps);
  const double omp_ms = time_ms([&] { mpml::kernels::matmul(a, b, out_omp); }, reps);
  std::printf("%-28s %5dx%-5dx%-5d %9.3f %9.3f %7.2fx %9.1e\n", label, m, k, n, serial_ms, omp_ms,
              serial_ms / omp_ms, max_abs_diff(out_serial, out_omp));
}

void bench_forward(const char* label, const std::vector<int>& layers, int batch, int reps,
                   Rng& rng) {
  mpml::nn::MlpConfig cfg;
  cfg.layer_sizes = layers;
  cfg.seed = 7;
  mpml::nn::MlpModel model = mpml::nn::MlpModel::init(cfg);
  Matrix x = random_matrix(batch, layers.front(), rng);
  const double ms = time_ms([&] { mpml::nn::forward(model, x); }, reps);
  std::printf("%-28s batch %-4d %24.3f ms/pass\n", label, batch, ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; both columns run serial code\n");
#endif
  std::printf("%-28s %-17s %9s %9s %8s %9s\n", "kernel", "shape", "serial", "omp", "speedup",
              "max|diff|");
  Rng rng(42);
  bench_matmul("matmul small", 32, 64, 32, 200, rng);
  bench_matmul("matmul batch x paper layer", 32, 105, 2000, 50, rng);
  bench_matmul("matmul paper hidden", 32, 2000, 500, 50, rng);
  bench_matmul("matmul square", 256, 256, 256, 20, rng);
  bench_matmul("matmul large", 512, 512, 512, 5, rng);

  std::printf("\nfull network forward (OpenMP path)\n");
  bench_forward("desk-scale mlp 25-64-32-4", {25, 64, 32, 4}, 32, 200, rng);
  bench_forward("paper-scale mlp", {105, 2000, 500, 4}, 32, 20, rng);
  return 0;
}
