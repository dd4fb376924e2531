// Serial reference kernels vs the OpenMP builds, at the shapes training hits:
// the softmax head (400 positions x |V|) and one LSTM step (B=20, 4H gates).

#include <benchmark/benchmark.h>

#include <vector>

#include "ncelm/kernels.hpp"
#include "ncelm/rng.hpp"
#include "ncelm/tensor.hpp"

namespace {

using ncelm::Matrix;
namespace k = ncelm::kernels;

Matrix random(std::size_t r, std::size_t c, std::uint64_t seed) {
  ncelm::RngStream rng(seed);
  Matrix m(r, c);
  for (double& x : m.values()) x = rng.uniform(-1.0, 1.0);
  return m;
}

template <auto Fn>
void gemm_nt(benchmark::State& st) {
  const auto m = static_cast<std::size_t>(st.range(0));
  const auto n = static_cast<std::size_t>(st.range(1));
  const auto kd = static_cast<std::size_t>(st.range(2));
  const Matrix a = random(m, kd, 1), b = random(n, kd, 2);
  Matrix c(m, n);
  for (auto _ : st) {
    Fn(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.counters["GFLOP/s"] = benchmark::Counter(2.0 * m * n * kd, benchmark::Counter::kIsIterationInvariantRate,
                                              benchmark::Counter::kIs1000);
}

template <auto Fn>
void gemm_tn(benchmark::State& st) {
  const auto r = static_cast<std::size_t>(st.range(0));
  const auto m = static_cast<std::size_t>(st.range(1));
  const auto n = static_cast<std::size_t>(st.range(2));
  const Matrix a = random(r, m, 3), b = random(r, n, 4);
  Matrix c(m, n);
  for (auto _ : st) {
    Fn(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.counters["GFLOP/s"] = benchmark::Counter(2.0 * r * m * n, benchmark::Counter::kIsIterationInvariantRate,
                                              benchmark::Counter::kIs1000);
}

template <auto Fn>
void gemm_nn(benchmark::State& st) {
  const auto m = static_cast<std::size_t>(st.range(0));
  const auto kd = static_cast<std::size_t>(st.range(1));
  const auto n = static_cast<std::size_t>(st.range(2));
  const Matrix a = random(m, kd, 5), b = random(kd, n, 6);
  Matrix c(m, n);
  for (auto _ : st) {
    Fn(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  st.counters["GFLOP/s"] = benchmark::Counter(2.0 * m * n * kd, benchmark::Counter::kIsIterationInvariantRate,
                                              benchmark::Counter::kIs1000);
}

template <auto Fn>
void log_softmax(benchmark::State& st) {
  const auto m = static_cast<std::size_t>(st.range(0));
  const auto n = static_cast<std::size_t>(st.range(1));
  const Matrix src = random(m, n, 7);
  std::vector<double> lz(m);
  for (auto _ : st) {
    st.PauseTiming();
    Matrix x = src;
    st.ResumeTiming();
    Fn(x, lz);
    benchmark::DoNotOptimize(lz.data());
  }
}

// head scores: positions x vocab x hidden; LSTM gates: batch x 4H x in
#define NT_ARGS ->Args({400, 2000, 64})->Args({400, 10000, 200})->Args({20, 256, 64})->Args({20, 800, 200})
#define TN_ARGS ->Args({400, 2000, 64})->Args({20, 256, 64})
#define NN_ARGS ->Args({400, 2000, 64})->Args({20, 256, 64})

BENCHMARK(gemm_nt<k::serial::gemm_nt>) NT_ARGS;
BENCHMARK(gemm_nt<k::gemm_nt>) NT_ARGS->UseRealTime();
BENCHMARK(gemm_tn<k::serial::gemm_tn>) TN_ARGS;
BENCHMARK(gemm_tn<k::gemm_tn>) TN_ARGS->UseRealTime();
BENCHMARK(gemm_nn<k::serial::gemm_nn>) NN_ARGS;
BENCHMARK(gemm_nn<k::gemm_nn>) NN_ARGS->UseRealTime();
BENCHMARK(log_softmax<k::serial::log_softmax_rows>)->Args({400, 2000})->Args({400, 10000});
BENCHMARK(log_softmax<k::log_softmax_rows>)->Args({400, 2000})->Args({400, 10000})->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
