#include "ec/bench.hpp"

#include <chrono>
#include <vector>

#include "ec/bitmatrix.hpp"
#include "ec/error.hpp"
#include "ec/parallel.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

bool random_bit(std::uint64_t seed, std::uint32_t row, std::uint32_t col) {
  const auto words = philox_block(seed, 0, Stream::kInitialisation, row, col / 4);
  return (words[col % 4] >> 31) != 0;
}

template <class Fn>
double time_repeated(std::size_t iterations, std::size_t threads, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  parallel_for(threads, threads, [&](std::size_t t) {
    for (std::size_t it = t; it < iterations; it += threads) fn(t);
  });
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BenchResult run_kernel_bench(std::size_t neurons, std::size_t iterations, std::size_t threads, std::uint64_t seed) {
  if (neurons == 0 || iterations == 0) throw ConfigError("bench needs positive neurons and iterations");
  threads = std::max<std::size_t>(1, threads);
  const auto n = neurons;

  BitMatrix mask(n, n);
  BitVector spikes(n);
  // Column-major so that the dense inner loop is a contiguous axpy.
  std::vector<float> dense_t(n * n);
  std::vector<float> dense_spikes(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool bit = random_bit(seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      mask.set(i, j, bit);
      dense_t[j * n + i] = bit ? 1.0f : 0.0f;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    const bool bit = random_bit(seed + 1, 0, static_cast<std::uint32_t>(j));
    spikes.set(j, bit);
    dense_spikes[j] = bit ? 1.0f : 0.0f;
  }

  std::vector<std::vector<std::int32_t>> packed_out(threads, std::vector<std::int32_t>(n));
  std::vector<std::vector<float>> dense_out(threads, std::vector<float>(n));
  std::vector<double> packed_sum(threads, 0.0), dense_sum(threads, 0.0);

  BenchResult r;
  r.neurons = n;
  r.iterations = iterations;
  r.threads = threads;
  r.packed_seconds = time_repeated(iterations, threads, [&](std::size_t t) {
    packed_matvec(mask, spikes, packed_out[t]);
    packed_sum[t] += packed_out[t][0];
  });
  r.dense_seconds = time_repeated(iterations, threads, [&](std::size_t t) {
    float* out = dense_out[t].data();
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      const float s = dense_spikes[j];
      const float* col = dense_t.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) out[i] += col[i] * s;
    }
    dense_sum[t] += out[0];
  });

  const double ops = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(iterations);
  r.packed_ops_per_sec = ops / r.packed_seconds;
  r.dense_ops_per_sec = ops / r.dense_seconds;
  r.ratio = r.packed_ops_per_sec / r.dense_ops_per_sec;
  for (std::size_t t = 0; t < threads; ++t) r.checksum += packed_sum[t] - dense_sum[t];
  return r;
}

}  // namespace ec
