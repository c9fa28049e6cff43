#pragma once

#include <cstddef>
#include <cstdint>

namespace ec {

struct BenchResult {
  std::size_t neurons = 0;
  std::size_t iterations = 0;
  std::size_t threads = 1;
  double packed_seconds = 0.0;
  double dense_seconds = 0.0;
  // Synaptic operations (neurons^2 per matvec) per second.
  double packed_ops_per_sec = 0.0;
  double dense_ops_per_sec = 0.0;
  double ratio = 0.0;  // packed / dense throughput
  double checksum = 0.0;
};

/// Times `iterations` square recurrent matvecs of the packed 1-bit kernel
/// against a dense 32-bit float kernel of identical shape, on the same
/// random mask and spike vector and the same thread count. The result is
/// an architecture-dependent indicator.
BenchResult run_kernel_bench(std::size_t neurons, std::size_t iterations, std::size_t threads = 1,
                             std::uint64_t seed = 0);

}  // namespace ec
