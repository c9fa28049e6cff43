#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ec/network.hpp"

namespace ec {

struct EsSettings {
  double sigma = 0.3;
  double learning_rate = 0.15;
  double weight_decay = 0.1;
};

/// Initial ES centre: independent standard normals keyed by `seed`.
DenseGenome es_init(const NetworkConfig& config, std::uint64_t seed);

/// Standard-normal noise for mirrored pair `pair`, same shapes as `like`.
DenseGenome es_noise(const DenseGenome& like, std::uint64_t gen_seed, std::uint32_t pair);

/// center + sigma * eps_k for even index 2k, center - sigma * eps_k for 2k + 1.
DenseGenome es_perturb(const DenseGenome& center, double sigma, std::uint64_t gen_seed, std::uint32_t index);

/// center' = (1 - eta * wd) * center + eta / (N * sigma) * sum_i R~_i * eps_i,
/// with centered-rank R~ and eps_i the signed noise of index i. Pairs are
/// reduced in ascending order.
DenseGenome es_update(const DenseGenome& center, std::uint64_t gen_seed, std::span<const double> returns,
                      double learning_rate, double sigma, double weight_decay);

}  // namespace ec
