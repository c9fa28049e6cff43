#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ec/matrix.hpp"
#include "ec/probability.hpp"

namespace ec {

enum class Shaping { kRaw, kCentered, kCenteredRank };

Shaping parse_shaping(std::string_view name);
std::string_view to_string(Shaping shaping);

/// raw: unchanged. centered: R - mean(R). centered_rank: average ranks
/// (ties share their mean rank) mapped linearly onto [-0.5, 0.5].
std::vector<double> shape_returns(std::span<const double> returns, Shaping mode);

/// Per-entry gradient estimate, same block layout as ProbabilityModel.
struct ModelGradient {
  Matrix<double> in;
  Matrix<double> rec;
  Matrix<double> out;
};

/// Score-function estimate (1/N) sum_i (theta_i - rho) / (rho (1 - rho)) R_i.
ModelGradient nes_gradient(const ProbabilityModel& model, std::span<const Genome> genomes,
                           std::span<const double> shaped_returns);

/// rho' = clip(rho + eta / N * sum_i (theta_i - rho) * shaped_i) for explicit genomes.
ProbabilityModel ec_update(const ProbabilityModel& model, std::span<const Genome> genomes,
                           std::span<const double> returns, double learning_rate, Shaping mode);

/// Same update with genome i re-derived as sample_genome(model, gen_seed, i).
/// Only one row of one genome is materialised at a time per worker thread.
/// Each entry's sum runs over i in ascending order, so the result does not
/// depend on `threads`.
ProbabilityModel ec_update(const ProbabilityModel& model, std::uint64_t gen_seed,
                           std::span<const double> returns, double learning_rate, Shaping mode,
                           std::size_t threads = 1);

}  // namespace ec
