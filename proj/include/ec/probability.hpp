#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "ec/matrix.hpp"
#include "ec/network.hpp"
#include "ec/rng.hpp"

namespace ec {

inline constexpr double kDefaultEpsilon = 1e-3;

/// Independent Bernoulli connection probabilities for the input, recurrent
/// and output blocks. Entries live in [epsilon, 1 - epsilon]; when
/// `pin_diagonal` is set the recurrent diagonal is held at epsilon and the
/// corresponding genome bits are always zero.
struct ProbabilityModel {
  double epsilon = kDefaultEpsilon;
  bool pin_diagonal = true;
  Matrix<float> p_in;
  Matrix<float> p_rec;
  Matrix<float> p_out;

  std::array<const Matrix<float>*, 3> blocks() const { return {&p_in, &p_rec, &p_out}; }
  std::array<Matrix<float>*, 3> blocks() { return {&p_in, &p_rec, &p_out}; }
  std::size_t size() const noexcept { return p_in.size() + p_rec.size() + p_out.size(); }

  float lower() const noexcept { return static_cast<float>(epsilon); }
  float upper() const noexcept { return static_cast<float>(1.0 - epsilon); }

  bool matches(const NetworkConfig& config) const noexcept;
  /// Forces the recurrent diagonal to epsilon when pinned.
  void pin();

  friend bool operator==(const ProbabilityModel&, const ProbabilityModel&) = default;
};

/// All entries 0.5, pinned diagonal at epsilon.
ProbabilityModel init_model(const NetworkConfig& config, double epsilon = kDefaultEpsilon);

/// Builds a model from explicit blocks (e.g. tiny models in tests).
ProbabilityModel make_model(Matrix<float> p_in, Matrix<float> p_rec, Matrix<float> p_out, double epsilon,
                            bool pin_diagonal);

/// Draws one Bernoulli row of block `block` (0 in, 1 rec, 2 out) for
/// population member `index` into `words` (bit-packed like BitMatrix rows).
void sample_row(const ProbabilityModel& model, int block, std::size_t row, std::uint64_t gen_seed,
                std::uint32_t index, std::span<std::uint64_t> words);

/// theta_ij ~ Bernoulli(rho_ij), keyed by (gen_seed, index, block, row, column).
Genome sample_genome(const ProbabilityModel& model, std::uint64_t gen_seed, std::uint32_t index);

/// Clamps every entry into [epsilon, 1 - epsilon] and re-pins the diagonal.
ProbabilityModel clip_model(ProbabilityModel model);

/// Most likely genome: bit = rho > 0.5, ties map to 0.
Genome extract(const ProbabilityModel& model);

}  // namespace ec
