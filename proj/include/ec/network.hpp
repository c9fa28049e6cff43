#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ec/bitmatrix.hpp"
#include "ec/matrix.hpp"
#include "ec/policy.hpp"

namespace ec {

inline constexpr double kSpikeThreshold = 1.0;

/// Shape and time constants of the recurrent spiking network.
///
/// Neurons [0, n_excitatory()) form the excitatory group, the remainder the
/// inhibitory group. The resistances default to variance-preserving scales
/// derived from the other fields; setting them overrides the default.
struct NetworkConfig {
  std::size_t n_neurons = 256;
  double excitatory_ratio = 0.5;
  double dt_ms = 0.5;
  // 16.6 ms of simulated time per control step, floored to whole substeps.
  std::size_t sim_steps_per_control = 33;
  double tau_syn_ms = 5.0;
  double tau_m_ms = 10.0;
  double tau_out_ms = 10.0;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::optional<double> r_in;
  std::optional<double> r_h;
  std::optional<double> r_out;
  bool allow_self_connections = false;

  /// Throws ConfigError when any invariant is violated.
  void validate() const;

  std::size_t n_excitatory() const noexcept;
  std::size_t n_inhibitory() const noexcept { return n_neurons - n_excitatory(); }

  /// 0.1 * tau_m * sqrt(2 / obs_dim), or 0 without inputs.
  double input_resistance() const;
  /// 1.0 * (tau_m / tau_syn) * sqrt(2 / n_neurons)
  double hidden_resistance() const;
  /// 5.0 * tau_out * sqrt(2 / n_neurons)
  double output_resistance() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// One sampled 1-bit connectivity realisation.
struct Genome {
  BitMatrix w_in;   // n_neurons x obs_dim
  BitMatrix w_rec;  // n_neurons x n_neurons
  BitMatrix w_out;  // act_dim x n_neurons

  static Genome zeros(const NetworkConfig& config);
  bool matches(const NetworkConfig& config) const noexcept;
  /// Number of entries (present or absent connections).
  std::size_t bit_count() const noexcept;
  /// Number of set bits (present connections).
  std::size_t connection_count() const noexcept;

  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Real-valued weights of the same shapes as Genome (dense ES baseline).
struct DenseGenome {
  Matrix<float> w_in;
  Matrix<float> w_rec;
  Matrix<float> w_out;

  static DenseGenome zeros(const NetworkConfig& config);
  bool matches(const NetworkConfig& config) const noexcept;

  friend bool operator==(const DenseGenome&, const DenseGenome&) = default;
};

struct NeuronState {
  std::vector<double> u;  // membrane potential
  std::vector<double> c;  // synaptic current
  std::vector<double> o;  // output trace, act_dim
  BitVector spikes;

  static NeuronState zeros(const NetworkConfig& config);
  bool matches(const NetworkConfig& config) const noexcept;

  friend bool operator==(const NeuronState&, const NeuronState&) = default;
};

/// exp(-dt / tau). Throws ConfigError for tau <= 0 or dt < 0.
double decay_coefficient(double dt_ms, double tau_ms);

/// Precomputed per-config constants shared by every simulation step.
struct Dynamics {
  double d_c = 0.0;
  double d_v = 0.0;
  double d_out = 0.0;
  double r_h = 0.0;
  double r_out = 0.0;
  double input_gain = 0.0;  // r_in / r_h, applied to the input current
  std::size_t n_neurons = 0;
  std::size_t n_excitatory = 0;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t substeps = 0;

  explicit Dynamics(const NetworkConfig& config);

  /// Splits a spike vector into its excitatory and inhibitory parts.
  void split_groups(const BitVector& spikes, BitVector& excitatory, BitVector& inhibitory) const;
  int group_sign(std::size_t neuron) const noexcept { return neuron < n_excitatory ? 1 : -1; }
};

/// One discretised LIF step: synaptic current, membrane potential, strict
/// threshold, hard reset. The input current is held fixed for this step.
NeuronState lif_step(const NeuronState& state, const Genome& genome, std::span<const double> obs,
                     const NetworkConfig& config);

struct ReadoutResult {
  std::vector<double> trace;
  std::vector<double> output;
};

/// Leaky-integrator readout with unit DC gain; inhibitory spikes count
/// negatively.
ReadoutResult readout_step(std::span<const double> trace, const BitVector& spikes, const Genome& genome,
                           const NetworkConfig& config);

struct ControlResult {
  NeuronState state;
  std::vector<double> action;
};

/// Runs sim_steps_per_control substeps with a fixed observation, then maps
/// tanh(o) affinely onto the action bounds.
ControlResult control_step(const Genome& genome, const NeuronState& state, std::span<const double> obs,
                           const NetworkConfig& config, const ActionBounds& bounds);

/// squash(o)[k] = low[k] + (tanh(o[k]) + 1) / 2 * (high[k] - low[k])
std::vector<double> squash_action(std::span<const double> trace, const ActionBounds& bounds);

/// Binary-connectivity spiking policy (evaluation path of the EC optimiser).
class SpikingPolicy final : public Policy {
 public:
  SpikingPolicy(const NetworkConfig& config, Genome genome, ActionBounds bounds);

  void reset() override;
  std::vector<double> act(std::span<const double> observation) override;

  const NeuronState& state() const noexcept { return state_; }
  NeuronState& state() noexcept { return state_; }

 private:
  Dynamics dynamics_;
  Genome genome_;
  ActionBounds bounds_;
  NeuronState state_;
  std::vector<double> input_;
  std::vector<std::int32_t> scratch_rec_;
  std::vector<std::int32_t> scratch_out_;
  BitVector exc_;
  BitVector inh_;
};

/// Real-weight spiking policy used by the ES baseline. Weights enter as
/// |w| times the presynaptic group sign when `dale` is set, otherwise as-is.
class DenseSpikingPolicy final : public Policy {
 public:
  DenseSpikingPolicy(const NetworkConfig& config, DenseGenome genome, ActionBounds bounds, bool dale = true);

  void reset() override;
  std::vector<double> act(std::span<const double> observation) override;

  const NeuronState& state() const noexcept { return state_; }

 private:
  Dynamics dynamics_;
  DenseGenome effective_;
  ActionBounds bounds_;
  NeuronState state_;
  std::vector<double> input_;
  std::vector<double> scratch_rec_;
  std::vector<double> scratch_out_;
};

}  // namespace ec
