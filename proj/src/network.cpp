#include "ec/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ec/error.hpp"

namespace ec {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(std::string("non-finite value in ") + what);
  }
}

void require_size(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + " has length " + std::to_string(actual) + ", expected " +
                         std::to_string(expected));
  }
}

void binary_input_current(const Dynamics& dyn, const BitMatrix& w_in, std::span<const double> obs,
                          std::span<double> out) {
  for (std::size_t i = 0; i < w_in.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < w_in.cols(); ++j) {
      if (w_in.get(i, j)) sum += obs[j];
    }
    out[i] = dyn.input_gain * sum;
  }
}

void dense_product(const Matrix<float>& w, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    const auto row = w.row(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) sum += static_cast<double>(row[j]) * x[j];
    out[i] = sum;
  }
}

// c' = d_c c + recurrent + input;  v = d_v u + r_h c';  s' = v > 1;  u' = v (1 - s')
template <class T>
void integrate(const Dynamics& dyn, std::span<const T> recurrent, std::span<const double> input,
               NeuronState& st) {
  for (std::size_t i = 0; i < dyn.n_neurons; ++i) {
    const double c = dyn.d_c * st.c[i] + static_cast<double>(recurrent[i]) + input[i];
    const double v = dyn.d_v * st.u[i] + dyn.r_h * c;
    const bool spike = v > kSpikeThreshold;
    st.c[i] = c;
    st.u[i] = spike ? 0.0 : v;
    st.spikes.set(i, spike);
  }
}

template <class T>
void leak_readout(const Dynamics& dyn, std::span<const T> raw_counts, std::span<double> trace) {
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double raw = dyn.r_out * static_cast<double>(raw_counts[k]);
    trace[k] = dyn.d_out * trace[k] + (1.0 - dyn.d_out) * raw;
  }
}

}  // namespace

void NetworkConfig::validate() const {
  if (!(excitatory_ratio > 0.0 && excitatory_ratio < 1.0)) {
    throw ConfigError("excitatory_ratio must lie in (0, 1)");
  }
  if (n_excitatory() < 1 || n_inhibitory() < 1) {
    throw ConfigError("n_neurons = " + std::to_string(n_neurons) +
                      " leaves an empty excitatory or inhibitory group");
  }
  if (!(dt_ms > 0.0)) throw ConfigError("dt_ms must be positive");
  if (!(tau_syn_ms > 0.0) || !(tau_m_ms > 0.0) || !(tau_out_ms > 0.0)) {
    throw ConfigError("time constants must be positive");
  }
  if (sim_steps_per_control < 1) throw ConfigError("sim_steps_per_control must be at least 1");
  for (const auto& r : {r_in, r_h, r_out}) {
    if (r && !std::isfinite(*r)) throw ConfigError("resistances must be finite");
  }
  if (r_h && *r_h == 0.0) throw ConfigError("r_h must be nonzero");
}

std::size_t NetworkConfig::n_excitatory() const noexcept {
  return static_cast<std::size_t>(std::floor(excitatory_ratio * static_cast<double>(n_neurons)));
}

double NetworkConfig::input_resistance() const {
  if (r_in) return *r_in;
  if (obs_dim == 0) return 0.0;
  return 0.1 * tau_m_ms * std::sqrt(2.0 / static_cast<double>(obs_dim));
}

double NetworkConfig::hidden_resistance() const {
  if (r_h) return *r_h;
  return 1.0 * (tau_m_ms / tau_syn_ms) * std::sqrt(2.0 / static_cast<double>(n_neurons));
}

double NetworkConfig::output_resistance() const {
  if (r_out) return *r_out;
  return 5.0 * tau_out_ms * std::sqrt(2.0 / static_cast<double>(n_neurons));
}

Genome Genome::zeros(const NetworkConfig& config) {
  return {BitMatrix(config.n_neurons, config.obs_dim), BitMatrix(config.n_neurons, config.n_neurons),
          BitMatrix(config.act_dim, config.n_neurons)};
}

bool Genome::matches(const NetworkConfig& config) const noexcept {
  return w_in.rows() == config.n_neurons && w_in.cols() == config.obs_dim &&
         w_rec.rows() == config.n_neurons && w_rec.cols() == config.n_neurons &&
         w_out.rows() == config.act_dim && w_out.cols() == config.n_neurons;
}

std::size_t Genome::bit_count() const noexcept {
  return w_in.rows() * w_in.cols() + w_rec.rows() * w_rec.cols() + w_out.rows() * w_out.cols();
}

std::size_t Genome::connection_count() const noexcept { return w_in.count() + w_rec.count() + w_out.count(); }

DenseGenome DenseGenome::zeros(const NetworkConfig& config) {
  return {Matrix<float>(config.n_neurons, config.obs_dim), Matrix<float>(config.n_neurons, config.n_neurons),
          Matrix<float>(config.act_dim, config.n_neurons)};
}

bool DenseGenome::matches(const NetworkConfig& config) const noexcept {
  return w_in.same_shape(config.n_neurons, config.obs_dim) &&
         w_rec.same_shape(config.n_neurons, config.n_neurons) &&
         w_out.same_shape(config.act_dim, config.n_neurons);
}

NeuronState NeuronState::zeros(const NetworkConfig& config) {
  return {std::vector<double>(config.n_neurons, 0.0), std::vector<double>(config.n_neurons, 0.0),
          std::vector<double>(config.act_dim, 0.0), BitVector(config.n_neurons)};
}

bool NeuronState::matches(const NetworkConfig& config) const noexcept {
  return u.size() == config.n_neurons && c.size() == config.n_neurons && o.size() == config.act_dim &&
         spikes.size() == config.n_neurons;
}

double decay_coefficient(double dt_ms, double tau_ms) {
  if (!(tau_ms > 0.0)) throw ConfigError("time constant must be positive");
  if (!(dt_ms >= 0.0)) throw ConfigError("timestep must be non-negative");
  return std::exp(-dt_ms / tau_ms);
}

Dynamics::Dynamics(const NetworkConfig& config) {
  config.validate();
  d_c = decay_coefficient(config.dt_ms, config.tau_syn_ms);
  d_v = decay_coefficient(config.dt_ms, config.tau_m_ms);
  d_out = decay_coefficient(config.dt_ms, config.tau_out_ms);
  r_h = config.hidden_resistance();
  r_out = config.output_resistance();
  input_gain = config.input_resistance() / r_h;
  n_neurons = config.n_neurons;
  n_excitatory = config.n_excitatory();
  obs_dim = config.obs_dim;
  act_dim = config.act_dim;
  substeps = config.sim_steps_per_control;
}

void Dynamics::split_groups(const BitVector& spikes, BitVector& excitatory, BitVector& inhibitory) const {
  const auto src = spikes.words();
  auto exc = excitatory.words();
  auto inh = inhibitory.words();
  for (std::size_t w = 0; w < src.size(); ++w) {
    const std::size_t lo = w * kWordBits;
    std::uint64_t exc_mask = 0;
    if (n_excitatory >= lo + kWordBits) {
      exc_mask = ~std::uint64_t{0};
    } else if (n_excitatory > lo) {
      exc_mask = (std::uint64_t{1} << (n_excitatory - lo)) - 1;
    }
    exc[w] = src[w] & exc_mask;
    inh[w] = src[w] & ~exc_mask;
  }
}

NeuronState lif_step(const NeuronState& state, const Genome& genome, std::span<const double> obs,
                     const NetworkConfig& config) {
  const Dynamics dyn(config);
  if (!state.matches(config)) throw DimensionError("lif_step: state does not match config");
  if (!genome.matches(config)) throw DimensionError("lif_step: genome does not match config");
  require_size(obs.size(), config.obs_dim, "observation");
  require_finite(obs, "observation");

  std::vector<double> input(config.n_neurons);
  binary_input_current(dyn, genome.w_in, obs, input);
  BitVector exc(config.n_neurons), inh(config.n_neurons);
  dyn.split_groups(state.spikes, exc, inh);
  std::vector<std::int32_t> recurrent(config.n_neurons);
  packed_matvec_signed(genome.w_rec, exc, inh, recurrent);

  NeuronState next = state;
  integrate<std::int32_t>(dyn, recurrent, input, next);
  return next;
}

ReadoutResult readout_step(std::span<const double> trace, const BitVector& spikes, const Genome& genome,
                           const NetworkConfig& config) {
  const Dynamics dyn(config);
  require_size(trace.size(), config.act_dim, "output trace");
  require_size(spikes.size(), config.n_neurons, "spike vector");
  if (!genome.matches(config)) throw DimensionError("readout_step: genome does not match config");

  BitVector exc(config.n_neurons), inh(config.n_neurons);
  dyn.split_groups(spikes, exc, inh);
  std::vector<std::int32_t> counts(config.act_dim);
  packed_matvec_signed(genome.w_out, exc, inh, counts);

  ReadoutResult result{std::vector<double>(trace.begin(), trace.end()), {}};
  leak_readout<std::int32_t>(dyn, counts, result.trace);
  result.output = result.trace;
  return result;
}

std::vector<double> squash_action(std::span<const double> trace, const ActionBounds& bounds) {
  require_size(bounds.size(), trace.size(), "action bounds");
  std::vector<double> action(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double unit = 0.5 * (std::tanh(trace[k]) + 1.0);
    action[k] = bounds.low[k] + unit * (bounds.high[k] - bounds.low[k]);
  }
  return action;
}

ControlResult control_step(const Genome& genome, const NeuronState& state, std::span<const double> obs,
                           const NetworkConfig& config, const ActionBounds& bounds) {
  if (!state.matches(config)) throw DimensionError("control_step: state does not match config");
  SpikingPolicy policy(config, genome, bounds);
  policy.state() = state;
  auto action = policy.act(obs);
  return {policy.state(), std::move(action)};
}

SpikingPolicy::SpikingPolicy(const NetworkConfig& config, Genome genome, ActionBounds bounds)
    : dynamics_(config),
      genome_(std::move(genome)),
      bounds_(std::move(bounds)),
      state_(NeuronState::zeros(config)),
      input_(config.n_neurons),
      scratch_rec_(config.n_neurons),
      scratch_out_(config.act_dim),
      exc_(config.n_neurons),
      inh_(config.n_neurons) {
  if (!genome_.matches(config)) throw DimensionError("SpikingPolicy: genome does not match config");
  require_size(bounds_.size(), config.act_dim, "action bounds");
}

void SpikingPolicy::reset() {
  std::fill(state_.u.begin(), state_.u.end(), 0.0);
  std::fill(state_.c.begin(), state_.c.end(), 0.0);
  std::fill(state_.o.begin(), state_.o.end(), 0.0);
  state_.spikes.clear();
}

std::vector<double> SpikingPolicy::act(std::span<const double> observation) {
  require_size(observation.size(), dynamics_.obs_dim, "observation");
  require_finite(observation, "observation");
  binary_input_current(dynamics_, genome_.w_in, observation, input_);
  for (std::size_t step = 0; step < dynamics_.substeps; ++step) {
    dynamics_.split_groups(state_.spikes, exc_, inh_);
    packed_matvec_signed(genome_.w_rec, exc_, inh_, scratch_rec_);
    integrate<std::int32_t>(dynamics_, scratch_rec_, input_, state_);
    dynamics_.split_groups(state_.spikes, exc_, inh_);
    packed_matvec_signed(genome_.w_out, exc_, inh_, scratch_out_);
    leak_readout<std::int32_t>(dynamics_, scratch_out_, state_.o);
  }
  return squash_action(state_.o, bounds_);
}

DenseSpikingPolicy::DenseSpikingPolicy(const NetworkConfig& config, DenseGenome genome, ActionBounds bounds,
                                       bool dale)
    : dynamics_(config),
      effective_(std::move(genome)),
      bounds_(std::move(bounds)),
      state_(NeuronState::zeros(config)),
      input_(config.n_neurons),
      scratch_rec_(config.n_neurons),
      scratch_out_(config.act_dim) {
  if (!effective_.matches(config)) throw DimensionError("DenseSpikingPolicy: genome does not match config");
  require_size(bounds_.size(), config.act_dim, "action bounds");
  if (dale) {
    for (auto& w : effective_.w_in.data) w = std::fabs(w);
    for (auto* m : {&effective_.w_rec, &effective_.w_out}) {
      for (std::size_t i = 0; i < m->rows; ++i) {
        for (std::size_t j = 0; j < m->cols; ++j) {
          (*m)(i, j) = std::fabs((*m)(i, j)) * static_cast<float>(dynamics_.group_sign(j));
        }
      }
    }
  }
}

void DenseSpikingPolicy::reset() {
  std::fill(state_.u.begin(), state_.u.end(), 0.0);
  std::fill(state_.c.begin(), state_.c.end(), 0.0);
  std::fill(state_.o.begin(), state_.o.end(), 0.0);
  state_.spikes.clear();
}

std::vector<double> DenseSpikingPolicy::act(std::span<const double> observation) {
  require_size(observation.size(), dynamics_.obs_dim, "observation");
  require_finite(observation, "observation");
  dense_product(effective_.w_in, observation, input_);
  for (auto& x : input_) x *= dynamics_.input_gain;
  std::vector<double> spikes(dynamics_.n_neurons);
  for (std::size_t step = 0; step < dynamics_.substeps; ++step) {
    for (std::size_t j = 0; j < spikes.size(); ++j) spikes[j] = state_.spikes.get(j) ? 1.0 : 0.0;
    dense_product(effective_.w_rec, spikes, scratch_rec_);
    integrate<double>(dynamics_, scratch_rec_, input_, state_);
    for (std::size_t j = 0; j < spikes.size(); ++j) spikes[j] = state_.spikes.get(j) ? 1.0 : 0.0;
    dense_product(effective_.w_out, spikes, scratch_out_);
    leak_readout<double>(dynamics_, scratch_out_, state_.o);
  }
  return squash_action(state_.o, bounds_);
}

}  // namespace ec
