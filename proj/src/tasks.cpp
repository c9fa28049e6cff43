#include "ec/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ec/error.hpp"
#include "ec/probability.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

// Uniform in [-1, 1) from reset seed and slot.
double signed_unit(std::uint64_t seed, std::uint32_t slot) {
  const auto words = philox_block(seed, 0, Stream::kEpisodeSeed, slot, 0);
  return 2.0 * (to_open_unit_double(words[0], words[1]) - 0.5);
}

void require_action(std::span<const double> action, const EnvironmentSpec& spec) {
  if (action.size() != spec.act_dim) {
    throw DimensionError(spec.name + ": action has length " + std::to_string(action.size()) + ", expected " +
                         std::to_string(spec.act_dim));
  }
  for (double a : action) {
    if (!std::isfinite(a)) throw Error(spec.name + ": non-finite action");
  }
}

}  // namespace

double episode_return(Environment& env, Policy& policy, std::uint64_t seed) {
  policy.reset();
  auto obs = env.reset(seed);
  double total = 0.0;
  for (std::size_t t = 0; t < env.spec().horizon; ++t) {
    const auto action = policy.act(obs);
    auto result = env.step(action);
    if (!std::isfinite(result.reward)) {
      throw Error(env.spec().name + ": non-finite reward at step " + std::to_string(t));
    }
    total += result.reward;
    if (result.done) break;
    obs = std::move(result.observation);
  }
  return total;
}

double wrap_angle(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(theta + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  return wrapped - std::numbers::pi;
}

Pendulum::Pendulum(PendulumParams params) : params_(params) {
  spec_.name = "pendulum";
  spec_.obs_dim = 3;
  spec_.act_dim = 1;
  spec_.bounds = ActionBounds::symmetric(1, params_.max_torque);
  spec_.horizon = params_.horizon;
}

std::vector<double> Pendulum::reset(std::uint64_t seed) {
  theta_ = std::numbers::pi + params_.jitter * signed_unit(seed, 0);
  theta_dot_ = params_.jitter * signed_unit(seed, 1);
  t_ = 0;
  return observation();
}

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = theta;
  theta_dot_ = theta_dot;
  t_ = 0;
}

double Pendulum::energy() const noexcept {
  const double k = 3.0 * params_.gravity / (2.0 * params_.length);
  return 0.5 * theta_dot_ * theta_dot_ + k * std::cos(theta_);
}

std::vector<double> Pendulum::observation() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

StepResult Pendulum::step(std::span<const double> action) {
  require_action(action, spec_);
  const double u = std::clamp(action[0], -params_.max_torque, params_.max_torque);
  const double angle = wrap_angle(theta_);
  const double reward = -(angle * angle + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

  const double accel = 3.0 * params_.gravity / (2.0 * params_.length) * std::sin(theta_) +
                       3.0 * u / (params_.mass * params_.length * params_.length);
  theta_dot_ = std::clamp(theta_dot_ + accel * params_.dt, -params_.max_speed, params_.max_speed);
  theta_ += theta_dot_ * params_.dt;
  ++t_;
  return {observation(), reward, t_ >= params_.horizon};
}

PointMass::PointMass(PointMassParams params) : params_(params) {
  spec_.name = "pointmass";
  spec_.obs_dim = 3;
  spec_.act_dim = 1;
  spec_.bounds = ActionBounds::symmetric(1, params_.max_force);
  spec_.horizon = params_.horizon;
}

std::vector<double> PointMass::reset(std::uint64_t seed) {
  x_ = 0.0;
  v_ = 0.0;
  target_ = params_.target_range * signed_unit(seed, 0);
  t_ = 0;
  return observation();
}

void PointMass::set_state(double x, double v, double target) {
  x_ = x;
  v_ = v;
  target_ = target;
  t_ = 0;
}

std::vector<double> PointMass::observation() const { return {x_, v_, target_ - x_}; }

StepResult PointMass::step(std::span<const double> action) {
  require_action(action, spec_);
  const double u = std::clamp(action[0], -params_.max_force, params_.max_force);
  v_ += u * params_.dt;
  x_ += v_ * params_.dt;
  ++t_;
  return {observation(), -std::fabs(target_ - x_), t_ >= params_.horizon};
}

ConstantRewardEnv::ConstantRewardEnv(double reward, std::size_t horizon) : reward_(reward) {
  spec_.name = "constant";
  spec_.obs_dim = 1;
  spec_.act_dim = 1;
  spec_.bounds = ActionBounds::symmetric(1, 1.0);
  spec_.horizon = horizon;
}

std::vector<double> ConstantRewardEnv::reset(std::uint64_t) {
  t_ = 0;
  return {0.0};
}

StepResult ConstantRewardEnv::step(std::span<const double> action) {
  require_action(action, spec_);
  ++t_;
  return {{0.0}, reward_, t_ >= spec_.horizon};
}

double MaskMatchFitness::operator()(const Genome& genome) const {
  const auto matching = [](const BitMatrix& a, const BitMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("mask_match: genome shape mismatch");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) same += a.get(i, j) == b.get(i, j) ? 1 : 0;
    }
    return same;
  };
  return static_cast<double>(matching(genome.w_in, target_.w_in) + matching(genome.w_rec, target_.w_rec) +
                             matching(genome.w_out, target_.w_out));
}

Genome random_target(const NetworkConfig& config, std::uint64_t seed) {
  const ProbabilityModel half = init_model(config, kDefaultEpsilon);
  return sample_genome(half, derive_seed(seed, Stream::kInitialisation, 0xA5), 0);
}

double Task::evaluate_dense(const DenseGenome&, std::uint64_t, bool) const {
  throw ConfigError("task '" + name() + "' has no dense-weight evaluation");
}

EnvironmentTask::EnvironmentTask(NetworkConfig network, std::unique_ptr<Environment> prototype)
    : network_(network), prototype_(std::move(prototype)) {
  const auto& spec = prototype_->spec();
  if (network_.obs_dim != spec.obs_dim || network_.act_dim != spec.act_dim) {
    throw DimensionError("network dimensions do not match environment '" + spec.name + "'");
  }
  network_.validate();
}

double EnvironmentTask::evaluate(const Genome& genome, std::uint64_t episode_seed) const {
  auto env = prototype_->clone();
  SpikingPolicy policy(network_, genome, env->spec().action_bounds());
  return episode_return(*env, policy, episode_seed);
}

double EnvironmentTask::evaluate_dense(const DenseGenome& genome, std::uint64_t episode_seed, bool dale) const {
  auto env = prototype_->clone();
  DenseSpikingPolicy policy(network_, genome, env->spec().action_bounds(), dale);
  return episode_return(*env, policy, episode_seed);
}

std::unique_ptr<Environment> make_environment(const TaskConfig& config) {
  if (config.name == "pendulum") {
    PendulumParams params;
    params.jitter = config.jitter;
    return std::make_unique<Pendulum>(params);
  }
  if (config.name == "pointmass") {
    PointMassParams params;
    params.dt = config.point_dt;
    return std::make_unique<PointMass>(params);
  }
  throw ConfigError("unknown environment '" + config.name + "'");
}

std::unique_ptr<Task> make_task(const TaskConfig& config, NetworkConfig& network) {
  if (config.name == "mask_match") {
    network.validate();
    return std::make_unique<MaskMatchTask>(random_target(network, config.target_seed));
  }
  auto env = make_environment(config);
  network.obs_dim = env->spec().obs_dim;
  network.act_dim = env->spec().act_dim;
  return std::make_unique<EnvironmentTask>(network, std::move(env));
}

}  // namespace ec
