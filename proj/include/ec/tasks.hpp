#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ec/network.hpp"
#include "ec/policy.hpp"

namespace ec {

struct EnvironmentSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  ActionBounds bounds;
  std::size_t horizon = 1;

  ActionBounds action_bounds() const { return bounds; }
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment. Deterministic given the reset seed and the
/// sequence of actions.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvironmentSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// Sum of rewards of one episode of `policy` from reset(seed), at most
/// spec().horizon steps. Resets the policy first.
double episode_return(Environment& env, Policy& policy, std::uint64_t seed);

struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  std::size_t horizon = 200;
  // Reset draws theta from pi +- jitter and theta_dot from +- jitter.
  double jitter = 0.1;
};

/// Swing-up pendulum, angle measured from upright. Semi-implicit Euler.
/// Observation (cos theta, sin theta, theta_dot); reward
/// -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2) on the pre-step state.
class Pendulum final : public Environment {
 public:
  explicit Pendulum(PendulumParams params = {});

  const EnvironmentSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Pendulum>(*this); }

  void set_state(double theta, double theta_dot);
  double theta() const noexcept { return theta_; }
  double theta_dot() const noexcept { return theta_dot_; }
  /// 0.5 theta_dot^2 + (3 g / 2 l) cos theta, conserved by the continuous
  /// unforced dynamics.
  double energy() const noexcept;
  std::vector<double> observation() const;

 private:
  PendulumParams params_;
  EnvironmentSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
  std::size_t t_ = 0;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);

struct PointMassParams {
  double dt = 0.1;
  double max_force = 1.0;
  double target_range = 1.0;
  std::size_t horizon = 100;
};

/// 1-D double integrator: v += u dt, x += v dt. Observation
/// (x, v, target - x); reward -|target - x| after the step.
class PointMass final : public Environment {
 public:
  explicit PointMass(PointMassParams params = {});

  const EnvironmentSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PointMass>(*this); }

  void set_state(double x, double v, double target);
  double position() const noexcept { return x_; }
  double velocity() const noexcept { return v_; }
  double target() const noexcept { return target_; }

 private:
  std::vector<double> observation() const;

  PointMassParams params_;
  EnvironmentSpec spec_;
  double x_ = 0.0;
  double v_ = 0.0;
  double target_ = 0.0;
  std::size_t t_ = 0;
};

/// Fixed reward every step; useful for checking return bookkeeping.
class ConstantRewardEnv final : public Environment {
 public:
  ConstantRewardEnv(double reward, std::size_t horizon);

  const EnvironmentSpec& spec() const override { return spec_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ConstantRewardEnv>(*this); }

 private:
  double reward_;
  EnvironmentSpec spec_;
  std::size_t t_ = 0;
};

/// R(theta) = number of bit positions where theta equals the target.
class MaskMatchFitness {
 public:
  explicit MaskMatchFitness(Genome target) : target_(std::move(target)) {}
  double operator()(const Genome& genome) const;
  const Genome& target() const noexcept { return target_; }
  std::size_t total_bits() const noexcept { return target_.bit_count(); }

 private:
  Genome target_;
};

/// Uniformly random target genome of the config's shape. Respects the
/// self-connection setting.
Genome random_target(const NetworkConfig& config, std::uint64_t seed);

struct TaskConfig {
  std::string name = "pendulum";  // pendulum | pointmass | mask_match
  double jitter = 0.1;
  double point_dt = 0.1;
  std::uint64_t target_seed = 0;
};

/// Fitness of one individual. Implementations are immutable and may be
/// called concurrently.
class Task {
 public:
  virtual ~Task() = default;
  virtual const std::string& name() const = 0;
  virtual double evaluate(const Genome& genome, std::uint64_t episode_seed) const = 0;
  /// Dense-weight evaluation for the ES baseline. Throws if unsupported.
  virtual double evaluate_dense(const DenseGenome& genome, std::uint64_t episode_seed, bool dale) const;
};

/// Rolls out a SpikingPolicy (or DenseSpikingPolicy) on a fresh copy of
/// the environment.
class EnvironmentTask final : public Task {
 public:
  EnvironmentTask(NetworkConfig network, std::unique_ptr<Environment> prototype);

  const std::string& name() const override { return prototype_->spec().name; }
  double evaluate(const Genome& genome, std::uint64_t episode_seed) const override;
  double evaluate_dense(const DenseGenome& genome, std::uint64_t episode_seed, bool dale) const override;

 private:
  NetworkConfig network_;
  std::unique_ptr<Environment> prototype_;
};

class MaskMatchTask final : public Task {
 public:
  explicit MaskMatchTask(Genome target) : fitness_(std::move(target)) {}

  const std::string& name() const override { return name_; }
  double evaluate(const Genome& genome, std::uint64_t) const override { return fitness_(genome); }
  const MaskMatchFitness& fitness() const noexcept { return fitness_; }

 private:
  std::string name_ = "mask_match";
  MaskMatchFitness fitness_;
};

std::unique_ptr<Environment> make_environment(const TaskConfig& config);

/// Builds the task and fixes network.obs_dim / act_dim for environment tasks.
std::unique_ptr<Task> make_task(const TaskConfig& config, NetworkConfig& network);

}  // namespace ec
