#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ec/config.hpp"
#include "ec/es_baseline.hpp"
#include "ec/probability.hpp"
#include "ec/tasks.hpp"

namespace ec {

/// Instrumentation: number of genomes materialised at the same time.
class LiveGenomeCounter {
 public:
  void enter() noexcept;
  void leave() noexcept { live_.fetch_sub(1, std::memory_order_relaxed); }
  std::size_t peak() const noexcept { return peak_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::size_t> live_{0};
  std::atomic<std::size_t> peak_{0};
};

std::uint64_t generation_seed(std::uint64_t run_seed, std::uint64_t generation);
std::uint64_t episode_seed(std::uint64_t gen_seed, std::uint32_t index);
std::uint64_t elite_seed(std::uint64_t gen_seed);

/// returns[i - lo] = task.evaluate(sample_genome(model, gen_seed, i), episode_seed(gen_seed, i))
/// for i in [lo, hi). Task errors are rethrown naming the offending index.
std::vector<double> evaluate_range(const ProbabilityModel& model, const Task& task, std::uint64_t gen_seed,
                                   std::size_t lo, std::size_t hi, std::size_t threads = 1,
                                   LiveGenomeCounter* counter = nullptr);

std::vector<double> evaluate_population(const ProbabilityModel& model, const Task& task, std::size_t n,
                                        std::uint64_t gen_seed, std::size_t threads = 1,
                                        LiveGenomeCounter* counter = nullptr);

/// ES counterpart: member i is es_perturb(center, sigma, gen_seed, i).
std::vector<double> evaluate_dense_range(const DenseGenome& center, double sigma, bool dale, const Task& task,
                                         std::uint64_t gen_seed, std::size_t lo, std::size_t hi,
                                         std::size_t threads = 1, LiveGenomeCounter* counter = nullptr);

struct MetricsRow {
  std::size_t gen = 0;
  double ret_mean = 0.0;
  double ret_max = 0.0;
  double ret_min = 0.0;
  double ret_std = 0.0;
  double elite_ret = 0.0;
  double seconds = 0.0;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

/// Generation state machine shared by local training, the coordinator and
/// the workers. Every node holding the same config and applying the same
/// returns reaches bit-identical parameters.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }
  const NetworkConfig& network() const noexcept { return config_.network; }
  const Task& task() const noexcept { return *task_; }
  std::size_t population() const noexcept { return config_.optimizer.population_size; }

  /// Index of the next generation to evaluate (= number of updates applied).
  std::size_t generation() const noexcept { return generation_; }
  std::uint64_t gen_seed(std::size_t generation) const;

  /// Returns of members [lo, hi) of the current generation.
  std::vector<double> evaluate(std::size_t lo, std::size_t hi, std::size_t threads) const;

  /// Applies the update for the current generation. Returns travel as
  /// 32-bit reals, so callers pass them already rounded. When `with_elite`
  /// is set the updated deployment network is rolled out once.
  MetricsRow apply(std::span<const float> returns, bool with_elite = true);

  const ProbabilityModel& model() const noexcept { return model_; }
  const DenseGenome& center() const noexcept { return center_; }
  std::vector<std::uint8_t> checkpoint_bytes() const;

  std::size_t peak_live_genomes() const noexcept { return counter_->peak(); }

 private:
  RunConfig config_;
  std::unique_ptr<Task> task_;
  ProbabilityModel model_;
  DenseGenome center_;
  std::size_t generation_ = 0;
  std::unique_ptr<LiveGenomeCounter> counter_ = std::make_unique<LiveGenomeCounter>();
};

/// Writes metrics rows and periodic checkpoints for a run.
class RunRecorder {
 public:
  explicit RunRecorder(const RunConfig& config);

  void record(const Trainer& trainer, MetricsRow row);
  void finish(const Trainer& trainer);
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }

 private:
  void write_checkpoint(const Trainer& trainer) const;

  RunSettings settings_;
  std::chrono::steady_clock::time_point start_;
  std::vector<MetricsRow> rows_;
  std::optional<std::filesystem::path> metrics_path_;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<std::uint8_t> checkpoint;
  ProbabilityModel model;
  DenseGenome center;
  std::size_t peak_live_genomes = 0;
};

/// Runs config.run.generations generations locally.
TrainResult train(const RunConfig& config);

/// Rounds to the 32-bit wire representation of returns.
std::vector<float> to_wire_returns(std::span<const double> returns);

}  // namespace ec
