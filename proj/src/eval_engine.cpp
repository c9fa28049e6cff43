#include "ec/eval_engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ec/ec_optimizer.hpp"
#include "ec/error.hpp"
#include "ec/io.hpp"
#include "ec/parallel.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

class LiveGuard {
 public:
  explicit LiveGuard(LiveGenomeCounter* counter) : counter_(counter) {
    if (counter_) counter_->enter();
  }
  ~LiveGuard() {
    if (counter_) counter_->leave();
  }
  LiveGuard(const LiveGuard&) = delete;
  LiveGuard& operator=(const LiveGuard&) = delete;

 private:
  LiveGenomeCounter* counter_;
};

template <class Eval>
std::vector<double> evaluate_indices(std::size_t lo, std::size_t hi, std::size_t threads, Eval&& eval) {
  if (hi < lo) throw Error("evaluation range is reversed");
  std::vector<double> out(hi - lo);
  parallel_for(out.size(), threads, [&](std::size_t k) {
    const std::size_t index = lo + k;
    try {
      out[k] = eval(static_cast<std::uint32_t>(index));
    } catch (const std::exception& e) {
      throw Error("population member " + std::to_string(index) + ": " + e.what());
    }
    if (!std::isfinite(out[k])) throw Error("population member " + std::to_string(index) + ": non-finite return");
  });
  return out;
}

MetricsRow summarise(std::size_t gen, std::span<const float> returns) {
  MetricsRow row;
  row.gen = gen;
  double sum = 0.0;
  row.ret_max = -INFINITY;
  row.ret_min = INFINITY;
  for (float r : returns) {
    sum += r;
    row.ret_max = std::max<double>(row.ret_max, r);
    row.ret_min = std::min<double>(row.ret_min, r);
  }
  row.ret_mean = sum / static_cast<double>(returns.size());
  double sq = 0.0;
  for (float r : returns) sq += (r - row.ret_mean) * (r - row.ret_mean);
  row.ret_std = std::sqrt(sq / static_cast<double>(returns.size()));
  return row;
}

}  // namespace

void LiveGenomeCounter::enter() noexcept {
  const std::size_t now = live_.fetch_add(1, std::memory_order_relaxed) + 1;
  std::size_t seen = peak_.load(std::memory_order_relaxed);
  while (now > seen && !peak_.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
  }
}

std::uint64_t generation_seed(std::uint64_t run_seed, std::uint64_t generation) {
  return derive_seed(run_seed, Stream::kGenerationSeed, generation);
}

std::uint64_t episode_seed(std::uint64_t gen_seed, std::uint32_t index) {
  return derive_seed(gen_seed, Stream::kEpisodeSeed, index);
}

std::uint64_t elite_seed(std::uint64_t gen_seed) { return derive_seed(gen_seed, Stream::kEliteSeed, 0); }

std::vector<double> evaluate_range(const ProbabilityModel& model, const Task& task, std::uint64_t gen_seed,
                                   std::size_t lo, std::size_t hi, std::size_t threads,
                                   LiveGenomeCounter* counter) {
  return evaluate_indices(lo, hi, threads, [&](std::uint32_t i) {
    LiveGuard guard(counter);
    const Genome genome = sample_genome(model, gen_seed, i);
    return task.evaluate(genome, episode_seed(gen_seed, i));
  });
}

std::vector<double> evaluate_population(const ProbabilityModel& model, const Task& task, std::size_t n,
                                        std::uint64_t gen_seed, std::size_t threads, LiveGenomeCounter* counter) {
  if (n < 1) throw Error("population size must be at least 1");
  return evaluate_range(model, task, gen_seed, 0, n, threads, counter);
}

std::vector<double> evaluate_dense_range(const DenseGenome& center, double sigma, bool dale, const Task& task,
                                         std::uint64_t gen_seed, std::size_t lo, std::size_t hi,
                                         std::size_t threads, LiveGenomeCounter* counter) {
  return evaluate_indices(lo, hi, threads, [&](std::uint32_t i) {
    LiveGuard guard(counter);
    const DenseGenome genome = es_perturb(center, sigma, gen_seed, i);
    return task.evaluate_dense(genome, episode_seed(gen_seed, i), dale);
  });
}

std::string metrics_header() { return "gen,ret_mean,ret_max,ret_min,ret_std,elite_ret,seconds"; }

std::string format_metrics_row(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f", row.gen, row.ret_mean, row.ret_max,
                row.ret_min, row.ret_std, row.elite_ret, row.seconds);
  return buf;
}

std::vector<float> to_wire_returns(std::span<const double> returns) {
  std::vector<float> out(returns.size());
  std::transform(returns.begin(), returns.end(), out.begin(), [](double r) { return static_cast<float>(r); });
  return out;
}

Trainer::Trainer(RunConfig config) : config_(std::move(config)) {
  task_ = make_task(config_.task, config_.network);
  config_.network.validate();
  if (config_.optimizer.algorithm == Algorithm::kEc) {
    model_ = init_model(config_.network, config_.optimizer.epsilon);
  } else {
    center_ = es_init(config_.network, config_.run.seed);
  }
}

std::uint64_t Trainer::gen_seed(std::size_t generation) const { return generation_seed(config_.run.seed, generation); }

std::vector<double> Trainer::evaluate(std::size_t lo, std::size_t hi, std::size_t threads) const {
  if (hi > population()) throw Error("evaluation range exceeds the population");
  const std::uint64_t seed = gen_seed(generation_);
  if (config_.optimizer.algorithm == Algorithm::kEc) {
    return evaluate_range(model_, *task_, seed, lo, hi, threads, counter_.get());
  }
  return evaluate_dense_range(center_, config_.optimizer.sigma, config_.optimizer.dale, *task_, seed, lo, hi, threads,
                              counter_.get());
}

MetricsRow Trainer::apply(std::span<const float> returns, bool with_elite) {
  if (returns.size() != population()) {
    throw DimensionError("generation " + std::to_string(generation_) + ": got " + std::to_string(returns.size()) +
                         " returns for a population of " + std::to_string(population()));
  }
  const std::vector<double> values(returns.begin(), returns.end());
  const std::uint64_t seed = gen_seed(generation_);
  const auto& opt = config_.optimizer;
  MetricsRow row = summarise(generation_, returns);
  if (opt.algorithm == Algorithm::kEc) {
    model_ = ec_update(model_, seed, values, opt.learning_rate, opt.shaping, config_.run.threads);
    if (with_elite) row.elite_ret = task_->evaluate(extract(model_), elite_seed(seed));
  } else {
    center_ = es_update(center_, seed, values, opt.learning_rate, opt.sigma, opt.weight_decay);
    if (with_elite) row.elite_ret = task_->evaluate_dense(center_, elite_seed(seed), opt.dale);
  }
  ++generation_;
  return row;
}

std::vector<std::uint8_t> Trainer::checkpoint_bytes() const {
  if (config_.optimizer.algorithm == Algorithm::kEc) return encode_checkpoint(config_.network, model_);
  return encode_dense_checkpoint(config_.network, center_);
}

RunRecorder::RunRecorder(const RunConfig& config)
    : settings_(config.run), start_(std::chrono::steady_clock::now()) {
  if (!settings_.metrics_path.empty()) {
    metrics_path_ = settings_.metrics_path;
    std::ofstream out(*metrics_path_, std::ios::trunc);
    if (!out) throw Error("cannot open metrics file '" + settings_.metrics_path + "'");
    out << metrics_header() << '\n';
  }
}

void RunRecorder::record(const Trainer& trainer, MetricsRow row) {
  row.seconds = settings_.wall_clock
                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()
                    : 0.0;
  rows_.push_back(row);
  if (metrics_path_) {
    std::ofstream out(*metrics_path_, std::ios::app);
    if (!out) throw Error("cannot append to metrics file '" + metrics_path_->string() + "'");
    out << format_metrics_row(row) << '\n';
  }
  if (settings_.checkpoint_every > 0 && trainer.generation() % settings_.checkpoint_every == 0) {
    write_checkpoint(trainer);
  }
}

void RunRecorder::finish(const Trainer& trainer) { write_checkpoint(trainer); }

void RunRecorder::write_checkpoint(const Trainer& trainer) const {
  if (settings_.checkpoint_path.empty()) return;
  write_file(settings_.checkpoint_path, trainer.checkpoint_bytes());
}

TrainResult train(const RunConfig& config) {
  Trainer trainer(config);
  RunRecorder recorder(trainer.config());
  const std::size_t threads = trainer.config().run.threads;
  for (std::size_t g = 0; g < trainer.config().run.generations; ++g) {
    const auto returns = to_wire_returns(trainer.evaluate(0, trainer.population(), threads));
    recorder.record(trainer, trainer.apply(returns));
  }
  recorder.finish(trainer);
  return {recorder.rows(), trainer.checkpoint_bytes(), trainer.model(), trainer.center(), trainer.peak_live_genomes()};
}

}  // namespace ec
