// ec: train, evaluate and serve evolving-connectivity runs.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>

#include "ec/bench.hpp"
#include "ec/config.hpp"
#include "ec/dist.hpp"
#include "ec/error.hpp"
#include "ec/eval_engine.hpp"
#include "ec/io.hpp"
#include "ec/parallel.hpp"
#include "ec/transport.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string metrics_out;
};

ec::RunConfig load_with_overrides(const std::string& path, const Globals& g) {
  ec::RunConfig config = ec::load_config(path);
  if (g.seed) config.run.seed = *g.seed;
  if (g.threads) config.run.threads = std::max<std::size_t>(1, *g.threads);
  if (!g.metrics_out.empty()) config.run.metrics_path = g.metrics_out;
  return config;
}

void print_summary(const ec::TrainResult& result) {
  if (result.metrics.empty()) return;
  const auto& last = result.metrics.back();
  std::printf("generations %zu  final mean return %.6g  elite return %.6g\n", result.metrics.size(), last.ret_mean,
              last.elite_ret);
}

int cmd_train(const std::string& path, const Globals& g) {
  const ec::RunConfig config = load_with_overrides(path, g);
  spdlog::info("training {} generations, population {}", config.run.generations, config.optimizer.population_size);
  print_summary(ec::train(config));
  return kOk;
}

int cmd_eval(const std::string& path, const std::string& task_name, std::size_t episodes, std::uint64_t seed,
             std::size_t threads) {
  if (episodes == 0) throw ec::ConfigError("--episodes must be positive");
  ec::TaskConfig task_config;
  task_config.name = task_name;
  const std::string magic = ec::peek_magic(path);

  std::vector<double> returns(episodes);
  if (magic == "ESRC") {
    const auto ckpt = ec::load_dense_checkpoint(path);
    ec::NetworkConfig network = ckpt.network;
    const auto task = ec::make_task(task_config, network);
    ec::require_compatible(ckpt.network, network);
    ec::parallel_for(episodes, threads, [&](std::size_t i) {
      returns[i] = task->evaluate_dense(ckpt.center, ec::episode_seed(seed, static_cast<std::uint32_t>(i)), true);
    });
  } else {
    const auto ckpt = ec::load_checkpoint(path);
    ec::NetworkConfig network = ckpt.network;
    const auto task = ec::make_task(task_config, network);
    ec::require_compatible(ckpt.network, network);
    const ec::Genome genome = ec::extract(ckpt.model);
    ec::parallel_for(episodes, threads, [&](std::size_t i) {
      returns[i] = task->evaluate(genome, ec::episode_seed(seed, static_cast<std::uint32_t>(i)));
    });
  }
  double sum = 0.0;
  for (double r : returns) sum += r;
  std::printf("mean return %.9g over %zu episodes\n", sum / static_cast<double>(episodes), episodes);
  return kOk;
}

int cmd_extract(const std::string& path, const std::string& out) {
  const auto ckpt = ec::load_checkpoint(path);
  const ec::Genome mask = ec::extract(ckpt.model);
  ec::save_mask(out, mask);
  std::printf("wrote %s (%zu connections)\n", out.c_str(), mask.connection_count());
  return kOk;
}

int cmd_bench(std::size_t neurons, std::size_t iters, std::size_t threads, std::uint64_t seed) {
  const auto r = ec::run_kernel_bench(neurons, iters, threads, seed);
  std::printf("neurons %zu  iterations %zu  threads %zu\n", r.neurons, r.iterations, r.threads);
  std::printf("packed %.4g synaptic ops/s  (%.4f s)\n", r.packed_ops_per_sec, r.packed_seconds);
  std::printf("dense  %.4g synaptic ops/s  (%.4f s)\n", r.dense_ops_per_sec, r.dense_seconds);
  std::printf("ratio  %.3f\n", r.ratio);
  if (r.checksum != 0.0) {
    spdlog::error("packed and dense kernels disagree (checksum {})", r.checksum);
    return kRuntime;
  }
  return kOk;
}

int cmd_coordinator(const std::string& path, const std::string& listen, std::size_t workers, const Globals& g) {
  ec::RunConfig config = load_with_overrides(path, g);
  ec::Address address = ec::parse_address(listen.empty() ? ":" + std::to_string(config.run.port) : listen);
  if (listen.empty()) address.host = "0.0.0.0";
  ec::TcpListener listener(address);
  spdlog::info("listening on {}:{}, waiting for {} worker(s)", address.host, listener.port(), workers);
  ec::CoordinatorStats stats;
  const auto result = ec::run_coordinator(config, listener, workers, &stats);
  spdlog::info("workers joined {}, lost {}, refused {}, reassigned ranges {}", stats.workers_joined,
               stats.workers_lost, stats.workers_refused, stats.reassigned_ranges);
  print_summary(result);
  return kOk;
}

int cmd_worker(const std::string& connect, std::uint32_t id, double reconnect_s, const Globals& g) {
  const ec::Address address = ec::parse_address(connect);
  ec::WorkerState state;
  ec::WorkerOptions options;
  options.worker_id = id;
  options.threads = g.threads.value_or(std::max(1u, std::thread::hardware_concurrency()));
  const auto window = std::chrono::milliseconds(static_cast<long long>(reconnect_s * 1000));
  auto transport = ec::TcpTransport::connect(address, window);
  while (true) {
    const ec::WorkerExit exit = ec::worker_run(*transport, state, options);
    spdlog::info("worker {}: {}", id, ec::to_string(exit));
    if (exit == ec::WorkerExit::kShutdown) return kOk;
    if (exit == ec::WorkerExit::kRefused) return kRuntime;
    transport = ec::TcpTransport::connect(address, window);
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("ec"));

  CLI::App app{"Evolving connectivity for recurrent spiking networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Override run.seed");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--metrics-out", g.metrics_out, "Override run.metrics (CSV path)");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path, checkpoint_path, mask_out, task_name = "pendulum", listen, connect = "127.0.0.1:7171";
  std::size_t episodes = 10, neurons = 256, iters = 20000, workers = 1;
  std::uint64_t eval_seed = 0;
  std::uint32_t worker_id = 0;
  double reconnect_s = 10.0;

  auto* train = app.add_subcommand("train", "Run training locally");
  train->add_option("config", config_path, "Run configuration")->required();

  auto* eval = app.add_subcommand("eval", "Roll out the deployment network of a checkpoint");
  eval->add_option("checkpoint", checkpoint_path)->required();
  eval->add_option("--task", task_name, "pendulum, pointmass or mask_match");
  eval->add_option("--episodes", episodes);
  eval->add_option("--seed", eval_seed);

  auto* extract = app.add_subcommand("extract", "Write the deployment mask of a checkpoint");
  extract->add_option("checkpoint", checkpoint_path)->required();
  extract->add_option("mask-out", mask_out)->required();

  auto* bench = app.add_subcommand("bench", "Packed vs dense recurrent kernel throughput");
  bench->add_option("--neurons", neurons);
  bench->add_option("--iters", iters);

  auto* coordinator = app.add_subcommand("coordinator", "Serve a run to remote workers");
  coordinator->add_option("config", config_path)->required();
  coordinator->add_option("--listen", listen, "host:port (default 0.0.0.0:run.port)");
  coordinator->add_option("--workers", workers, "Workers to wait for before the first generation");

  auto* worker = app.add_subcommand("worker", "Evaluate population slices for a coordinator");
  worker->add_option("--connect", connect, "Coordinator host:port");
  worker->add_option("--id", worker_id);
  worker->add_option("--reconnect-seconds", reconnect_s, "How long to retry a lost coordinator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    const std::size_t threads = g.threads.value_or(1);
    if (*train) return cmd_train(config_path, g);
    if (*eval) return cmd_eval(checkpoint_path, task_name, episodes, g.seed.value_or(eval_seed), threads);
    if (*extract) return cmd_extract(checkpoint_path, mask_out);
    if (*bench) return cmd_bench(neurons, iters, threads, g.seed.value_or(0));
    if (*coordinator) return cmd_coordinator(config_path, listen, workers, g);
    if (*worker) return cmd_worker(connect, worker_id, reconnect_s, g);
  } catch (const ec::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntime;
  }
  return kUsage;
}
