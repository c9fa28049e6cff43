#include <catch_amalgamated.hpp>

#include <map>
#include <mutex>
#include <thread>

#include "ec/dist.hpp"
#include "ec/error.hpp"
#include "ec/eval_engine.hpp"

namespace {

ec::RunConfig mask_run(std::size_t neurons = 8, std::size_t generations = 6) {
  ec::RunConfig c;
  c.network.n_neurons = neurons;
  c.network.allow_self_connections = true;
  c.optimizer.population_size = 48;
  c.task.name = "mask_match";
  c.run.generations = generations;
  c.run.seed = 17;
  c.run.wall_clock = false;
  c.run.worker_timeout_s = 20.0;
  return c;
}

// Records every payload crossing the coordinator end, by tag.
class CountingTransport final : public ec::Transport {
 public:
  explicit CountingTransport(std::unique_ptr<ec::Transport> inner) : inner_(std::move(inner)) {}

  void send(std::span<const std::uint8_t> payload) override {
    note(payload);
    inner_->send(payload);
  }
  std::optional<std::vector<std::uint8_t>> receive() override {
    auto p = inner_->receive();
    if (p) note(*p);
    return p;
  }
  void close() override { inner_->close(); }

  struct Tally {
    std::mutex mu;
    std::map<int, std::size_t> bytes, count, largest;
  };
  std::shared_ptr<Tally> tally = std::make_shared<Tally>();

 private:
  void note(std::span<const std::uint8_t> p) {
    std::lock_guard lock(tally->mu);
    const int tag = p.empty() ? -1 : p[0];
    tally->bytes[tag] += p.size() + 4;
    tally->count[tag] += 1;
    tally->largest[tag] = std::max(tally->largest[tag], p.size());
  }
  std::unique_ptr<ec::Transport> inner_;
};

struct Pool {
  std::vector<std::jthread> threads;
  std::vector<ec::WorkerExit> exits;
  std::mutex mu;

  void spawn(ec::Coordinator& coordinator, ec::WorkerOptions options) {
    auto [server, client] = ec::make_channel_pair();
    coordinator.add_connection(std::move(server));
    threads.emplace_back([this, options, t = std::shared_ptr<ec::Transport>(std::move(client))] {
      ec::WorkerState state;
      const auto exit = ec::worker_run(*t, state, options);
      std::lock_guard lock(mu);
      exits.push_back(exit);
    });
  }
};

}  // namespace

TEST_CASE("one and two workers reproduce the local run") {
  const auto config = mask_run();
  const auto local = ec::train(config);
  for (std::size_t workers : {1u, 2u}) {
    ec::Coordinator coordinator(config, workers);
    Pool pool;
    for (std::size_t w = 0; w < workers; ++w) pool.spawn(coordinator, {.worker_id = static_cast<std::uint32_t>(w)});
    const auto remote = coordinator.run();
    pool.threads.clear();
    CHECK(remote.checkpoint == local.checkpoint);
    REQUIRE(remote.metrics.size() == local.metrics.size());
    for (std::size_t g = 0; g < local.metrics.size(); ++g) CHECK(remote.metrics[g].ret_mean == local.metrics[g].ret_mean);
    CHECK(coordinator.stats().workers_joined == workers);
    for (auto e : pool.exits) CHECK(e == ec::WorkerExit::kShutdown);
  }
}

TEST_CASE("a worker dying mid-run does not change the result") {
  const auto config = mask_run();
  const auto local = ec::train(config);
  ec::Coordinator coordinator(config, 2);
  Pool pool;
  pool.spawn(coordinator, {.worker_id = 0, .fail_after_assignments = 2});
  pool.spawn(coordinator, {.worker_id = 1});
  const auto remote = coordinator.run();
  pool.threads.clear();
  CHECK(remote.checkpoint == local.checkpoint);
  CHECK(coordinator.stats().workers_lost == 1);
  CHECK(coordinator.stats().reassigned_ranges >= 1);
  CHECK(std::count(pool.exits.begin(), pool.exits.end(), ec::WorkerExit::kInjectedFailure) == 1);
}

TEST_CASE("a reconnecting worker resynchronises from its last update") {
  const auto config = mask_run(8, 8);
  const auto local = ec::train(config);
  ec::Coordinator coordinator(config, 1);

  ec::WorkerState state;
  std::vector<ec::WorkerExit> exits;
  std::jthread worker([&] {
    ec::WorkerOptions options{.worker_id = 5, .disconnect_after_generation = 3};
    while (true) {
      auto [server, client] = ec::make_channel_pair();
      coordinator.add_connection(std::move(server));
      exits.push_back(ec::worker_run(*client, state, options));
      options.disconnect_after_generation.reset();
      if (exits.back() != ec::WorkerExit::kDisconnected) break;
    }
  });
  const auto remote = coordinator.run();
  worker.join();
  CHECK(remote.checkpoint == local.checkpoint);
  REQUIRE(exits.size() == 2);
  CHECK(exits[0] == ec::WorkerExit::kDisconnected);
  CHECK(exits[1] == ec::WorkerExit::kShutdown);
  REQUIRE(state.trainer);
  CHECK(state.trainer->checkpoint_bytes() == local.checkpoint);
  CHECK(coordinator.stats().workers_joined == 2);
}

TEST_CASE("stale ALLRETURNS is ignored by a worker") {
  auto config = mask_run(8, 1);
  ec::Trainer reference(config);
  const auto returns = ec::to_wire_returns(reference.evaluate(0, reference.population(), 1));

  auto [coord, client] = ec::make_channel_pair();
  ec::WorkerState state;
  ec::WorkerExit exit{};
  std::jthread worker([&, c = std::move(client)] { exit = ec::worker_run(*c, state); });

  const auto hello = ec::receive_message(*coord);
  REQUIRE(hello);
  CHECK(std::get<ec::Hello>(*hello).last_gen == -1);
  ec::send_message(*coord, ec::Hello{0, ec::kProtocolVersion, -1});
  ec::send_message(*coord, ec::ConfigText{ec::format_config(config)});
  ec::send_message(*coord, ec::AllReturns{0, returns});
  ec::send_message(*coord, ec::AllReturns{0, returns});
  ec::send_message(*coord, ec::Shutdown{});
  worker.join();
  CHECK(exit == ec::WorkerExit::kShutdown);
  CHECK(state.stale_messages == 1);
  reference.apply(returns, false);
  CHECK(state.trainer->checkpoint_bytes() == reference.checkpoint_bytes());
}

TEST_CASE("workers from the future or another protocol are refused") {
  const auto config = mask_run(8, 3);
  ec::Coordinator coordinator(config, 1);
  std::jthread runner([&] { coordinator.run(); });

  auto [s1, c1] = ec::make_channel_pair();
  coordinator.add_connection(std::move(s1));
  ec::send_message(*c1, ec::Hello{1, ec::kProtocolVersion + 1, -1});
  auto reply = ec::receive_message(*c1);
  REQUIRE(reply);
  CHECK(std::holds_alternative<ec::Shutdown>(*reply));

  auto [s2, c2] = ec::make_channel_pair();
  coordinator.add_connection(std::move(s2));
  ec::send_message(*c2, ec::Hello{2, ec::kProtocolVersion, 50});
  reply = ec::receive_message(*c2);
  REQUIRE(reply);
  CHECK(std::holds_alternative<ec::Shutdown>(*reply));

  ec::WorkerState refused;
  auto [s3, c3] = ec::make_channel_pair();
  ec::send_message(*s3, ec::Shutdown{});
  CHECK(ec::worker_run(*c3, refused) == ec::WorkerExit::kRefused);

  Pool pool;
  pool.spawn(coordinator, {.worker_id = 3});
  runner.join();
  pool.threads.clear();
  CHECK(coordinator.stats().workers_refused == 2);
  CHECK(coordinator.stats().workers_joined == 1);
}

TEST_CASE("traffic per generation scales with the population, not the model") {
  std::map<std::size_t, std::size_t> per_gen;
  for (std::size_t neurons : {8u, 48u}) {
    const auto config = mask_run(neurons, 4);
    const std::size_t n = config.optimizer.population_size;
    ec::Coordinator coordinator(config, 1);
    auto [server, client] = ec::make_channel_pair();
    auto counting = std::make_unique<CountingTransport>(std::move(server));
    auto tally = counting->tally;
    coordinator.add_connection(std::move(counting));
    std::jthread worker([c = std::move(client)] {
      ec::WorkerState state;
      ec::worker_run(*c, state);
    });
    coordinator.run();
    worker.join();

    std::lock_guard lock(tally->mu);
    std::size_t total = 0;
    for (const auto& [tag, bytes] : tally->bytes) {
      if (tag == static_cast<int>(ec::Tag::kConfig)) continue;
      total += bytes;
      CHECK(tally->largest[tag] <= 1 + 8 + 4 + 4 + 4 * n);
    }
    CHECK(tally->count[static_cast<int>(ec::Tag::kAllReturns)] == config.run.generations);
    per_gen[neurons] = total;
  }
  CHECK(per_gen[8] == per_gen[48]);
}
