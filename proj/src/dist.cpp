#include "ec/dist.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "ec/error.hpp"

namespace ec {

namespace {

using Clock = std::chrono::steady_clock;

struct Range {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
};

struct Event {
  std::size_t conn = 0;
  std::optional<Message> message;  // nullopt: connection closed
};

enum class Status { kHandshake, kReady, kDead };

struct Connection {
  std::unique_ptr<Transport> transport;
  Status status = Status::kHandshake;
  std::optional<Range> range;
  Clock::time_point deadline;
  std::jthread reader;
};

}  // namespace

struct Coordinator::Impl {
  RunConfig config;
  std::size_t min_workers;

  mutable std::mutex mutex;
  std::condition_variable cv;
  std::deque<Event> events;
  std::map<std::size_t, std::unique_ptr<Connection>> connections;
  std::size_t next_id = 0;
  CoordinatorStats stats;

  Impl(RunConfig c, std::size_t k) : config(std::move(c)), min_workers(std::max<std::size_t>(1, k)) {}

  ~Impl() {
    std::vector<Connection*> all;
    {
      std::lock_guard lock(mutex);
      for (auto& [id, conn] : connections) all.push_back(conn.get());
    }
    for (auto* conn : all) conn->transport->close();
    for (auto* conn : all) {
      if (conn->reader.joinable()) conn->reader.join();
    }
  }

  void push(Event event) {
    std::lock_guard lock(mutex);
    events.push_back(std::move(event));
    cv.notify_all();
  }

  void add(std::unique_ptr<Transport> transport) {
    auto conn = std::make_unique<Connection>();
    conn->transport = std::move(transport);
    Transport* raw = conn->transport.get();
    std::lock_guard lock(mutex);
    const std::size_t id = next_id++;
    conn->reader = std::jthread([this, id, raw] {
      while (true) {
        std::optional<Message> message;
        try {
          message = receive_message(*raw);
        } catch (const std::exception& e) {
          spdlog::warn("connection {}: {}", id, e.what());
        }
        const bool closed = !message.has_value();
        push({id, std::move(message)});
        if (closed) return;
      }
    });
    connections.emplace(id, std::move(conn));
  }

  Connection* find(std::size_t id) {
    std::lock_guard lock(mutex);
    const auto it = connections.find(id);
    return it == connections.end() ? nullptr : it->second.get();
  }

  std::vector<std::pair<std::size_t, Connection*>> snapshot() {
    std::lock_guard lock(mutex);
    std::vector<std::pair<std::size_t, Connection*>> out;
    for (auto& [id, conn] : connections) out.emplace_back(id, conn.get());
    return out;
  }

  template <class Fn>
  void count(Fn&& fn) {
    std::lock_guard lock(mutex);
    fn(stats);
  }

  TrainResult run();
};

TrainResult Coordinator::Impl::run() {
  Trainer trainer(config);
  RunRecorder recorder(trainer.config());
  const std::string config_text = format_config(trainer.config());
  const std::size_t generations = trainer.config().run.generations;
  const auto n = static_cast<std::uint32_t>(trainer.population());
  const auto timeout = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(trainer.config().run.worker_timeout_s));

  std::vector<std::vector<float>> history;
  std::deque<Range> pending;
  std::vector<float> returns(n);
  std::size_t received = 0;
  bool started = false;
  Clock::time_point waiting_since = Clock::now();

  const auto ready_count = [&] {
    std::size_t k = 0;
    for (auto& [id, conn] : snapshot()) k += conn->status == Status::kReady;
    return k;
  };

  const auto drop = [&](std::size_t id, Connection& conn, const char* reason) {
    if (conn.status == Status::kDead) return;
    if (conn.status == Status::kReady) {
      spdlog::warn("worker connection {} lost: {}", id, reason);
      count([](CoordinatorStats& s) { ++s.workers_lost; });
    }
    if (conn.range) {
      pending.push_front(*conn.range);
      conn.range.reset();
      count([](CoordinatorStats& s) { ++s.reassigned_ranges; });
    }
    conn.status = Status::kDead;
    conn.transport->close();
  };

  const auto send = [&](std::size_t id, Connection& conn, const Message& message) {
    try {
      send_message(*conn.transport, message);
      return true;
    } catch (const std::exception& e) {
      drop(id, conn, e.what());
      return false;
    }
  };

  const auto handshake = [&](std::size_t id, Connection& conn, const Hello& hello) {
    const auto applied = static_cast<std::int64_t>(trainer.generation()) - 1;
    if (hello.protocol_version != kProtocolVersion || hello.last_gen > applied) {
      spdlog::warn("refusing worker {} (protocol {}, last generation {})", hello.worker_id, hello.protocol_version,
                   hello.last_gen);
      send(id, conn, Shutdown{});
      conn.status = Status::kDead;
      conn.transport->close();
      count([](CoordinatorStats& s) { ++s.workers_refused; });
      return;
    }
    if (!send(id, conn, Hello{0, kProtocolVersion, applied}) || !send(id, conn, ConfigText{config_text})) return;
    for (auto g = static_cast<std::size_t>(hello.last_gen + 1); g < history.size(); ++g) {
      if (!send(id, conn, AllReturns{g, history[g]})) return;
    }
    conn.status = Status::kReady;
    count([](CoordinatorStats& s) { ++s.workers_joined; });
    spdlog::info("worker {} joined on connection {} at generation {}", hello.worker_id, id, trainer.generation());
  };

  const auto handle = [&](Event& event) {
    Connection* conn = find(event.conn);
    if (!conn || conn->status == Status::kDead) return;
    if (!event.message) {
      drop(event.conn, *conn, "connection closed");
      return;
    }
    Message& message = *event.message;
    if (conn->status == Status::kHandshake) {
      if (const auto* hello = std::get_if<Hello>(&message)) {
        handshake(event.conn, *conn, *hello);
      } else {
        drop(event.conn, *conn, "expected HELLO");
      }
      return;
    }
    if (auto* r = std::get_if<Returns>(&message)) {
      const bool expected = started && conn->range && r->gen == trainer.generation() &&
                            r->index_lo == conn->range->lo && r->values.size() == conn->range->hi - conn->range->lo;
      if (!expected) {
        spdlog::warn("ignoring stale RETURNS for generation {} from connection {}", r->gen, event.conn);
        count([](CoordinatorStats& s) { ++s.stale_messages; });
        return;
      }
      std::copy(r->values.begin(), r->values.end(), returns.begin() + r->index_lo);
      received += r->values.size();
      conn->range.reset();
      return;
    }
    drop(event.conn, *conn, "unexpected message");
  };

  while (trainer.generation() < generations) {
    const std::size_t ready = ready_count();
    const std::size_t needed = trainer.generation() == 0 && !started ? min_workers : 1;

    if (!started && ready >= needed) {
      const std::size_t parts = std::min<std::size_t>(ready, n);
      for (std::size_t k = 0; k < parts; ++k) {
        pending.push_back({static_cast<std::uint32_t>(n * k / parts), static_cast<std::uint32_t>(n * (k + 1) / parts)});
      }
      started = true;
      received = 0;
    }

    if (started) {
      for (auto& [id, conn] : snapshot()) {
        if (pending.empty()) break;
        if (conn->status != Status::kReady || conn->range) continue;
        const Range range = pending.front();
        pending.pop_front();
        conn->range = range;
        conn->deadline = Clock::now() + timeout;
        send(id, *conn, Assign{trainer.generation(), trainer.gen_seed(trainer.generation()), range.lo, range.hi});
      }
    }

    if (started && received == n) {
      const std::size_t gen = trainer.generation();
      for (auto& [id, conn] : snapshot()) {
        if (conn->status == Status::kReady) send(id, *conn, AllReturns{gen, returns});
      }
      history.push_back(returns);
      recorder.record(trainer, trainer.apply(returns));
      started = false;
      continue;
    }

    if (ready_count() >= 1) waiting_since = Clock::now();
    Clock::time_point wake = waiting_since + timeout;
    for (auto& [id, conn] : snapshot()) {
      if (conn->range) wake = std::min(wake, conn->deadline);
    }

    std::optional<Event> event;
    {
      std::unique_lock lock(mutex);
      cv.wait_until(lock, wake, [&] { return !events.empty(); });
      if (!events.empty()) {
        event = std::move(events.front());
        events.pop_front();
      }
    }
    if (event) {
      handle(*event);
      continue;
    }
    const auto now = Clock::now();
    for (auto& [id, conn] : snapshot()) {
      if (conn->range && conn->deadline <= now) drop(id, *conn, "assignment timed out");
    }
    if (ready_count() == 0 && now - waiting_since >= timeout) {
      throw Error("no worker available for " + std::to_string(trainer.config().run.worker_timeout_s) +
                  " s at generation " + std::to_string(trainer.generation()));
    }
  }

  recorder.finish(trainer);
  for (auto& [id, conn] : snapshot()) {
    if (conn->status == Status::kReady) send(id, *conn, Shutdown{});
    conn->status = Status::kDead;
    conn->transport->close();
  }
  return {recorder.rows(), trainer.checkpoint_bytes(), trainer.model(), trainer.center(), trainer.peak_live_genomes()};
}

Coordinator::Coordinator(RunConfig config, std::size_t min_workers)
    : impl_(std::make_unique<Impl>(std::move(config), min_workers)) {}

Coordinator::~Coordinator() = default;

void Coordinator::add_connection(std::unique_ptr<Transport> transport) { impl_->add(std::move(transport)); }

TrainResult Coordinator::run() { return impl_->run(); }

CoordinatorStats Coordinator::stats() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->stats;
}

TrainResult run_coordinator(const RunConfig& config, TcpListener& listener, std::size_t min_workers,
                            CoordinatorStats* stats) {
  Coordinator coordinator(config, min_workers);
  std::jthread acceptor([&] {
    while (auto transport = listener.accept()) coordinator.add_connection(std::move(transport));
  });
  struct CloseOnExit {
    TcpListener& listener;
    ~CloseOnExit() { listener.close(); }
  } guard{listener};
  TrainResult result = coordinator.run();
  if (stats) *stats = coordinator.stats();
  return result;
}

std::string_view to_string(WorkerExit exit) {
  switch (exit) {
    case WorkerExit::kShutdown:
      return "shutdown";
    case WorkerExit::kDisconnected:
      return "disconnected";
    case WorkerExit::kInjectedFailure:
      return "injected failure";
    case WorkerExit::kRefused:
      return "refused";
  }
  return "unknown";
}

WorkerExit worker_run(Transport& transport, WorkerState& state, const WorkerOptions& options) {
  const auto applied = [&] {
    return state.trainer ? static_cast<std::int64_t>(state.trainer->generation()) - 1 : std::int64_t{-1};
  };
  bool accepted = false;
  send_message(transport, Hello{options.worker_id, kProtocolVersion, applied()});

  while (true) {
    const auto message = receive_message(transport);
    if (!message) return WorkerExit::kDisconnected;

    if (const auto* hello = std::get_if<Hello>(&*message)) {
      if (hello->protocol_version != kProtocolVersion) {
        throw ProtocolError("coordinator speaks protocol " + std::to_string(hello->protocol_version));
      }
      accepted = true;
    } else if (const auto* text = std::get_if<ConfigText>(&*message)) {
      if (!state.trainer) {
        RunConfig config = parse_config(text->text);
        config.run.checkpoint_path.clear();
        config.run.metrics_path.clear();
        config.run.threads = std::max<std::size_t>(1, options.threads);
        state.trainer = std::make_unique<Trainer>(std::move(config));
        state.config_text = text->text;
      } else if (text->text != state.config_text) {
        throw ProtocolError("coordinator is running a different configuration");
      }
    } else if (const auto* assign = std::get_if<Assign>(&*message)) {
      if (!state.trainer) throw ProtocolError("ASSIGN before CONFIG");
      Trainer& trainer = *state.trainer;
      if (assign->gen != trainer.generation()) {
        spdlog::warn("worker {}: ignoring ASSIGN for generation {} at generation {}", options.worker_id, assign->gen,
                     trainer.generation());
        ++state.stale_messages;
        continue;
      }
      if (assign->gen_seed != trainer.gen_seed(trainer.generation())) {
        throw ProtocolError("generation seed mismatch at generation " + std::to_string(assign->gen));
      }
      if (options.fail_after_assignments && state.assignments == *options.fail_after_assignments) {
        ++state.assignments;
        transport.close();
        return WorkerExit::kInjectedFailure;
      }
      ++state.assignments;
      const auto values = to_wire_returns(trainer.evaluate(assign->index_lo, assign->index_hi, options.threads));
      send_message(transport, Returns{assign->gen, assign->index_lo, values});
    } else if (const auto* all = std::get_if<AllReturns>(&*message)) {
      if (!state.trainer) throw ProtocolError("ALLRETURNS before CONFIG");
      Trainer& trainer = *state.trainer;
      if (all->gen < trainer.generation()) {
        spdlog::warn("worker {}: ignoring stale ALLRETURNS for generation {}", options.worker_id, all->gen);
        ++state.stale_messages;
        continue;
      }
      if (all->gen > trainer.generation()) {
        throw ProtocolError("missing updates before generation " + std::to_string(all->gen));
      }
      trainer.apply(all->values, false);
      if (options.disconnect_after_generation && trainer.generation() == *options.disconnect_after_generation) {
        transport.close();
        return WorkerExit::kDisconnected;
      }
    } else if (std::holds_alternative<Shutdown>(*message)) {
      return accepted ? WorkerExit::kShutdown : WorkerExit::kRefused;
    } else {
      throw ProtocolError("unexpected RETURNS from coordinator");
    }
  }
}

}  // namespace ec
