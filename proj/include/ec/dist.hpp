#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "ec/eval_engine.hpp"
#include "ec/transport.hpp"

namespace ec {

struct CoordinatorStats {
  std::size_t workers_joined = 0;
  std::size_t workers_refused = 0;
  std::size_t workers_lost = 0;
  std::size_t reassigned_ranges = 0;
  std::size_t stale_messages = 0;
};

/// Drives a run over remote workers. Only seeds, index ranges and returns
/// cross the wire; every node regenerates its population from the seeds.
///
/// Connections may be added from any thread at any time, including while
/// run() is in progress. Workers that disconnect or exceed the timeout lose
/// their assignment, which is handed to another worker.
class Coordinator {
 public:
  explicit Coordinator(RunConfig config, std::size_t min_workers = 1);
  ~Coordinator();
  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  void add_connection(std::unique_ptr<Transport> transport);

  /// Blocks until config.run.generations updates have been applied. Throws
  /// ec::Error when no worker is available for longer than the timeout.
  TrainResult run();

  CoordinatorStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Accepts connections on `listener` for the duration of the run.
TrainResult run_coordinator(const RunConfig& config, TcpListener& listener, std::size_t min_workers = 1,
                            CoordinatorStats* stats = nullptr);

struct WorkerOptions {
  std::uint32_t worker_id = 0;
  std::size_t threads = 1;
  // Fault injection for tests: drop the connection instead of answering the
  // assignment with this zero-based index.
  std::optional<std::size_t> fail_after_assignments;
  // Drop the connection once this many updates have been applied.
  std::optional<std::size_t> disconnect_after_generation;
};

/// Survives reconnects so that a worker can resume from its last update.
struct WorkerState {
  std::unique_ptr<Trainer> trainer;
  std::string config_text;
  std::size_t assignments = 0;
  std::size_t stale_messages = 0;
};

enum class WorkerExit { kShutdown, kDisconnected, kInjectedFailure, kRefused };

std::string_view to_string(WorkerExit exit);

WorkerExit worker_run(Transport& transport, WorkerState& state, const WorkerOptions& options = {});

}  // namespace ec
