#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ec/ec_optimizer.hpp"
#include "ec/network.hpp"
#include "ec/tasks.hpp"

namespace ec {

enum class Algorithm { kEc, kEs };

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::kEc;
  std::size_t population_size = 10240;
  double learning_rate = 0.15;
  double epsilon = 1e-3;
  Shaping shaping = Shaping::kCenteredRank;
  // ES baseline only.
  double sigma = 0.3;
  double weight_decay = 0.1;
  bool dale = true;
};

struct RunSettings {
  std::size_t generations = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t checkpoint_every = 0;  // 0: only at the end
  std::string checkpoint_path;
  std::string metrics_path;
  // When false the metrics "seconds" column is written as 0 so that repeated
  // runs produce byte-identical CSV files.
  bool wall_clock = true;
  std::uint16_t port = 7171;
  double worker_timeout_s = 30.0;
};

/// Everything needed to reproduce one run.
///
/// Text form: INI-style `key = value` lines under [network], [optimizer],
/// [task] and [run] sections; `#` or `;` start a comment line. Unknown
/// sections or keys are rejected. Missing keys keep the defaults above.
struct RunConfig {
  NetworkConfig network;
  OptimizerConfig optimizer;
  TaskConfig task;
  RunSettings run;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c exactly.
std::string format_config(const RunConfig& config);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ec
