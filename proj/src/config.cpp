#include "ec/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "ec/error.hpp"

namespace ec {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

template <class Int>
Int parse_unsigned(const std::string& key, const std::string& value) {
  Int out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty() || value.front() == '-') {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty() || !std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

std::map<std::string, Setter> setters() {
  std::map<std::string, Setter> s;
  // network
  s["network.n_neurons"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.n_neurons = parse_unsigned<std::size_t>(k, v); };
  s["network.excitatory_ratio"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.excitatory_ratio = parse_real(k, v); };
  s["network.dt_ms"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.dt_ms = parse_real(k, v); };
  s["network.sim_steps_per_control"] = [](RunConfig& c, const auto& k, const auto& v) {
    c.network.sim_steps_per_control = parse_unsigned<std::size_t>(k, v);
  };
  s["network.tau_syn_ms"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.tau_syn_ms = parse_real(k, v); };
  s["network.tau_m_ms"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.tau_m_ms = parse_real(k, v); };
  s["network.tau_out_ms"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.tau_out_ms = parse_real(k, v); };
  s["network.obs_dim"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.obs_dim = parse_unsigned<std::size_t>(k, v); };
  s["network.act_dim"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.act_dim = parse_unsigned<std::size_t>(k, v); };
  s["network.r_in"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.r_in = parse_real(k, v); };
  s["network.r_h"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.r_h = parse_real(k, v); };
  s["network.r_out"] = [](RunConfig& c, const auto& k, const auto& v) { c.network.r_out = parse_real(k, v); };
  s["network.allow_self_connections"] = [](RunConfig& c, const auto& k, const auto& v) {
    c.network.allow_self_connections = parse_bool(k, v);
  };

  // optimizer
  s["optimizer.algorithm"] = [](RunConfig& c, const auto& k, const auto& v) {
    if (v == "ec") {
      c.optimizer.algorithm = Algorithm::kEc;
    } else if (v == "es") {
      c.optimizer.algorithm = Algorithm::kEs;
    } else {
      bad_value(k, v, "'ec' or 'es'");
    }
  };
  s["optimizer.population_size"] = [](RunConfig& c, const auto& k, const auto& v) {
    c.optimizer.population_size = parse_unsigned<std::size_t>(k, v);
  };
  s["optimizer.learning_rate"] = [](RunConfig& c, const auto& k, const auto& v) { c.optimizer.learning_rate = parse_real(k, v); };
  s["optimizer.epsilon"] = [](RunConfig& c, const auto& k, const auto& v) { c.optimizer.epsilon = parse_real(k, v); };
  s["optimizer.shaping"] = [](RunConfig& c, const auto&, const auto& v) { c.optimizer.shaping = parse_shaping(v); };
  s["optimizer.sigma"] = [](RunConfig& c, const auto& k, const auto& v) { c.optimizer.sigma = parse_real(k, v); };
  s["optimizer.weight_decay"] = [](RunConfig& c, const auto& k, const auto& v) { c.optimizer.weight_decay = parse_real(k, v); };
  s["optimizer.dale"] = [](RunConfig& c, const auto& k, const auto& v) { c.optimizer.dale = parse_bool(k, v); };

  // task
  s["task.name"] = [](RunConfig& c, const auto&, const auto& v) { c.task.name = v; };
  s["task.jitter"] = [](RunConfig& c, const auto& k, const auto& v) { c.task.jitter = parse_real(k, v); };
  s["task.point_dt"] = [](RunConfig& c, const auto& k, const auto& v) { c.task.point_dt = parse_real(k, v); };
  s["task.target_seed"] = [](RunConfig& c, const auto& k, const auto& v) { c.task.target_seed = parse_unsigned<std::uint64_t>(k, v); };

  // run
  s["run.generations"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.generations = parse_unsigned<std::size_t>(k, v); };
  s["run.seed"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.seed = parse_unsigned<std::uint64_t>(k, v); };
  s["run.threads"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.threads = parse_unsigned<std::size_t>(k, v); };
  s["run.checkpoint_every"] = [](RunConfig& c, const auto& k, const auto& v) {
    c.run.checkpoint_every = parse_unsigned<std::size_t>(k, v);
  };
  s["run.checkpoint"] = [](RunConfig& c, const auto&, const auto& v) { c.run.checkpoint_path = v; };
  s["run.metrics"] = [](RunConfig& c, const auto&, const auto& v) { c.run.metrics_path = v; };
  s["run.wall_clock"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.wall_clock = parse_bool(k, v); };
  s["run.port"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.port = parse_unsigned<std::uint16_t>(k, v); };
  s["run.worker_timeout_s"] = [](RunConfig& c, const auto& k, const auto& v) { c.run.worker_timeout_s = parse_real(k, v); };
  return s;
}

void validate(const RunConfig& c) {
  c.network.validate();
  const auto& o = c.optimizer;
  if (o.population_size < 2) throw ConfigError("optimizer.population_size must be at least 2");
  if (o.population_size > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("optimizer.population_size must fit in 32 bits");
  }
  if (!(o.learning_rate >= 0.0)) throw ConfigError("optimizer.learning_rate must be non-negative");
  if (!(o.epsilon > 0.0 && o.epsilon < 0.5)) throw ConfigError("optimizer.epsilon must lie in (0, 0.5)");
  if (!(o.sigma > 0.0)) throw ConfigError("optimizer.sigma must be positive");
  if (!(o.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be non-negative");
  if (c.task.name != "pendulum" && c.task.name != "pointmass" && c.task.name != "mask_match") {
    throw ConfigError("task.name: unknown task '" + c.task.name + "' (expected pendulum, pointmass, mask_match)");
  }
  if (c.task.name == "mask_match" && o.algorithm == Algorithm::kEs) {
    throw ConfigError("task mask_match is defined over binary genomes and cannot run with algorithm = es");
  }
  if (!(c.task.jitter >= 0.0)) throw ConfigError("task.jitter must be non-negative");
  if (!(c.task.point_dt > 0.0)) throw ConfigError("task.point_dt must be positive");
  if (c.run.threads < 1) throw ConfigError("run.threads must be at least 1");
  if (!(c.run.worker_timeout_s > 0.0)) throw ConfigError("run.worker_timeout_s must be positive");
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  static const auto known = setters();
  RunConfig config;
  std::vector<std::string> unknown;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      unknown.push_back(section + " (key outside any section)");
      continue;
    }
    if (section != "network" && section != "optimizer" && section != "task" && section != "run") {
      unknown.push_back("[" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = known.find(full);
      if (it == known.end()) {
        unknown.push_back(full);
        continue;
      }
      it->second(config, full, trim(value.data()));
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  validate(config);
  return config;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string format_config(const RunConfig& c) {
  std::string out;
  char buf[64];
  const auto real = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += std::string(key) + " = " + buf + "\n";
  };
  const auto uint = [&](const char* key, std::uint64_t v) { out += std::string(key) + " = " + std::to_string(v) + "\n"; };
  const auto text = [&](const char* key, std::string_view v) { out += std::string(key) + " = " + std::string(v) + "\n"; };
  const auto flag = [&](const char* key, bool v) { text(key, v ? "true" : "false"); };

  const auto& n = c.network;
  out += "[network]\n";
  uint("n_neurons", n.n_neurons);
  real("excitatory_ratio", n.excitatory_ratio);
  real("dt_ms", n.dt_ms);
  uint("sim_steps_per_control", n.sim_steps_per_control);
  real("tau_syn_ms", n.tau_syn_ms);
  real("tau_m_ms", n.tau_m_ms);
  real("tau_out_ms", n.tau_out_ms);
  uint("obs_dim", n.obs_dim);
  uint("act_dim", n.act_dim);
  if (n.r_in) real("r_in", *n.r_in);
  if (n.r_h) real("r_h", *n.r_h);
  if (n.r_out) real("r_out", *n.r_out);
  flag("allow_self_connections", n.allow_self_connections);

  const auto& o = c.optimizer;
  out += "\n[optimizer]\n";
  text("algorithm", o.algorithm == Algorithm::kEc ? "ec" : "es");
  uint("population_size", o.population_size);
  real("learning_rate", o.learning_rate);
  real("epsilon", o.epsilon);
  text("shaping", to_string(o.shaping));
  real("sigma", o.sigma);
  real("weight_decay", o.weight_decay);
  flag("dale", o.dale);

  out += "\n[task]\n";
  text("name", c.task.name);
  real("jitter", c.task.jitter);
  real("point_dt", c.task.point_dt);
  uint("target_seed", c.task.target_seed);

  const auto& r = c.run;
  out += "\n[run]\n";
  uint("generations", r.generations);
  uint("seed", r.seed);
  uint("threads", r.threads);
  uint("checkpoint_every", r.checkpoint_every);
  if (!r.checkpoint_path.empty()) text("checkpoint", r.checkpoint_path);
  if (!r.metrics_path.empty()) text("metrics", r.metrics_path);
  flag("wall_clock", r.wall_clock);
  uint("port", r.port);
  real("worker_timeout_s", r.worker_timeout_s);
  return out;
}

}  // namespace ec
