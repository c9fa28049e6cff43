#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ec/config.hpp"
#include "ec/error.hpp"
#include "ec/eval_engine.hpp"
#include "ec/io.hpp"
#include "ec/network.hpp"
#include "ec/tasks.hpp"

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ec_test_eval";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ec::RunConfig small_pendulum() {
  ec::RunConfig c;
  c.network.n_neurons = 16;
  c.optimizer.population_size = 16;
  c.task.name = "pendulum";
  c.run.generations = 3;
  c.run.seed = 42;
  c.run.wall_clock = false;
  return c;
}

ec::RunConfig small_mask() {
  ec::RunConfig c;
  c.network.n_neurons = 8;
  c.network.allow_self_connections = true;
  c.optimizer.population_size = 64;
  c.task.name = "mask_match";
  c.run.generations = 20;
  c.run.seed = 3;
  c.run.wall_clock = false;
  return c;
}

}  // namespace

TEST_CASE("evaluate_range member matches a direct rollout") {
  ec::NetworkConfig net;
  net.n_neurons = 16;
  ec::TaskConfig tc;
  const auto task = ec::make_task(tc, net);
  const auto model = ec::init_model(net);
  const std::uint64_t gs = ec::generation_seed(7, 0);
  const auto r = ec::evaluate_range(model, *task, gs, 3, 4);
  REQUIRE(r.size() == 1);

  const ec::Genome g = ec::sample_genome(model, gs, 3);
  ec::Pendulum env;
  ec::SpikingPolicy policy(net, g, env.spec().bounds);
  const double direct = ec::episode_return(env, policy, ec::episode_seed(gs, 3));
  CHECK(r[0] == direct);
}

TEST_CASE("population evaluation is deterministic and independent of threads") {
  ec::NetworkConfig net;
  net.n_neurons = 16;
  ec::TaskConfig tc;
  const auto task = ec::make_task(tc, net);
  const auto model = ec::init_model(net);
  const auto a = ec::evaluate_population(model, *task, 24, 99, 1);
  const auto b = ec::evaluate_population(model, *task, 24, 99, 1);
  const auto c = ec::evaluate_population(model, *task, 24, 99, 8);
  CHECK(a == b);
  CHECK(a == c);
  const auto part = ec::evaluate_range(model, *task, 99, 10, 20, 3);
  CHECK(std::equal(part.begin(), part.end(), a.begin() + 10));
}

TEST_CASE("live genome count stays within the worker parallelism") {
  ec::NetworkConfig net;
  net.n_neurons = 16;
  ec::TaskConfig tc;
  const auto task = ec::make_task(tc, net);
  const auto model = ec::init_model(net);
  for (std::size_t threads : {1u, 2u, 4u}) {
    ec::LiveGenomeCounter counter;
    ec::evaluate_population(model, *task, 32, 5, threads, &counter);
    CHECK(counter.peak() >= 1);
    CHECK(counter.peak() <= threads);
  }
}

TEST_CASE("zero generations checkpoint equals the initial model") {
  auto c = small_mask();
  c.run.generations = 0;
  const auto result = ec::train(c);
  CHECK(result.metrics.empty());
  ec::Trainer t(c);
  const auto expected = ec::encode_checkpoint(t.network(), ec::init_model(t.network(), c.optimizer.epsilon));
  CHECK(result.checkpoint == expected);
}

TEST_CASE("training is reproducible to the byte") {
  auto c = small_pendulum();
  c.run.metrics_path = scratch("a.csv").string();
  c.run.checkpoint_path = scratch("a.ecrc").string();
  const auto r1 = ec::train(c);
  const std::string csv1 = slurp(c.run.metrics_path);
  const std::string ck1 = slurp(c.run.checkpoint_path);

  c.run.metrics_path = scratch("b.csv").string();
  c.run.checkpoint_path = scratch("b.ecrc").string();
  c.run.threads = 4;
  const auto r2 = ec::train(c);
  CHECK(slurp(c.run.metrics_path) == csv1);
  CHECK(slurp(c.run.checkpoint_path) == ck1);
  CHECK(r1.checkpoint == r2.checkpoint);
  CHECK(std::string(r1.checkpoint.begin(), r1.checkpoint.end()) == ck1);
}

TEST_CASE("metrics CSV has a header and one row per generation") {
  auto c = small_pendulum();
  c.run.metrics_path = scratch("rows.csv").string();
  ec::train(c);
  std::ifstream in(c.run.metrics_path);
  std::string line;
  std::getline(in, line);
  CHECK(line == ec::metrics_header());
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.rfind(std::to_string(rows) + ",", 0) == 0);
    ++rows;
  }
  CHECK(rows == c.run.generations);
}

TEST_CASE("mask match improves under training") {
  const auto result = ec::train(small_mask());
  REQUIRE(result.metrics.size() == 20);
  CHECK(result.metrics.back().ret_mean > result.metrics.front().ret_mean);
}

TEST_CASE("Trainer.apply is a pure function of the returns") {
  const auto c = small_mask();
  ec::Trainer a(c), b(c);
  const auto r = ec::to_wire_returns(a.evaluate(0, a.population(), 1));
  a.apply(r, false);
  b.apply(r, false);
  CHECK(a.checkpoint_bytes() == b.checkpoint_bytes());
  CHECK(a.generation() == 1);
  std::vector<float> short_returns(3, 0.0f);
  CHECK_THROWS_AS(b.apply(short_returns), ec::DimensionError);
}

TEST_CASE("ES baseline trains through the same engine") {
  auto c = small_pendulum();
  c.optimizer.algorithm = ec::Algorithm::kEs;
  const auto r1 = ec::train(c);
  const auto r2 = ec::train(c);
  CHECK(r1.checkpoint == r2.checkpoint);
  CHECK(std::string(r1.checkpoint.begin(), r1.checkpoint.begin() + 4) == "ESRC");
}

TEST_CASE("wire rounding of returns") {
  const std::vector<double> r{0.1, -1e10, 3.0};
  const auto w = ec::to_wire_returns(r);
  CHECK(w[0] == 0.1f);
  CHECK(w[1] == -1e10f);
  CHECK(w[2] == 3.0f);
}
