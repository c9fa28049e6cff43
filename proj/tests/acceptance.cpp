// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "ec/bench.hpp"
#include "ec/dist.hpp"
#include "ec/ec_optimizer.hpp"
#include "ec/eval_engine.hpp"
#include "ec/io.hpp"
#include "ec/network.hpp"
#include "ec/probability.hpp"
#include "ec/tasks.hpp"
#include "ec/transport.hpp"
#include "oracles.hpp"

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ec_acceptance";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------

ec::ProbabilityModel flat_model(const std::vector<float>& rho) {
  ec::Matrix<float> in(1, rho.size());
  in.data = rho;
  return ec::make_model(in, ec::Matrix<float>(0, 0), ec::Matrix<float>(0, 0), 1e-3, false);
}

ec::Genome flat_genome(std::size_t bits, std::uint32_t pattern) {
  ec::Genome g{ec::BitMatrix(1, bits), ec::BitMatrix(0, 0), ec::BitMatrix(0, 0)};
  for (std::size_t j = 0; j < bits; ++j) g.w_in.set(0, j, (pattern >> j) & 1u);
  return g;
}

std::uint32_t pattern_of(const ec::Genome& g) {
  std::uint32_t t = 0;
  for (std::size_t j = 0; j < g.w_in.cols(); ++j) t |= static_cast<std::uint32_t>(g.w_in.get(0, j)) << j;
  return t;
}

Outcome nes_unbiased() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> p(0.05f, 0.95f);
  std::normal_distribution<double> fitness(0.0, 1.0);
  double worst_exact = 0.0, worst_z = 0.0;
  constexpr std::size_t kSamples = 100000;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<float> rho(k);
      for (auto& r : rho) r = p(rng);
      std::vector<double> table(std::size_t{1} << k);
      for (auto& v : table) v = fitness(rng);
      const auto model = flat_model(rho);

      // Analytic gradient of the multilinear J.
      std::vector<double> want(k, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        for (std::uint32_t t = 0; t < table.size(); ++t) {
          double pr = 1.0;
          for (std::size_t l = 0; l < k; ++l)
            if (l != j) pr *= ((t >> l) & 1u) ? rho[l] : 1.0 - rho[l];
          want[j] += (((t >> j) & 1u) ? 1.0 : -1.0) * pr * table[t];
        }
      }

      std::vector<double> exact(k, 0.0);
      for (std::uint32_t t = 0; t < table.size(); ++t) {
        double pr = 1.0;
        for (std::size_t l = 0; l < k; ++l) pr *= ((t >> l) & 1u) ? rho[l] : 1.0 - rho[l];
        const std::vector<ec::Genome> g{flat_genome(k, t)};
        const auto grad = ec::nes_gradient(model, g, std::vector<double>{table[t]});
        for (std::size_t j = 0; j < k; ++j) exact[j] += pr * grad.in(0, j);
      }
      for (std::size_t j = 0; j < k; ++j) worst_exact = std::max(worst_exact, std::fabs(exact[j] - want[j]));

      const std::uint64_t seed = rng();
      std::vector<ec::Genome> genomes;
      std::vector<double> returns;
      genomes.reserve(kSamples);
      returns.reserve(kSamples);
      for (std::uint32_t i = 0; i < kSamples; ++i) {
        genomes.push_back(ec::sample_genome(model, seed, i));
        returns.push_back(table[pattern_of(genomes.back())]);
      }
      const auto mc = ec::nes_gradient(model, genomes, returns);
      for (std::size_t j = 0; j < k; ++j) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < kSamples; ++i) {
          const double th = genomes[i].w_in.get(0, j) ? 1.0 : 0.0;
          const double g = (th - rho[j]) / (rho[j] * (1.0 - rho[j])) * returns[i];
          sum += g;
          sq += g * g;
        }
        const double mean = sum / kSamples;
        const double se = std::sqrt((sq / kSamples - mean * mean) / kSamples);
        worst_z = std::max(worst_z, std::fabs(mc.in(0, j) - want[j]) / se);
      }
    }
  }
  return {worst_exact <= 1e-10 && worst_z <= 3.0,
          fmt("max |exact - analytic| %.2e (tol 1e-10), max Monte-Carlo deviation %.2f SE (tol 3)", worst_exact,
              worst_z)};
}

// 2 ---------------------------------------------------------------------

Outcome hand_update() {
  const auto m = flat_model({0.5f});
  const std::vector<ec::Genome> g{flat_genome(1, 1), flat_genome(1, 0)};
  const auto next = ec::ec_update(m, g, std::vector<double>{1.0, 0.0}, 0.15, ec::Shaping::kRaw);
  const float got = next.p_in(0, 0);
  return {got == 0.5375f, fmt("rho' = %.9g (expected 0.5375)", got)};
}

// 3 ---------------------------------------------------------------------

Outcome mask_recovery() {
  int recovered = 0;
  std::string gens;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ec::RunConfig c;
    c.network.n_neurons = 8;
    c.network.allow_self_connections = true;
    c.optimizer.population_size = 256;
    c.optimizer.learning_rate = 0.15;
    c.optimizer.epsilon = 1e-3;
    c.optimizer.shaping = ec::Shaping::kCenteredRank;
    c.task.name = "mask_match";
    c.task.target_seed = seed * 101;
    c.run.seed = seed;
    ec::Trainer trainer(c);
    const auto& task = dynamic_cast<const ec::MaskMatchTask&>(trainer.task());
    long hit = -1;
    for (std::size_t gen = 0; gen < 300 && hit < 0; ++gen) {
      trainer.apply(ec::to_wire_returns(trainer.evaluate(0, trainer.population(), 1)), false);
      if (ec::extract(trainer.model()) == task.fitness().target()) hit = static_cast<long>(gen) + 1;
    }
    if (hit > 0) ++recovered;
    gens += (gens.empty() ? "" : ",") + (hit > 0 ? std::to_string(hit) : std::string("-"));
  }
  return {recovered >= 4, fmt("%d/5 seeds recovered the 64-bit target (generations: %s; need 4)", recovered,
                              gens.c_str())};
}

// 4 ---------------------------------------------------------------------

Outcome packed_kernel() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 256);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  int mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t rows = dim(rng), cols = dim(rng);
    const auto m = oracle::random_mask(rng, rows, cols, density(rng));
    const auto x = oracle::random_bits(rng, cols, density(rng));
    const auto got = ec::packed_matvec(m, x);
    const auto want = oracle::matvec(oracle::to_dense(m), oracle::to_ints(x));
    if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) ++mismatches;
  }
  return {mismatches == 0, fmt("%d/1000 random cases differ from the naive product", mismatches)};
}

// 5 ---------------------------------------------------------------------

Outcome dynamics() {
  std::mt19937_64 rng(5);
  ec::NetworkConfig cfg;
  cfg.n_neurons = 48;
  cfg.obs_dim = 3;
  cfg.act_dim = 2;
  const ec::Dynamics dyn(cfg);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::size_t reset_violations = 0, dale_violations = 0;
  double worst_decay = 0.0;
  ec::NeuronState state = ec::NeuronState::zeros(cfg);
  ec::Genome genome{oracle::random_mask(rng, 48, 3, 0.5), oracle::random_mask(rng, 48, 48, 0.3),
                    oracle::random_mask(rng, 2, 48, 0.5)};
  genome.w_rec.clear_diagonal();
  const ec::Genome empty{ec::BitMatrix(48, 3), ec::BitMatrix(48, 48), ec::BitMatrix(2, 48)};
  const std::vector<double> zero_obs(3, 0.0);

  for (int step = 0; step < 10000; ++step) {
    if (step % 500 == 0) {
      genome = {oracle::random_mask(rng, 48, 3, unit(rng)), oracle::random_mask(rng, 48, 48, unit(rng) * 0.5),
                oracle::random_mask(rng, 2, 48, 0.5)};
      genome.w_rec.clear_diagonal();
    }
    const std::vector<double> obs{normal(rng), normal(rng), 2.0 * normal(rng)};
    state = ec::lif_step(state, genome, obs, cfg);
    for (std::size_t i = 0; i < cfg.n_neurons; ++i) {
      if (state.spikes.get(i) && state.u[i] != 0.0) ++reset_violations;
    }

    // Toggling presynaptic neuron j changes the next synaptic current of
    // every target by exactly sign(j).
    const std::size_t j = rng() % cfg.n_neurons;
    ec::NeuronState on = state, off = state;
    on.spikes.set(j, true);
    off.spikes.set(j, false);
    const auto a = ec::lif_step(on, genome, obs, cfg);
    const auto b = ec::lif_step(off, genome, obs, cfg);
    for (std::size_t i = 0; i < cfg.n_neurons; ++i) {
      const double expect = genome.w_rec.get(i, j) ? dyn.group_sign(j) : 0.0;
      if (std::fabs((a.c[i] - b.c[i]) - expect) > 1e-9) ++dale_violations;
    }

    // Zero-input decay from a random sub-threshold potential.
    if (step % 100 == 0) {
      ec::NeuronState s = ec::NeuronState::zeros(cfg);
      const double u0 = unit(rng) * 0.99;
      for (auto& u : s.u) u = u0;
      const int horizon = 1 + static_cast<int>(rng() % 400);
      for (int t = 0; t < horizon; ++t) s = ec::lif_step(s, empty, zero_obs, cfg);
      const double exact = u0 * std::exp(-horizon * cfg.dt_ms / cfg.tau_m_ms);
      for (double u : s.u) worst_decay = std::max(worst_decay, std::fabs(u - exact) / exact);
    }
  }
  const bool pass = reset_violations == 0 && dale_violations == 0 && worst_decay <= 1e-6;
  return {pass, fmt("10000 steps: reset violations %zu, Dale sign violations %zu, max decay error %.2e (tol 1e-6)",
                    reset_violations, dale_violations, worst_decay)};
}

// 6 ---------------------------------------------------------------------

constexpr double kPendulumLearningRate = 32.0;

Outcome pendulum_learning() {
  int passed = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    ec::RunConfig c;
    c.network.n_neurons = 64;
    c.optimizer.population_size = 512;
    c.optimizer.learning_rate = kPendulumLearningRate;
    c.task.name = "pendulum";
    c.run.generations = 200;
    c.run.seed = seed;
    c.run.threads = std::max(1u, std::thread::hardware_concurrency());
    const auto result = ec::train(c);
    const auto& rows = result.metrics;
    double tail = 0.0;
    for (std::size_t g = rows.size() - 10; g < rows.size(); ++g) tail += rows[g].ret_mean;
    tail /= 10.0;
    const double gain = (tail - rows[0].ret_mean) / rows[0].ret_std;
    if (gain >= 3.0) ++passed;
    detail += fmt("%sseed %llu: %.1f -> %.1f (%.2f std0)", detail.empty() ? "" : "; ",
                  static_cast<unsigned long long>(seed), rows[0].ret_mean, tail, gain);
  }
  return {passed >= 2, fmt("%d/3 seeds gained >= 3 std0 [%s]", passed, detail.c_str())};
}

// 7 ---------------------------------------------------------------------

Outcome bench() {
  const auto r = ec::run_kernel_bench(256, 20000, 1, 0);
  return {r.ratio >= 1.5 && r.checksum == 0.0,
          fmt("packed %.3g ops/s, dense %.3g ops/s, ratio %.2f (need 1.5)", r.packed_ops_per_sec,
              r.dense_ops_per_sec, r.ratio)};
}

// 8 ---------------------------------------------------------------------

class InspectingTransport final : public ec::Transport {
 public:
  struct Log {
    std::mutex mu;
    std::set<int> tags;
    std::size_t largest_non_config = 0;
    std::size_t bytes = 0;
    std::size_t bytes_in_config = 0;
  };

  InspectingTransport(std::unique_ptr<ec::Transport> inner, std::shared_ptr<Log> log)
      : inner_(std::move(inner)), log_(std::move(log)) {}
  void send(std::span<const std::uint8_t> p) override {
    note(p);
    inner_->send(p);
  }
  std::optional<std::vector<std::uint8_t>> receive() override {
    auto p = inner_->receive();
    if (p) note(*p);
    return p;
  }
  void close() override { inner_->close(); }

 private:
  void note(std::span<const std::uint8_t> p) {
    // Every frame must parse as one of the protocol messages.
    const auto m = ec::decode_payload(p);
    std::lock_guard lock(log_->mu);
    log_->tags.insert(static_cast<int>(ec::tag_of(m)));
    log_->bytes += p.size() + 4;
    if (ec::tag_of(m) == ec::Tag::kConfig) {
      log_->bytes_in_config += p.size() + 4;
    } else {
      log_->largest_non_config = std::max(log_->largest_non_config, p.size());
    }
  }
  std::unique_ptr<ec::Transport> inner_;
  std::shared_ptr<Log> log_;
};

Outcome distributed() {
  ec::RunConfig c;
  c.network.n_neurons = 64;
  c.network.allow_self_connections = true;
  c.optimizer.population_size = 256;
  c.task.name = "mask_match";
  c.run.generations = 10;
  c.run.seed = 8;
  c.run.wall_clock = false;
  const auto local = ec::train(c);

  ec::TcpListener listener(ec::parse_address("127.0.0.1:0"));
  const ec::Address addr{"127.0.0.1", listener.port()};
  ec::Coordinator coordinator(c, 2);
  auto log = std::make_shared<InspectingTransport::Log>();
  std::jthread acceptor([&] {
    for (int k = 0; k < 2; ++k) {
      auto t = listener.accept();
      if (!t) return;
      coordinator.add_connection(std::make_unique<InspectingTransport>(std::move(t), log));
    }
  });
  std::vector<std::jthread> workers;
  for (std::uint32_t id = 0; id < 2; ++id) {
    workers.emplace_back([addr, id] {
      auto t = ec::TcpTransport::connect(addr);
      ec::WorkerState state;
      ec::WorkerOptions options;
      options.worker_id = id;
      ec::worker_run(*t, state, options);
    });
  }
  const auto remote = coordinator.run();
  workers.clear();
  acceptor.join();
  listener.close();

  const std::size_t model_bytes = 4 * (64 * 64);
  const std::size_t n = c.optimizer.population_size;
  const double per_gen = static_cast<double>(log->bytes - log->bytes_in_config) / 10.0;
  const bool identical = remote.checkpoint == local.checkpoint;
  const bool small = log->largest_non_config <= 1 + 8 + 4 + 4 + 4 * n && log->largest_non_config < model_bytes;
  const bool scalar_traffic = per_gen <= 3.0 * (4.0 * n) + 256.0;
  return {identical && small && scalar_traffic,
          fmt("checkpoint %s; largest frame %zu B vs model %zu B; %.0f B/generation for N=%zu",
              identical ? "byte-identical" : "DIFFERS", log->largest_non_config, model_bytes, per_gen, n)};
}

// 9 ---------------------------------------------------------------------

Outcome determinism() {
  ec::RunConfig c;
  c.network.n_neurons = 32;
  c.optimizer.population_size = 64;
  c.task.name = "pendulum";
  c.run.generations = 5;
  c.run.seed = 9;
  c.run.wall_clock = false;
  std::string csv[2], ckpt[2];
  for (int k = 0; k < 2; ++k) {
    c.run.metrics_path = scratch("det" + std::to_string(k) + ".csv").string();
    c.run.checkpoint_path = scratch("det" + std::to_string(k) + ".ecrc").string();
    std::filesystem::remove(c.run.metrics_path);
    ec::train(c);
    csv[k] = slurp(c.run.metrics_path);
    ckpt[k] = slurp(c.run.checkpoint_path);
  }
  ec::Trainer trainer(c);
  const auto one = trainer.evaluate(0, trainer.population(), 1);
  const auto eight = trainer.evaluate(0, trainer.population(), 8);
  const bool pass = !csv[0].empty() && csv[0] == csv[1] && ckpt[0] == ckpt[1] && one == eight;
  return {pass, fmt("checkpoints %s, metrics %s, returns at 1 vs 8 threads %s", ckpt[0] == ckpt[1] ? "equal" : "DIFFER",
                    csv[0] == csv[1] ? "equal" : "DIFFER", one == eight ? "equal" : "DIFFER")};
}

// 10 --------------------------------------------------------------------

Outcome persistence() {
  ec::NetworkConfig net;
  net.n_neurons = 40;
  net.obs_dim = 3;
  net.act_dim = 1;
  auto model = ec::init_model(net);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<float> p(0.001f, 0.999f);
  for (auto* b : model.blocks())
    for (auto& x : b->data) x = p(rng);
  model.pin();

  const auto ck_path = scratch("persist.ecrc"), mask_path = scratch("persist.ecmk");
  ec::save_checkpoint(ck_path, net, model);
  const auto bytes = ec::read_file(ck_path);
  const auto loaded = ec::load_checkpoint(ck_path);
  const bool ck_ok = loaded.model == model && ec::encode_checkpoint(loaded.network, loaded.model) == bytes;

  const ec::Genome mask = ec::extract(model);
  ec::save_mask(mask_path, mask);
  const auto mask_loaded = ec::load_mask(mask_path);
  const bool mask_ok = mask_loaded == mask && ec::encode_mask(mask_loaded) == ec::read_file(mask_path);

  const auto rule = ec::extract(flat_model({0.7f, 0.5f, 0.3f}));
  const bool rule_ok = rule.w_in.get(0, 0) && !rule.w_in.get(0, 1) && !rule.w_in.get(0, 2);
  return {ck_ok && mask_ok && rule_ok, fmt("checkpoint round trip %s, mask round trip %s, extract [0.7,0.5,0.3] -> [%d,%d,%d]",
                                           ck_ok ? "exact" : "DIFFERS", mask_ok ? "exact" : "DIFFERS",
                                           rule.w_in.get(0, 0), rule.w_in.get(0, 1), rule.w_in.get(0, 2))};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {1, "NES unbiasedness", 10, nes_unbiased},
      {2, "hand-computed update", 1, hand_update},
      {3, "mask recovery", 60, mask_recovery},
      {4, "packed kernel equivalence", 5, packed_kernel},
      {5, "dynamics invariants", 30, dynamics},
      {6, "pendulum learning", 1800, pendulum_learning},
      {7, "packed vs dense throughput", 60, bench},
      {8, "distributed equals local", 60, distributed},
      {9, "determinism", 60, determinism},
      {10, "persistence", 5, persistence},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %2d %s: %s [%.1f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.budget_s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
