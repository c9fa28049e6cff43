#include <catch_amalgamated.hpp>

#include <cmath>

#include "ec/error.hpp"
#include "ec/probability.hpp"

namespace {

ec::NetworkConfig config(std::size_t n, std::size_t obs, std::size_t act) {
  ec::NetworkConfig c;
  c.n_neurons = n;
  c.obs_dim = obs;
  c.act_dim = act;
  return c;
}

}  // namespace

TEST_CASE("initial model") {
  const auto m = ec::init_model(config(256, 4, 2), 1e-3);
  REQUIRE(m.p_rec.rows == 256);
  REQUIRE(m.p_rec.cols == 256);
  for (std::size_t i = 0; i < 256; ++i)
    for (std::size_t j = 0; j < 256; ++j) REQUIRE(m.p_rec(i, j) == (i == j ? 0.001f : 0.5f));
  CHECK(ec::extract(m).connection_count() == 0);
  CHECK(m.matches(config(256, 4, 2)));
  CHECK_FALSE(m.matches(config(128, 4, 2)));
}

TEST_CASE("self connections keep the diagonal free") {
  auto c = config(8, 0, 0);
  c.allow_self_connections = true;
  const auto m = ec::init_model(c);
  CHECK(m.p_rec(3, 3) == 0.5f);
  CHECK_FALSE(m.pin_diagonal);
}

TEST_CASE("sampling is keyed by seed and index") {
  const auto m = ec::init_model(config(64, 3, 2));
  CHECK(ec::sample_genome(m, 5, 9) == ec::sample_genome(m, 5, 9));
  CHECK_FALSE(ec::sample_genome(m, 5, 9) == ec::sample_genome(m, 5, 10));
  CHECK_FALSE(ec::sample_genome(m, 5, 9) == ec::sample_genome(m, 6, 9));
  const auto g = ec::sample_genome(m, 5, 9);
  for (std::size_t i = 0; i < 64; ++i) REQUIRE_FALSE(g.w_rec.get(i, i));
}

TEST_CASE("sample mean of one entry") {
  const auto m = ec::init_model(config(4, 1, 1));
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += ec::sample_genome(m, 1, static_cast<std::uint32_t>(i)).w_in.get(2, 0);
  CHECK(std::fabs(ones / double(n) - 0.5) < 0.01);
}

TEST_CASE("near-deterministic model samples almost all ones") {
  auto c = config(256, 0, 0);
  c.allow_self_connections = true;
  auto m = ec::init_model(c, 1e-3);
  for (auto& p : m.p_rec.data) p = m.upper();
  const auto g = ec::sample_genome(m, 3, 0);
  const double frac = static_cast<double>(g.w_rec.count()) / (256.0 * 256.0);
  CHECK(std::fabs(frac - 0.999) < 0.002);
}

TEST_CASE("empirical bit frequencies track arbitrary probabilities") {
  auto c = config(4, 2, 1);
  auto m = ec::init_model(c);
  const float values[] = {0.02f, 0.25f, 0.5f, 0.9f, 0.97f};
  for (std::size_t k = 0; k < m.p_in.data.size(); ++k) m.p_in.data[k] = values[k % 5];
  const int n = 100000;
  std::vector<int> ones(m.p_in.size(), 0);
  std::vector<std::uint64_t> words(1);
  for (int i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < 4; ++r) {
      ec::sample_row(m, 0, r, 77, static_cast<std::uint32_t>(i), words);
      for (std::size_t j = 0; j < 2; ++j) ones[r * 2 + j] += (words[0] >> j) & 1;
    }
  }
  for (std::size_t k = 0; k < ones.size(); ++k) {
    const double p = m.p_in.data[k];
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::fabs(ones[k] / double(n) - p) < 3 * se);
  }
}

TEST_CASE("clip and extract") {
  ec::Matrix<float> in(1, 3), rec(2, 2, 0.5f), out(0, 2);
  in.data = {1.2f, -0.3f, 0.4f};
  auto m = ec::make_model(in, rec, out, 1e-3, false);
  m = ec::clip_model(m);
  CHECK(m.p_in.data[0] == 0.999f);
  CHECK(m.p_in.data[1] == 0.001f);
  CHECK(m.p_in.data[2] == 0.4f);

  in.data = {0.7f, 0.5f, 0.3f};
  const auto e = ec::extract(ec::make_model(in, rec, out, 1e-3, false));
  CHECK(e.w_in.get(0, 0));
  CHECK_FALSE(e.w_in.get(0, 1));
  CHECK_FALSE(e.w_in.get(0, 2));
  CHECK(ec::extract(ec::make_model(in, rec, out, 1e-3, false)) == e);

  auto high = ec::init_model(config(8, 2, 1));
  for (auto* b : high.blocks())
    for (auto& p : b->data) p = high.upper();
  high.pin();
  const auto all = ec::extract(high);
  CHECK(all.connection_count() == 8 * 2 + 8 * 8 - 8 + 8);

  CHECK_THROWS_AS(ec::make_model(in, rec, out, 0.0, false), ec::ConfigError);
  CHECK_THROWS_AS(ec::make_model(in, rec, out, 0.5, false), ec::ConfigError);
}
