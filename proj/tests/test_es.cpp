#include <catch_amalgamated.hpp>

#include <cmath>

#include "ec/es_baseline.hpp"

using Catch::Matchers::WithinAbs;

namespace {

ec::NetworkConfig config() {
  ec::NetworkConfig c;
  c.n_neurons = 12;
  c.obs_dim = 3;
  c.act_dim = 2;
  return c;
}

template <class Fn>
void for_each_entry(const ec::DenseGenome& a, const ec::DenseGenome& b, Fn&& fn) {
  const ec::Matrix<float>* xs[3] = {&a.w_in, &a.w_rec, &a.w_out};
  const ec::Matrix<float>* ys[3] = {&b.w_in, &b.w_rec, &b.w_out};
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < xs[k]->data.size(); ++i) fn(xs[k]->data[i], ys[k]->data[i]);
}

}  // namespace

TEST_CASE("zero sigma perturbation is the centre") {
  const auto c = ec::es_init(config(), 1);
  CHECK(ec::es_perturb(c, 0.0, 5, 3) == c);
}

TEST_CASE("mirrored pairs average to the centre") {
  const auto c = ec::es_init(config(), 1);
  const auto a = ec::es_perturb(c, 0.3, 5, 0);
  const auto b = ec::es_perturb(c, 0.3, 5, 1);
  const ec::Matrix<float>* as[3] = {&a.w_in, &a.w_rec, &a.w_out};
  const ec::Matrix<float>* bs[3] = {&b.w_in, &b.w_rec, &b.w_out};
  const ec::Matrix<float>* cs[3] = {&c.w_in, &c.w_rec, &c.w_out};
  for (int blk = 0; blk < 3; ++blk)
    for (std::size_t i = 0; i < cs[blk]->data.size(); ++i)
      REQUIRE_THAT(0.5 * (as[blk]->data[i] + bs[blk]->data[i]), WithinAbs(cs[blk]->data[i], 1e-6));
}

TEST_CASE("perturbation variance") {
  ec::NetworkConfig big;
  big.n_neurons = 100;
  big.obs_dim = 0;
  big.act_dim = 0;
  const auto zero = ec::DenseGenome::zeros(big);
  const auto p = ec::es_perturb(zero, 0.3, 11, 0);
  double sum = 0.0, sq = 0.0;
  for (float x : p.w_rec.data) {
    sum += x;
    sq += double(x) * x;
  }
  const double n = static_cast<double>(p.w_rec.data.size());
  const double var = sq / n - (sum / n) * (sum / n);
  CHECK(std::fabs(var - 0.09) < 0.05 * 0.09);
}

TEST_CASE("equal returns decay the centre") {
  const auto c = ec::es_init(config(), 2);
  const auto next = ec::es_update(c, 7, std::vector<double>{1, 1, 1, 1}, 0.15, 0.3, 0.1);
  for_each_entry(c, next, [](float x, float y) { REQUIRE_THAT(y, WithinAbs((1.0 - 0.015) * x, 1e-6)); });
}

TEST_CASE("two-member hand-computed update") {
  CHECK_THAT(0.01 / (2 * 0.3), WithinAbs(0.016667, 5e-7));
  const auto c = ec::es_init(config(), 3);
  const auto eps = ec::es_noise(c, 9, 0);
  const auto next = ec::es_update(c, 9, std::vector<double>{2.0, -1.0}, 0.01, 0.3, 0.1);
  const ec::Matrix<float>* cs[3] = {&c.w_in, &c.w_rec, &c.w_out};
  const ec::Matrix<float>* es[3] = {&eps.w_in, &eps.w_rec, &eps.w_out};
  const ec::Matrix<float>* ns[3] = {&next.w_in, &next.w_rec, &next.w_out};
  for (int b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < cs[b]->data.size(); ++i) {
      const double want = (1.0 - 0.01 * 0.1) * cs[b]->data[i] + 0.01 / (2 * 0.3) * es[b]->data[i];
      REQUIRE_THAT(ns[b]->data[i], WithinAbs(want, 1e-6));
    }
}

TEST_CASE("identical returns within pairs cancel") {
  const auto c = ec::es_init(config(), 4);
  const auto next = ec::es_update(c, 1, std::vector<double>{5, 5, -2, -2, 9, 9}, 0.2, 0.3, 0.0);
  CHECK(next == c);
}

TEST_CASE("zero learning rate keeps the centre") {
  const auto c = ec::es_init(config(), 4);
  CHECK(ec::es_update(c, 1, std::vector<double>{3, 1, 2, 0}, 0.0, 0.3, 0.1) == c);
}
