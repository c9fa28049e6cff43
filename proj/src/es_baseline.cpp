#include "ec/es_baseline.hpp"

#include <string>
#include <vector>

#include "ec/ec_optimizer.hpp"
#include "ec/error.hpp"
#include "ec/rng.hpp"

namespace ec {

namespace {

constexpr Stream kNormalStreams[3] = {Stream::kNormalIn, Stream::kNormalRec, Stream::kNormalOut};

void fill_normal(Matrix<float>& m, std::uint64_t seed, std::uint32_t index, Stream stream) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    for (std::size_t chunk = 0; chunk * 2 < m.cols; ++chunk) {
      const auto z = box_muller(philox_block(seed, index, stream, static_cast<std::uint32_t>(r),
                                             static_cast<std::uint32_t>(chunk)));
      row[chunk * 2] = static_cast<float>(z[0]);
      if (chunk * 2 + 1 < m.cols) row[chunk * 2 + 1] = static_cast<float>(z[1]);
    }
  }
}

std::array<Matrix<float>*, 3> blocks_of(DenseGenome& g) { return {&g.w_in, &g.w_rec, &g.w_out}; }
std::array<const Matrix<float>*, 3> blocks_of(const DenseGenome& g) { return {&g.w_in, &g.w_rec, &g.w_out}; }

}  // namespace

DenseGenome es_init(const NetworkConfig& config, std::uint64_t seed) {
  DenseGenome g = DenseGenome::zeros(config);
  const auto blocks = blocks_of(g);
  for (std::size_t b = 0; b < 3; ++b) fill_normal(*blocks[b], derive_seed(seed, Stream::kInitialisation, b), 0, kNormalStreams[b]);
  return g;
}

DenseGenome es_noise(const DenseGenome& like, std::uint64_t gen_seed, std::uint32_t pair) {
  DenseGenome g{Matrix<float>(like.w_in.rows, like.w_in.cols), Matrix<float>(like.w_rec.rows, like.w_rec.cols),
                Matrix<float>(like.w_out.rows, like.w_out.cols)};
  const auto blocks = blocks_of(g);
  for (std::size_t b = 0; b < 3; ++b) fill_normal(*blocks[b], gen_seed, pair, kNormalStreams[b]);
  return g;
}

DenseGenome es_perturb(const DenseGenome& center, double sigma, std::uint64_t gen_seed, std::uint32_t index) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be non-negative");
  DenseGenome out = es_noise(center, gen_seed, index / 2);
  const double sign = (index % 2 == 0) ? 1.0 : -1.0;
  const auto src = blocks_of(center);
  const auto dst = blocks_of(out);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t k = 0; k < dst[b]->data.size(); ++k) {
      dst[b]->data[k] = static_cast<float>(src[b]->data[k] + sign * sigma * dst[b]->data[k]);
    }
  }
  return out;
}

DenseGenome es_update(const DenseGenome& center, std::uint64_t gen_seed, std::span<const double> returns,
                      double learning_rate, double sigma, double weight_decay) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  const std::size_t n = returns.size();
  const auto shaped = shape_returns(returns, Shaping::kCenteredRank);

  std::vector<std::vector<double>> acc(3);
  const auto src = blocks_of(center);
  for (std::size_t b = 0; b < 3; ++b) acc[b].assign(src[b]->data.size(), 0.0);

  for (std::size_t pair = 0; pair * 2 < n; ++pair) {
    const double weight = shaped[pair * 2] - (pair * 2 + 1 < n ? shaped[pair * 2 + 1] : 0.0);
    if (weight == 0.0) continue;
    const DenseGenome eps = es_noise(center, gen_seed, static_cast<std::uint32_t>(pair));
    const auto noise = blocks_of(eps);
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t k = 0; k < acc[b].size(); ++k) acc[b][k] += weight * noise[b]->data[k];
    }
  }

  DenseGenome next = center;
  const auto dst = blocks_of(next);
  const double decay = 1.0 - learning_rate * weight_decay;
  const double step = learning_rate / (static_cast<double>(n) * sigma);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t k = 0; k < acc[b].size(); ++k) {
      dst[b]->data[k] = static_cast<float>(decay * src[b]->data[k] + step * acc[b][k]);
    }
  }
  return next;
}

}  // namespace ec
