#include "ec/ec_optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "ec/error.hpp"
#include "ec/parallel.hpp"

namespace ec {

namespace {

// Shaped returns as weight_i / denominator. Rank shaping keeps integer
// numerators so that subset sums are exact and order-independent.
template <class W>
struct Weights {
  std::vector<W> numerators;
  double denominator = 1.0;
};

void require_population(std::size_t n) {
  if (n < 2) throw Error("return shaping needs a population of at least 2, got " + std::to_string(n));
}

void require_finite_returns(std::span<const double> returns) {
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (!std::isfinite(returns[i])) throw Error("return " + std::to_string(i) + " is not finite");
  }
}

// Twice the average zero-based rank of each entry; always an integer.
std::vector<std::int64_t> doubled_ranks(std::span<const double> returns) {
  const std::size_t n = returns.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return returns[a] < returns[b]; });
  std::vector<std::int64_t> ranks(n);
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && returns[order[hi]] == returns[order[lo]]) ++hi;
    const auto doubled = static_cast<std::int64_t>(lo + hi - 1);  // 2 * mean of lo..hi-1
    for (std::size_t k = lo; k < hi; ++k) ranks[order[k]] = doubled;
    lo = hi;
  }
  return ranks;
}

Weights<std::int64_t> rank_weights(std::span<const double> returns) {
  const auto n = static_cast<std::int64_t>(returns.size());
  Weights<std::int64_t> w;
  w.numerators = doubled_ranks(returns);
  for (auto& r : w.numerators) r -= n - 1;
  w.denominator = 2.0 * static_cast<double>(n - 1);
  return w;
}

Weights<double> real_weights(std::span<const double> returns, Shaping mode) {
  Weights<double> w;
  w.numerators = shape_returns(returns, mode);
  return w;
}

template <class W>
void update_row(std::span<float> rho, std::span<const W> acc, W total, double scale, float lo, float hi) {
  for (std::size_t j = 0; j < rho.size(); ++j) {
    const double p = rho[j];
    const double next = p + scale * (static_cast<double>(acc[j]) - p * static_cast<double>(total));
    rho[j] = std::clamp(static_cast<float>(next), lo, hi);
  }
}

template <class W>
W total_of(const Weights<W>& w) {
  W total{};
  for (const W& x : w.numerators) total += x;
  return total;
}

template <class W>
ProbabilityModel update_explicit(const ProbabilityModel& model, std::span<const Genome> genomes,
                                 const Weights<W>& w, double learning_rate) {
  const std::size_t n = genomes.size();
  const double scale = learning_rate / static_cast<double>(n) / w.denominator;
  const W total = total_of(w);
  ProbabilityModel next = model;
  auto blocks = next.blocks();
  for (int b = 0; b < 3; ++b) {
    Matrix<float>& p = *blocks[static_cast<std::size_t>(b)];
    std::vector<W> acc(p.cols);
    for (std::size_t r = 0; r < p.rows; ++r) {
      std::fill(acc.begin(), acc.end(), W{});
      for (std::size_t i = 0; i < n; ++i) {
        const BitMatrix& bits = b == 0 ? genomes[i].w_in : (b == 1 ? genomes[i].w_rec : genomes[i].w_out);
        for (std::size_t j = 0; j < p.cols; ++j) {
          if (bits.get(r, j)) acc[j] += w.numerators[i];
        }
      }
      update_row<W>(p.row(r), acc, total, scale, next.lower(), next.upper());
    }
  }
  next.pin();
  return next;
}

template <class W>
ProbabilityModel update_from_seed(const ProbabilityModel& model, std::uint64_t gen_seed, const Weights<W>& w,
                                  double learning_rate, std::size_t threads) {
  const std::size_t n = w.numerators.size();
  const double scale = learning_rate / static_cast<double>(n) / w.denominator;
  const W total = total_of(w);
  ProbabilityModel next = model;
  auto blocks = next.blocks();

  struct Item {
    int block;
    std::size_t row;
  };
  std::vector<Item> items;
  for (int b = 0; b < 3; ++b) {
    for (std::size_t r = 0; r < blocks[static_cast<std::size_t>(b)]->rows; ++r) items.push_back({b, r});
  }

  parallel_for(items.size(), threads, [&](std::size_t k) {
    const auto [b, r] = items[k];
    Matrix<float>& p = *blocks[static_cast<std::size_t>(b)];
    std::vector<W> acc(p.cols, W{});
    std::vector<std::uint64_t> words(words_for_bits(p.cols));
    for (std::size_t i = 0; i < n; ++i) {
      sample_row(model, b, r, gen_seed, static_cast<std::uint32_t>(i), words);
      for (std::size_t wi = 0; wi < words.size(); ++wi) {
        std::uint64_t bits = words[wi];
        while (bits != 0) {
          const auto j = wi * kWordBits + static_cast<std::size_t>(std::countr_zero(bits));
          acc[j] += w.numerators[i];
          bits &= bits - 1;
        }
      }
    }
    update_row<W>(p.row(r), acc, total, scale, next.lower(), next.upper());
  });
  next.pin();
  return next;
}

}  // namespace

Shaping parse_shaping(std::string_view name) {
  if (name == "raw") return Shaping::kRaw;
  if (name == "centered") return Shaping::kCentered;
  if (name == "centered_rank") return Shaping::kCenteredRank;
  throw ConfigError("unknown shaping '" + std::string(name) + "' (expected raw, centered, centered_rank)");
}

std::string_view to_string(Shaping shaping) {
  switch (shaping) {
    case Shaping::kRaw:
      return "raw";
    case Shaping::kCentered:
      return "centered";
    case Shaping::kCenteredRank:
      return "centered_rank";
  }
  return "?";
}

std::vector<double> shape_returns(std::span<const double> returns, Shaping mode) {
  require_population(returns.size());
  require_finite_returns(returns);
  std::vector<double> out(returns.begin(), returns.end());
  switch (mode) {
    case Shaping::kRaw:
      break;
    case Shaping::kCentered: {
      const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
      for (auto& r : out) r -= mean;
      break;
    }
    case Shaping::kCenteredRank: {
      const auto w = rank_weights(returns);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(w.numerators[i]) / w.denominator;
      break;
    }
  }
  return out;
}

ModelGradient nes_gradient(const ProbabilityModel& model, std::span<const Genome> genomes,
                           std::span<const double> shaped_returns) {
  if (genomes.size() != shaped_returns.size() || genomes.empty()) {
    throw DimensionError("nes_gradient: " + std::to_string(genomes.size()) + " genomes vs " +
                         std::to_string(shaped_returns.size()) + " returns");
  }
  const double inv_n = 1.0 / static_cast<double>(genomes.size());
  ModelGradient grad{Matrix<double>(model.p_in.rows, model.p_in.cols),
                     Matrix<double>(model.p_rec.rows, model.p_rec.cols),
                     Matrix<double>(model.p_out.rows, model.p_out.cols)};
  Matrix<double>* out_blocks[3] = {&grad.in, &grad.rec, &grad.out};
  const auto blocks = model.blocks();
  for (int b = 0; b < 3; ++b) {
    const Matrix<float>& p = *blocks[static_cast<std::size_t>(b)];
    Matrix<double>& g = *out_blocks[b];
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      const BitMatrix& bits = b == 0 ? genomes[i].w_in : (b == 1 ? genomes[i].w_rec : genomes[i].w_out);
      for (std::size_t r = 0; r < p.rows; ++r) {
        for (std::size_t c = 0; c < p.cols; ++c) {
          const double rho = p(r, c);
          const double theta = bits.get(r, c) ? 1.0 : 0.0;
          g(r, c) += (theta - rho) / (rho * (1.0 - rho)) * shaped_returns[i] * inv_n;
        }
      }
    }
  }
  return grad;
}

ProbabilityModel ec_update(const ProbabilityModel& model, std::span<const Genome> genomes,
                           std::span<const double> returns, double learning_rate, Shaping mode) {
  if (genomes.size() != returns.size()) {
    throw DimensionError("ec_update: " + std::to_string(genomes.size()) + " genomes vs " +
                         std::to_string(returns.size()) + " returns");
  }
  require_population(returns.size());
  if (mode == Shaping::kCenteredRank) return update_explicit(model, genomes, rank_weights(returns), learning_rate);
  return update_explicit(model, genomes, real_weights(returns, mode), learning_rate);
}

ProbabilityModel ec_update(const ProbabilityModel& model, std::uint64_t gen_seed, std::span<const double> returns,
                           double learning_rate, Shaping mode, std::size_t threads) {
  require_population(returns.size());
  require_finite_returns(returns);
  if (mode == Shaping::kCenteredRank) {
    return update_from_seed(model, gen_seed, rank_weights(returns), learning_rate, threads);
  }
  return update_from_seed(model, gen_seed, real_weights(returns, mode), learning_rate, threads);
}

}  // namespace ec
