#include "ec/probability.hpp"

#include <algorithm>

#include "ec/error.hpp"

namespace ec {

namespace {

constexpr Stream kBernoulliStreams[3] = {Stream::kBernoulliIn, Stream::kBernoulliRec, Stream::kBernoulliOut};

BitMatrix& genome_block(Genome& g, int block) {
  switch (block) {
    case 0:
      return g.w_in;
    case 1:
      return g.w_rec;
    default:
      return g.w_out;
  }
}

}  // namespace

bool ProbabilityModel::matches(const NetworkConfig& config) const noexcept {
  return p_in.same_shape(config.n_neurons, config.obs_dim) &&
         p_rec.same_shape(config.n_neurons, config.n_neurons) &&
         p_out.same_shape(config.act_dim, config.n_neurons) && pin_diagonal != config.allow_self_connections;
}

void ProbabilityModel::pin() {
  if (!pin_diagonal) return;
  const std::size_t n = std::min(p_rec.rows, p_rec.cols);
  for (std::size_t i = 0; i < n; ++i) p_rec(i, i) = lower();
}

ProbabilityModel init_model(const NetworkConfig& config, double epsilon) {
  config.validate();
  return make_model(Matrix<float>(config.n_neurons, config.obs_dim, 0.5f),
                    Matrix<float>(config.n_neurons, config.n_neurons, 0.5f),
                    Matrix<float>(config.act_dim, config.n_neurons, 0.5f), epsilon,
                    !config.allow_self_connections);
}

ProbabilityModel make_model(Matrix<float> p_in, Matrix<float> p_rec, Matrix<float> p_out, double epsilon,
                            bool pin_diagonal) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
  ProbabilityModel model{epsilon, pin_diagonal, std::move(p_in), std::move(p_rec), std::move(p_out)};
  model.pin();
  return model;
}

void sample_row(const ProbabilityModel& model, int block, std::size_t row, std::uint64_t gen_seed,
                 std::uint32_t index, std::span<std::uint64_t> words) {
  const Matrix<float>& p = *model.blocks()[static_cast<std::size_t>(block)];
  std::fill(words.begin(), words.end(), 0);
  const auto probs = p.row(row);
  const auto row32 = static_cast<std::uint32_t>(row);
  for (std::size_t chunk = 0; chunk * 4 < p.cols; ++chunk) {
    const auto draw = philox_block(gen_seed, index, kBernoulliStreams[block], row32,
                                   static_cast<std::uint32_t>(chunk));
    const std::size_t end = std::min<std::size_t>(4, p.cols - chunk * 4);
    for (std::size_t k = 0; k < end; ++k) {
      const std::size_t j = chunk * 4 + k;
      if (to_unit_float(draw[k]) < probs[j]) words[j / kWordBits] |= std::uint64_t{1} << (j % kWordBits);
    }
  }
  if (block == 1 && model.pin_diagonal && row < p.cols) {
    words[row / kWordBits] &= ~(std::uint64_t{1} << (row % kWordBits));
  }
}

Genome sample_genome(const ProbabilityModel& model, std::uint64_t gen_seed, std::uint32_t index) {
  Genome g{BitMatrix(model.p_in.rows, model.p_in.cols), BitMatrix(model.p_rec.rows, model.p_rec.cols),
           BitMatrix(model.p_out.rows, model.p_out.cols)};
  for (int block = 0; block < 3; ++block) {
    BitMatrix& bits = genome_block(g, block);
    for (std::size_t i = 0; i < bits.rows(); ++i) sample_row(model, block, i, gen_seed, index, bits.row(i));
  }
  return g;
}

ProbabilityModel clip_model(ProbabilityModel model) {
  const float lo = model.lower();
  const float hi = model.upper();
  for (auto* block : model.blocks()) {
    for (auto& p : block->data) p = std::clamp(p, lo, hi);
  }
  model.pin();
  return model;
}

Genome extract(const ProbabilityModel& model) {
  Genome g{BitMatrix(model.p_in.rows, model.p_in.cols), BitMatrix(model.p_rec.rows, model.p_rec.cols),
           BitMatrix(model.p_out.rows, model.p_out.cols)};
  for (int block = 0; block < 3; ++block) {
    const Matrix<float>& p = *model.blocks()[static_cast<std::size_t>(block)];
    BitMatrix& bits = genome_block(g, block);
    for (std::size_t i = 0; i < p.rows; ++i) {
      for (std::size_t j = 0; j < p.cols; ++j) bits.set(i, j, p(i, j) > 0.5f);
    }
  }
  if (model.pin_diagonal) g.w_rec.clear_diagonal();
  return g;
}

}  // namespace ec
