#include "ec/bitmatrix.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "ec/error.hpp"

namespace ec {

void BitVector::clear() noexcept { std::fill(words_.begin(), words_.end(), 0); }

std::size_t BitVector::count() const noexcept {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

bool BitVector::any() const noexcept {
  return std::any_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w != 0; });
}

BitMatrix::BitMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_per_row_(words_for_bits(cols)), words_(rows * words_per_row_, 0) {}

std::size_t BitMatrix::count() const noexcept {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

void BitMatrix::clear_diagonal() noexcept {
  const std::size_t n = std::min(rows_, cols_);
  for (std::size_t i = 0; i < n; ++i) set(i, i, false);
}

std::vector<std::uint8_t> BitMatrix::to_bytes() const {
  const std::size_t stride = bytes_per_row();
  std::vector<std::uint8_t> out(rows_ * stride, 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto words = row(i);
    for (std::size_t b = 0; b < stride; ++b) {
      out[i * stride + b] = static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8)));
    }
  }
  return out;
}

BitMatrix BitMatrix::from_bytes(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> bytes) {
  BitMatrix m(rows, cols);
  const std::size_t stride = m.bytes_per_row();
  if (bytes.size() != rows * stride) {
    throw FormatError("bit matrix payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(rows * stride));
  }
  const unsigned tail_bits = static_cast<unsigned>(cols % 8);
  const std::uint8_t pad_mask = tail_bits == 0 ? 0 : static_cast<std::uint8_t>(0xFFu << tail_bits);
  for (std::size_t i = 0; i < rows; ++i) {
    auto words = m.row(i);
    for (std::size_t b = 0; b < stride; ++b) {
      const std::uint8_t byte = bytes[i * stride + b];
      if (b + 1 == stride && (byte & pad_mask) != 0) {
        throw FormatError("bit matrix row " + std::to_string(i) + " has nonzero padding bits");
      }
      words[b / 8] |= std::uint64_t{byte} << (8 * (b % 8));
    }
  }
  return m;
}

void packed_matvec(const BitMatrix& m, const BitVector& spikes, std::span<std::int32_t> out) {
  if (spikes.size() != m.cols() || out.size() != m.rows()) {
    throw DimensionError("packed_matvec: matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", spikes " + std::to_string(spikes.size()) +
                         ", output " + std::to_string(out.size()));
  }
  const auto s = spikes.words();
  const std::size_t nw = m.words_per_row();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    std::int32_t acc = 0;
    for (std::size_t w = 0; w < nw; ++w) acc += std::popcount(r[w] & s[w]);
    out[i] = acc;
  }
}

std::vector<std::int32_t> packed_matvec(const BitMatrix& m, const BitVector& spikes) {
  std::vector<std::int32_t> out(m.rows());
  packed_matvec(m, spikes, out);
  return out;
}

void packed_matvec_signed(const BitMatrix& m, const BitVector& positive, const BitVector& negative,
                          std::span<std::int32_t> out) {
  if (positive.size() != m.cols() || negative.size() != m.cols() || out.size() != m.rows()) {
    throw DimensionError("packed_matvec_signed: dimension mismatch");
  }
  const auto pos = positive.words();
  const auto neg = negative.words();
  const std::size_t nw = m.words_per_row();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    std::int32_t acc = 0;
    for (std::size_t w = 0; w < nw; ++w) {
      acc += std::popcount(r[w] & pos[w]) - std::popcount(r[w] & neg[w]);
    }
    out[i] = acc;
  }
}

}  // namespace ec
