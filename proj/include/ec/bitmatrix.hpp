#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ec {

inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for_bits(std::size_t bits) noexcept {
  return (bits + kWordBits - 1) / kWordBits;
}

/// Fixed-length bit vector, packed LSB-first into 64-bit words.
/// Bits beyond size() are always zero.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size) : size_(size), words_(words_for_bits(size), 0) {}

  std::size_t size() const noexcept { return size_; }

  bool get(std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
  void set(std::size_t i, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i % kWordBits);
    if (value) {
      words_[i / kWordBits] |= mask;
    } else {
      words_[i / kWordBits] &= ~mask;
    }
  }
  void clear() noexcept;

  std::size_t count() const noexcept;
  bool any() const noexcept;

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> words() noexcept { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Bit-packed boolean matrix. Bit (i, j) is the connection from column
/// neuron j to row neuron i.
///
/// Rows are stored in 64-bit words whose little-endian byte image is the
/// byte-padded, LSB-first row layout used by the mask file format; the
/// trailing pad bits of every row are kept at zero.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t words_per_row() const noexcept { return words_per_row_; }
  std::size_t bytes_per_row() const noexcept { return (cols_ + 7) / 8; }

  bool get(std::size_t i, std::size_t j) const noexcept {
    return (words_[i * words_per_row_ + j / kWordBits] >> (j % kWordBits)) & 1u;
  }
  void set(std::size_t i, std::size_t j, bool value) noexcept {
    std::uint64_t& word = words_[i * words_per_row_ + j / kWordBits];
    const std::uint64_t mask = std::uint64_t{1} << (j % kWordBits);
    word = value ? (word | mask) : (word & ~mask);
  }

  std::span<const std::uint64_t> row(std::size_t i) const noexcept {
    return {words_.data() + i * words_per_row_, words_per_row_};
  }
  std::span<std::uint64_t> row(std::size_t i) noexcept {
    return {words_.data() + i * words_per_row_, words_per_row_};
  }

  std::size_t count() const noexcept;
  void clear_diagonal() noexcept;

  /// Byte-padded LSB-first rows, concatenated.
  std::vector<std::uint8_t> to_bytes() const;
  /// Inverse of to_bytes(). Throws FormatError if the size is wrong or any
  /// padding bit is set.
  static BitMatrix from_bytes(std::size_t rows, std::size_t cols, std::span<const std::uint8_t> bytes);

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

/// out[i] = sum_j m(i, j) * spikes[j], by AND + population count.
void packed_matvec(const BitMatrix& m, const BitVector& spikes, std::span<std::int32_t> out);
std::vector<std::int32_t> packed_matvec(const BitMatrix& m, const BitVector& spikes);

/// out[i] = popcount(row_i & positive) - popcount(row_i & negative).
/// Used for Dale's-law group sums where the two spike vectors are the
/// excitatory and inhibitory parts of one spike vector.
void packed_matvec_signed(const BitMatrix& m, const BitVector& positive, const BitVector& negative,
                          std::span<std::int32_t> out);

}  // namespace ec
