#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ec {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Stateless: the output is a pure function of a 128-bit counter and a
/// 64-bit key, so any entry of any population member can be regenerated
/// independently of evaluation order or thread count. The generator and
/// the counter layouts used by this project are part of the on-disk and
/// distributed reproducibility contract and must not change.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  static constexpr Key key_from_seed(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

// Stream identifiers occupying counter word 2. Values are frozen.
enum class Stream : std::uint32_t {
  kBernoulliIn = 0,
  kBernoulliRec = 1,
  kBernoulliOut = 2,
  kNormalIn = 16,
  kNormalRec = 17,
  kNormalOut = 18,
  kEpisodeSeed = 0x100,
  kGenerationSeed = 0x101,
  kEliteSeed = 0x102,
  kInitialisation = 0x103,
};

/// Draw four 32-bit words for (seed, member index, stream, row, chunk).
///
/// Counter layout: {chunk, row, stream, index}. `chunk` enumerates groups of
/// four consecutive entries within a row.
inline Philox4x32::Counter philox_block(std::uint64_t seed, std::uint32_t index, Stream stream,
                                        std::uint32_t row, std::uint32_t chunk) noexcept {
  return Philox4x32::generate({chunk, row, static_cast<std::uint32_t>(stream), index},
                              Philox4x32::key_from_seed(seed));
}

/// 64-bit derived seed, e.g. a generation seed from a run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t a,
                                 std::uint64_t b = 0) noexcept {
  const auto out = Philox4x32::generate(
      {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(b)},
      Philox4x32::key_from_seed(seed));
  return (std::uint64_t{out[1]} << 32) | out[0];
}

/// Uniform in [0, 1) with 24 bits of resolution, exact in float.
constexpr float to_unit_float(std::uint32_t word) noexcept {
  return static_cast<float>(word >> 8) * 0x1p-24f;
}

/// Uniform in (0, 1] with 53 bits, built from two words.
constexpr double to_open_unit_double(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1p-53;
}

/// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> box_muller(const Philox4x32::Counter& words) noexcept {
  const double u1 = to_open_unit_double(words[0], words[1]);
  const double u2 = to_open_unit_double(words[2], words[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace ec
