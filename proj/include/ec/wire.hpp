#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ec {

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7171;
inline constexpr std::size_t kMaxFrameBytes = std::size_t{64} << 20;

// Frame: length:u32 (bytes that follow) | tag:u8 | fields. All integers
// little-endian, reals are 32-bit IEEE-754.
enum class Tag : std::uint8_t {
  kHello = 1,       // worker_id:u32 protocol_version:u32 last_gen:i64
  kAssign = 2,      // gen:u64 gen_seed:u64 index_lo:u32 index_hi:u32
  kReturns = 3,     // gen:u64 index_lo:u32 count:u32 values:f32[count]
  kAllReturns = 4,  // gen:u64 count:u32 values:f32[count]
  kShutdown = 5,    // (no fields)
  kConfig = 6,      // length:u32 utf8[length], the run configuration text
};

/// Both directions. last_gen is the last generation whose update the
/// sender has applied, -1 for none.
struct Hello {
  std::uint32_t worker_id = 0;
  std::uint32_t protocol_version = kProtocolVersion;
  std::int64_t last_gen = -1;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Assign {
  std::uint64_t gen = 0;
  std::uint64_t gen_seed = 0;
  std::uint32_t index_lo = 0;
  std::uint32_t index_hi = 0;
  friend bool operator==(const Assign&, const Assign&) = default;
};

struct Returns {
  std::uint64_t gen = 0;
  std::uint32_t index_lo = 0;
  std::vector<float> values;
  friend bool operator==(const Returns&, const Returns&) = default;
};

struct AllReturns {
  std::uint64_t gen = 0;
  std::vector<float> values;
  friend bool operator==(const AllReturns&, const AllReturns&) = default;
};

struct Shutdown {
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

struct ConfigText {
  std::string text;
  friend bool operator==(const ConfigText&, const ConfigText&) = default;
};

using Message = std::variant<Hello, Assign, Returns, AllReturns, Shutdown, ConfigText>;

Tag tag_of(const Message& message);
std::string_view tag_name(Tag tag);

/// Tag byte followed by the fields.
std::vector<std::uint8_t> encode_payload(const Message& message);
/// Inverse of encode_payload. Throws ProtocolError on unknown tags,
/// truncation, trailing bytes or non-finite values.
Message decode_payload(std::span<const std::uint8_t> payload);

/// Length prefix plus payload.
std::vector<std::uint8_t> encode_frame(const Message& message);

}  // namespace ec
