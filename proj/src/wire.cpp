#include "ec/wire.hpp"

#include <algorithm>
#include <cmath>

#include "ec/bytes.hpp"
#include "ec/error.hpp"

namespace ec {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void write_values(ByteWriter& w, const std::vector<float>& values) {
  w.u32(static_cast<std::uint32_t>(values.size()));
  for (float v : values) {
    if (!std::isfinite(v)) throw ProtocolError("cannot encode a non-finite return value");
    w.f32(v);
  }
}

std::vector<float> read_values(ByteReader& r) {
  const std::uint32_t count = r.u32();
  if (std::size_t{count} * 4 > r.remaining()) throw ProtocolError("value count exceeds frame size");
  std::vector<float> values(count);
  for (auto& v : values) {
    v = r.f32();
    if (!std::isfinite(v)) throw ProtocolError("non-finite return value on the wire");
  }
  return values;
}

}  // namespace

Tag tag_of(const Message& message) {
  return std::visit(Overloaded{[](const Hello&) { return Tag::kHello; }, [](const Assign&) { return Tag::kAssign; },
                               [](const Returns&) { return Tag::kReturns; },
                               [](const AllReturns&) { return Tag::kAllReturns; },
                               [](const Shutdown&) { return Tag::kShutdown; },
                               [](const ConfigText&) { return Tag::kConfig; }},
                    message);
}

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::kHello:
      return "HELLO";
    case Tag::kAssign:
      return "ASSIGN";
    case Tag::kReturns:
      return "RETURNS";
    case Tag::kAllReturns:
      return "ALLRETURNS";
    case Tag::kShutdown:
      return "SHUTDOWN";
    case Tag::kConfig:
      return "CONFIG";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> encode_payload(const Message& message) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag_of(message)));
  std::visit(Overloaded{[&](const Hello& m) {
                          w.u32(m.worker_id);
                          w.u32(m.protocol_version);
                          w.i64(m.last_gen);
                        },
                        [&](const Assign& m) {
                          w.u64(m.gen);
                          w.u64(m.gen_seed);
                          w.u32(m.index_lo);
                          w.u32(m.index_hi);
                        },
                        [&](const Returns& m) {
                          w.u64(m.gen);
                          w.u32(m.index_lo);
                          write_values(w, m.values);
                        },
                        [&](const AllReturns& m) {
                          w.u64(m.gen);
                          write_values(w, m.values);
                        },
                        [&](const Shutdown&) {},
                        [&](const ConfigText& m) {
                          w.u32(static_cast<std::uint32_t>(m.text.size()));
                          w.raw(m.text);
                        }},
             message);
  if (w.bytes().size() > kMaxFrameBytes) throw ProtocolError("message exceeds the maximum frame size");
  return w.take();
}

Message decode_payload(std::span<const std::uint8_t> payload) {
  try {
    ByteReader r(payload);
    const auto tag = static_cast<Tag>(r.u8());
    Message out;
    switch (tag) {
      case Tag::kHello: {
        Hello m;
        m.worker_id = r.u32();
        m.protocol_version = r.u32();
        m.last_gen = r.i64();
        out = m;
        break;
      }
      case Tag::kAssign: {
        Assign m;
        m.gen = r.u64();
        m.gen_seed = r.u64();
        m.index_lo = r.u32();
        m.index_hi = r.u32();
        if (m.index_hi < m.index_lo) throw ProtocolError("ASSIGN range is reversed");
        out = m;
        break;
      }
      case Tag::kReturns: {
        Returns m;
        m.gen = r.u64();
        m.index_lo = r.u32();
        m.values = read_values(r);
        out = std::move(m);
        break;
      }
      case Tag::kAllReturns: {
        AllReturns m;
        m.gen = r.u64();
        m.values = read_values(r);
        out = std::move(m);
        break;
      }
      case Tag::kShutdown:
        out = Shutdown{};
        break;
      case Tag::kConfig: {
        const std::uint32_t n = r.u32();
        out = ConfigText{r.text(n)};
        break;
      }
      default:
        throw ProtocolError("unknown message tag " + std::to_string(static_cast<int>(tag)));
    }
    if (!r.done()) throw ProtocolError(std::to_string(r.remaining()) + " trailing bytes in frame");
    return out;
  } catch (const FormatError& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_frame(const Message& message) {
  auto payload = encode_payload(message);
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> frame(4 + payload.size());
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<std::uint8_t>(n >> (8 * i));
  std::copy(payload.begin(), payload.end(), frame.begin() + 4);
  return frame;
}

}  // namespace ec
