#include "ec/io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "ec/bytes.hpp"
#include "ec/error.hpp"

namespace ec {

namespace {

constexpr std::string_view kCheckpointMagic = "ECRC";
constexpr std::string_view kDenseMagic = "ESRC";
constexpr std::string_view kMaskMagic = "ECMK";

// Sanity bound on header dimensions, so corrupt headers fail before allocating.
constexpr std::uint64_t kMaxDimension = 1u << 20;

void write_header(ByteWriter& w, std::string_view magic) {
  w.raw(magic);
  w.u32(kFormatVersion);
}

void read_header(ByteReader& r, std::string_view magic) {
  const std::string found = r.text(4);
  if (found != magic) {
    throw FormatError("bad magic '" + found + "', expected '" + std::string(magic) + "'");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kFormatVersion) + ")");
  }
}

std::size_t read_dim(ByteReader& r, const char* what) {
  const std::uint64_t v = r.u64();
  if (v > kMaxDimension) throw FormatError(std::string(what) + " out of range: " + std::to_string(v));
  return static_cast<std::size_t>(v);
}

void write_config(ByteWriter& w, const NetworkConfig& c) {
  w.u64(c.n_neurons);
  w.f64(c.excitatory_ratio);
  w.f64(c.dt_ms);
  w.u64(c.sim_steps_per_control);
  w.f64(c.tau_syn_ms);
  w.f64(c.tau_m_ms);
  w.f64(c.tau_out_ms);
  w.u64(c.obs_dim);
  w.u64(c.act_dim);
  w.f64(c.input_resistance());
  w.f64(c.hidden_resistance());
  w.f64(c.output_resistance());
  w.u64(c.allow_self_connections ? 1 : 0);
}

NetworkConfig read_config(ByteReader& r) {
  NetworkConfig c;
  c.n_neurons = read_dim(r, "n_neurons");
  c.excitatory_ratio = r.f64();
  c.dt_ms = r.f64();
  c.sim_steps_per_control = read_dim(r, "sim_steps_per_control");
  c.tau_syn_ms = r.f64();
  c.tau_m_ms = r.f64();
  c.tau_out_ms = r.f64();
  c.obs_dim = read_dim(r, "obs_dim");
  c.act_dim = read_dim(r, "act_dim");
  c.r_in = r.f64();
  c.r_h = r.f64();
  c.r_out = r.f64();
  const std::uint64_t self = r.u64();
  if (self > 1) throw FormatError("allow_self_connections flag must be 0 or 1");
  c.allow_self_connections = self == 1;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored network config is invalid: ") + e.what());
  }
  return c;
}

void write_matrix(ByteWriter& w, const Matrix<float>& m) {
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) w.f32(v);
}

Matrix<float> read_matrix(ByteReader& r, std::size_t rows, std::size_t cols, const char* what) {
  const std::uint32_t stored_rows = r.u32();
  const std::uint32_t stored_cols = r.u32();
  if (stored_rows != rows || stored_cols != cols) {
    throw FormatError(std::string(what) + " is " + std::to_string(stored_rows) + "x" + std::to_string(stored_cols) +
                      ", header implies " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix<float> m(rows, cols);
  for (auto& v : m.data) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError(std::string(what) + " contains a non-finite value");
  }
  return m;
}

void write_bits(ByteWriter& w, const BitMatrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.raw(m.to_bytes());
}

BitMatrix read_bits(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (rows > kMaxDimension || cols > kMaxDimension) throw FormatError("mask dimensions out of range");
  const std::size_t stride = (std::size_t{cols} + 7) / 8;
  return BitMatrix::from_bytes(rows, cols, r.raw(std::size_t{rows} * stride));
}

void require_end(const ByteReader& r) {
  if (!r.done()) throw FormatError(std::to_string(r.remaining()) + " trailing bytes after payload");
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetworkConfig& network, const ProbabilityModel& model) {
  if (!model.matches(network)) throw DimensionError("checkpoint: model does not match network config");
  ByteWriter w;
  write_header(w, kCheckpointMagic);
  write_config(w, network);
  w.f64(model.epsilon);
  for (const auto* block : model.blocks()) write_matrix(w, *block);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  read_header(r, kCheckpointMagic);
  Checkpoint cp;
  cp.network = read_config(r);
  const double epsilon = r.f64();
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw FormatError("stored epsilon out of range");
  const auto& n = cp.network;
  auto p_in = read_matrix(r, n.n_neurons, n.obs_dim, "p_in");
  auto p_rec = read_matrix(r, n.n_neurons, n.n_neurons, "p_rec");
  auto p_out = read_matrix(r, n.act_dim, n.n_neurons, "p_out");
  require_end(r);
  cp.model = ProbabilityModel{epsilon, !n.allow_self_connections, std::move(p_in), std::move(p_rec), std::move(p_out)};
  for (const auto* block : cp.model.blocks()) {
    for (float p : block->data) {
      if (p < cp.model.lower() || p > cp.model.upper()) throw FormatError("stored probability outside [eps, 1-eps]");
    }
  }
  return cp;
}

std::vector<std::uint8_t> encode_dense_checkpoint(const NetworkConfig& network, const DenseGenome& center) {
  if (!center.matches(network)) throw DimensionError("checkpoint: dense genome does not match network config");
  ByteWriter w;
  write_header(w, kDenseMagic);
  write_config(w, network);
  write_matrix(w, center.w_in);
  write_matrix(w, center.w_rec);
  write_matrix(w, center.w_out);
  return w.take();
}

DenseCheckpoint decode_dense_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  read_header(r, kDenseMagic);
  DenseCheckpoint cp;
  cp.network = read_config(r);
  const auto& n = cp.network;
  cp.center.w_in = read_matrix(r, n.n_neurons, n.obs_dim, "w_in");
  cp.center.w_rec = read_matrix(r, n.n_neurons, n.n_neurons, "w_rec");
  cp.center.w_out = read_matrix(r, n.act_dim, n.n_neurons, "w_out");
  require_end(r);
  return cp;
}

std::vector<std::uint8_t> encode_mask(const Genome& genome) {
  ByteWriter w;
  write_header(w, kMaskMagic);
  write_bits(w, genome.w_in);
  write_bits(w, genome.w_rec);
  write_bits(w, genome.w_out);
  return w.take();
}

Genome decode_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  read_header(r, kMaskMagic);
  Genome g;
  g.w_in = read_bits(r);
  g.w_rec = read_bits(r);
  g.w_out = read_bits(r);
  require_end(r);
  if (g.w_rec.rows() != g.w_rec.cols() || g.w_in.rows() != g.w_rec.rows() || g.w_out.cols() != g.w_rec.rows()) {
    throw FormatError("mask blocks have inconsistent neuron counts");
  }
  return g;
}

void require_compatible(const NetworkConfig& stored, const NetworkConfig& expected) {
  if (stored.n_neurons != expected.n_neurons || stored.obs_dim != expected.obs_dim ||
      stored.act_dim != expected.act_dim) {
    throw DimensionError("checkpoint network is " + std::to_string(stored.n_neurons) + " neurons (obs " +
                         std::to_string(stored.obs_dim) + ", act " + std::to_string(stored.act_dim) +
                         "), configuration expects " + std::to_string(expected.n_neurons) + " neurons (obs " +
                         std::to_string(expected.obs_dim) + ", act " + std::to_string(expected.act_dim) + ")");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& network, const ProbabilityModel& model) {
  write_file(path, encode_checkpoint(network, model));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void save_dense_checkpoint(const std::filesystem::path& path, const NetworkConfig& network,
                           const DenseGenome& center) {
  write_file(path, encode_dense_checkpoint(network, center));
}

DenseCheckpoint load_dense_checkpoint(const std::filesystem::path& path) {
  return decode_dense_checkpoint(read_file(path));
}

void save_mask(const std::filesystem::path& path, const Genome& genome) { write_file(path, encode_mask(genome)); }

Genome load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

std::string peek_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::string magic(4, '\0');
  in.read(magic.data(), 4);
  if (in.gcount() != 4) throw FormatError("'" + path.string() + "' is too short to be a checkpoint");
  return magic;
}

}  // namespace ec
