#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ec/network.hpp"
#include "ec/probability.hpp"

namespace ec {

inline constexpr std::uint32_t kFormatVersion = 1;

// File layouts (all integers little-endian):
//
//   config echo   n_neurons u64, excitatory_ratio f64, dt_ms f64,
//                 sim_steps_per_control u64, tau_syn_ms f64, tau_m_ms f64,
//                 tau_out_ms f64, obs_dim u64, act_dim u64, r_in f64,
//                 r_h f64, r_out f64, allow_self_connections u64
//   ECRC          "ECRC" version:u32 <config echo> epsilon:f64
//                 3 x { rows:u32 cols:u32 rows*cols x f32 }   (p_in, p_rec, p_out)
//   ESRC          "ESRC" version:u32 <config echo>
//                 3 x { rows:u32 cols:u32 rows*cols x f32 }   (w_in, w_rec, w_out)
//   ECMK          "ECMK" version:u32
//                 3 x { rows:u32 cols:u32 rows*ceil(cols/8) bytes, LSB-first }
//
// Resistances are written resolved, so a reloaded config carries explicit
// r_in / r_h / r_out values.

struct Checkpoint {
  NetworkConfig network;
  ProbabilityModel model;
};

struct DenseCheckpoint {
  NetworkConfig network;
  DenseGenome center;
};

std::vector<std::uint8_t> encode_checkpoint(const NetworkConfig& network, const ProbabilityModel& model);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_dense_checkpoint(const NetworkConfig& network, const DenseGenome& center);
DenseCheckpoint decode_dense_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_mask(const Genome& genome);
Genome decode_mask(std::span<const std::uint8_t> bytes);

/// Throws DimensionError when the stored network shape differs from `expected`.
void require_compatible(const NetworkConfig& stored, const NetworkConfig& expected);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& network, const ProbabilityModel& model);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void save_dense_checkpoint(const std::filesystem::path& path, const NetworkConfig& network, const DenseGenome& center);
DenseCheckpoint load_dense_checkpoint(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Genome& genome);
Genome load_mask(const std::filesystem::path& path);

/// Reads the four magic bytes of a file ("ECRC", "ESRC", "ECMK", ...).
std::string peek_magic(const std::filesystem::path& path);

}  // namespace ec
