#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aurecon/diffcore/param_store.hpp"

namespace aurecon::diff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
  OptimState state;
};

/// In-memory image of a checkpoint file: a free-form manifest string (the
/// caller's block names and configs) plus named parameters with their
/// optimizer state.
///
/// On-disk layout, all integers little-endian:
///   "AURECKPT" | u32 version | u64 manifest_len | manifest bytes | u64 count |
///   count x { u32 name_len | name | u32 rank | u64 dims[rank] | u64 step |
///             u64 moment_len | f64 values[numel] | f64 m[moment_len] |
///             f64 v[moment_len] } |
///   u64 FNV-1a hash of all preceding bytes
struct Checkpoint {
  std::string manifest;
  std::vector<CheckpointEntry> entries;

  void add_store(const std::string& prefix, const ParamStore& store);
  /// Copies values and optimizer state into `store`; every parameter of the
  /// store must be present with an identical shape.
  void restore_store(const std::string& prefix, ParamStore& store) const;
  const CheckpointEntry* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, version mismatch, truncation or hash mismatch.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aurecon::diff
