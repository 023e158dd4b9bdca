#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aerograph/model/dcsage.hpp"

namespace aerograph {

struct CheckpointMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t selected_epoch = 0;
  double validation_loss = 0.0;
  std::size_t ensemble_index = 0;
};

struct ModelCheckpoint {
  DcsageModel model;
  CheckpointMetadata metadata;
};

/// Binary layout:
///   8 bytes  magic "AGCKPT01"
///   8 bytes  little-endian header length H
///   H bytes  UTF-8 JSON header: config, metadata, and for each tensor its
///            name, shape and element offset into the payload
///   8 * N    little-endian IEEE-754 doubles, tensors in header order
std::string encode_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint decode_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `bytes` to `path` via a temporary file + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

std::string model_config_hash(const ModelConfig& config);

}  // namespace aerograph
