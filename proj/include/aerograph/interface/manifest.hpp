#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "aerograph/training/trainer.hpp"

namespace aerograph {

/// Provenance of a run directory. Every derived artifact records hash().
struct RunManifest {
  std::filesystem::path cases_csv;
  std::filesystem::path flights_csv;
  std::string dataset_hash;  // of both files' contents

  TrainConfig train;
  std::filesystem::path checkpoint_dir = "models";  // relative to the run directory
  std::size_t checkpoints = 0;
  std::string checkpoint_hash;  // of every checkpoint file, in index order

  std::optional<std::filesystem::path> bias_file;  // relative to the run directory
  std::string bias_hash;

  std::string created;  // UTC, ISO 8601; not part of the hash

  /// content hash of the JSON form without `created`.
  std::string hash() const;
  /// hash() with the bias entry cleared: what bias factors derive from.
  std::string training_hash() const;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kBiasFile = "bias.json";
inline constexpr const char* kSensitivityFile = "sensitivity.json";
inline constexpr const char* kPolicyFile = "policy.json";

std::string dataset_hash(const std::filesystem::path& cases_csv, const std::filesystem::path& flights_csv);
/// Hash over model_000.ckpt, model_001.ckpt, ... in `dir`.
std::string checkpoint_dir_hash(const std::filesystem::path& dir, std::size_t count);

RunManifest load_manifest(const std::filesystem::path& run_dir);
void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

std::string utc_timestamp();

}  // namespace aerograph
