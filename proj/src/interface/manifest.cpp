#include "aerograph/interface/manifest.hpp"

#include <chrono>
#include <ctime>

#include "aerograph/dataio/hash.hpp"
#include "aerograph/errors.hpp"
#include "json.hpp"

namespace aerograph {
namespace {

using nlohmann::json;

json hashed_fields(const RunManifest& m) {
  const TrainConfig& t = m.train;
  json bias = nullptr;
  if (m.bias_file) bias = {{"path", m.bias_file->generic_string()}, {"hash", m.bias_hash}};
  return {{"format", "aerograph-manifest"},
          {"version", 1},
          {"dataset",
           {{"cases", m.cases_csv.generic_string()},
            {"flights", m.flights_csv.generic_string()},
            {"hash", m.dataset_hash}}},
          {"train",
           {{"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"lr_decay_patience", t.lr_decay_patience},
            {"lr_decay_factor", t.lr_decay_factor},
            {"seed", t.seed},
            {"ensemble_size", t.ensemble_size},
            {"hidden_dim", t.hidden_dim}}},
          {"checkpoints",
           {{"path", m.checkpoint_dir.generic_string()}, {"count", m.checkpoints}, {"hash", m.checkpoint_hash}}},
          {"bias", bias}};
}

}  // namespace

std::string RunManifest::hash() const { return content_hash(hashed_fields(*this).dump()); }

std::string RunManifest::training_hash() const {
  RunManifest m = *this;
  m.bias_file.reset();
  m.bias_hash.clear();
  return m.hash();
}

std::string RunManifest::to_json() const {
  json j = hashed_fields(*this);
  j["created"] = created;
  j["manifest_hash"] = hash();
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "aerograph-manifest") throw DataError("manifest: unexpected format");
    const json& d = j.at("dataset");
    m.cases_csv = d.at("cases").get<std::string>();
    m.flights_csv = d.at("flights").get<std::string>();
    m.dataset_hash = d.at("hash").get<std::string>();
    const json& t = j.at("train");
    m.train.epochs = t.at("epochs").get<std::size_t>();
    m.train.learning_rate = t.at("learning_rate").get<double>();
    m.train.lr_decay_patience = t.at("lr_decay_patience").get<std::size_t>();
    m.train.lr_decay_factor = t.at("lr_decay_factor").get<double>();
    m.train.seed = t.at("seed").get<std::uint64_t>();
    m.train.ensemble_size = t.at("ensemble_size").get<std::size_t>();
    m.train.hidden_dim = t.at("hidden_dim").get<std::size_t>();
    const json& c = j.at("checkpoints");
    m.checkpoint_dir = c.at("path").get<std::string>();
    m.checkpoints = c.at("count").get<std::size_t>();
    m.checkpoint_hash = c.at("hash").get<std::string>();
    if (!j.at("bias").is_null()) {
      m.bias_file = j.at("bias").at("path").get<std::string>();
      m.bias_hash = j.at("bias").at("hash").get<std::string>();
    }
    m.created = j.value("created", "");
    if (j.contains("manifest_hash") && j.at("manifest_hash").get<std::string>() != m.hash()) {
      throw DataError("manifest: recorded hash does not match its contents");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  return m;
}

std::string dataset_hash(const std::filesystem::path& cases_csv, const std::filesystem::path& flights_csv) {
  return content_hash(file_hash(cases_csv) + file_hash(flights_csv));
}

std::string checkpoint_dir_hash(const std::filesystem::path& dir, std::size_t count) {
  std::string all;
  for (std::size_t k = 0; k < count; ++k) all += file_hash(dir / checkpoint_filename(k));
  return content_hash(all);
}

RunManifest load_manifest(const std::filesystem::path& run_dir) {
  const auto path = run_dir / kManifestFile;
  if (!std::filesystem::exists(path)) throw DataError("no manifest in " + run_dir.string() + " (run `train` first)");
  return RunManifest::from_json(read_file(path));
}

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest) {
  write_file_atomic(run_dir / kManifestFile, manifest.to_json());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace aerograph
