#include "aerograph/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aerograph/dataio/hash.hpp"
#include "aerograph/errors.hpp"
#include "json.hpp"

namespace aerograph {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'G', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  std::memcpy(&v, in.data() + offset, 8);
  return v;
}

json config_json(const ModelConfig& c) {
  return json{{"nodes", c.nodes},
              {"window_days", c.window_days},
              {"input_dim", c.input_dim},
              {"embedding_dim", c.embedding_dim},
              {"hidden_dim", c.hidden_dim},
              {"norm_eps", c.norm_eps}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.nodes = j.at("nodes").get<std::size_t>();
  c.window_days = j.at("window_days").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.norm_eps = j.at("norm_eps").get<double>();
  return c;
}

}  // namespace

std::string model_config_hash(const ModelConfig& config) { return content_hash(config_json(config).dump()); }

std::string encode_checkpoint(const ModelCheckpoint& checkpoint) {
  const DcsageModel& model = checkpoint.model;
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.parameters()) {
    tensors.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size();
  }
  const CheckpointMetadata& m = checkpoint.metadata;
  json header{{"format", "aerograph-checkpoint"},
              {"version", 1},
              {"config", config_json(model.config())},
              {"metadata",
               {{"seed", m.seed},
                {"hidden_dim", model.config().hidden_dim},
                {"config_hash", m.config_hash.empty() ? model_config_hash(model.config()) : m.config_hash},
                {"selected_epoch", m.selected_epoch},
                {"validation_loss", m.validation_loss},
                {"ensemble_index", m.ensemble_index}}},
              {"tensors", tensors},
              {"payload_values", offset}};
  const std::string head = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, head.size());
  out += head;
  out.reserve(out.size() + offset * 8);
  for (const auto& [name, t] : model.parameters()) {
    for (double v : t->values()) {
      char buf[8];
      std::memcpy(buf, &v, 8);
      out.append(buf, 8);
    }
  }
  return out;
}

ModelCheckpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not an aerograph checkpoint");
  }
  const std::uint64_t head_len = get_u64(bytes, 8);
  if (16 + head_len > bytes.size()) throw DataError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(16, head_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::size_t payload_at = 16 + head_len;
  const std::size_t values = header.at("payload_values").get<std::size_t>();
  if (bytes.size() != payload_at + values * 8) throw DataError("checkpoint payload size mismatch");

  ModelCheckpoint cp{DcsageModel(config_from(header.at("config"))), {}};
  const json& meta = header.at("metadata");
  cp.metadata.seed = meta.at("seed").get<std::uint64_t>();
  cp.metadata.config_hash = meta.at("config_hash").get<std::string>();
  cp.metadata.selected_epoch = meta.at("selected_epoch").get<std::size_t>();
  cp.metadata.validation_loss = meta.at("validation_loss").get<double>();
  cp.metadata.ensemble_index = meta.at("ensemble_index").get<std::size_t>();

  auto params = cp.model.parameters();
  const json& tensors = header.at("tensors");
  if (tensors.size() != params.size()) throw DataError("checkpoint tensor count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = tensors[i];
    if (entry.at("name").get<std::string>() != params[i].name) {
      throw DataError("checkpoint tensor '" + entry.at("name").get<std::string>() + "' where '" + params[i].name +
                      "' was expected");
    }
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != params[i].value->shape()) {
      throw DataError("checkpoint tensor '" + params[i].name + "' has shape " + shape_string(shape));
    }
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset + shape_size(shape) > values) throw DataError("checkpoint tensor '" + params[i].name + "' overruns");
    std::memcpy(params[i].value->values().data(), bytes.data() + payload_at + offset * 8, shape_size(shape) * 8);
  }
  return cp;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace aerograph
