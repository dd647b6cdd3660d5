#include "semsr/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace semsr {

namespace fs = std::filesystem;

void write_tensor_blob(const std::string& path, const TensorRef& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::uint64_t rank = tensor.dims.size();
  out.write(reinterpret_cast<const char*>(&rank), 8);
  for (auto dim : tensor.dims) {
    const std::uint64_t d = dim;
    out.write(reinterpret_cast<const char*>(&d), 8);
  }
  std::vector<float> raw(tensor.values.begin(), tensor.values.end());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw IoError("short write to '" + path + "'");
}

void read_tensor_blob(const std::string& path, const TensorRef& tensor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::uint64_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 8);
  if (!in || rank > 8) throw IoError("'" + path + "' has a bad header");
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    d = v;
  }
  if (!in || dims != tensor.dims) throw DataError("'" + path + "' shape does not match tensor '" + tensor.name + "'");
  std::vector<float> raw(tensor.values.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw IoError("'" + path + "' is truncated");
  std::copy(raw.begin(), raw.end(), tensor.values.begin());
}

void save_checkpoint(const std::string& dir, Model& model, const CheckpointInfo& info) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["format"] = "semsr-checkpoint-1";
  manifest["variant"] = std::string(to_string(model.config.variant));
  manifest["backbone"] = model.config.backbone;
  manifest["n"] = model.config.n;
  manifest["d1"] = model.config.d1;
  manifest["d2"] = model.config.d2;
  manifest["d"] = model.config.d;
  manifest["scale"] = model.config.scale;
  manifest["seed"] = info.seed;
  manifest["step"] = info.step;
  manifest["epoch"] = info.epoch;
  manifest["semantic_fingerprint"] = info.semantic_fingerprint;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const auto& t : model.tensors()) {
    write_tensor_blob((fs::path(dir) / (t.name + ".bin")).string(), t);
    tensors.push_back({{"name", t.name}, {"dims", t.dims}});
  }
  manifest["tensors"] = std::move(tensors);
  write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  const auto manifest_path = (fs::path(dir) / "manifest.json").string();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + manifest_path + "': " + e.what());
  }
  LoadedCheckpoint out;
  try {
    ModelConfig config;
    config.variant = parse_variant(manifest.at("variant").get<std::string>());
    config.backbone = manifest.at("backbone").get<std::string>();
    config.n = manifest.at("n").get<std::size_t>();
    config.d1 = manifest.at("d1").get<std::size_t>();
    config.d2 = manifest.at("d2").get<std::size_t>();
    config.d = manifest.at("d").get<std::size_t>();
    config.scale = manifest.at("scale").get<double>();
    out.info.seed = manifest.at("seed").get<std::uint64_t>();
    out.info.step = manifest.at("step").get<std::uint64_t>();
    out.info.epoch = manifest.at("epoch").get<std::size_t>();
    out.info.semantic_fingerprint = manifest.at("semantic_fingerprint").get<std::string>();
    out.model = Model::create(config, Matrix::Zero(static_cast<Eigen::Index>(config.n),
                                                   static_cast<Eigen::Index>(config.d1)), 0);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + manifest_path + "': " + e.what());
  }
  for (const auto& t : out.model.tensors()) read_tensor_blob((fs::path(dir) / (t.name + ".bin")).string(), t);
  return out;
}

}  // namespace semsr
