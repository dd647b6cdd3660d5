#pragma once

#include <string>

#include "semsr/model.hpp"

namespace semsr {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::string semantic_fingerprint;  // empty when the model never reads the table
};

/// Writes `manifest.json` plus one `<tensor>.bin` per trainable tensor:
/// rank (u64 LE), dims (u64 LE each), then float32 LE values row-major.
void save_checkpoint(const std::string& dir, Model& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
  Model model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

void write_tensor_blob(const std::string& path, const TensorRef& tensor);
/// Reads a blob into `tensor`, which must already have the recorded shape.
void read_tensor_blob(const std::string& path, const TensorRef& tensor);

}  // namespace semsr
