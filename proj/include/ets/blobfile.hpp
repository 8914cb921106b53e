#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ets/common.hpp"
#include "ets/tape.hpp"

namespace ets {

// Self-describing binary container for parameters and optimizer state:
//   "ETSBLOB1" | u32 schema | u64 header_len | header JSON | f32 payload | u32 crc32
// The CRC covers every preceding byte; loading a truncated or bit-flipped
// file fails before any state is applied.
struct NamedTensorBlob {
  std::string name;
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<float> data;
};

struct BlobFile {
  static constexpr uint32_t kSchemaVersion = 1;
  std::string kind;      // "checkpoint" or "weights"
  nlohmann::json meta;   // architecture id, config echo, iteration, ...
  std::vector<NamedTensorBlob> tensors;

  const NamedTensorBlob* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

void write_blob_file(const std::string& path, const BlobFile& blob);
BlobFile read_blob_file(const std::string& path);

// -- helpers gluing the container to module parameter registries --

template <typename S>
NamedTensorBlob to_blob(const std::string& name, const Tensor<S>& t) {
  NamedTensorBlob b;
  b.name = name;
  b.shape = t.shape();
  b.data.resize(static_cast<size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) b.data[i] = static_cast<float>(t.data()[i]);
  return b;
}

template <typename S>
void from_blob(const NamedTensorBlob& b, Tensor<S>& t) {
  if (b.shape != t.shape())
    fail("checkpoint", "tensor '" + b.name + "' has shape (" + std::to_string(b.shape[0]) + "," +
                           std::to_string(b.shape[1]) + "," + std::to_string(b.shape[2]) + "," +
                           std::to_string(b.shape[3]) + "), expected " + t.shape_str());
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(b.data[i]);
}

template <typename S>
void append_params(BlobFile& blob, const ParamRefs<S>& params) {
  for (const auto& [name, p] : params) blob.tensors.push_back(to_blob(name, p->value));
}
template <typename S>
void append_buffers(BlobFile& blob, const BufferRefs<S>& buffers) {
  for (const auto& [name, t] : buffers) blob.tensors.push_back(to_blob(name, *t));
}
template <typename S>
void apply_params(const BlobFile& blob, const ParamRefs<S>& params) {
  for (const auto& [name, p] : params) {
    const NamedTensorBlob* b = blob.find(name);
    if (!b) fail("checkpoint", "missing tensor '" + name + "'");
    from_blob(*b, p->value);
  }
}
template <typename S>
void apply_buffers(const BlobFile& blob, const BufferRefs<S>& buffers) {
  for (const auto& [name, t] : buffers) {
    const NamedTensorBlob* b = blob.find(name);
    if (!b) fail("checkpoint", "missing tensor '" + name + "'");
    from_blob(*b, *t);
  }
}

}  // namespace ets
