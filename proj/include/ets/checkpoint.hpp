#pragma once

#include <cstdlib>
#include <filesystem>

#include "ets/blobfile.hpp"
#include "ets/model.hpp"
#include "ets/optim.hpp"

namespace ets {

// Resolve a weights reference: an existing file path is used as-is; anything
// else is treated as a registry key under $ETS_WEIGHTS_DIR.
inline std::string resolve_weights_path(const std::string& ref) {
  namespace fs = std::filesystem;
  if (fs::exists(ref)) return ref;
  if (ref.find('/') != std::string::npos ||
      (ref.size() > 4 && ref.substr(ref.size() - 4) == ".etw"))
    fail("io", "weights file not found: " + ref);
  const char* dir = std::getenv("ETS_WEIGHTS_DIR");
  if (!dir)
    fail("config", "weights registry key '" + ref + "' given but ETS_WEIGHTS_DIR is not set");
  const fs::path p = fs::path(dir) / (ref + ".etw");
  if (!fs::exists(p)) fail("io", "weights file not found in registry: " + p.string());
  return p.string();
}

// Deterministic seed for parameter initialization, derived from the
// architecture id so two encoders built from the same spec are
// byte-identical.
inline uint64_t arch_init_seed(const std::string& arch_id) {
  uint64_t h = 1469598103934665603ull;
  for (char c : arch_id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// Pretrained-or-seeded encoder per the spec: fresh seeded initialization
// when no weights reference is given, otherwise loaded from the resolved
// container (names "encoder.*", architecture id checked).
template <typename S>
Encoder<S> build_encoder(const EncoderSpec& spec) {
  const ArchParams arch = ArchParams::parse(spec.architecture);
  Rng rng = Rng::seeded(arch_init_seed(spec.architecture));
  Encoder<S> enc(arch, spec.trainable, rng);
  if (!spec.pretrained_weights.empty()) {
    const BlobFile blob = read_blob_file(resolve_weights_path(spec.pretrained_weights));
    if (blob.kind != "weights")
      fail("checkpoint", "expected a weights container, got kind '" + blob.kind + "'");
    const std::string stored = blob.meta.value("architecture", "");
    if (stored != spec.architecture)
      fail("checkpoint", "weights are for architecture '" + stored + "', requested '" +
                             spec.architecture + "'");
    ParamRefs<S> params;
    BufferRefs<S> buffers;
    enc.params("encoder", params);
    enc.buffers("encoder", buffers);
    apply_params(blob, params);
    apply_buffers(blob, buffers);
  }
  return enc;
}

// Encoder weights container, usable as EncoderSpec.pretrained_weights.
template <typename S>
void save_encoder_weights(const std::string& path, Encoder<S>& enc) {
  BlobFile blob;
  blob.kind = "weights";
  blob.meta["architecture"] = enc.arch().id;
  ParamRefs<S> params;
  BufferRefs<S> buffers;
  enc.params("encoder", params);
  enc.buffers("encoder", buffers);
  append_params(blob, params);
  append_buffers(blob, buffers);
  write_blob_file(path, blob);
}

// Whole-system construction. Expert and teacher share one initialization
// (seeded from the architecture id, or the referenced pretrained weights).
template <typename S>
EtsModel<S> build_model(const ModelSpec& spec) {
  Rng rng = Rng::seeded(arch_init_seed(spec.architecture));
  EtsModel<S> model(spec, rng);
  if (!spec.pretrained_weights.empty()) {
    EncoderSpec enc_spec;
    enc_spec.architecture = spec.architecture;
    enc_spec.pretrained_weights = spec.pretrained_weights;
    enc_spec.trainable = true;
    model.teacher() = build_encoder<S>(enc_spec);
  }
  model.sync_expert_from_teacher();
  return model;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& s) {
  return {{"architecture", s.architecture},
          {"pretrained_weights", s.pretrained_weights},
          {"use_gii", s.use_gii},
          {"teacher_norm_eval", s.teacher_norm_eval}};
}
inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.architecture = j.value("architecture", "wrn50");
  s.pretrained_weights = j.value("pretrained_weights", "");
  s.use_gii = j.value("use_gii", true);
  s.teacher_norm_eval = j.value("teacher_norm_eval", false);
  return s;
}

// Checkpoint = model spec + iteration + config echo + every trainable tensor
// and buffer, plus optimizer moments when given.
template <typename S>
void save_checkpoint(const std::string& path, EtsModel<S>& model, int64_t iteration,
                     const nlohmann::json& config_echo, Adam<S>* teacher_opt = nullptr,
                     Adam<S>* student_opt = nullptr) {
  BlobFile blob;
  blob.kind = "checkpoint";
  blob.meta["model"] = model_spec_to_json(model.spec());
  blob.meta["iteration"] = iteration;
  blob.meta["config"] = config_echo;
  append_params(blob, model.checkpoint_params());
  append_buffers(blob, model.checkpoint_buffers());
  if (teacher_opt) {
    blob.meta["teacher_opt_steps"] = teacher_opt->step_count();
    auto bufs = teacher_opt->state_buffers("opt.teacher");
    append_buffers(blob, bufs);
  }
  if (student_opt) {
    blob.meta["student_opt_steps"] = student_opt->step_count();
    auto bufs = student_opt->state_buffers("opt.student");
    append_buffers(blob, bufs);
  }
  write_blob_file(path, blob);
}

template <typename S>
struct LoadedCheckpoint {
  EtsModel<S> model;
  int64_t iteration = 0;
  nlohmann::json config_echo;
  BlobFile blob;  // retained so optimizer state can be applied after wiring
};

template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path,
                                    const std::string& expected_arch = "") {
  LoadedCheckpoint<S> out;
  out.blob = read_blob_file(path);
  if (out.blob.kind != "checkpoint")
    fail("checkpoint", "expected a checkpoint container, got kind '" + out.blob.kind + "'");
  const ModelSpec spec = model_spec_from_json(out.blob.meta.at("model"));
  if (!expected_arch.empty() && spec.architecture != expected_arch)
    fail("checkpoint", "checkpoint architecture '" + spec.architecture + "' does not match '" +
                           expected_arch + "'");
  out.model = build_model<S>(spec);
  apply_params(out.blob, out.model.checkpoint_params());
  apply_buffers(out.blob, out.model.checkpoint_buffers());
  out.iteration = out.blob.meta.value("iteration", int64_t(0));
  out.config_echo = out.blob.meta.value("config", nlohmann::json::object());
  return out;
}

}  // namespace ets
