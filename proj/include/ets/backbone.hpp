#pragma once

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "ets/nn.hpp"

namespace ets {

// Wide residual encoder family. "wrn50" is the full-size network (stem 64,
// bottleneck stages of 3/4/6 blocks, 2x inner width) whose first three
// stages emit 256/512/1024-channel levels at 1/4, 1/8 and 1/16 resolution.
// Reduced variants for small experiments are spelled
// "wrn50_w<base>_d<b1><b2><b3>[_o<oce_blocks>]", e.g. "wrn50_w8_d111_o1".
struct ArchParams {
  std::string id = "wrn50";
  int base = 64;                    // stem width
  int widen = 2;                    // inner-width multiplier of bottlenecks
  std::array<int, 3> blocks{3, 4, 6};
  int oce_blocks = 3;               // residual blocks in the one-class embedding stage

  int level_channels(int level) const { return 4 * base * (1 << (level - 1)); }  // level 1..3
  int embed_channels() const { return 2 * level_channels(3); }

  static ArchParams parse(const std::string& id) {
    ArchParams a;
    a.id = id;
    if (id == "wrn50") return a;
    if (id.rfind("wrn50_", 0) != 0) fail("config", "unknown architecture id: " + id);
    std::string rest = id.substr(6);
    bool have_w = false;
    while (!rest.empty()) {
      size_t us = rest.find('_');
      std::string tok = rest.substr(0, us);
      rest = (us == std::string::npos) ? "" : rest.substr(us + 1);
      if (tok.size() >= 2 && tok[0] == 'w') {
        a.base = std::atoi(tok.c_str() + 1);
        have_w = true;
      } else if (tok.size() == 4 && tok[0] == 'd') {
        a.blocks = {tok[1] - '0', tok[2] - '0', tok[3] - '0'};
      } else if (tok.size() >= 2 && tok[0] == 'o') {
        a.oce_blocks = std::atoi(tok.c_str() + 1);
      } else {
        fail("config", "unknown architecture id: " + id);
      }
    }
    if (!have_w || a.base <= 0 || a.oce_blocks <= 0 || a.blocks[0] <= 0 || a.blocks[1] <= 0 ||
        a.blocks[2] <= 0)
      fail("config", "unknown architecture id: " + id);
    return a;
  }
};

struct EncoderSpec {
  std::string architecture = "wrn50";
  std::string pretrained_weights;  // empty: seeded init; path or registry key otherwise
  bool trainable = false;
  int stages_used = 3;
};

template <typename S>
struct PyramidVars {
  std::array<Var<S>, 3> level;  // level[0] is the highest-resolution stage output
};

template <typename S>
using FeaturePyramid = std::array<Tensor<S>, 3>;

// Three-stage residual encoder exposing a feature pyramid. Used both as the
// trainable teacher and (frozen) as the expert.
template <typename S>
class Encoder {
 public:
  Encoder() = default;

  explicit Encoder(const ArchParams& arch, bool trainable, Rng& rng)
      : arch_(arch), trainable_(trainable) {
    stem_.init(3, arch.base, 7, 2, 3, false, rng);
    bn_stem_.init(arch.base);
    int in_ch = arch.base;
    for (int s = 0; s < 3; ++s) {
      const int planes = arch.base * (1 << s);
      const int width = planes * arch.widen;
      const int out_ch = planes * 4;
      const int stride = (s == 0) ? 1 : 2;
      stages_[s].resize(arch.blocks[s]);
      for (int b = 0; b < arch.blocks[s]; ++b) {
        stages_[s][b].init(b == 0 ? in_ch : out_ch, width, out_ch, b == 0 ? stride : 1, rng);
      }
      in_ch = out_ch;
    }
  }

  const ArchParams& arch() const { return arch_; }
  bool trainable() const { return trainable_; }
  void make_frozen() { trainable_ = false; }

  PyramidVars<S> encode(Tape<S>& t, Var<S> x) {
    const Tensor<S>& X = t.val(x);
    if (X.h() % 32 || X.w() % 32)
      fail("shape", "encode: input spatial size must be divisible by 32, got " + X.shape_str());
    Var<S> y = ops::relu(t, bn_stem_.forward(t, stem_.forward(t, x, trainable_), trainable_));
    y = ops::maxpool(t, y, 3, 2, 1);
    PyramidVars<S> pyr;
    for (int s = 0; s < 3; ++s) {
      for (auto& block : stages_[s]) y = block.forward(t, y, trainable_);
      pyr.level[s] = y;
    }
    return pyr;
  }

  FeaturePyramid<S> encode_tensors(const Tensor<S>& batch) {
    Tape<S> t(false);
    PyramidVars<S> pyr = encode(t, t.value(batch));
    return {t.val(pyr.level[0]), t.val(pyr.level[1]), t.val(pyr.level[2])};
  }

  void params(const std::string& prefix, ParamRefs<S>& out) {
    stem_.params(prefix + ".stem.conv", out);
    bn_stem_.params(prefix + ".stem.bn", out);
    for (int s = 0; s < 3; ++s)
      for (size_t b = 0; b < stages_[s].size(); ++b)
        stages_[s][b].params(prefix + ".stage" + std::to_string(s + 1) + "." + std::to_string(b),
                             out);
  }
  void buffers(const std::string& prefix, BufferRefs<S>& out) {
    bn_stem_.buffers(prefix + ".stem.bn", out);
    for (int s = 0; s < 3; ++s)
      for (size_t b = 0; b < stages_[s].size(); ++b)
        stages_[s][b].buffers(prefix + ".stage" + std::to_string(s + 1) + "." + std::to_string(b),
                              out);
  }
  void set_training(bool mode) {
    bn_stem_.training = mode;
    for (auto& st : stages_)
      for (auto& b : st) b.set_training(mode);
  }

 private:
  ArchParams arch_;
  bool trainable_ = false;
  nn::Conv2d<S> stem_;
  nn::BatchNorm2d<S> bn_stem_;
  std::array<std::vector<nn::BottleneckBlock<S>>, 3> stages_;
};

}  // namespace ets
