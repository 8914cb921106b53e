#pragma once

#include <string>
#include <vector>

#include "ets/backbone.hpp"

namespace ets {

// One-class bottleneck embedding: multi-scale fusion (levels 1-2 brought to
// level-3 scale by strided convolutions, then concatenated with level 3)
// followed by one residual stage that halves the spatial size and projects
// to the compact embedding. Teacher features entering here are detached.
template <typename S>
class Bottleneck {
 public:
  Bottleneck() = default;

  explicit Bottleneck(const ArchParams& arch, Rng& rng) {
    const int c1 = arch.level_channels(1), c2 = arch.level_channels(2),
              c3 = arch.level_channels(3);
    mff1a_.init(c1, c2, 3, 2, 1, false, rng);
    mff1a_bn_.init(c2);
    mff1b_.init(c2, c3, 3, 2, 1, false, rng);
    mff1b_bn_.init(c3);
    mff2_.init(c2, c3, 3, 2, 1, false, rng);
    mff2_bn_.init(c3);
    const int fused = 3 * c3;
    const int planes = arch.base * 8;  // doubles the level-3 planes
    const int width = planes * arch.widen;
    const int out = arch.embed_channels();
    oce_.resize(arch.oce_blocks);
    for (int b = 0; b < arch.oce_blocks; ++b)
      oce_[b].init(b == 0 ? fused : out, width, out, b == 0 ? 2 : 1, rng);
  }

  Var<S> forward(Tape<S>& t, const PyramidVars<S>& teacher) {
    Var<S> f1 = ops::detach(t, teacher.level[0]);
    Var<S> f2 = ops::detach(t, teacher.level[1]);
    Var<S> f3 = ops::detach(t, teacher.level[2]);
    Var<S> a = ops::relu(t, mff1a_bn_.forward(t, mff1a_.forward(t, f1, true), true));
    a = ops::relu(t, mff1b_bn_.forward(t, mff1b_.forward(t, a, true), true));
    Var<S> b = ops::relu(t, mff2_bn_.forward(t, mff2_.forward(t, f2, true), true));
    Var<S> fused = ops::concat_c(t, ops::concat_c(t, a, b), f3);
    Var<S> y = fused;
    for (auto& block : oce_) y = block.forward(t, y, true);
    return y;
  }

  void params(const std::string& p, ParamRefs<S>& out) {
    mff1a_.params(p + ".mff1a", out);
    mff1a_bn_.params(p + ".mff1a_bn", out);
    mff1b_.params(p + ".mff1b", out);
    mff1b_bn_.params(p + ".mff1b_bn", out);
    mff2_.params(p + ".mff2", out);
    mff2_bn_.params(p + ".mff2_bn", out);
    for (size_t i = 0; i < oce_.size(); ++i) oce_[i].params(p + ".oce." + std::to_string(i), out);
  }
  void buffers(const std::string& p, BufferRefs<S>& out) {
    mff1a_bn_.buffers(p + ".mff1a_bn", out);
    mff1b_bn_.buffers(p + ".mff1b_bn", out);
    mff2_bn_.buffers(p + ".mff2_bn", out);
    for (size_t i = 0; i < oce_.size(); ++i) oce_[i].buffers(p + ".oce." + std::to_string(i), out);
  }
  void set_training(bool mode) {
    mff1a_bn_.training = mff1b_bn_.training = mff2_bn_.training = mode;
    for (auto& b : oce_) b.set_training(mode);
  }

 private:
  nn::Conv2d<S> mff1a_, mff1b_, mff2_;
  nn::BatchNorm2d<S> mff1a_bn_, mff1b_bn_, mff2_bn_;
  std::vector<nn::BottleneckBlock<S>> oce_;
};

// Sim-weighted mixing of the fused teacher feature with the student feature:
// fuse .* sim + student .* (1 - sim). Exposed separately so the substitution
// identities (sim == 1 or 0) can be exercised directly.
template <typename S>
Var<S> gii_blend(Tape<S>& t, Var<S> fuse, Var<S> student, Var<S> sim) {
  Var<S> one_minus = ops::affine(t, sim, S(-1), S(1));
  return ops::add(t, ops::mul_map(t, fuse, sim), ops::mul_map(t, student, one_minus));
}

// Guided information injection placed before a decoder stage: fuses the two
// teacher levels, gates the fused detail by the per-location cosine between
// teacher and student at the coarser level, and merges with the original
// student feature. Teacher inputs are consumed detached.
template <typename S>
class Gii {
 public:
  Gii() = default;

  // ch_hi: channels of the finer teacher level i; ch_lo = 2*ch_hi at level i+1.
  Gii(int ch_hi, int ch_lo, Rng& rng) {
    lift_.init(ch_hi, ch_lo, 1, 1, 0, true, rng);
    fuse_.init(ch_lo, ch_lo, 3, 1, 1, true, rng);
    sa_.init(ch_lo, ch_lo, 3, 1, 1, true, rng);
    merge_.init(2 * ch_lo, ch_lo, 3, 1, 1, true, rng);
  }

  Var<S> forward(Tape<S>& t, Var<S> f_t_i, Var<S> f_t_ip1, Var<S> f_s_ip1, S eps = S(1e-8)) {
    const Tensor<S>&hi = t.val(f_t_i), &lo = t.val(f_t_ip1);
    if (hi.h() != 2 * lo.h() || hi.w() != 2 * lo.w())
      fail("shape", "gii: finer level must be 2x the spatial size of the coarser level");
    check_same_shape(t.val(f_t_ip1), t.val(f_s_ip1), "gii");
    Var<S> td_i = ops::detach(t, f_t_i);
    Var<S> td_ip1 = ops::detach(t, f_t_ip1);
    Var<S> down = lift_.forward(t, ops::avgpool2(t, td_i), true);
    Var<S> fuse = fuse_.forward(t, ops::add(t, down, td_ip1), true);
    Var<S> sim = ops::cosine_map(t, td_ip1, f_s_ip1, eps);
    Var<S> mixed = gii_blend(t, fuse, f_s_ip1, sim);
    Var<S> sa = sa_.forward(t, mixed, true);
    return merge_.forward(t, ops::concat_c(t, sa, f_s_ip1), true);
  }

  void params(const std::string& p, ParamRefs<S>& out) {
    lift_.params(p + ".lift", out);
    fuse_.params(p + ".fuse", out);
    sa_.params(p + ".sa", out);
    merge_.params(p + ".merge", out);
  }

 private:
  nn::Conv2d<S> lift_, fuse_, sa_, merge_;
};

// Student decoder: three stages mirroring the encoder, upsampling instead of
// downsampling. Stage j consumes the (optionally GII-refined) level j+1
// feature and emits the level j reconstruction.
template <typename S>
class Decoder {
 public:
  Decoder() = default;

  explicit Decoder(const ArchParams& arch, Rng& rng) {
    for (int j = 3; j >= 1; --j) {
      const int idx = 3 - j;  // 0 -> S^3, 1 -> S^2, 2 -> S^1
      const int out = arch.level_channels(j);
      const int in = (j == 3) ? arch.embed_channels() : arch.level_channels(j + 1);
      const int planes = arch.base * (1 << (j - 1));
      const int width = planes * arch.widen;
      auto& stage = stages_[idx];
      stage.resize(arch.blocks[j - 1]);
      for (size_t b = 0; b < stage.size(); ++b)
        stage[b].init(b == 0 ? in : out, width, out, b == 0, rng);
    }
  }

  // stage_index: 3, 2 or 1.
  Var<S> run_stage(Tape<S>& t, int stage_index, Var<S> x) {
    auto& stage = stages_[3 - stage_index];
    Var<S> y = x;
    for (auto& block : stage) y = block.forward(t, y, true);
    return y;
  }

  void params(const std::string& p, ParamRefs<S>& out) {
    for (int idx = 0; idx < 3; ++idx)
      for (size_t b = 0; b < stages_[idx].size(); ++b)
        stages_[idx][b].params(p + ".s" + std::to_string(3 - idx) + "." + std::to_string(b), out);
  }
  void buffers(const std::string& p, BufferRefs<S>& out) {
    for (int idx = 0; idx < 3; ++idx)
      for (size_t b = 0; b < stages_[idx].size(); ++b)
        stages_[idx][b].buffers(p + ".s" + std::to_string(3 - idx) + "." + std::to_string(b), out);
  }
  void set_training(bool mode) {
    for (auto& st : stages_)
      for (auto& b : st) b.set_training(mode);
  }

 private:
  std::array<std::vector<nn::DecoderBlock<S>>, 3> stages_;
};

// Reconstructs the student pyramid from the compact embedding, refining the
// stage inputs with GII when enabled. Teacher features are consumed detached
// throughout; disabling GII reproduces the plain reverse-distillation flow.
template <typename S>
PyramidVars<S> student_forward(Tape<S>& t, Var<S> embedding, const PyramidVars<S>& teacher,
                               Decoder<S>& decoder, Gii<S>* gii_before_s2, Gii<S>* gii_before_s1) {
  PyramidVars<S> out;
  out.level[2] = decoder.run_stage(t, 3, embedding);
  Var<S> in2 = out.level[2];
  if (gii_before_s2) in2 = gii_before_s2->forward(t, teacher.level[1], teacher.level[2], in2);
  out.level[1] = decoder.run_stage(t, 2, in2);
  Var<S> in1 = out.level[1];
  if (gii_before_s1) in1 = gii_before_s1->forward(t, teacher.level[0], teacher.level[1], in1);
  out.level[0] = decoder.run_stage(t, 1, in1);
  return out;
}

struct ModelSpec {
  std::string architecture = "wrn50";
  std::string pretrained_weights;   // shared initialization of expert and teacher
  bool use_gii = true;
  bool teacher_norm_eval = false;   // teacher normalization layers in eval mode while training
};

// The full expert-teacher-student system. The expert is a frozen copy of the
// teacher's initialization and never receives gradients; the teacher trains
// under its own optimizer; bottleneck, decoder and GII belong to the student
// optimizer.
template <typename S>
class EtsModel {
 public:
  EtsModel() = default;

  EtsModel(const ModelSpec& spec, Rng& rng)
      : spec_(spec), arch_(ArchParams::parse(spec.architecture)) {
    teacher_ = Encoder<S>(arch_, /*trainable=*/true, rng);
    bottleneck_ = Bottleneck<S>(arch_, rng);
    decoder_ = Decoder<S>(arch_, rng);
    if (spec.use_gii) {
      gii1_ = Gii<S>(arch_.level_channels(1), arch_.level_channels(2), rng);
      gii2_ = Gii<S>(arch_.level_channels(2), arch_.level_channels(3), rng);
    }
  }

  const ModelSpec& spec() const { return spec_; }
  const ArchParams& arch() const { return arch_; }
  Encoder<S>& expert() { return expert_; }
  Encoder<S>& teacher() { return teacher_; }

  // Clones the teacher's current parameters/buffers into the frozen expert.
  void sync_expert_from_teacher() {
    expert_ = teacher_;
    // The copy keeps trainable=true; rebuild the flag by re-registering.
    expert_.make_frozen();
  }

  struct BranchVars {
    PyramidVars<S> teacher;
    Var<S> embedding;
    PyramidVars<S> student;
  };

  // Teacher -> bottleneck -> (GII) -> decoder on one normalized batch.
  BranchVars branch_forward(Tape<S>& t, Var<S> x) {
    BranchVars out;
    out.teacher = teacher_.encode(t, x);
    out.embedding = bottleneck_.forward(t, out.teacher);
    out.student = student_forward(t, out.embedding, out.teacher, decoder_,
                                  spec_.use_gii ? &gii2_ : nullptr,
                                  spec_.use_gii ? &gii1_ : nullptr);
    return out;
  }

  PyramidVars<S> expert_forward(Tape<S>& t, Var<S> x) { return expert_.encode(t, x); }

  // Inference on one normalized image: teacher and student pyramids.
  std::pair<FeaturePyramid<S>, FeaturePyramid<S>> infer(const Tensor<S>& x) {
    Tape<S> t(false);
    BranchVars v = branch_forward(t, t.value(x));
    return {{t.val(v.teacher.level[0]), t.val(v.teacher.level[1]), t.val(v.teacher.level[2])},
            {t.val(v.student.level[0]), t.val(v.student.level[1]), t.val(v.student.level[2])}};
  }

  ParamRefs<S> teacher_params() {
    ParamRefs<S> out;
    teacher_.params("teacher", out);
    return out;
  }
  ParamRefs<S> student_params() {
    ParamRefs<S> out;
    bottleneck_.params("bottleneck", out);
    decoder_.params("decoder", out);
    if (spec_.use_gii) {
      gii1_.params("gii1", out);
      gii2_.params("gii2", out);
    }
    return out;
  }
  ParamRefs<S> expert_params() {
    ParamRefs<S> out;
    expert_.params("expert", out);
    return out;
  }
  // Everything persisted in a checkpoint (expert excluded: it is
  // reconstructed from the shared initialization).
  ParamRefs<S> checkpoint_params() {
    ParamRefs<S> out = teacher_params();
    ParamRefs<S> s = student_params();
    out.insert(out.end(), s.begin(), s.end());
    return out;
  }
  BufferRefs<S> checkpoint_buffers() {
    BufferRefs<S> out;
    teacher_.buffers("teacher", out);
    bottleneck_.buffers("bottleneck", out);
    decoder_.buffers("decoder", out);
    return out;
  }
  BufferRefs<S> expert_buffers() {
    BufferRefs<S> out;
    expert_.buffers("expert", out);
    return out;
  }

  // Training mode: student-side normalization uses batch statistics; the
  // teacher follows the teacher_norm_eval flag; the expert is always eval.
  void set_train_mode() {
    teacher_.set_training(!spec_.teacher_norm_eval);
    bottleneck_.set_training(true);
    decoder_.set_training(true);
    expert_.set_training(false);
  }
  void set_eval_mode() {
    teacher_.set_training(false);
    bottleneck_.set_training(false);
    decoder_.set_training(false);
    expert_.set_training(false);
  }

 private:
  ModelSpec spec_;
  ArchParams arch_;
  Encoder<S> expert_, teacher_;
  Bottleneck<S> bottleneck_;
  Decoder<S> decoder_;
  Gii<S> gii1_, gii2_;
};

}  // namespace ets
