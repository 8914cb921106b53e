#pragma once

#include <array>

#include "ets/backbone.hpp"
#include "ets/ops.hpp"

namespace ets {

// How the full-resolution ground-truth mask is brought to a feature level's
// size. Area averaging yields a soft target in [0,1]; max pooling preserves
// small anomalies at the cost of inflating them.
enum class MaskPool { kAverage, kMax };

// Downsample an (N,1,H,W) mask to (h, w); the level size must divide the
// mask size.
template <typename S>
Tensor<S> downsample_mask(const Tensor<S>& mask, int h, int w,
                          MaskPool mode = MaskPool::kAverage) {
  if (mask.c() != 1) fail("shape", "downsample_mask: mask must have one channel");
  if (h <= 0 || w <= 0 || mask.h() % h || mask.w() % w)
    fail("shape", "downsample_mask: level size " + std::to_string(h) + "x" + std::to_string(w) +
                      " does not divide mask size " + mask.shape_str());
  const int fy = mask.h() / h, fx = mask.w() / w;
  Tensor<S> out(mask.n(), 1, h, w);
  for (int n = 0; n < mask.n(); ++n) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        S acc = (mode == MaskPool::kAverage) ? S(0) : std::numeric_limits<S>::lowest();
        for (int i = 0; i < fy; ++i) {
          for (int j = 0; j < fx; ++j) {
            const S v = mask(n, 0, y * fy + i, x * fx + j);
            if (mode == MaskPool::kAverage)
              acc += v;
            else if (v > acc)
              acc = v;
          }
        }
        out(n, 0, y, x) = (mode == MaskPool::kAverage) ? acc / static_cast<S>(fy * fx) : acc;
      }
    }
  }
  return out;
}

// Reshape one sample's (C,H,W) feature into a single row vector; cosine over
// the result is what the student loss uses. The reshape is an isometry, so
// this is just a shape change over the same memory order.
template <typename S>
Tensor<S> flatten_feature(const Tensor<S>& f) {
  Tensor<S> out(f.n(), static_cast<int>(f.size() / f.n()), 1, 1);
  out.array() = f.array();
  return out;
}

// Per-location cosine distance 1 - cos(A,B) over channels: -> (N,1,H,W).
// Values lie in [0,2]; exactly 0 for bitwise-identical inputs.
template <typename S>
Tensor<S> cosine_distance_map(const Tensor<S>& a, const Tensor<S>& b, S eps = S(1e-8)) {
  Tensor<S> cos = ops::cosine_map_plain(a, b, eps);
  cos.array() = S(1) - cos.array();
  return cos;
}

// Tape version of the distance map.
template <typename S>
Var<S> cosine_distance_level(Tape<S>& t, Var<S> a, Var<S> b, S eps = S(1e-8)) {
  return ops::affine(t, ops::cosine_map(t, a, b, eps), S(-1), S(1));
}

template <typename S>
struct TeacherLossVars {
  Var<S> normal;     // L over the normal branch (all-zero mask target)
  Var<S> anomalous;  // L over the synthetic-anomalous branch
  Var<S> total;
};

// Teacher sensitivity loss: per level, the mean L1 gap between the
// teacher-vs-expert cosine distance map and the target mask (zero for the
// normal branch, the downsampled synthetic mask for the anomalous branch),
// summed over the three levels and both branches, averaged over the batch.
template <typename S>
TeacherLossVars<S> teacher_loss(Tape<S>& t, const PyramidVars<S>& f_t_n,
                                const PyramidVars<S>& f_t_a, const PyramidVars<S>& f_e_n,
                                const Tensor<S>& m_gt, MaskPool pool = MaskPool::kAverage,
                                S eps = S(1e-8)) {
  TeacherLossVars<S> out;
  for (int i = 0; i < 3; ++i) {
    Var<S> d_n = cosine_distance_level(t, f_t_n.level[i], f_e_n.level[i], eps);
    Var<S> term_n = ops::mean_all(t, ops::abs_(t, d_n));
    out.normal = out.normal.valid() ? ops::add(t, out.normal, term_n) : term_n;

    const Tensor<S>& lvl = t.val(f_t_a.level[i]);
    Var<S> mask_i = t.value(downsample_mask(m_gt, lvl.h(), lvl.w(), pool));
    Var<S> d_a = cosine_distance_level(t, f_t_a.level[i], f_e_n.level[i], eps);
    Var<S> term_a = ops::mean_all(t, ops::abs_(t, ops::sub(t, d_a, mask_i)));
    out.anomalous = out.anomalous.valid() ? ops::add(t, out.anomalous, term_a) : term_a;
  }
  out.total = ops::add(t, out.normal, out.anomalous);
  return out;
}

// Student denoising loss: per level, the flattened-vector cosine distance of
// the student's normal and anomalous reconstructions to the normal features
// of both the expert and the teacher (targets detached), summed over levels
// and targets, averaged over the batch.
template <typename S>
Var<S> student_loss(Tape<S>& t, const PyramidVars<S>& f_s_n, const PyramidVars<S>& f_s_a,
                    const PyramidVars<S>& f_e_n, const PyramidVars<S>& f_t_n, S eps = S(1e-8)) {
  Var<S> total;
  for (int i = 0; i < 3; ++i) {
    const std::array<Var<S>, 2> targets = {ops::detach(t, f_e_n.level[i]),
                                           ops::detach(t, f_t_n.level[i])};
    for (Var<S> target : targets) {
      for (Var<S> source : {f_s_n.level[i], f_s_a.level[i]}) {
        Var<S> dist = ops::affine(t, ops::cosine_flat(t, source, target, eps), S(-1), S(1));
        Var<S> term = ops::mean_all(t, dist);
        total = total.valid() ? ops::add(t, total, term) : term;
      }
    }
  }
  return total;
}

}  // namespace ets
