#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "ets/image.hpp"
#include "ets/rng.hpp"
#include "ets/tensor.hpp"

namespace ets {

struct SynthesisConfig {
  double beta_min = 0.15, beta_max = 1.0;   // overlay opacity range
  int perlin_min_exp = 0, perlin_max_exp = 5;  // lattice periods 2^k
  double binarize_threshold = 0.5;          // on noise normalized to [0,1]
  bool use_foreground_mask = false;
  double foreground_threshold = 0.5;
  std::string texture_source;               // folder of overlay images
  uint64_t seed = 0;
  int resample_attempts = 8;                // retries before giving up on an empty mask

  void validate() const {
    if (beta_min < 0 || beta_max > 1 || beta_min > beta_max)
      fail("config", "synthesis: beta range must be within [0,1]");
    if (binarize_threshold <= 0 || binarize_threshold >= 1)
      fail("config", "synthesis: binarize_threshold must be in (0,1)");
    if (perlin_min_exp < 0 || perlin_max_exp < perlin_min_exp)
      fail("config", "synthesis: invalid perlin exponent range");
  }
};

// Lattice-gradient Perlin noise with the quintic fade, scaled by sqrt(2) so
// raw values stay within [-1, 1]; zero at integer lattice points. The grid
// must be divisible by the periods.
template <typename S>
Tensor<S> perlin_noise(int height, int width, int period_y, int period_x, Rng& rng) {
  if (height <= 0 || width <= 0) fail("shape", "perlin_noise: non-positive dimensions");
  if (period_y <= 0 || period_x <= 0 || height % period_y || width % period_x)
    fail("shape", "perlin_noise: periods must divide the grid (" + std::to_string(height) + "x" +
                      std::to_string(width) + " vs " + std::to_string(period_y) + "x" +
                      std::to_string(period_x) + ")");
  // Gradient per lattice corner.
  std::vector<double> gx((period_y + 1) * (period_x + 1)), gy(gx.size());
  for (size_t i = 0; i < gx.size(); ++i) {
    const double a = 2.0 * M_PI * rng.uniform();
    gx[i] = std::cos(a);
    gy[i] = std::sin(a);
  }
  const double cell_h = static_cast<double>(height) / period_y;
  const double cell_w = static_cast<double>(width) / period_x;
  auto fade = [](double t) { return t * t * t * (t * (t * 6 - 15) + 10); };
  Tensor<S> out(1, 1, height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = y / cell_h;
    int iy = static_cast<int>(fy);
    if (iy > period_y - 1) iy = period_y - 1;
    const double ty = fy - iy;
    const double uy = fade(ty);
    for (int x = 0; x < width; ++x) {
      const double fx = x / cell_w;
      int ix = static_cast<int>(fx);
      if (ix > period_x - 1) ix = period_x - 1;
      const double tx = fx - ix;
      const double ux = fade(tx);
      auto dot = [&](int cy, int cx) {
        const size_t gi = static_cast<size_t>(cy) * (period_x + 1) + cx;
        return gx[gi] * (tx - (cx - ix)) + gy[gi] * (ty - (cy - iy));
      };
      const double n00 = dot(iy, ix), n01 = dot(iy, ix + 1);
      const double n10 = dot(iy + 1, ix), n11 = dot(iy + 1, ix + 1);
      const double nx0 = n00 + ux * (n01 - n00);
      const double nx1 = n10 + ux * (n11 - n10);
      out(0, 0, y, x) = static_cast<S>(M_SQRT2 * (nx0 + uy * (nx1 - nx0)));
    }
  }
  return out;
}

// Rotate a (1,1,H,W) grid about its center (bilinear, zero fill).
template <typename S>
Tensor<S> rotate_grid(const Tensor<S>& g, double angle_rad) {
  const int H = g.h(), W = g.w();
  Tensor<S> out = Tensor<S>::zeros(1, 1, H, W);
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      // Inverse mapping: rotate the output coordinate back into the source.
      const double dy = y - cy, dx = x - cx;
      const double sx = cx + ca * dx + sa * dy;
      const double sy = cy - sa * dx + ca * dy;
      if (sx < 0 || sy < 0 || sx > W - 1 || sy > H - 1) continue;
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double tx = sx - x0, ty = sy - y0;
      const double v = (1 - ty) * ((1 - tx) * g(0, 0, y0, x0) + tx * g(0, 0, y0, x1)) +
                       ty * ((1 - tx) * g(0, 0, y1, x0) + tx * g(0, 0, y1, x1));
      out(0, 0, y, x) = static_cast<S>(v);
    }
  }
  return out;
}

// Rotate, min-max normalize to [0,1] (constant grids normalize to zero) and
// binarize. Ties resolve negative: strictly-greater comparison.
template <typename S>
Tensor<S> make_mask(const Tensor<S>& noise, double threshold, double rotation_rad) {
  Tensor<S> r = (rotation_rad != 0.0) ? rotate_grid(noise, rotation_rad) : noise;
  const S lo = r.array().minCoeff(), hi = r.array().maxCoeff();
  Tensor<S> out(r.n(), r.c(), r.h(), r.w());
  if (hi > lo) {
    out.array() = (((r.array() - lo) / (hi - lo)) > static_cast<S>(threshold)).template cast<S>();
  } else {
    out.array().setZero();
  }
  return out;
}

struct ForegroundResult {
  Tensor<Real> mask;
  bool fallback = false;  // degenerate or ambiguous input; mask is all ones
};

// Object silhouette by thresholding the grayscale image. The object side is
// the one occupying the smaller share of border pixels; an empty result or a
// border tie falls back to an all-ones mask.
template <typename S>
ForegroundResult foreground_mask_t(const Tensor<S>& img, double threshold) {
  const Tensor<S> gray = to_gray(img);
  const int H = gray.h(), W = gray.w();
  int64_t border_above = 0, border_total = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (y != 0 && y != H - 1 && x != 0 && x != W - 1) continue;
      ++border_total;
      if (gray(0, 0, y, x) > static_cast<S>(threshold)) ++border_above;
    }
  }
  ForegroundResult res;
  res.mask = Tensor<Real>(1, 1, H, W);
  const int64_t border_below = border_total - border_above;
  if (border_above == border_below) {
    res.mask.array().setOnes();
    res.fallback = true;
    return res;
  }
  const bool object_above = border_above < border_below;
  int64_t positives = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const bool above = gray(0, 0, y, x) > static_cast<S>(threshold);
      const Real v = (above == object_above) ? Real(1) : Real(0);
      res.mask(0, 0, y, x) = v;
      positives += v > 0;
    }
  if (positives == 0) {
    res.mask.array().setOnes();
    res.fallback = true;
  }
  return res;
}

inline ForegroundResult foreground_mask(const Tensor<Real>& img, double threshold) {
  return foreground_mask_t(img, threshold);
}

template <typename S>
struct SyntheticSample {
  Tensor<S> anomalous_image;
  Tensor<S> mask;  // (1,1,H,W) in {0,1}
  double beta = 0.0;
  std::string source_texture_id;
};

// I_a = (1-M) .* I_n + (1-beta) (M .* I_n) + beta (M .* I_t), per channel.
template <typename S>
SyntheticSample<S> blend(const Tensor<S>& normal, const Tensor<S>& texture, const Tensor<S>& mask,
                         double beta) {
  if (normal.h() != mask.h() || normal.w() != mask.w() || texture.h() != mask.h() ||
      texture.w() != mask.w())
    fail("shape", "blend: image/texture/mask spatial sizes differ");
  check_same_shape(normal, texture, "blend");
  SyntheticSample<S> s;
  s.beta = beta;
  s.mask = mask;
  s.anomalous_image = normal;
  const Eigen::Index plane = static_cast<Eigen::Index>(normal.h()) * normal.w();
  const S b = static_cast<S>(beta);
  for (int c = 0; c < normal.c(); ++c) {
    for (Eigen::Index p = 0; p < plane; ++p) {
      const S m = mask.data()[p];
      const S in = normal.data()[c * plane + p];
      const S it = texture.data()[c * plane + p];
      s.anomalous_image.data()[c * plane + p] =
          (S(1) - m) * in + (S(1) - b) * (m * in) + b * (m * it);
    }
  }
  return s;
}

// Loaded overlay textures plus the sampling logic of one synthesis call:
// sample periods / rotation / texture / opacity, build the Perlin mask,
// optionally restrict to the foreground, and blend. Retries a few times when
// the mask comes out empty, then returns the image unchanged with an empty
// mask.
class Synthesizer {
 public:
  Synthesizer(const SynthesisConfig& cfg, std::vector<std::pair<std::string, Tensor<Real>>> textures)
      : cfg_(cfg), textures_(std::move(textures)) {
    cfg_.validate();
    if (textures_.empty()) fail("config", "synthesis: no textures available");
  }

  const SynthesisConfig& config() const { return cfg_; }

  SyntheticSample<Real> synthesize(const Tensor<Real>& normal, Rng& rng) const {
    const int H = normal.h(), W = normal.w();
    Tensor<Real> fg;
    if (cfg_.use_foreground_mask) fg = foreground_mask(normal, cfg_.foreground_threshold).mask;
    for (int attempt = 0; attempt < cfg_.resample_attempts; ++attempt) {
      const int ky = pick_exp(H, rng);
      const int kx = pick_exp(W, rng);
      Tensor<Real> noise = perlin_noise<Real>(H, W, 1 << ky, 1 << kx, rng);
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      Tensor<Real> mask = make_mask(noise, cfg_.binarize_threshold, angle);
      if (cfg_.use_foreground_mask) mask.array() *= fg.array();
      const size_t tex_idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(textures_.size()) - 1));
      const double beta = rng.uniform(cfg_.beta_min, cfg_.beta_max);
      if (mask.array().sum() <= Real(0)) continue;
      const Tensor<Real>& tex = texture_resized(tex_idx, H, W);
      SyntheticSample<Real> s = blend(normal, tex, mask, beta);
      s.source_texture_id = textures_[tex_idx].first;
      return s;
    }
    SyntheticSample<Real> s;
    s.anomalous_image = normal;
    s.mask = Tensor<Real>::zeros(1, 1, H, W);
    return s;
  }

 private:
  int pick_exp(int size, Rng& rng) const {
    // Periods must tile the grid; restrict the configured range accordingly.
    std::vector<int> valid;
    for (int k = cfg_.perlin_min_exp; k <= cfg_.perlin_max_exp; ++k)
      if (size % (1 << k) == 0) valid.push_back(k);
    if (valid.empty())
      fail("config", "synthesis: no configured perlin period divides size " + std::to_string(size));
    return valid[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(valid.size()) - 1))];
  }

  const Tensor<Real>& texture_resized(size_t idx, int h, int w) const {
    const Tensor<Real>& tex = textures_[idx].second;
    if (tex.h() == h && tex.w() == w) return tex;
    auto& slot = resized_cache_[idx];
    if (slot.h() != h || slot.w() != w) slot = bilinear_resize(tex, h, w);
    return slot;
  }

  SynthesisConfig cfg_;
  std::vector<std::pair<std::string, Tensor<Real>>> textures_;
  mutable std::unordered_map<size_t, Tensor<Real>> resized_cache_;
};

// Folder-backed construction (declared here, implemented with the image
// codecs): loads every decodable image in the folder, lexicographic order.
Synthesizer make_synthesizer(const SynthesisConfig& cfg);

// Spec-shaped convenience wrapper around a prebuilt Synthesizer.
inline SyntheticSample<Real> synthesize(const Tensor<Real>& normal, const Synthesizer& synth,
                                        Rng& rng) {
  return synth.synthesize(normal, rng);
}

}  // namespace ets
