#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ets/backbone.hpp"
#include "ets/data.hpp"
#include "ets/losses.hpp"
#include "ets/metrics.hpp"

namespace ets {

// Normalized Gaussian taps, truncated at `truncate` standard deviations.
inline std::vector<double> gaussian_kernel(double sigma, double truncate = 4.0) {
  const int radius = static_cast<int>(truncate * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian smoothing with symmetric (edge-including) reflection,
// which keeps constants exact and preserves total mass.
template <typename S>
Tensor<S> gaussian_smooth(const Tensor<S>& in, double sigma, double truncate = 4.0) {
  if (sigma <= 0) return in;
  const std::vector<double> k = gaussian_kernel(sigma, truncate);
  const int radius = static_cast<int>(k.size() / 2);
  const int H = in.h(), W = in.w();
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  Tensor<S> tmp(in.n(), in.c(), H, W), out(in.n(), in.c(), H, W);
  const int planes = in.n() * in.c();
  const Eigen::Index ps = static_cast<Eigen::Index>(H) * W;
  for (int pc = 0; pc < planes; ++pc) {
    const S* src = in.data() + pc * ps;
    S* mid = tmp.data() + pc * ps;
    // Horizontal pass.
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j)
          acc += k[j + radius] * src[y * W + reflect(x + j, W)];
        mid[y * W + x] = static_cast<S>(acc);
      }
    }
    // Vertical pass.
    S* dst = out.data() + pc * ps;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j)
          acc += k[j + radius] * mid[reflect(y + j, H) * W + x];
        dst[y * W + x] = static_cast<S>(acc);
      }
    }
  }
  return out;
}

template <typename S>
struct AnomalyMapResult {
  Tensor<S> map;  // (1,1,out,out)
  S image_score = S(0);
};

// Per-level 1 - cosine between teacher and student features, upsampled to
// out_size, summed over the three levels and Gaussian-smoothed; the image
// score is the maximum of the map.
template <typename S>
AnomalyMapResult<S> anomaly_map(const FeaturePyramid<S>& teacher, const FeaturePyramid<S>& student,
                                int out_size, double sigma = 4.0, S eps = S(1e-8)) {
  AnomalyMapResult<S> res;
  res.map = Tensor<S>::zeros(1, 1, out_size, out_size);
  for (int i = 0; i < 3; ++i) {
    check_same_shape(teacher[i], student[i], "anomaly_map");
    if (teacher[i].n() != 1) fail("shape", "anomaly_map: expects single-image pyramids");
    Tensor<S> d = cosine_distance_map(teacher[i], student[i], eps);
    Tensor<S> up = bilinear_resize(d, out_size, out_size);
    res.map.array() += up.array();
  }
  res.map = gaussian_smooth(res.map, sigma);
  res.image_score = res.map.array().maxCoeff();
  return res;
}

struct MetricsReport {
  double i_auc = 0, i_ap = 0, p_auc = 0, p_ap = 0, p_pro = 0;
  int n_images = 0;
  int64_t n_pixels = 0;
  int n_gt_regions = 0;
};

struct EvalOptions {
  double sigma = 4.0;
  double pro_fpr_limit = 0.3;
  int pro_max_thresholds = 5000;
  std::string heatmap_dir;  // when set, one 8-bit PNG + range sidecar per image
};

}  // namespace ets
