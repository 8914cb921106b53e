#pragma once

// Independent brute-force reference implementations used to freeze expected
// values. Everything here is written as directly as possible from the
// defining formulas (plain loops, no shared code with the library paths they
// check).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ets/tensor.hpp"

namespace oracle {

using ets::Tensor;

// Direct convolution: out[n,co,ho,wo] = b[co] + sum_{ci,ki,kj} w*x.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const S* bias, int stride, int pad) {
  const int N = x.n(), Ci = x.c(), H = x.h(), W = x.w();
  const int Co = w.n(), k = w.h();
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<S> out = Tensor<S>::zeros(N, Co, Ho, Wo);
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double acc = bias ? bias[co] : 0.0;
          for (int ci = 0; ci < Ci; ++ci)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int iy = ho * stride - pad + ki;
                const int ix = wo * stride - pad + kj;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += static_cast<double>(w(co, ci, ki, kj)) * x(n, ci, iy, ix);
              }
          out(n, co, ho, wo) = static_cast<S>(acc);
        }
  return out;
}

// Per-location cosine similarity, straight from dot/(|a||b|) with the same
// epsilon-inside-norm convention as the implementation.
template <typename S>
Tensor<S> cosine_map(const Tensor<S>& a, const Tensor<S>& b, double eps = 1e-8) {
  Tensor<S> out(a.n(), 1, a.h(), a.w());
  for (int n = 0; n < a.n(); ++n)
    for (int y = 0; y < a.h(); ++y)
      for (int x = 0; x < a.w(); ++x) {
        double dot = 0, na = eps, nb = eps;
        for (int c = 0; c < a.c(); ++c) {
          dot += static_cast<double>(a(n, c, y, x)) * b(n, c, y, x);
          na += static_cast<double>(a(n, c, y, x)) * a(n, c, y, x);
          nb += static_cast<double>(b(n, c, y, x)) * b(n, c, y, x);
        }
        out(n, 0, y, x) = static_cast<S>(dot / (std::sqrt(na) * std::sqrt(nb)));
      }
  return out;
}

// Whole-sample flattened cosine.
template <typename S>
double cosine_flat(const Tensor<S>& a, const Tensor<S>& b, int sample, double eps = 1e-8) {
  const Eigen::Index len = a.size() / a.n();
  double dot = 0, na = eps, nb = eps;
  for (Eigen::Index i = 0; i < len; ++i) {
    const double av = a.data()[sample * len + i], bv = b.data()[sample * len + i];
    dot += av * bv;
    na += av * av;
    nb += bv * bv;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Teacher loss by triple loop: per level, mean over (h,w) of
// |(1 - cos) - mask|, normal branch against a zero mask, then batch mean and
// sum over levels/branches. Masks are averaged down per level.
template <typename S>
double teacher_loss(const std::array<Tensor<S>, 3>& f_t_n, const std::array<Tensor<S>, 3>& f_t_a,
                    const std::array<Tensor<S>, 3>& f_e_n, const Tensor<S>& m_gt,
                    double eps = 1e-8) {
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    const Tensor<S> d_n = cosine_map(f_t_n[i], f_e_n[i], eps);
    const Tensor<S> d_a = cosine_map(f_t_a[i], f_e_n[i], eps);
    const int H = f_t_n[i].h(), W = f_t_n[i].w();
    const int fy = m_gt.h() / H, fx = m_gt.w() / W;
    double lvl_n = 0, lvl_a = 0;
    for (int n = 0; n < f_t_n[i].n(); ++n) {
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double mask = 0;
          for (int dy = 0; dy < fy; ++dy)
            for (int dx = 0; dx < fx; ++dx) mask += m_gt(n, 0, y * fy + dy, x * fx + dx);
          mask /= fy * fx;
          lvl_n += std::abs((1.0 - d_n(n, 0, y, x)) - 0.0);
          lvl_a += std::abs((1.0 - d_a(n, 0, y, x)) - mask);
        }
    }
    total += (lvl_n + lvl_a) / (static_cast<double>(f_t_n[i].n()) * H * W);
  }
  return total;
}

// Student loss by loops: flattened cosine of both student branches against
// both normal targets, per level, batch mean.
template <typename S>
double student_loss(const std::array<Tensor<S>, 3>& f_s_n, const std::array<Tensor<S>, 3>& f_s_a,
                    const std::array<Tensor<S>, 3>& f_e_n, const std::array<Tensor<S>, 3>& f_t_n,
                    double eps = 1e-8) {
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    const int N = f_s_n[i].n();
    double lvl = 0;
    for (int n = 0; n < N; ++n) {
      lvl += (1.0 - cosine_flat(f_s_n[i], f_e_n[i], n, eps)) +
             (1.0 - cosine_flat(f_s_a[i], f_e_n[i], n, eps)) +
             (1.0 - cosine_flat(f_s_n[i], f_t_n[i], n, eps)) +
             (1.0 - cosine_flat(f_s_a[i], f_t_n[i], n, eps));
    }
    total += lvl / N;
  }
  return total;
}

// AUROC by pair counting with the half-credit tie rule.
inline double auroc_pairs(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  double wins = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// AP by recomputing precision/recall from scratch at each unique threshold.
inline double ap_threshold_walk(const std::vector<double>& scores,
                                const std::vector<uint8_t>& labels) {
  std::vector<double> uniq = scores;
  std::sort(uniq.begin(), uniq.end(), std::greater<double>());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  int64_t total_pos = 0;
  for (uint8_t l : labels) total_pos += l;
  double ap = 0, prev_recall = 0;
  for (double th : uniq) {
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) {
        if (labels[i])
          ++tp;
        else
          ++fp;
      }
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// PRO by dense recomputation at every threshold of the given grid, with the
// same piecewise-linear integration and constant extension rules.
inline double pro_dense(const std::vector<Tensor<ets::Real>>& maps,
                        const std::vector<Tensor<ets::Real>>& masks,
                        const std::vector<double>& thresholds, double fpr_limit) {
  // Label regions by flood fill (8-connected), per image.
  struct Region {
    size_t img;
    std::vector<int> px;
  };
  std::vector<Region> regions;
  int64_t total_neg = 0;
  std::vector<std::vector<int>> region_id_per_img;
  for (size_t m = 0; m < masks.size(); ++m) {
    const auto& mask = masks[m];
    const int H = mask.h(), W = mask.w();
    std::vector<int> rid(static_cast<size_t>(H) * W, -1);
    for (int p = 0; p < H * W; ++p) {
      if (mask.data()[p] <= 0) {
        ++total_neg;
        continue;
      }
      if (rid[p] >= 0) continue;
      Region reg;
      reg.img = m;
      std::vector<int> stack{p};
      rid[p] = static_cast<int>(regions.size());
      while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        reg.px.push_back(q);
        const int y = q / W, x = q % W;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if ((dy || dx) && ny >= 0 && ny < H && nx >= 0 && nx < W) {
              const int r = ny * W + nx;
              if (mask.data()[r] > 0 && rid[r] < 0) {
                rid[r] = static_cast<int>(regions.size());
                stack.push_back(r);
              }
            }
          }
      }
      regions.push_back(std::move(reg));
    }
    region_id_per_img.push_back(std::move(rid));
  }

  std::vector<std::pair<double, double>> curve;
  for (double th : thresholds) {
    double overlap_sum = 0;
    for (const auto& reg : regions) {
      int hit = 0;
      for (int p : reg.px) hit += maps[reg.img].data()[p] > th;
      overlap_sum += static_cast<double>(hit) / static_cast<double>(reg.px.size());
    }
    int64_t fp = 0;
    for (size_t m = 0; m < maps.size(); ++m)
      for (Eigen::Index p = 0; p < maps[m].size(); ++p)
        if (region_id_per_img[m][static_cast<size_t>(p)] < 0 && maps[m].data()[p] > th) ++fp;
    curve.emplace_back(static_cast<double>(fp) / static_cast<double>(total_neg),
                       overlap_sum / static_cast<double>(regions.size()));
  }
  double area = 0, px = curve.front().first, py = curve.front().second;
  for (size_t i = 1; i < curve.size() && px < fpr_limit; ++i) {
    double cx = curve[i].first, cy = curve[i].second;
    if (cx > fpr_limit) {
      const double t = (fpr_limit - px) / (cx - px);
      cy = py + t * (cy - py);
      cx = fpr_limit;
    }
    area += 0.5 * (py + cy) * (cx - px);
    px = cx;
    py = cy;
  }
  if (px < fpr_limit) area += py * (fpr_limit - px);
  return area / fpr_limit;
}

// Plain per-output-pixel bilinear resampler with half-pixel centers.
template <typename S>
Tensor<S> bilinear(const Tensor<S>& in, int oh, int ow) {
  Tensor<S> out(in.n(), in.c(), oh, ow);
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double sy = (y + 0.5) * in.h() / oh - 0.5;
          double sx = (x + 0.5) * in.w() / ow - 0.5;
          sy = std::clamp(sy, 0.0, static_cast<double>(in.h() - 1));
          sx = std::clamp(sx, 0.0, static_cast<double>(in.w() - 1));
          const int y0 = std::min(static_cast<int>(sy), in.h() - 2 >= 0 ? in.h() - 2 : 0);
          const int x0 = std::min(static_cast<int>(sx), in.w() - 2 >= 0 ? in.w() - 2 : 0);
          const int y1 = std::min(y0 + 1, in.h() - 1), x1 = std::min(x0 + 1, in.w() - 1);
          const double ty = sy - y0, tx = sx - x0;
          out(n, c, y, x) = static_cast<S>(
              (1 - ty) * ((1 - tx) * in(n, c, y0, x0) + tx * in(n, c, y0, x1)) +
              ty * ((1 - tx) * in(n, c, y1, x0) + tx * in(n, c, y1, x1)));
        }
  return out;
}

// Direct 2-D Gaussian convolution (no separability) with edge-including
// reflection.
template <typename S>
Tensor<S> gaussian_direct(const Tensor<S>& in, double sigma, double truncate = 4.0) {
  const int radius = static_cast<int>(truncate * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double ksum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += k[i + radius];
  }
  for (double& v : k) v /= ksum;
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  const int H = in.h(), W = in.w();
  Tensor<S> out(in.n(), in.c(), H, W);
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0;
          for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
              acc += k[dy + radius] * k[dx + radius] *
                     in(n, c, reflect(y + dy, H), reflect(x + dx, W));
          out(n, c, y, x) = static_cast<S>(acc);
        }
  return out;
}

}  // namespace oracle
