#pragma once

#include <cmath>
#include <vector>

#include "ets/tensor.hpp"

namespace ets {

// Half-pixel-center bilinear sampling tables: for each output index, the two
// source indices and the weight of the second one.
struct BilinearAxis {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> t;

  static BilinearAxis build(int in_size, int out_size) {
    BilinearAxis a;
    a.lo.resize(out_size);
    a.hi.resize(out_size);
    a.t.resize(out_size);
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      if (src > in_size - 1) src = in_size - 1;
      int lo = static_cast<int>(std::floor(src));
      if (lo > in_size - 2) lo = in_size - 2;
      if (lo < 0) lo = 0;
      a.lo[o] = lo;
      a.hi[o] = (in_size == 1) ? 0 : lo + 1;
      a.t[o] = (in_size == 1) ? 0.0 : src - lo;
    }
    return a;
  }
};

// Bilinear resize of every (n, c) plane to (oh, ow).
template <typename S>
Tensor<S> bilinear_resize(const Tensor<S>& in, int oh, int ow) {
  if (oh <= 0 || ow <= 0) fail("shape", "bilinear_resize: non-positive output size");
  if (in.h() == oh && in.w() == ow) return in;
  const BilinearAxis ay = BilinearAxis::build(in.h(), oh);
  const BilinearAxis ax = BilinearAxis::build(in.w(), ow);
  Tensor<S> out(in.n(), in.c(), oh, ow);
  const int planes = in.n() * in.c();
  const Eigen::Index ips = static_cast<Eigen::Index>(in.h()) * in.w();
  const Eigen::Index ops = static_cast<Eigen::Index>(oh) * ow;
  for (int p = 0; p < planes; ++p) {
    const S* src = in.data() + p * ips;
    S* dst = out.data() + p * ops;
    for (int y = 0; y < oh; ++y) {
      const S* r0 = src + static_cast<Eigen::Index>(ay.lo[y]) * in.w();
      const S* r1 = src + static_cast<Eigen::Index>(ay.hi[y]) * in.w();
      const double fy = ay.t[y];
      for (int x = 0; x < ow; ++x) {
        const double fx = ax.t[x];
        const double v = (1 - fy) * ((1 - fx) * r0[ax.lo[x]] + fx * r0[ax.hi[x]]) +
                         fy * ((1 - fx) * r1[ax.lo[x]] + fx * r1[ax.hi[x]]);
        dst[static_cast<Eigen::Index>(y) * ow + x] = static_cast<S>(v);
      }
    }
  }
  return out;
}

}  // namespace ets
