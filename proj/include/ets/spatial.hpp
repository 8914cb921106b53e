#pragma once

#include <limits>
#include <vector>

#include "ets/interp.hpp"
#include "ets/tape.hpp"

// Convolution, normalization, pooling and resampling ops. Convolutions are
// im2col + Eigen GEMM; the patch buffer is rebuilt in backward instead of
// being captured, trading a little compute for memory.
namespace ets::ops {

namespace detail {

template <typename S>
void im2col(const S* src, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
            S* cols) {
  const int K2 = k * k;
  for (int p = 0; p < Ho * Wo; ++p) {
    const int ho = p / Wo, wo = p % Wo;
    const int y0 = ho * stride - pad, x0 = wo * stride - pad;
    S* col = cols + static_cast<Eigen::Index>(p) * C * K2;
    for (int ci = 0; ci < C; ++ci) {
      const S* plane = src + static_cast<Eigen::Index>(ci) * H * W;
      for (int ki = 0; ki < k; ++ki) {
        const int iy = y0 + ki;
        if (iy < 0 || iy >= H) {
          for (int kj = 0; kj < k; ++kj) *col++ = S(0);
          continue;
        }
        const S* row = plane + static_cast<Eigen::Index>(iy) * W;
        for (int kj = 0; kj < k; ++kj) {
          const int ix = x0 + kj;
          *col++ = (ix >= 0 && ix < W) ? row[ix] : S(0);
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* cols, int C, int H, int W, int k, int stride, int pad, int Ho, int Wo,
                S* dst) {
  const int K2 = k * k;
  for (int p = 0; p < Ho * Wo; ++p) {
    const int ho = p / Wo, wo = p % Wo;
    const int y0 = ho * stride - pad, x0 = wo * stride - pad;
    const S* col = cols + static_cast<Eigen::Index>(p) * C * K2;
    for (int ci = 0; ci < C; ++ci) {
      S* plane = dst + static_cast<Eigen::Index>(ci) * H * W;
      for (int ki = 0; ki < k; ++ki) {
        const int iy = y0 + ki;
        if (iy < 0 || iy >= H) {
          col += k;
          continue;
        }
        S* row = plane + static_cast<Eigen::Index>(iy) * W;
        for (int kj = 0; kj < k; ++kj) {
          const int ix = x0 + kj;
          if (ix >= 0 && ix < W) row[ix] += *col;
          ++col;
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution with square kernel. Weight layout (Co, Ci, k, k); optional
// bias (1, Co, 1, 1) is added when `b.valid()`.
template <typename S>
Var<S> conv2d(Tape<S>& t, Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  const Tensor<S>&X = t.val(x), &Wt = t.val(w);
  const int N = X.n(), Ci = X.c(), H = X.h(), Wd = X.w();
  const int Co = Wt.n(), k = Wt.h();
  if (Wt.c() != Ci)
    fail("shape", "conv2d: weight expects " + std::to_string(Wt.c()) + " input channels, got " +
                      std::to_string(Ci));
  if (Wt.w() != k) fail("shape", "conv2d: only square kernels supported");
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (Wd + 2 * pad - k) / stride + 1;
  if (Ho <= 0 || Wo <= 0) fail("shape", "conv2d: output would be empty for input " + X.shape_str());
  const Eigen::Index ckk = static_cast<Eigen::Index>(Ci) * k * k;
  const Eigen::Index opix = static_cast<Eigen::Index>(Ho) * Wo;

  Tensor<S> out(N, Co, Ho, Wo);
  {
    std::vector<S> cols(ckk * opix);
    ConstMatMap<S> K(Wt.data(), ckk, Co);
    for (int n = 0; n < N; ++n) {
      detail::im2col(X.data() + static_cast<Eigen::Index>(n) * Ci * H * Wd, Ci, H, Wd, k, stride,
                     pad, Ho, Wo, cols.data());
      ConstMatMap<S> C(cols.data(), ckk, opix);
      MatMap<S> O(out.data() + static_cast<Eigen::Index>(n) * Co * opix, opix, Co);
      O.noalias() = C.transpose() * K;
      if (b.valid()) {
        const S* bias = t.val(b).data();
        for (int co = 0; co < Co; ++co) O.col(co).array() += bias[co];
      }
    }
  }

  std::vector<Var<S>> parents{x, w};
  if (b.valid()) parents.push_back(b);
  return t.make(std::move(out), parents,
                [x, w, b, N, Ci, H, Wd, Co, k, stride, pad, Ho, Wo, ckk,
                 opix](Tape<S>& t, Var<S> self) {
    const Tensor<S>& G = t.grad(self);
    const Tensor<S>&X = t.val(x), &Wt = t.val(w);
    const bool wx = t.requires_grad(x), ww = t.requires_grad(w);
    const bool wb = b.valid() && t.requires_grad(b);
    std::vector<S> cols((wx || ww) ? ckk * opix : 0);
    std::vector<S> dcols(wx ? ckk * opix : 0);
    ConstMatMap<S> K(Wt.data(), ckk, Co);
    for (int n = 0; n < N; ++n) {
      ConstMatMap<S> Gm(G.data() + static_cast<Eigen::Index>(n) * Co * opix, opix, Co);
      if (ww || wx)
        detail::im2col(X.data() + static_cast<Eigen::Index>(n) * Ci * H * Wd, Ci, H, Wd, k, stride,
                       pad, Ho, Wo, cols.data());
      if (ww) {
        ConstMatMap<S> C(cols.data(), ckk, opix);
        MatMap<S> dW(t.grad(w).data(), ckk, Co);
        dW.noalias() += C * Gm;
      }
      if (wx) {
        MatMap<S> dC(dcols.data(), ckk, opix);
        dC.noalias() = K * Gm.transpose();
        detail::col2im_add(dcols.data(), Ci, H, Wd, k, stride, pad, Ho, Wo,
                           t.grad(x).data() + static_cast<Eigen::Index>(n) * Ci * H * Wd);
      }
      if (wb) {
        S* db = t.grad(b).data();
        for (int co = 0; co < Co; ++co) db[co] += Gm.col(co).sum();
      }
    }
  });
}

// Batch normalization over (N, H, W) per channel. gamma/beta are (1,C,1,1).
// In training mode batch statistics are used and running statistics (owned
// by the caller, not on the tape) are updated in place; in eval mode the
// running statistics are used.
template <typename S>
Var<S> batchnorm(Tape<S>& t, Var<S> x, Var<S> gamma, Var<S> beta, Tensor<S>* running_mean,
                 Tensor<S>* running_var, bool training, S momentum = S(0.1), S eps = S(1e-5)) {
  const Tensor<S>& X = t.val(x);
  const int N = X.n(), C = X.c();
  const Eigen::Index plane = static_cast<Eigen::Index>(X.h()) * X.w();
  const Eigen::Index m = static_cast<Eigen::Index>(N) * plane;
  if (t.val(gamma).size() != C || t.val(beta).size() != C)
    fail("shape", "batchnorm: gamma/beta must have C elements");

  Tensor<S> mean(1, C, 1, 1), istd(1, C, 1, 1);
  using CMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
  if (training) {
    for (int c = 0; c < C; ++c) {
      S sum = S(0), sq = S(0);
      for (int n = 0; n < N; ++n) {
        CMap seg(X.data() + (static_cast<Eigen::Index>(n) * C + c) * plane, plane);
        sum += seg.sum();
        sq += seg.square().sum();
      }
      const S mu = sum / static_cast<S>(m);
      S var = sq / static_cast<S>(m) - mu * mu;
      if (var < S(0)) var = S(0);
      mean.data()[c] = mu;
      istd.data()[c] = S(1) / std::sqrt(var + eps);
      if (running_mean && running_var) {
        const S unbiased = (m > 1) ? var * static_cast<S>(m) / static_cast<S>(m - 1) : var;
        running_mean->data()[c] = (S(1) - momentum) * running_mean->data()[c] + momentum * mu;
        running_var->data()[c] = (S(1) - momentum) * running_var->data()[c] + momentum * unbiased;
      }
    }
  } else {
    if (!running_mean || !running_var) fail("shape", "batchnorm: eval mode needs running stats");
    for (int c = 0; c < C; ++c) {
      mean.data()[c] = running_mean->data()[c];
      istd.data()[c] = S(1) / std::sqrt(running_var->data()[c] + eps);
    }
  }

  Tensor<S> out(N, C, X.h(), X.w());
  const S* gv = t.val(gamma).data();
  const S* bv = t.val(beta).data();
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Eigen::Index off = (static_cast<Eigen::Index>(n) * C + c) * plane;
      CMap seg(X.data() + off, plane);
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> o(out.data() + off, plane);
      o = (seg - mean.data()[c]) * istd.data()[c] * gv[c] + bv[c];
    }
  }

  return t.make(std::move(out), {x, gamma, beta},
                [x, gamma, beta, N, C, plane, m, mean, istd, training](Tape<S>& t, Var<S> self) {
    const Tensor<S>& G = t.grad(self);
    const Tensor<S>& X = t.val(x);
    const S* gv = t.val(gamma).data();
    using CMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
    using Map = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
    const bool wx = t.requires_grad(x);
    const bool wg = t.requires_grad(gamma), wb = t.requires_grad(beta);
    for (int c = 0; c < C; ++c) {
      const S mu = mean.data()[c], is = istd.data()[c];
      S s1 = S(0), s2 = S(0);
      for (int n = 0; n < N; ++n) {
        const Eigen::Index off = (static_cast<Eigen::Index>(n) * C + c) * plane;
        CMap g(G.data() + off, plane);
        CMap xx(X.data() + off, plane);
        s1 += g.sum();
        s2 += (g * (xx - mu) * is).sum();
      }
      if (wg) t.grad(gamma).data()[c] += s2;
      if (wb) t.grad(beta).data()[c] += s1;
      if (wx) {
        const S k1 = s1 / static_cast<S>(m), k2 = s2 / static_cast<S>(m);
        for (int n = 0; n < N; ++n) {
          const Eigen::Index off = (static_cast<Eigen::Index>(n) * C + c) * plane;
          CMap g(G.data() + off, plane);
          CMap xx(X.data() + off, plane);
          Map gx(t.grad(x).data() + off, plane);
          if (training) {
            gx += gv[c] * is * (g - k1 - (xx - mu) * is * k2);
          } else {
            gx += gv[c] * is * g;
          }
        }
      }
    }
  });
}

// Max pooling with square window; ties resolve to the first (scan-order)
// maximum so backward is deterministic.
template <typename S>
Var<S> maxpool(Tape<S>& t, Var<S> x, int k, int stride, int pad) {
  const Tensor<S>& X = t.val(x);
  const int N = X.n(), C = X.c(), H = X.h(), W = X.w();
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  if (Ho <= 0 || Wo <= 0) fail("shape", "maxpool: output would be empty");
  Tensor<S> out(N, C, Ho, Wo);
  const Eigen::Index planes = static_cast<Eigen::Index>(N) * C;
  std::vector<int32_t> arg(planes * Ho * Wo);
  for (Eigen::Index pc = 0; pc < planes; ++pc) {
    const S* src = X.data() + pc * H * W;
    S* dst = out.data() + pc * Ho * Wo;
    int32_t* am = arg.data() + pc * Ho * Wo;
    for (int ho = 0; ho < Ho; ++ho) {
      for (int wo = 0; wo < Wo; ++wo) {
        const int y0 = ho * stride - pad, x0 = wo * stride - pad;
        S best = std::numeric_limits<S>::lowest();
        int32_t bi = -1;
        for (int ki = 0; ki < k; ++ki) {
          const int iy = y0 + ki;
          if (iy < 0 || iy >= H) continue;
          for (int kj = 0; kj < k; ++kj) {
            const int ix = x0 + kj;
            if (ix < 0 || ix >= W) continue;
            const S v = src[iy * W + ix];
            if (v > best) {
              best = v;
              bi = iy * W + ix;
            }
          }
        }
        dst[ho * Wo + wo] = best;
        am[ho * Wo + wo] = bi;
      }
    }
  }
  return t.make(std::move(out), {x},
                [x, planes, H, W, Ho, Wo, arg = std::move(arg)](Tape<S>& t, Var<S> self) {
    if (!t.requires_grad(x)) return;
    const Tensor<S>& G = t.grad(self);
    for (Eigen::Index pc = 0; pc < planes; ++pc) {
      const S* g = G.data() + pc * Ho * Wo;
      S* gx = t.grad(x).data() + pc * H * W;
      const int32_t* am = arg.data() + pc * Ho * Wo;
      for (int i = 0; i < Ho * Wo; ++i)
        if (am[i] >= 0) gx[am[i]] += g[i];
    }
  });
}

// 2x2 average pooling with stride 2 (spatial sizes must be even).
template <typename S>
Var<S> avgpool2(Tape<S>& t, Var<S> x) {
  const Tensor<S>& X = t.val(x);
  const int H = X.h(), W = X.w();
  if (H % 2 || W % 2) fail("shape", "avgpool2: spatial size must be even, got " + X.shape_str());
  const int Ho = H / 2, Wo = W / 2;
  const Eigen::Index planes = static_cast<Eigen::Index>(X.n()) * X.c();
  Tensor<S> out(X.n(), X.c(), Ho, Wo);
  for (Eigen::Index pc = 0; pc < planes; ++pc) {
    const S* src = X.data() + pc * H * W;
    S* dst = out.data() + pc * Ho * Wo;
    for (int y = 0; y < Ho; ++y)
      for (int x2 = 0; x2 < Wo; ++x2)
        dst[y * Wo + x2] = (src[(2 * y) * W + 2 * x2] + src[(2 * y) * W + 2 * x2 + 1] +
                            src[(2 * y + 1) * W + 2 * x2] + src[(2 * y + 1) * W + 2 * x2 + 1]) /
                           S(4);
  }
  return t.make(std::move(out), {x}, [x, planes, H, W, Ho, Wo](Tape<S>& t, Var<S> self) {
    if (!t.requires_grad(x)) return;
    const Tensor<S>& G = t.grad(self);
    for (Eigen::Index pc = 0; pc < planes; ++pc) {
      const S* g = G.data() + pc * Ho * Wo;
      S* gx = t.grad(x).data() + pc * H * W;
      for (int y = 0; y < Ho; ++y)
        for (int x2 = 0; x2 < Wo; ++x2) {
          const S q = g[y * Wo + x2] / S(4);
          gx[(2 * y) * W + 2 * x2] += q;
          gx[(2 * y) * W + 2 * x2 + 1] += q;
          gx[(2 * y + 1) * W + 2 * x2] += q;
          gx[(2 * y + 1) * W + 2 * x2 + 1] += q;
        }
    }
  });
}

// Bilinear resize to (oh, ow), half-pixel centers (same tables as the plain
// image resizer).
template <typename S>
Var<S> upsample_bilinear(Tape<S>& t, Var<S> x, int oh, int ow) {
  const Tensor<S>& X = t.val(x);
  Tensor<S> out = bilinear_resize(X, oh, ow);
  const int ih = X.h(), iw = X.w();
  if (ih == oh && iw == ow) {
    // Identity: still create a pass-through node.
    return t.make(std::move(out), {x}, [x](Tape<S>& t, Var<S> self) {
      if (t.requires_grad(x)) t.grad(x).array() += t.grad(self).array();
    });
  }
  const BilinearAxis ay = BilinearAxis::build(ih, oh);
  const BilinearAxis ax = BilinearAxis::build(iw, ow);
  const Eigen::Index planes = static_cast<Eigen::Index>(X.n()) * X.c();
  return t.make(std::move(out), {x},
                [x, planes, ih, iw, oh, ow, ay, ax](Tape<S>& t, Var<S> self) {
    if (!t.requires_grad(x)) return;
    const Tensor<S>& G = t.grad(self);
    for (Eigen::Index pc = 0; pc < planes; ++pc) {
      const S* g = G.data() + pc * oh * ow;
      S* gx = t.grad(x).data() + pc * ih * iw;
      for (int y = 0; y < oh; ++y) {
        const double fy = ay.t[y];
        for (int x2 = 0; x2 < ow; ++x2) {
          const double fx = ax.t[x2];
          const S gv = g[y * ow + x2];
          gx[ay.lo[y] * iw + ax.lo[x2]] += static_cast<S>((1 - fy) * (1 - fx)) * gv;
          gx[ay.lo[y] * iw + ax.hi[x2]] += static_cast<S>((1 - fy) * fx) * gv;
          gx[ay.hi[y] * iw + ax.lo[x2]] += static_cast<S>(fy * (1 - fx)) * gv;
          gx[ay.hi[y] * iw + ax.hi[x2]] += static_cast<S>(fy * fx) * gv;
        }
      }
    }
  });
}

}  // namespace ets::ops
