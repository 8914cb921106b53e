#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ets/tape.hpp"

// Pointwise, reduction and similarity operations on the autodiff tape.
// Convolution/pooling/normalization/resampling live in spatial.hpp.
namespace ets::ops {

template <typename S>
Var<S> add(Tape<S>& t, Var<S> a, Var<S> b) {
  const Tensor<S>&A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "add");
  Tensor<S> out = A;
  out.array() += B.array();
  return t.make(std::move(out), {a, b}, [a, b](Tape<S>& t, Var<S> self) {
    const auto& g = t.grad(self).array();
    if (t.requires_grad(a)) t.grad(a).array() += g;
    if (t.requires_grad(b)) t.grad(b).array() += g;
  });
}

template <typename S>
Var<S> sub(Tape<S>& t, Var<S> a, Var<S> b) {
  const Tensor<S>&A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "sub");
  Tensor<S> out = A;
  out.array() -= B.array();
  return t.make(std::move(out), {a, b}, [a, b](Tape<S>& t, Var<S> self) {
    const auto& g = t.grad(self).array();
    if (t.requires_grad(a)) t.grad(a).array() += g;
    if (t.requires_grad(b)) t.grad(b).array() -= g;
  });
}

template <typename S>
Var<S> mul(Tape<S>& t, Var<S> a, Var<S> b) {
  const Tensor<S>&A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "mul");
  Tensor<S> out = A;
  out.array() *= B.array();
  return t.make(std::move(out), {a, b}, [a, b](Tape<S>& t, Var<S> self) {
    const auto& g = t.grad(self).array();
    if (t.requires_grad(a)) t.grad(a).array() += g * t.val(b).array();
    if (t.requires_grad(b)) t.grad(b).array() += g * t.val(a).array();
  });
}

// alpha * x + beta, elementwise.
template <typename S>
Var<S> affine(Tape<S>& t, Var<S> x, S alpha, S beta) {
  Tensor<S> out = t.val(x);
  out.array() = alpha * out.array() + beta;
  return t.make(std::move(out), {x}, [x, alpha](Tape<S>& t, Var<S> self) {
    if (t.requires_grad(x)) t.grad(x).array() += alpha * t.grad(self).array();
  });
}

template <typename S>
Var<S> relu(Tape<S>& t, Var<S> x) {
  Tensor<S> out = t.val(x);
  out.array() = out.array().max(S(0));
  return t.make(std::move(out), {x}, [x](Tape<S>& t, Var<S> self) {
    if (!t.requires_grad(x)) return;
    t.grad(x).array() += t.grad(self).array() * (t.val(x).array() > S(0)).template cast<S>();
  });
}

template <typename S>
Var<S> abs_(Tape<S>& t, Var<S> x) {
  Tensor<S> out = t.val(x);
  out.array() = out.array().abs();
  return t.make(std::move(out), {x}, [x](Tape<S>& t, Var<S> self) {
    if (!t.requires_grad(x)) return;
    t.grad(x).array() += t.grad(self).array() * t.val(x).array().sign();
  });
}

// Mean over every element -> (1,1,1,1).
template <typename S>
Var<S> mean_all(Tape<S>& t, Var<S> x) {
  const Tensor<S>& X = t.val(x);
  Tensor<S> out = Tensor<S>::scalar(X.array().mean());
  const S inv = S(1) / static_cast<S>(X.size());
  return t.make(std::move(out), {x}, [x, inv](Tape<S>& t, Var<S> self) {
    if (t.requires_grad(x)) t.grad(x).array() += inv * t.grad(self).data()[0];
  });
}

// Stop-gradient: re-enters the tape as a constant.
template <typename S>
Var<S> detach(Tape<S>& t, Var<S> x) {
  return t.value(t.val(x));
}

// Channel concatenation of two tensors with equal (N, H, W).
template <typename S>
Var<S> concat_c(Tape<S>& t, Var<S> a, Var<S> b) {
  const Tensor<S>&A = t.val(a), &B = t.val(b);
  if (A.n() != B.n() || A.h() != B.h() || A.w() != B.w())
    fail("shape", "concat_c: incompatible shapes " + A.shape_str() + " vs " + B.shape_str());
  const int N = A.n(), Ca = A.c(), Cb = B.c(), H = A.h(), W = A.w();
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  Tensor<S> out(N, Ca + Cb, H, W);
  for (int n = 0; n < N; ++n) {
    std::copy(A.data() + n * Ca * plane, A.data() + (n + 1) * Ca * plane,
              out.data() + static_cast<Eigen::Index>(n) * (Ca + Cb) * plane);
    std::copy(B.data() + n * Cb * plane, B.data() + (n + 1) * Cb * plane,
              out.data() + (static_cast<Eigen::Index>(n) * (Ca + Cb) + Ca) * plane);
  }
  return t.make(std::move(out), {a, b}, [a, b, N, Ca, Cb, plane](Tape<S>& t, Var<S> self) {
    const Tensor<S>& g = t.grad(self);
    for (int n = 0; n < N; ++n) {
      const S* gn = g.data() + static_cast<Eigen::Index>(n) * (Ca + Cb) * plane;
      if (t.requires_grad(a)) {
        S* ga = t.grad(a).data() + static_cast<Eigen::Index>(n) * Ca * plane;
        for (Eigen::Index i = 0; i < Ca * plane; ++i) ga[i] += gn[i];
      }
      if (t.requires_grad(b)) {
        S* gb = t.grad(b).data() + static_cast<Eigen::Index>(n) * Cb * plane;
        for (Eigen::Index i = 0; i < Cb * plane; ++i) gb[i] += gn[Ca * plane + i];
      }
    }
  });
}

// Multiply (N,C,H,W) by a per-location map (N,1,H,W), broadcast over channels.
template <typename S>
Var<S> mul_map(Tape<S>& t, Var<S> x, Var<S> m) {
  const Tensor<S>&X = t.val(x), &M = t.val(m);
  if (M.c() != 1 || M.n() != X.n() || M.h() != X.h() || M.w() != X.w())
    fail("shape", "mul_map: map must be (N,1,H,W) matching " + X.shape_str());
  const int N = X.n(), C = X.c();
  const Eigen::Index plane = static_cast<Eigen::Index>(X.h()) * X.w();
  Tensor<S> out = X;
  for (int n = 0; n < N; ++n) {
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> mm(M.data() + n * plane, plane);
    for (int c = 0; c < C; ++c) {
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> o(
          out.data() + (static_cast<Eigen::Index>(n) * C + c) * plane, plane);
      o *= mm;
    }
  }
  return t.make(std::move(out), {x, m}, [x, m, N, C, plane](Tape<S>& t, Var<S> self) {
    const Tensor<S>& g = t.grad(self);
    using Map = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
    using CMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
    for (int n = 0; n < N; ++n) {
      CMap mm(t.val(m).data() + n * plane, plane);
      for (int c = 0; c < C; ++c) {
        const Eigen::Index off = (static_cast<Eigen::Index>(n) * C + c) * plane;
        CMap gg(g.data() + off, plane);
        if (t.requires_grad(x)) Map(t.grad(x).data() + off, plane) += gg * mm;
        if (t.requires_grad(m)) {
          CMap xx(t.val(x).data() + off, plane);
          Map(t.grad(m).data() + n * plane, plane) += gg * xx;
        }
      }
    }
  });
}

// Plain (non-tape) per-location cosine similarity across channels:
// (N,C,H,W) x (N,C,H,W) -> (N,1,H,W).
//
// Computed as 1 - 0.5*||a/na - b/nb||^2 with na = sqrt(sum a^2 + eps), which
// equals dot(a,b)/(na*nb) and is exactly 1 (distance exactly 0) when the
// inputs are bitwise identical.
template <typename S>
Tensor<S> cosine_map_plain(const Tensor<S>& A, const Tensor<S>& B, S eps = S(1e-8)) {
  check_same_shape(A, B, "cosine_map");
  if (A.c() < 1) fail("shape", "cosine_map: needs at least one channel");
  const int N = A.n(), C = A.c(), H = A.h(), W = A.w();
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  Tensor<S> out(N, 1, H, W);
  for (int n = 0; n < N; ++n) {
    const S* an = A.data() + static_cast<Eigen::Index>(n) * C * plane;
    const S* bn = B.data() + static_cast<Eigen::Index>(n) * C * plane;
    for (Eigen::Index p = 0; p < plane; ++p) {
      S sa = eps, sb = eps;
      for (int c = 0; c < C; ++c) {
        const S av = an[c * plane + p], bv = bn[c * plane + p];
        sa += av * av;
        sb += bv * bv;
      }
      const S na = std::sqrt(sa), nb = std::sqrt(sb);
      S d2 = S(0);
      for (int c = 0; c < C; ++c) {
        const S d = an[c * plane + p] / na - bn[c * plane + p] / nb;
        d2 += d * d;
      }
      out.data()[n * plane + p] = S(1) - S(0.5) * d2;
    }
  }
  return out;
}

// Tape version; backward recomputes norms rather than capturing them.
template <typename S>
Var<S> cosine_map(Tape<S>& t, Var<S> a, Var<S> b, S eps = S(1e-8)) {
  Tensor<S> out = cosine_map_plain(t.val(a), t.val(b), eps);
  const int N = out.n(), C = t.val(a).c();
  const Eigen::Index plane = static_cast<Eigen::Index>(out.h()) * out.w();
  return t.make(std::move(out), {a, b},
                [a, b, N, C, plane, eps](Tape<S>& t, Var<S> self) {
    const Tensor<S>& g = t.grad(self);
    const Tensor<S>&A = t.val(a), &B = t.val(b);
    const bool wa = t.requires_grad(a), wb = t.requires_grad(b);
    for (int n = 0; n < N; ++n) {
      const S* an = A.data() + static_cast<Eigen::Index>(n) * C * plane;
      const S* bn = B.data() + static_cast<Eigen::Index>(n) * C * plane;
      for (Eigen::Index p = 0; p < plane; ++p) {
        const S gv = g.data()[n * plane + p];
        if (gv == S(0)) continue;
        S qa = eps, qb = eps;
        for (int c = 0; c < C; ++c) {
          const S av = an[c * plane + p], bv = bn[c * plane + p];
          qa += av * av;
          qb += bv * bv;
        }
        const S na = std::sqrt(qa), nb = std::sqrt(qb);
        // d = ahat - bhat; sa = d.ahat; sb = d.bhat
        S sa = S(0), sb = S(0);
        for (int c = 0; c < C; ++c) {
          const S ah = an[c * plane + p] / na, bh = bn[c * plane + p] / nb;
          const S d = ah - bh;
          sa += d * ah;
          sb += d * bh;
        }
        for (int c = 0; c < C; ++c) {
          const S ah = an[c * plane + p] / na, bh = bn[c * plane + p] / nb;
          const S d = ah - bh;
          if (wa) t.grad(a).data()[(static_cast<Eigen::Index>(n) * C + c) * plane + p] +=
              gv * (ah * sa - d) / na;
          if (wb) t.grad(b).data()[(static_cast<Eigen::Index>(n) * C + c) * plane + p] +=
              gv * (d - bh * sb) / nb;
        }
      }
    }
  });
}

// Per-sample cosine over the flattened C*H*W vector: -> (N,1,1,1).
// Same normalized-difference formulation as cosine_map.
template <typename S>
Var<S> cosine_flat(Tape<S>& t, Var<S> a, Var<S> b, S eps = S(1e-8)) {
  const Tensor<S>&A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "cosine_flat");
  const int N = A.n();
  const Eigen::Index len = A.size() / N;
  Tensor<S> out(N, 1, 1, 1);
  Tensor<S> norms(N, 2, 1, 1);
  using CMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
  for (int n = 0; n < N; ++n) {
    CMap va(A.data() + n * len, len), vb(B.data() + n * len, len);
    const S na = std::sqrt(va.square().sum() + eps);
    const S nb = std::sqrt(vb.square().sum() + eps);
    const S d2 = (va / na - vb / nb).square().sum();
    out.data()[n] = S(1) - S(0.5) * d2;
    norms(n, 0, 0, 0) = na;
    norms(n, 1, 0, 0) = nb;
  }
  return t.make(std::move(out), {a, b}, [a, b, N, len, norms](Tape<S>& t, Var<S> self) {
    const Tensor<S>& g = t.grad(self);
    const Tensor<S>&A = t.val(a), &B = t.val(b);
    using CMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
    using Map = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
    for (int n = 0; n < N; ++n) {
      const S gv = g.data()[n];
      if (gv == S(0)) continue;
      const S na = norms(n, 0, 0, 0), nb = norms(n, 1, 0, 0);
      CMap va(A.data() + n * len, len), vb(B.data() + n * len, len);
      Eigen::Array<S, Eigen::Dynamic, 1> ah = va / na, bh = vb / nb;
      Eigen::Array<S, Eigen::Dynamic, 1> d = ah - bh;
      const S sa = (d * ah).sum(), sb = (d * bh).sum();
      if (t.requires_grad(a)) Map(t.grad(a).data() + n * len, len) += gv * (ah * sa - d) / na;
      if (t.requires_grad(b)) Map(t.grad(b).data() + n * len, len) += gv * (d - bh * sb) / nb;
    }
  });
}

}  // namespace ets::ops
