#pragma once

#include "ets/interp.hpp"

namespace ets {

// Channel statistics of the encoder's large-scale pretraining corpus; inputs
// are normalized with these right before entering the networks.
inline constexpr double kPretrainMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kPretrainStd[3] = {0.229, 0.224, 0.225};

// (N,3,H,W) in [0,1] -> channel-normalized.
template <typename S>
Tensor<S> normalize_pretrain(const Tensor<S>& img) {
  if (img.c() != 3) fail("shape", "normalize_pretrain: expected 3 channels, got " + img.shape_str());
  Tensor<S> out = img;
  const Eigen::Index plane = static_cast<Eigen::Index>(img.h()) * img.w();
  for (int n = 0; n < img.n(); ++n) {
    for (int c = 0; c < 3; ++c) {
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> seg(
          out.data() + (static_cast<Eigen::Index>(n) * 3 + c) * plane, plane);
      seg = (seg - static_cast<S>(kPretrainMean[c])) / static_cast<S>(kPretrainStd[c]);
    }
  }
  return out;
}

// Channel-mean grayscale: (N,C,H,W) -> (N,1,H,W).
template <typename S>
Tensor<S> to_gray(const Tensor<S>& img) {
  Tensor<S> out = Tensor<S>::zeros(img.n(), 1, img.h(), img.w());
  const Eigen::Index plane = static_cast<Eigen::Index>(img.h()) * img.w();
  for (int n = 0; n < img.n(); ++n) {
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> acc(out.data() + n * plane, plane);
    for (int c = 0; c < img.c(); ++c) {
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> seg(
          img.data() + (static_cast<Eigen::Index>(n) * img.c() + c) * plane, plane);
      acc += seg;
    }
    acc /= static_cast<S>(img.c());
  }
  return out;
}

// Bilinear resize to size x size.
template <typename S>
Tensor<S> resize_image(const Tensor<S>& img, int size) {
  if (size <= 0) fail("shape", "resize: non-positive size");
  return bilinear_resize(img, size, size);
}

// Evaluation masks stay binary: bilinear resize then threshold at 0.5.
template <typename S>
Tensor<S> resize_mask_binary(const Tensor<S>& mask, int size) {
  if (size <= 0) fail("shape", "resize: non-positive size");
  if (mask.h() == size && mask.w() == size) return mask;
  Tensor<S> r = bilinear_resize(mask, size, size);
  r.array() = (r.array() > S(0.5)).template cast<S>();
  return r;
}

}  // namespace ets
