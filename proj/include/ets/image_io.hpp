#pragma once

#include <string>

#include "ets/common.hpp"
#include "ets/tensor.hpp"

namespace ets {

// Decode PNG/JPEG/BMP (chosen by magic bytes) to (1,3,H,W) RGB in [0,1].
Tensor<Real> load_image_rgb(const std::string& path);

// Decode a single-channel PNG mask to (1,1,H,W) in {0,1}. Non-zero pixels
// count as positive; non-PNG or multi-channel inputs are rejected.
Tensor<Real> load_mask_png(const std::string& path);

// Encode (1,3,H,W) or (1,1,H,W) in [0,1] (values clamped) as 8-bit PNG.
void save_png(const std::string& path, const Tensor<Real>& img);

}  // namespace ets
