#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ets/ops.hpp"
#include "ets/rng.hpp"
#include "ets/spatial.hpp"

namespace ets {
namespace nn {

// He-normal (fan-out) initialization, matching the residual-network lineage.
template <typename S>
void kaiming_init(Tensor<S>& w, Rng& rng) {
  const double fan_out = static_cast<double>(w.n()) * w.h() * w.w();
  const double std = std::sqrt(2.0 / fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = static_cast<S>(rng.normal() * std);
}

template <typename S>
struct Conv2d {
  Parameter<S> weight;  // (Co, Ci, k, k)
  Parameter<S> bias;    // (1, Co, 1, 1) when has_bias
  bool has_bias = false;
  int stride = 1, pad = 0;

  void init(int in_ch, int out_ch, int k, int stride_, int pad_, bool with_bias, Rng& rng) {
    stride = stride_;
    pad = pad_;
    has_bias = with_bias;
    weight.value = Tensor<S>(out_ch, in_ch, k, k);
    kaiming_init(weight.value, rng);
    if (has_bias) bias.value = Tensor<S>::zeros(1, out_ch, 1, 1);
  }

  Var<S> forward(Tape<S>& t, Var<S> x, bool trainable) {
    Var<S> w = t.param(weight, trainable);
    Var<S> b = has_bias ? t.param(bias, trainable) : Var<S>{};
    return ops::conv2d(t, x, w, b, stride, pad);
  }

  void params(const std::string& prefix, ParamRefs<S>& out) {
    out.emplace_back(prefix + ".weight", &weight);
    if (has_bias) out.emplace_back(prefix + ".bias", &bias);
  }
};

template <typename S>
struct BatchNorm2d {
  Parameter<S> gamma, beta;
  Tensor<S> running_mean, running_var;
  S momentum = S(0.1);
  S eps = S(1e-5);
  bool training = true;

  void init(int channels) {
    gamma.value = Tensor<S>::constant(1, channels, 1, 1, S(1));
    beta.value = Tensor<S>::zeros(1, channels, 1, 1);
    running_mean = Tensor<S>::zeros(1, channels, 1, 1);
    running_var = Tensor<S>::constant(1, channels, 1, 1, S(1));
  }

  Var<S> forward(Tape<S>& t, Var<S> x, bool trainable) {
    Var<S> g = t.param(gamma, trainable);
    Var<S> b = t.param(beta, trainable);
    return ops::batchnorm(t, x, g, b, &running_mean, &running_var, training, momentum, eps);
  }

  void params(const std::string& prefix, ParamRefs<S>& out) {
    out.emplace_back(prefix + ".gamma", &gamma);
    out.emplace_back(prefix + ".beta", &beta);
  }
  void buffers(const std::string& prefix, BufferRefs<S>& out) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
  }
};

// Residual bottleneck: 1x1 reduce -> 3x3 (optionally strided) -> 1x1 expand,
// with a projection shortcut when shape changes.
template <typename S>
struct BottleneckBlock {
  Conv2d<S> conv1, conv2, conv3;
  BatchNorm2d<S> bn1, bn2, bn3;
  Conv2d<S> proj;
  BatchNorm2d<S> bn_proj;
  bool has_proj = false;

  void init(int in_ch, int width, int out_ch, int stride, Rng& rng) {
    conv1.init(in_ch, width, 1, 1, 0, false, rng);
    bn1.init(width);
    conv2.init(width, width, 3, stride, 1, false, rng);
    bn2.init(width);
    conv3.init(width, out_ch, 1, 1, 0, false, rng);
    bn3.init(out_ch);
    has_proj = (stride != 1 || in_ch != out_ch);
    if (has_proj) {
      proj.init(in_ch, out_ch, 1, stride, 0, false, rng);
      bn_proj.init(out_ch);
    }
  }

  Var<S> forward(Tape<S>& t, Var<S> x, bool trainable) {
    Var<S> y = ops::relu(t, bn1.forward(t, conv1.forward(t, x, trainable), trainable));
    y = ops::relu(t, bn2.forward(t, conv2.forward(t, y, trainable), trainable));
    y = bn3.forward(t, conv3.forward(t, y, trainable), trainable);
    Var<S> skip = x;
    if (has_proj) skip = bn_proj.forward(t, proj.forward(t, x, trainable), trainable);
    return ops::relu(t, ops::add(t, y, skip));
  }

  void params(const std::string& p, ParamRefs<S>& out) {
    conv1.params(p + ".conv1", out);
    bn1.params(p + ".bn1", out);
    conv2.params(p + ".conv2", out);
    bn2.params(p + ".bn2", out);
    conv3.params(p + ".conv3", out);
    bn3.params(p + ".bn3", out);
    if (has_proj) {
      proj.params(p + ".proj", out);
      bn_proj.params(p + ".bn_proj", out);
    }
  }
  void buffers(const std::string& p, BufferRefs<S>& out) {
    bn1.buffers(p + ".bn1", out);
    bn2.buffers(p + ".bn2", out);
    bn3.buffers(p + ".bn3", out);
    if (has_proj) bn_proj.buffers(p + ".bn_proj", out);
  }
  void set_training(bool mode) {
    bn1.training = bn2.training = bn3.training = mode;
    if (has_proj) bn_proj.training = mode;
  }
};

// Decoder counterpart: same bottleneck topology but the 3x3 stage is
// preceded by a 2x bilinear upsampling instead of being strided, and the
// shortcut upsamples before its projection.
template <typename S>
struct DecoderBlock {
  Conv2d<S> conv1, conv2, conv3;
  BatchNorm2d<S> bn1, bn2, bn3;
  Conv2d<S> proj;
  BatchNorm2d<S> bn_proj;
  bool has_proj = false;
  bool upsample = false;

  void init(int in_ch, int width, int out_ch, bool upsample_, Rng& rng) {
    upsample = upsample_;
    conv1.init(in_ch, width, 1, 1, 0, false, rng);
    bn1.init(width);
    conv2.init(width, width, 3, 1, 1, false, rng);
    bn2.init(width);
    conv3.init(width, out_ch, 1, 1, 0, false, rng);
    bn3.init(out_ch);
    has_proj = (upsample || in_ch != out_ch);
    if (has_proj) {
      proj.init(in_ch, out_ch, 1, 1, 0, false, rng);
      bn_proj.init(out_ch);
    }
  }

  Var<S> forward(Tape<S>& t, Var<S> x, bool trainable) {
    const int oh = upsample ? t.val(x).h() * 2 : t.val(x).h();
    const int ow = upsample ? t.val(x).w() * 2 : t.val(x).w();
    Var<S> y = ops::relu(t, bn1.forward(t, conv1.forward(t, x, trainable), trainable));
    if (upsample) y = ops::upsample_bilinear(t, y, oh, ow);
    y = ops::relu(t, bn2.forward(t, conv2.forward(t, y, trainable), trainable));
    y = bn3.forward(t, conv3.forward(t, y, trainable), trainable);
    Var<S> skip = x;
    if (has_proj) {
      if (upsample) skip = ops::upsample_bilinear(t, skip, oh, ow);
      skip = bn_proj.forward(t, proj.forward(t, skip, trainable), trainable);
    }
    return ops::relu(t, ops::add(t, y, skip));
  }

  void params(const std::string& p, ParamRefs<S>& out) {
    conv1.params(p + ".conv1", out);
    bn1.params(p + ".bn1", out);
    conv2.params(p + ".conv2", out);
    bn2.params(p + ".bn2", out);
    conv3.params(p + ".conv3", out);
    bn3.params(p + ".bn3", out);
    if (has_proj) {
      proj.params(p + ".proj", out);
      bn_proj.params(p + ".bn_proj", out);
    }
  }
  void buffers(const std::string& p, BufferRefs<S>& out) {
    bn1.buffers(p + ".bn1", out);
    bn2.buffers(p + ".bn2", out);
    bn3.buffers(p + ".bn3", out);
    if (has_proj) bn_proj.buffers(p + ".bn_proj", out);
  }
  void set_training(bool mode) {
    bn1.training = bn2.training = bn3.training = mode;
    if (has_proj) bn_proj.training = mode;
  }
};

}  // namespace nn
}  // namespace ets
