#pragma once

#include <cmath>

#include "ets/tape.hpp"

namespace ets {

// Adam over a fixed parameter set. Moment buffers are allocated eagerly so
// optimizer state always has a serializable shape. Parameters whose gradient
// was never produced in a step are skipped, matching the usual convention.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(ParamRefs<S> params, double lr, double beta1 = 0.5, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0) fail("config", "adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& [name, p] : params_) {
      const auto& s = p->value.shape();
      m_.push_back(Tensor<S>::zeros(s[0], s[1], s[2], s[3]));
      v_.push_back(Tensor<S>::zeros(s[0], s[1], s[2], s[3]));
    }
  }

  void step() {
    ++t_;
    const S c1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    for (size_t i = 0; i < params_.size(); ++i) {
      Parameter<S>* p = params_[i].second;
      if (p->grad.empty()) continue;
      auto g = p->grad.array();
      m_[i].array() = static_cast<S>(beta1_) * m_[i].array() + static_cast<S>(1 - beta1_) * g;
      v_[i].array() =
          static_cast<S>(beta2_) * v_[i].array() + static_cast<S>(1 - beta2_) * g.square();
      p->value.array() -= static_cast<S>(lr_) * (m_[i].array() / c1) /
                          ((v_[i].array() / c2).sqrt() + static_cast<S>(eps_));
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  const ParamRefs<S>& params() const { return params_; }

  // Moment buffers exposed for checkpointing, named m.<param>/v.<param>.
  BufferRefs<S> state_buffers(const std::string& prefix) {
    BufferRefs<S> out;
    for (size_t i = 0; i < params_.size(); ++i) {
      out.emplace_back(prefix + ".m." + params_[i].first, &m_[i]);
      out.emplace_back(prefix + ".v." + params_[i].first, &v_[i]);
    }
    return out;
  }

 private:
  ParamRefs<S> params_;
  std::vector<Tensor<S>> m_, v_;
  double lr_ = 1e-3, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
};

}  // namespace ets
