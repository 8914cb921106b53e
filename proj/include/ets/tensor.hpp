#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <sstream>
#include <string>

#include "ets/common.hpp"

namespace ets {

// Dense NCHW tensor backed by a contiguous Eigen array.
// Layout: index = ((n*C + c)*H + h)*W + w.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  Tensor(int n, int c, int h, int w) : shape_{n, c, h, w} {
    data_.resize(static_cast<Eigen::Index>(n) * c * h * w);
  }

  static Tensor zeros(int n, int c, int h, int w) {
    Tensor t(n, c, h, w);
    t.data_.setZero();
    return t;
  }
  static Tensor constant(int n, int c, int h, int w, Scalar v) {
    Tensor t(n, c, h, w);
    t.data_.setConstant(v);
    return t;
  }
  static Tensor scalar(Scalar v) { return constant(1, 1, 1, 1, v); }

  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator()(int n, int c, int h, int w) {
    return data_[((static_cast<Eigen::Index>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar operator()(int n, int c, int h, int w) const {
    return data_[((static_cast<Eigen::Index>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_[0], shape_[1], shape_[2], shape_[3]);
    out.array() = data_.template cast<Other>();
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(" << shape_[0] << "," << shape_[1] << "," << shape_[2] << "," << shape_[3] << ")";
    return os.str();
  }

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  Storage data_;
};

template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;  // column-major

template <typename S>
using MatMap = Eigen::Map<MatrixX<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const MatrixX<S>>;

// Column-major matrix view over raw tensor memory.
template <typename S>
MatMap<S> as_matrix(Tensor<S>& t, Eigen::Index rows, Eigen::Index cols) {
  return MatMap<S>(t.data(), rows, cols);
}
template <typename S>
ConstMatMap<S> as_matrix(const Tensor<S>& t, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatMap<S>(t.data(), rows, cols);
}

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* where) {
  if (!a.same_shape(b))
    fail("shape", std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace ets
