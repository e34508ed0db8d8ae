#pragma once

// Minimal dense NCHW tensor. Layers index it directly; matrix-shaped views
// for GEMM are taken with Eigen::Map at the call site.

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace matteblend {

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : n_(n), c_(c), h_(h), w_(w), data_(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("Tensor: dims must be positive");
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& at(int n, int c, int y, int x) { return data_[idx(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data_[idx(n, c, y, x)]; }

  T* plane(int n, int c) { return data_.data() + idx(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + idx(n, c, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> flat() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> flat() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.n_, o.c_, o.h_, o.w_); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n_, c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::size_t idx(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace matteblend
