#pragma once

// Differentiable layer modules with explicit backward passes. Each module
// caches what its backward needs during a training forward; eval forwards
// skip the caches. A module instance serves one logical stream at a time.
//
// Convolution runs as im2col + GEMM (Eigen, single-threaded) with a direct
// fast path for 1x1/stride-1. Backward rebuilds the column matrix from the
// cached input instead of caching it, trading a little compute for memory.

#include "matteblend/core/image_ops.hpp"
#include "matteblend/core/tensor.hpp"
#include "matteblend/nn/param.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matteblend {

template <typename T>
class Conv2d {
 public:
  Conv2d(ParamStore<T>& store, const std::string& name, int in_c, int out_c, int k, int stride = 1,
         int dilation = 1)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), dilation_(dilation),
        pad_(k == 1 ? 0 : dilation * (k - 1) / 2),
        weight_(&store.add(name + ".weight", {out_c, in_c, k, k})),
        bias_(&store.add(name + ".bias", {out_c})) {}

  int out_dim(int in) const {
    const int eff = dilation_ * (k_ - 1) + 1;
    return (in + 2 * pad_ - eff) / stride_ + 1;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c() != in_c_)
      throw std::invalid_argument(weight_->name + ": expected " + std::to_string(in_c_) +
                                  " input channels, got " + std::to_string(x.c()));
    const int oh = out_dim(x.h()), ow = out_dim(x.w());
    Tensor<T> y(x.n(), out_c_, oh, ow);
    const std::size_t ick2 = static_cast<std::size_t>(in_c_) * k_ * k_;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    ConstMatMap<T> W(weight_->value.data(), out_c_, static_cast<Eigen::Index>(ick2));

    if (is_pointwise()) {
      for (int n = 0; n < x.n(); ++n) {
        ConstMatMap<T> X(x.plane(n, 0), in_c_, static_cast<Eigen::Index>(ohw));
        MatMap<T> Y(y.plane(n, 0), out_c_, static_cast<Eigen::Index>(ohw));
        Y.noalias() = W * X;
      }
    } else {
      col_.resize(ick2 * ohw);
      for (int n = 0; n < x.n(); ++n) {
        im2col(x, n);
        ConstMatMap<T> col(col_.data(), static_cast<Eigen::Index>(ick2),
                           static_cast<Eigen::Index>(ohw));
        MatMap<T> Y(y.plane(n, 0), out_c_, static_cast<Eigen::Index>(ohw));
        Y.noalias() = W * col;
      }
    }
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < out_c_; ++c) {
        T* p = y.plane(n, c);
        const T b = bias_->value[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < ohw; ++i) p[i] += b;
      }
    if (train) x_cache_ = x;
    return y;
  }

  /// Accumulates weight/bias grads and returns d(loss)/d(input).
  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = x_cache_;
    if (x.empty()) throw std::logic_error(weight_->name + ": backward without cached forward");
    const int oh = dy.h(), ow = dy.w();
    const std::size_t ick2 = static_cast<std::size_t>(in_c_) * k_ * k_;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    Tensor<T> dx(x.n(), in_c_, x.h(), x.w());
    ConstMatMap<T> W(weight_->value.data(), out_c_, static_cast<Eigen::Index>(ick2));
    MatMap<T> dW(weight_->grad.data(), out_c_, static_cast<Eigen::Index>(ick2));

    if (is_pointwise()) {
      for (int n = 0; n < x.n(); ++n) {
        ConstMatMap<T> X(x.plane(n, 0), in_c_, static_cast<Eigen::Index>(ohw));
        ConstMatMap<T> dY(dy.plane(n, 0), out_c_, static_cast<Eigen::Index>(ohw));
        MatMap<T> dX(dx.plane(n, 0), in_c_, static_cast<Eigen::Index>(ohw));
        dW.noalias() += dY * X.transpose();
        dX.noalias() = W.transpose() * dY;
      }
    } else {
      col_.resize(ick2 * ohw);
      dcol_.resize(ick2 * ohw);
      for (int n = 0; n < x.n(); ++n) {
        im2col(x, n);
        ConstMatMap<T> col(col_.data(), static_cast<Eigen::Index>(ick2),
                           static_cast<Eigen::Index>(ohw));
        ConstMatMap<T> dY(dy.plane(n, 0), out_c_, static_cast<Eigen::Index>(ohw));
        dW.noalias() += dY * col.transpose();
        MatMap<T> dcol(dcol_.data(), static_cast<Eigen::Index>(ick2),
                       static_cast<Eigen::Index>(ohw));
        dcol.noalias() = W.transpose() * dY;
        col2im(dx, n, oh, ow);
      }
    }
    for (int n = 0; n < dy.n(); ++n)
      for (int c = 0; c < out_c_; ++c) {
        const T* p = dy.plane(n, c);
        T acc = T(0);
        for (std::size_t i = 0; i < ohw; ++i) acc += p[i];
        bias_->grad[static_cast<std::size_t>(c)] += acc;
      }
    x_cache_ = Tensor<T>();
    return dx;
  }

  Param<T>& weight() { return *weight_; }
  Param<T>& bias() { return *bias_; }

 private:
  bool is_pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  void im2col(const Tensor<T>& x, int n) {
    const int oh = out_dim(x.h()), ow = out_dim(x.w());
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    T* dst = col_.data();
    for (int c = 0; c < in_c_; ++c) {
      const T* src = x.plane(n, c);
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky * dilation_;
            if (iy < 0 || iy >= x.h()) {
              for (int ox = 0; ox < ow; ++ox) *dst++ = T(0);
              continue;
            }
            const T* row = src + static_cast<std::size_t>(iy) * x.w();
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx * dilation_;
              *dst++ = (ix >= 0 && ix < x.w()) ? row[ix] : T(0);
            }
          }
        }
    }
    (void)ohw;
  }

  void col2im(Tensor<T>& dx, int n, int oh, int ow) {
    const T* src = dcol_.data();
    for (int c = 0; c < in_c_; ++c) {
      T* dst = dx.plane(n, c);
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky * dilation_;
            if (iy < 0 || iy >= dx.h()) {
              src += ow;
              continue;
            }
            T* row = dst + static_cast<std::size_t>(iy) * dx.w();
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx * dilation_;
              if (ix >= 0 && ix < dx.w()) row[ix] += *src;
              ++src;
            }
          }
        }
    }
  }

  int in_c_, out_c_, k_, stride_, dilation_, pad_;
  Param<T>* weight_;
  Param<T>* bias_;
  Tensor<T> x_cache_;
  std::vector<T> col_, dcol_;
};

template <typename T>
class GroupNorm {
 public:
  GroupNorm(ParamStore<T>& store, const std::string& name, int channels)
      : channels_(channels), groups_(pick_groups(channels)),
        gamma_(&store.add(name + ".gamma", {channels})),
        beta_(&store.add(name + ".beta", {channels})) {}

  static int pick_groups(int c) {
    if (c % 8 == 0) return 8;
    if (c % 4 == 0) return 4;
    return 1;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    if (x.c() != channels_) throw std::invalid_argument(gamma_->name + ": channel mismatch");
    const int cg = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    const std::size_t m = static_cast<std::size_t>(cg) * plane;
    Tensor<T> y = Tensor<T>::zeros_like(x);
    Tensor<T> xhat = Tensor<T>::zeros_like(x);
    inv_std_.assign(static_cast<std::size_t>(x.n()) * groups_, T(0));
    for (int n = 0; n < x.n(); ++n)
      for (int g = 0; g < groups_; ++g) {
        const T* base = x.plane(n, g * cg);
        T mean = T(0);
        for (std::size_t i = 0; i < m; ++i) mean += base[i];
        mean /= T(m);
        T var = T(0);
        for (std::size_t i = 0; i < m; ++i) {
          const T d = base[i] - mean;
          var += d * d;
        }
        var /= T(m);
        const T is = T(1) / std::sqrt(var + T(kEps));
        inv_std_[static_cast<std::size_t>(n) * groups_ + g] = is;
        for (int c = 0; c < cg; ++c) {
          const int ch = g * cg + c;
          const T* xp = x.plane(n, ch);
          T* hp = xhat.plane(n, ch);
          T* yp = y.plane(n, ch);
          const T ga = gamma_->value[static_cast<std::size_t>(ch)];
          const T be = beta_->value[static_cast<std::size_t>(ch)];
          for (std::size_t i = 0; i < plane; ++i) {
            hp[i] = (xp[i] - mean) * is;
            yp[i] = ga * hp[i] + be;
          }
        }
      }
    if (train) xhat_cache_ = std::move(xhat);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& xhat = xhat_cache_;
    if (xhat.empty()) throw std::logic_error(gamma_->name + ": backward without cached forward");
    const int cg = channels_ / groups_;
    const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
    const T m = T(static_cast<double>(cg) * plane);
    Tensor<T> dx = Tensor<T>::zeros_like(dy);
    for (int n = 0; n < dy.n(); ++n)
      for (int g = 0; g < groups_; ++g) {
        T s1 = T(0), s2 = T(0);
        for (int c = 0; c < cg; ++c) {
          const int ch = g * cg + c;
          const T ga = gamma_->value[static_cast<std::size_t>(ch)];
          const T* dyp = dy.plane(n, ch);
          const T* hp = xhat.plane(n, ch);
          T dg = T(0), db = T(0);
          for (std::size_t i = 0; i < plane; ++i) {
            const T dh = dyp[i] * ga;
            s1 += dh;
            s2 += dh * hp[i];
            dg += dyp[i] * hp[i];
            db += dyp[i];
          }
          gamma_->grad[static_cast<std::size_t>(ch)] += dg;
          beta_->grad[static_cast<std::size_t>(ch)] += db;
        }
        const T is = inv_std_[static_cast<std::size_t>(n) * groups_ + g];
        for (int c = 0; c < cg; ++c) {
          const int ch = g * cg + c;
          const T ga = gamma_->value[static_cast<std::size_t>(ch)];
          const T* dyp = dy.plane(n, ch);
          const T* hp = xhat.plane(n, ch);
          T* dxp = dx.plane(n, ch);
          for (std::size_t i = 0; i < plane; ++i)
            dxp[i] = is * (dyp[i] * ga - s1 / m - hp[i] * s2 / m);
        }
      }
    xhat_cache_ = Tensor<T>();
    return dx;
  }

 private:
  static constexpr double kEps = 1e-5;
  int channels_, groups_;
  Param<T>* gamma_;
  Param<T>* beta_;
  Tensor<T> xhat_cache_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> y = x;
    T* p = y.data();
    for (std::size_t i = 0; i < y.size(); ++i)
      if (p[i] < T(0)) p[i] = T(0);
    if (train) y_cache_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (y_cache_.empty()) throw std::logic_error("relu: backward without cached forward");
    Tensor<T> dx = dy;
    const T* y = y_cache_.data();
    T* p = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (y[i] <= T(0)) p[i] = T(0);
    y_cache_ = Tensor<T>();
    return dx;
  }

 private:
  Tensor<T> y_cache_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> y = Tensor<T>::zeros_like(x);
    const T* xp = x.data();
    T* yp = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) yp[i] = T(1) / (T(1) + std::exp(-xp[i]));
    if (train) y_cache_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (y_cache_.empty()) throw std::logic_error("sigmoid: backward without cached forward");
    Tensor<T> dx = Tensor<T>::zeros_like(dy);
    const T* y = y_cache_.data();
    const T* d = dy.data();
    T* p = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i) p[i] = d[i] * y[i] * (T(1) - y[i]);
    y_cache_ = Tensor<T>();
    return dx;
  }

 private:
  Tensor<T> y_cache_;
};

/// Bilinear x2 upsampling with pixel-center alignment; backward is the exact
/// transpose of the forward interpolation.
template <typename T>
class Upsample2x {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    const int H = x.h(), W = x.w();
    Tensor<T> y(x.n(), x.c(), 2 * H, 2 * W);
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c) {
        const T* src = x.plane(n, c);
        T* dst = y.plane(n, c);
        for (int oy = 0; oy < 2 * H; ++oy) {
          int y0, y1;
          T wy;
          taps(oy, H, y0, y1, wy);
          for (int ox = 0; ox < 2 * W; ++ox) {
            int x0, x1;
            T wx;
            taps(ox, W, x0, x1, wx);
            const T a = src[static_cast<std::size_t>(y0) * W + x0];
            const T b = src[static_cast<std::size_t>(y0) * W + x1];
            const T cc = src[static_cast<std::size_t>(y1) * W + x0];
            const T d = src[static_cast<std::size_t>(y1) * W + x1];
            dst[static_cast<std::size_t>(oy) * 2 * W + ox] =
                (T(1) - wy) * ((T(1) - wx) * a + wx * b) + wy * ((T(1) - wx) * cc + wx * d);
          }
        }
      }
    if (train) in_shape_ = {x.n(), x.c(), H, W};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int H = in_shape_[2], W = in_shape_[3];
    Tensor<T> dx(in_shape_[0], in_shape_[1], H, W);
    for (int n = 0; n < dx.n(); ++n)
      for (int c = 0; c < dx.c(); ++c) {
        const T* src = dy.plane(n, c);
        T* dst = dx.plane(n, c);
        for (int oy = 0; oy < 2 * H; ++oy) {
          int y0, y1;
          T wy;
          taps(oy, H, y0, y1, wy);
          for (int ox = 0; ox < 2 * W; ++ox) {
            int x0, x1;
            T wx;
            taps(ox, W, x0, x1, wx);
            const T g = src[static_cast<std::size_t>(oy) * 2 * W + ox];
            dst[static_cast<std::size_t>(y0) * W + x0] += (T(1) - wy) * (T(1) - wx) * g;
            dst[static_cast<std::size_t>(y0) * W + x1] += (T(1) - wy) * wx * g;
            dst[static_cast<std::size_t>(y1) * W + x0] += wy * (T(1) - wx) * g;
            dst[static_cast<std::size_t>(y1) * W + x1] += wy * wx * g;
          }
        }
      }
    return dx;
  }

 private:
  // Source taps for output index o: src = (o + 0.5)/2 - 0.5.
  static void taps(int o, int n, int& i0, int& i1, T& w) {
    const double s = (o + 0.5) * 0.5 - 0.5;
    const double f = std::floor(s);
    i0 = std::max(0, std::min(static_cast<int>(f), n - 1));
    i1 = std::min(i0 + 1, n - 1);
    w = static_cast<T>(s - f);
    if (s < 0) {
      i0 = i1 = 0;
      w = T(0);
    }
  }

  std::array<int, 4> in_shape_{};
};

// -- tensor pad / crop (for the /16 divisibility wrapper) ----------------------

inline int round_up(int v, int multiple) { return ((v + multiple - 1) / multiple) * multiple; }

/// Reflection padding on the bottom/right edges (fold handles pads wider than
/// the image).
template <typename T>
Tensor<T> pad_reflect_tensor(const Tensor<T>& x, int pad_h, int pad_w) {
  if (pad_h == 0 && pad_w == 0) return x;
  Tensor<T> y(x.n(), x.c(), x.h() + pad_h, x.w() + pad_w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (int yy = 0; yy < y.h(); ++yy) {
        const int sy = reflect_index(yy, x.h());
        for (int xx = 0; xx < y.w(); ++xx)
          dst[static_cast<std::size_t>(yy) * y.w() + xx] =
              src[static_cast<std::size_t>(sy) * x.w() + reflect_index(xx, x.w())];
      }
    }
  return y;
}

/// Backward of pad_reflect_tensor: padded positions alias interior pixels, so
/// their gradients scatter-add back into the reflected sources.
template <typename T>
Tensor<T> pad_reflect_tensor_backward(const Tensor<T>& dy, int orig_h, int orig_w) {
  if (dy.h() == orig_h && dy.w() == orig_w) return dy;
  Tensor<T> dx(dy.n(), dy.c(), orig_h, orig_w);
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      const T* src = dy.plane(n, c);
      T* dst = dx.plane(n, c);
      for (int yy = 0; yy < dy.h(); ++yy) {
        const int sy = reflect_index(yy, orig_h);
        for (int xx = 0; xx < dy.w(); ++xx)
          dst[static_cast<std::size_t>(sy) * orig_w + reflect_index(xx, orig_w)] +=
              src[static_cast<std::size_t>(yy) * dy.w() + xx];
      }
    }
  return dx;
}

template <typename T>
Tensor<T> crop_tensor(const Tensor<T>& x, int h, int w) {
  if (x.h() == h && x.w() == w) return x;
  Tensor<T> y(x.n(), x.c(), h, w);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
          dst[static_cast<std::size_t>(yy) * w + xx] = src[static_cast<std::size_t>(yy) * x.w() + xx];
    }
  return y;
}

/// Backward of crop_tensor: embed the gradient into zeros at the padded size.
template <typename T>
Tensor<T> uncrop_tensor(const Tensor<T>& dy, int padded_h, int padded_w) {
  if (dy.h() == padded_h && dy.w() == padded_w) return dy;
  Tensor<T> dx(dy.n(), dy.c(), padded_h, padded_w);
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      const T* src = dy.plane(n, c);
      T* dst = dx.plane(n, c);
      for (int yy = 0; yy < dy.h(); ++yy)
        for (int xx = 0; xx < dy.w(); ++xx)
          dst[static_cast<std::size_t>(yy) * padded_w + xx] =
              src[static_cast<std::size_t>(yy) * dy.w() + xx];
    }
  return dx;
}

// -- channel concat / split -----------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw std::invalid_argument("concat_channels: shape mismatch");
  Tensor<T> y(a.n(), a.c() + b.c(), a.h(), a.w());
  const std::size_t plane = static_cast<std::size_t>(a.h()) * a.w();
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c)
      std::copy(a.plane(n, c), a.plane(n, c) + plane, y.plane(n, c));
    for (int c = 0; c < b.c(); ++c)
      std::copy(b.plane(n, c), b.plane(n, c) + plane, y.plane(n, a.c() + c));
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int c_first) {
  Tensor<T> a(y.n(), c_first, y.h(), y.w());
  Tensor<T> b(y.n(), y.c() - c_first, y.h(), y.w());
  const std::size_t plane = static_cast<std::size_t>(y.h()) * y.w();
  for (int n = 0; n < y.n(); ++n) {
    for (int c = 0; c < c_first; ++c)
      std::copy(y.plane(n, c), y.plane(n, c) + plane, a.plane(n, c));
    for (int c = c_first; c < y.c(); ++c)
      std::copy(y.plane(n, c), y.plane(n, c) + plane, b.plane(n, c - c_first));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace matteblend
