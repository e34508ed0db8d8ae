#pragma once

// Training loss stack: pixel MSE, gradient-magnitude difference, boundary L1,
// and their lambda-weighted combination. Each loss comes with its analytic
// gradient w.r.t. the prediction (the entry point of network backprop).
//
// Every reduction is a mean so the lambda weight is resolution independent.
// The spatial gradient operator is the forward finite difference
//   dx(M)[y,x] = M[y,x+1] - M[y,x],  dy(M)[y,x] = M[y+1,x] - M[y,x]
// with the last column/row excluded; each axis is averaged separately and the
// two means are summed. A Sobel operator is available behind a config flag.

#include "matteblend/core/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace matteblend {

enum class GradOperator { forward_diff, sobel };

struct LossConfig {
  double lambda_boundary = 0.01;
  GradOperator grad_op = GradOperator::forward_diff;

  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double mse = 0.0;
  double grad = 0.0;
  double boundary = 0.0;
  double total = 0.0;
};

namespace detail {
template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}
template <typename T>
T sgn(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}
}  // namespace detail

// -- MSE ----------------------------------------------------------------------

template <typename T>
double loss_mse(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same(pred, target, "loss_mse");
  double acc = 0.0;
  const T* p = pred.data();
  const T* t = target.data();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

/// dL/dpred for loss_mse, scaled by `weight`, accumulated into dpred.
template <typename T>
void loss_mse_backward(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& dpred,
                       T weight = T(1)) {
  detail::require_same(pred, target, "loss_mse_backward");
  detail::require_same(pred, dpred, "loss_mse_backward");
  const T scale = weight * T(2) / T(pred.size());
  const T* p = pred.data();
  const T* t = target.data();
  T* g = dpred.data();
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] += scale * (p[i] - t[i]);
}

// -- gradient-difference loss ---------------------------------------------------

template <typename T>
double loss_grad_forward_diff(const Tensor<T>& pred, const Tensor<T>& target) {
  const int N = pred.n(), C = pred.c(), H = pred.h(), W = pred.w();
  if (W < 2 || H < 2) throw std::invalid_argument("loss_grad: dims must be >= 2 in each axis");
  double acc_x = 0.0, acc_y = 0.0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = pred.plane(n, c);
      const T* t = target.plane(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          acc_x += std::abs(static_cast<double>(p[i + 1] - p[i]) -
                            static_cast<double>(t[i + 1] - t[i]));
        }
      for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          acc_y += std::abs(static_cast<double>(p[i + W] - p[i]) -
                            static_cast<double>(t[i + W] - t[i]));
        }
    }
  const double n_x = static_cast<double>(N) * C * H * (W - 1);
  const double n_y = static_cast<double>(N) * C * (H - 1) * W;
  return acc_x / n_x + acc_y / n_y;
}

template <typename T>
void loss_grad_forward_diff_backward(const Tensor<T>& pred, const Tensor<T>& target,
                                     Tensor<T>& dpred, T weight = T(1)) {
  const int N = pred.n(), C = pred.c(), H = pred.h(), W = pred.w();
  const T inv_nx = weight / T(static_cast<double>(N) * C * H * (W - 1));
  const T inv_ny = weight / T(static_cast<double>(N) * C * (H - 1) * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = pred.plane(n, c);
      const T* t = target.plane(n, c);
      T* g = dpred.plane(n, c);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          const T s = detail::sgn((p[i + 1] - p[i]) - (t[i + 1] - t[i])) * inv_nx;
          g[i + 1] += s;
          g[i] -= s;
        }
      for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          const T s = detail::sgn((p[i + W] - p[i]) - (t[i + W] - t[i])) * inv_ny;
          g[i + W] += s;
          g[i] -= s;
        }
    }
}

namespace detail {
// Plain Sobel kernels; response defined on the (H-2)x(W-2) interior.
template <typename T>
inline T sobel_x_at(const T* p, int W, std::size_t i) {
  return (p[i - W + 1] - p[i - W - 1]) + T(2) * (p[i + 1] - p[i - 1]) + (p[i + W + 1] - p[i + W - 1]);
}
template <typename T>
inline T sobel_y_at(const T* p, int W, std::size_t i) {
  return (p[i + W - 1] - p[i - W - 1]) + T(2) * (p[i + W] - p[i - W]) + (p[i + W + 1] - p[i - W + 1]);
}
}  // namespace detail

template <typename T>
double loss_grad_sobel(const Tensor<T>& pred, const Tensor<T>& target) {
  const int N = pred.n(), C = pred.c(), H = pred.h(), W = pred.w();
  if (W < 3 || H < 3) throw std::invalid_argument("loss_grad(sobel): dims must be >= 3 in each axis");
  double acc_x = 0.0, acc_y = 0.0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = pred.plane(n, c);
      const T* t = target.plane(n, c);
      for (int y = 1; y + 1 < H; ++y)
        for (int x = 1; x + 1 < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          acc_x += std::abs(static_cast<double>(detail::sobel_x_at(p, W, i) - detail::sobel_x_at(t, W, i)));
          acc_y += std::abs(static_cast<double>(detail::sobel_y_at(p, W, i) - detail::sobel_y_at(t, W, i)));
        }
    }
  const double n_valid = static_cast<double>(N) * C * (H - 2) * (W - 2);
  return acc_x / n_valid + acc_y / n_valid;
}

template <typename T>
void loss_grad_sobel_backward(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& dpred,
                              T weight = T(1)) {
  const int N = pred.n(), C = pred.c(), H = pred.h(), W = pred.w();
  const T inv_n = weight / T(static_cast<double>(N) * C * (H - 2) * (W - 2));
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = pred.plane(n, c);
      const T* t = target.plane(n, c);
      T* g = dpred.plane(n, c);
      for (int y = 1; y + 1 < H; ++y)
        for (int x = 1; x + 1 < W; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          const T sx = detail::sgn(detail::sobel_x_at(p, W, i) - detail::sobel_x_at(t, W, i)) * inv_n;
          const T sy = detail::sgn(detail::sobel_y_at(p, W, i) - detail::sobel_y_at(t, W, i)) * inv_n;
          g[i - W + 1] += sx; g[i - W - 1] -= sx;
          g[i + 1] += T(2) * sx; g[i - 1] -= T(2) * sx;
          g[i + W + 1] += sx; g[i + W - 1] -= sx;
          g[i + W - 1] += sy; g[i - W - 1] -= sy;
          g[i + W] += T(2) * sy; g[i - W] -= T(2) * sy;
          g[i + W + 1] += sy; g[i - W + 1] -= sy;
        }
    }
}

template <typename T>
double loss_grad(const Tensor<T>& pred, const Tensor<T>& target,
                 GradOperator op = GradOperator::forward_diff) {
  detail::require_same(pred, target, "loss_grad");
  return op == GradOperator::forward_diff ? loss_grad_forward_diff(pred, target)
                                          : loss_grad_sobel(pred, target);
}

template <typename T>
void loss_grad_backward(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>& dpred,
                        T weight = T(1), GradOperator op = GradOperator::forward_diff) {
  detail::require_same(pred, target, "loss_grad_backward");
  detail::require_same(pred, dpred, "loss_grad_backward");
  if (op == GradOperator::forward_diff)
    loss_grad_forward_diff_backward(pred, target, dpred, weight);
  else
    loss_grad_sobel_backward(pred, target, dpred, weight);
}

// -- boundary L1 ----------------------------------------------------------------

template <typename T>
double loss_boundary(const Tensor<T>& pred_boundary, const Tensor<T>& target_boundary) {
  detail::require_same(pred_boundary, target_boundary, "loss_boundary");
  double acc = 0.0;
  const T* p = pred_boundary.data();
  const T* t = target_boundary.data();
  for (std::size_t i = 0; i < pred_boundary.size(); ++i)
    acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(t[i]));
  return acc / static_cast<double>(pred_boundary.size());
}

template <typename T>
void loss_boundary_backward(const Tensor<T>& pred_boundary, const Tensor<T>& target_boundary,
                            Tensor<T>& dpred, T weight = T(1)) {
  detail::require_same(pred_boundary, target_boundary, "loss_boundary_backward");
  detail::require_same(pred_boundary, dpred, "loss_boundary_backward");
  const T scale = weight / T(pred_boundary.size());
  const T* p = pred_boundary.data();
  const T* t = target_boundary.data();
  T* g = dpred.data();
  for (std::size_t i = 0; i < pred_boundary.size(); ++i) g[i] += scale * detail::sgn(p[i] - t[i]);
}

// -- combined -----------------------------------------------------------------

/// L_matte = L_mse + L_grad (the student-stage objective).
template <typename T>
double loss_matte(const Tensor<T>& pred, const Tensor<T>& target,
                  GradOperator op = GradOperator::forward_diff) {
  return loss_mse(pred, target) + loss_grad(pred, target, op);
}

/// L = L_matte + lambda * L_boundary, with the per-term breakdown for logging.
template <typename T>
LossBreakdown loss_total(const Tensor<T>& pred_matte, const Tensor<T>& target_matte,
                         const Tensor<T>& pred_boundary, const Tensor<T>& target_boundary,
                         const LossConfig& cfg = {}) {
  LossBreakdown out;
  out.mse = loss_mse(pred_matte, target_matte);
  out.grad = loss_grad(pred_matte, target_matte, cfg.grad_op);
  out.boundary = loss_boundary(pred_boundary, target_boundary);
  out.total = out.mse + out.grad + cfg.lambda_boundary * out.boundary;
  return out;
}

/// Gradients of loss_total w.r.t. both predictions (accumulated).
template <typename T>
void loss_total_backward(const Tensor<T>& pred_matte, const Tensor<T>& target_matte,
                         const Tensor<T>& pred_boundary, const Tensor<T>& target_boundary,
                         Tensor<T>& dpred_matte, Tensor<T>& dpred_boundary,
                         const LossConfig& cfg = {}) {
  loss_mse_backward(pred_matte, target_matte, dpred_matte);
  loss_grad_backward(pred_matte, target_matte, dpred_matte, T(1), cfg.grad_op);
  loss_boundary_backward(pred_boundary, target_boundary, dpred_boundary, T(cfg.lambda_boundary));
}

}  // namespace matteblend
