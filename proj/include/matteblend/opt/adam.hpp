#pragma once

// Adam with bias correction, cosine learning-rate decay and the EMA update
// that couples a slow-moving teacher to its student. Optimizer state is keyed by
// parameter slot, so one Adam instance belongs to one network for its
// lifetime; every training stage constructs a fresh one.

#include "matteblend/nn/param.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// lr(t) = base/2 * (1 + cos(pi * t / total)); lr(0) = base, lr(total) = 0.
inline double cosine_lr(double base_lr, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps == 0) return base_lr;
  if (step >= total_steps) return 0.0;
  const double phase = static_cast<double>(step) / static_cast<double>(total_steps);
  const double lr = 0.5 * base_lr * (1.0 + std::cos(phase * 3.14159265358979323846));
  return lr < 0.0 ? 0.0 : lr;
}

template <typename T>
class Adam {
 public:
  explicit Adam(const std::vector<Param<T>*>& params, AdamConfig cfg = {}) : cfg_(cfg) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }

  std::uint64_t step_count() const { return t_; }

  /// One update from the gradients currently in Param::grad. Moments are kept
  /// in double regardless of T; the decayed step lands back in T.
  void step(const std::vector<Param<T>*>& params, double lr) {
    if (params.size() != m_.size())
      throw std::invalid_argument("optimizer state holds " + std::to_string(m_.size()) +
                                  " parameters, network has " + std::to_string(params.size()));
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      if (p.size() != m_[i].size())
        throw std::invalid_argument("optimizer state mismatch at '" + p.name + "'");
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double g = static_cast<double>(p.grad[j]);
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i][j] / bc1;
        const double vhat = v_[i][j] / bc2;
        p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) -
                                    lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// teacher <- momentum * teacher + (1 - momentum) * student, per scalar.
template <typename T>
void ema_update(const std::vector<Param<T>*>& teacher, const std::vector<Param<T>*>& student,
                double momentum) {
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("ema momentum must lie in [0, 1)");
  if (teacher.size() != student.size())
    throw std::invalid_argument("ema: parameter lists differ in length");
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    Param<T>& t = *teacher[i];
    const Param<T>& s = *student[i];
    if (t.name != s.name || t.shape != s.shape)
      throw std::invalid_argument("ema: parameter mismatch at '" + t.name + "'");
    for (std::size_t j = 0; j < t.size(); ++j)
      t.value[j] = static_cast<T>(momentum * static_cast<double>(t.value[j]) +
                                  (1.0 - momentum) * static_cast<double>(s.value[j]));
  }
}

}  // namespace matteblend
