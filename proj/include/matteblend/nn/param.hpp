#pragma once

// Named parameter storage. Modules register parameters at construction time;
// the registration order is the canonical order for initialization, the
// optimizer and checkpoints.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

namespace matteblend {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
};

template <typename T>
class ParamStore {
 public:
  Param<T>& add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    params_.push_back(Param<T>{std::move(name), std::move(shape), {}, {}});
    params_.back().value.assign(n, T(0));
    params_.back().grad.assign(n, T(0));
    order_.push_back(&params_.back());
    return params_.back();
  }

  std::vector<Param<T>*>& all() { return order_; }
  const std::vector<Param<T>*>& all() const { return order_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param<T>* p : order_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (Param<T>* p : order_) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

 private:
  std::deque<Param<T>> params_;  // deque keeps references stable as modules register
  std::vector<Param<T>*> order_;
};

}  // namespace matteblend
