#include <catch2/catch_amalgamated.hpp>

#include "matteblend/opt/adam.hpp"

#include <cmath>
#include <vector>

using namespace matteblend;

namespace {

ParamStore<double> make_store(const std::vector<double>& init) {
  ParamStore<double> store;
  Param<double>& p = store.add("p", {static_cast<int>(init.size())});
  p.value = init;
  p.grad.assign(init.size(), 0.0);
  return store;
}

}  // namespace

TEST_CASE("cosine schedule hits both endpoints") {
  const double base = 3e-4;
  CHECK(cosine_lr(base, 0, 1000) == base);
  CHECK(cosine_lr(base, 1000, 1000) <= 1e-8 * base);
  CHECK(cosine_lr(base, 2000, 1000) <= 1e-8 * base);  // past the end stays at the floor
  CHECK(cosine_lr(base, 500, 1000) == Catch::Approx(0.5 * base).epsilon(1e-12));
  for (std::uint64_t t = 1; t <= 1000; ++t)
    CHECK(cosine_lr(base, t, 1000) <= cosine_lr(base, t - 1, 1000));
}

TEST_CASE("first adam step moves by lr against the gradient sign") {
  // Bias correction makes step 1 exactly lr * g/(|g| + eps') with eps' tiny.
  auto store = make_store({1.0, -2.0, 0.5});
  auto& params = store.all();
  params[0]->grad = {0.3, -70.0, 1e-3};
  Adam<double> opt(params);
  opt.step(params, 0.01);
  CHECK(params[0]->value[0] == Catch::Approx(1.0 - 0.01).epsilon(1e-5));
  CHECK(params[0]->value[1] == Catch::Approx(-2.0 + 0.01).epsilon(1e-5));
  CHECK(params[0]->value[2] == Catch::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam matches a hand-rolled recurrence over several steps") {
  auto store = make_store({0.7});
  auto& params = store.all();
  Adam<double> opt(params);

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.05;
  double theta = 0.7, m = 0.0, v = 0.0;
  const std::vector<double> grads = {0.4, -1.3, 0.02, 2.5, -0.6};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    params[0]->grad[0] = g;
    opt.step(params, lr);

    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(params[0]->value[0] == Catch::Approx(theta).epsilon(1e-14));
  }
}

TEST_CASE("adam drives a quadratic to its minimum") {
  auto store = make_store({5.0});
  auto& params = store.all();
  Adam<double> opt(params);
  const std::uint64_t total = 4000;
  for (std::uint64_t t = 0; t < total; ++t) {
    params[0]->grad[0] = 2.0 * (params[0]->value[0] - 1.5);
    opt.step(params, cosine_lr(0.05, t, total));
  }
  CHECK(params[0]->value[0] == Catch::Approx(1.5).margin(1e-4));
}

TEST_CASE("adam state is bound to one parameter layout") {
  auto store = make_store({1.0, 2.0});
  Adam<double> opt(store.all());
  auto other = make_store({1.0});
  CHECK_THROWS_AS(opt.step(other.all(), 0.01), std::invalid_argument);
}

TEST_CASE("ema follows the closed form") {
  ParamStore<double> tstore, sstore;
  tstore.add("w", {2}).value = {1.0, -1.0};
  sstore.add("w", {2}).value = {0.0, 3.0};
  const double mom = 0.999;

  ema_update(tstore.all(), sstore.all(), mom);
  CHECK(tstore.all()[0]->value[0] == Catch::Approx(0.999).epsilon(1e-15));

  // Against theta_t = m^t * theta_0 + (1 - m^t) * s for a constant student.
  double expect0 = 1.0, expect1 = -1.0;
  for (int t = 0; t < 2; ++t) {
    ema_update(tstore.all(), sstore.all(), mom);
  }
  expect0 = std::pow(mom, 3) * 1.0 + (1 - std::pow(mom, 3)) * 0.0;
  expect1 = std::pow(mom, 3) * -1.0 + (1 - std::pow(mom, 3)) * 3.0;
  CHECK(tstore.all()[0]->value[0] == Catch::Approx(expect0).margin(1e-10));
  CHECK(tstore.all()[0]->value[1] == Catch::Approx(expect1).margin(1e-10));
}

TEST_CASE("ema rejects invalid momentum and mismatched layouts") {
  ParamStore<double> a, b;
  a.add("w", {1});
  b.add("w", {1});
  CHECK_THROWS_AS(ema_update(a.all(), b.all(), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ema_update(a.all(), b.all(), -0.1), std::invalid_argument);

  ParamStore<double> c;
  c.add("other", {1});
  CHECK_THROWS_AS(ema_update(a.all(), c.all(), 0.9), std::invalid_argument);
}
