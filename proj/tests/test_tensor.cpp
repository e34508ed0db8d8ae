#include <matteblend/core/grid.hpp>
#include <matteblend/core/tensor.hpp>

#include <catch2/catch_amalgamated.hpp>

using namespace matteblend;

TEST_CASE("tensor layout is NCHW contiguous") {
  Tensor<float> t(2, 3, 4, 5);
  REQUIRE(t.size() == 2u * 3 * 4 * 5);
  t.at(1, 2, 3, 4) = 9.f;
  REQUIRE(t.data()[t.size() - 1] == 9.f);
  t.at(0, 0, 0, 0) = 1.f;
  REQUIRE(t.data()[0] == 1.f);
  t.at(0, 1, 0, 0) = 2.f;
  REQUIRE(t.data()[4 * 5] == 2.f);
}

TEST_CASE("plane points at the right slice") {
  Tensor<float> t(2, 2, 2, 2);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(i);
  REQUIRE(t.plane(1, 0)[0] == 8.f);
  REQUIRE(t.plane(0, 1)[3] == 7.f);
}

TEST_CASE("fill and zeros_like") {
  Tensor<double> t(1, 1, 3, 3);
  t.fill(2.5);
  for (std::size_t i = 0; i < t.size(); ++i) REQUIRE(t.data()[i] == 2.5);
  Tensor<double> z = Tensor<double>::zeros_like(t);
  REQUIRE(z.same_shape(t));
  for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(z.data()[i] == 0.0);
}

TEST_CASE("flat map views the same memory") {
  Tensor<float> t(1, 1, 2, 2);
  t.flat() = 3.f;
  REQUIRE(t.at(0, 0, 1, 1) == 3.f);
}

TEST_CASE("cast converts element type") {
  Tensor<float> t(1, 1, 1, 3);
  t.data()[0] = 0.5f;
  t.data()[1] = -1.f;
  t.data()[2] = 2.f;
  Tensor<double> d = t.cast<double>();
  REQUIRE(d.same_shape(Tensor<double>(1, 1, 1, 3)));
  REQUIRE(d.data()[1] == -1.0);
  Tensor<float> back = d.cast<float>();
  REQUIRE(back.data()[2] == 2.f);
}

TEST_CASE("nonpositive dims are rejected") {
  REQUIRE_THROWS_AS(Tensor<float>(0, 1, 1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(PixelGrid<float>(3, 0), std::invalid_argument);
}

TEST_CASE("range-validated grids reject bad values at construction") {
  PixelGrid<float> g(2, 2, 0.f);
  g.at(0, 0) = 1.5f;
  REQUIRE_THROWS_AS(AlphaMatte<float>(std::move(g)), std::invalid_argument);

  PixelGrid<float> ok(2, 2, 1.f);
  REQUIRE_NOTHROW(AlphaMatte<float>(std::move(ok)));

  PixelGrid<std::uint8_t> m(2, 2, 0);
  m.at(1, 1) = 2;
  REQUIRE_THROWS_AS(SegMask(std::move(m)), std::invalid_argument);
}

TEST_CASE("require_same_dims names the mismatch") {
  REQUIRE_THROWS_WITH(require_same_dims(2, 3, 2, 4, "composite"),
                      Catch::Matchers::ContainsSubstring("composite") &&
                          Catch::Matchers::ContainsSubstring("2x3") &&
                          Catch::Matchers::ContainsSubstring("2x4"));
}
