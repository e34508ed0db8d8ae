#include <matteblend/core/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

using namespace matteblend;

TEST_CASE("identical seeds give identical sequences") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}

TEST_CASE("substreams are independent of parent advancement") {
  Rng parent(7);
  Rng s1 = parent.stream(3);
  parent.next_u64();
  parent.next_u64();
  Rng s2 = parent.stream(3);
  for (int i = 0; i < 100; ++i) REQUIRE(s1.next_u64() == s2.next_u64());

  Rng other = parent.stream(4);
  REQUIRE(other.next_u64() != parent.stream(3).next_u64());
}

TEST_CASE("uniform01 stays in [0,1) and covers the range") {
  Rng rng(123);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.001);
  REQUIRE(hi > 0.999);
}

TEST_CASE("uniform respects bounds") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-2.5, 7.5);
    REQUIRE(v >= -2.5);
    REQUIRE(v < 7.5);
  }
}

TEST_CASE("uniform_int is inclusive and roughly unbiased") {
  Rng rng(99);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    const int v = rng.uniform_int(10, 15);
    REQUIRE(v >= 10);
    REQUIRE(v <= 15);
    counts[v - 10]++;
  }
  for (int c : counts) {
    REQUIRE(c > 9000);
    REQUIRE(c < 11000);
  }
}

TEST_CASE("uniform_int single-value range") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) REQUIRE(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("bernoulli frequency tracks p") {
  Rng rng(77);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
  const double f = static_cast<double>(hits) / n;
  REQUIRE(f > 0.29);
  REQUIRE(f < 0.31);

  Rng r2(78);
  for (int i = 0; i < 100; ++i) REQUIRE_FALSE(r2.bernoulli(0.0));
  for (int i = 0; i < 100; ++i) REQUIRE(r2.bernoulli(1.0));
}

TEST_CASE("normal has approximately unit moments") {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("mix_seed separates nearby inputs") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(mix_seed(a, b));
  REQUIRE(seen.size() == 2500);
}
