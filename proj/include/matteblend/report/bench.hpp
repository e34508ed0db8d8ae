#pragma once

// Inference throughput measurement. Warmup passes run first and never enter
// the statistics; absolute numbers are host-dependent, so downstream checks
// should compare presets on one host rather than pin FPS values.

#include "matteblend/core/rng.hpp"
#include "matteblend/nn/network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

struct BenchResult {
  int edge = 0;
  int n_warmup = 0;
  int n_timed = 0;
  std::vector<double> latencies_ms;  // timed passes, chronological
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double images_per_sec = 0.0;
};

namespace bench_detail {

/// Nearest-rank percentile over a sorted sample.
inline double percentile(const std::vector<double>& sorted, double q) {
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace bench_detail

template <typename T>
BenchResult run_benchmark(MattingNetwork<T>& net, int edge, int iters, int warmup,
                          std::uint64_t seed = 0) {
  if (edge <= 0) throw std::invalid_argument("run_benchmark: edge must be positive");
  if (iters <= 0) throw std::invalid_argument("run_benchmark: iters must be positive");
  if (warmup < 0) throw std::invalid_argument("run_benchmark: warmup must be non-negative");

  Tensor<T> input(1, 3, edge, edge);
  Rng rng(seed);
  for (std::size_t i = 0; i < input.size(); ++i) input.data()[i] = static_cast<T>(rng.uniform01());

  for (int i = 0; i < warmup; ++i) (void)net.forward(input, /*train=*/false);

  BenchResult r;
  r.edge = edge;
  r.n_warmup = warmup;
  r.n_timed = iters;
  r.latencies_ms.reserve(iters);
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)net.forward(input, /*train=*/false);
    const auto t1 = std::chrono::steady_clock::now();
    r.latencies_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  std::vector<double> sorted = r.latencies_ms;
  std::sort(sorted.begin(), sorted.end());
  for (double v : r.latencies_ms) r.mean_ms += v;
  r.mean_ms /= r.n_timed;
  r.p50_ms = bench_detail::percentile(sorted, 0.50);
  r.p90_ms = bench_detail::percentile(sorted, 0.90);
  r.images_per_sec = 1000.0 / r.mean_ms;
  return r;
}

}  // namespace matteblend
