// Minimal tour of the label algebra: composite a synthetic foreground over a
// background, pull the uncertainty band out of the matte, and blend a pseudo
// label with a coarse segmentation through that band.
#include <matteblend/core/grid.hpp>
#include <matteblend/labels.hpp>

#include <cstdio>

using namespace matteblend;

int main() {
  const int H = 8, W = 8;
  AlphaMatte<float> matte(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float d = static_cast<float>(x) - 3.5f;
      matte.at(y, x) = d < -1 ? 1.0f : (d > 1 ? 0.0f : 0.5f - 0.5f * d);
    }

  BoundaryMask band = extract_boundary(matte);

  SegMask seg(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) seg.at(y, x) = x < 4 ? 1 : 0;

  AlphaMatte<float> pseudo(H, W, 0.5f);
  AlphaMatte<float> blended = blend_matte(pseudo, band, seg);

  std::puts("matte / band / blended (left to right across one row):");
  const int y = H / 2;
  for (int x = 0; x < W; ++x)
    std::printf("x=%d  matte=%.3f  band=%d  blended=%.3f\n", x, matte.at(y, x),
                static_cast<int>(band.at(y, x)), blended.at(y, x));
  return 0;
}
