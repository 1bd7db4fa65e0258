#include "cameo/resize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cameo {

namespace {

template <typename T>
std::vector<T> resize_impl(const std::vector<T>& src, int h, int w, int c,
                           int out_h, int out_w) {
  if (h < 1 || w < 1 || c < 1 || out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_bilinear: all sizes must be >= 1");
  if (src.size() != std::size_t(h) * w * c)
    throw std::invalid_argument("resize_bilinear: src size mismatch");

  std::vector<T> dst(std::size_t(out_h) * out_w * c);
  const double sy = double(h) / out_h;
  const double sx = double(w) / out_w;

  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, double(h - 1));
    int y0 = int(fy);
    double wy = fy - y0;
    int y1 = std::min(y0 + 1, h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, double(w - 1));
      int x0 = int(fx);
      double wx = fx - x0;
      int x1 = std::min(x0 + 1, w - 1);
      for (int ch = 0; ch < c; ++ch) {
        auto at = [&](int y, int x) {
          return double(src[(std::size_t(y) * w + x) * c + ch]);
        };
        // Zero-weight taps are skipped so that exact-grid samples (and
        // same-shape resizes) reproduce inputs and never pull in NaN
        // sentinels from non-contributing neighbors.
        double top = (wx > 0.0) ? (1.0 - wx) * at(y0, x0) + wx * at(y0, x1)
                                : at(y0, x0);
        double v;
        if (wy > 0.0) {
          double bot = (wx > 0.0) ? (1.0 - wx) * at(y1, x0) + wx * at(y1, x1)
                                  : at(y1, x0);
          v = (1.0 - wy) * top + wy * bot;
        } else {
          v = top;
        }
        dst[(std::size_t(oy) * out_w + ox) * c + ch] = T(v);
      }
    }
  }
  return dst;
}

}  // namespace

std::vector<double> resize_bilinear(const std::vector<double>& src, int h,
                                    int w, int c, int out_h, int out_w) {
  return resize_impl(src, h, w, c, out_h, out_w);
}

std::vector<float> resize_bilinear(const std::vector<float>& src, int h, int w,
                                   int c, int out_h, int out_w) {
  return resize_impl(src, h, w, c, out_h, out_w);
}

}  // namespace cameo
