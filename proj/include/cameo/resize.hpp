#pragma once

#include <cstddef>
#include <vector>

namespace cameo {

// Bilinear resampling of an H x W x C row-major grid, align-corners-false
// (pixel centers at (k + 0.5) / n). Border samples clamp, so the output is a
// convex combination of inputs and a constant grid stays constant. NaN inputs
// propagate to every output whose 2x2 stencil touches them.
std::vector<double> resize_bilinear(const std::vector<double>& src, int h,
                                    int w, int c, int out_h, int out_w);

std::vector<float> resize_bilinear(const std::vector<float>& src, int h, int w,
                                   int c, int out_h, int out_w);

}  // namespace cameo
