#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cameo/scene.hpp"

namespace cameo {

// Token-resolution geometry: 3D coordinates at token centers, interpolated
// from a pointmap. A token is valid only if every pixel contributing to its
// interpolation was valid.
struct TokenGrid {
  int h = 0, w = 0;
  std::vector<double> points;       // (h*w) x 3
  std::vector<std::uint8_t> valid;  // h*w

  int count() const { return h * w; }
  Vec3 point(int idx) const {
    std::size_t i = std::size_t(idx) * 3;
    return {points[i], points[i + 1], points[i + 2]};
  }
};

// Per ordered view pair (i, j): for each query token of view i, the matched
// token of view j, the one-hot map P and the cycle-consistency mask M.
struct TokenCorrespondence {
  int view_i = 0, view_j = 0;
  int h = 0, w = 0;
  double tau = 0;                    // token-coordinate units; may be +inf
  std::vector<int> match;            // h*w target indices
  std::vector<std::uint8_t> mask;    // h*w, 1 = supervised

  int count() const { return h * w; }

  // Dense one-hot P (h*w x h*w); rows with mask 0 are all-zero.
  std::vector<std::uint8_t> onehot() const;
};

TokenGrid token_grid(const Pointmap& pm, int h, int w);

// Exact brute-force argmin over valid tokens of dst; ties break to the
// smallest index. Throws when the query is invalid or dst has no valid token.
std::pair<int, double> nearest_in_3d(const TokenGrid& src,
                                     const TokenGrid& dst, int query);

// Nearest-neighbor matches for every valid token of src, one pass.
// Invalid queries get match -1. Returns empty matches if dst has no valid
// token.
std::vector<int> nearest_all(const TokenGrid& src, const TokenGrid& dst);

TokenCorrespondence build_correspondence(const TokenGrid& grid_i,
                                         const TokenGrid& grid_j, double tau);

// Pixel-level mutual nearest neighbors in 3D between two pointmaps.
std::vector<std::pair<int, int>> mutual_nn_pixels(const Pointmap& pm_i,
                                                  const Pointmap& pm_j);

// All ordered pairs (i, j), i != j, over F views: F*(F-1) entries, ordered
// (0,1), (0,2), ..., (1,0), ...
std::vector<TokenCorrespondence> correspondence_set(
    const std::vector<TokenGrid>& grids, double tau);

// Flat token index -> (row, col) token coordinates.
inline std::pair<int, int> token_coords(int idx, int w) {
  return {idx / w, idx % w};
}

inline double token_coord_dist(int a, int b, int w) {
  auto [ar, ac] = token_coords(a, w);
  auto [br, bc] = token_coords(b, w);
  double dr = ar - br, dc = ac - bc;
  return std::sqrt(dr * dr + dc * dc);
}

}  // namespace cameo
