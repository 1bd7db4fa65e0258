#include "cameo/correspondence.hpp"

#include <cmath>
#include <stdexcept>

#include "cameo/resize.hpp"

namespace cameo {

std::vector<std::uint8_t> TokenCorrespondence::onehot() const {
  int n = count();
  std::vector<std::uint8_t> p(std::size_t(n) * n, 0);
  for (int q = 0; q < n; ++q)
    if (mask[std::size_t(q)])
      p[std::size_t(q) * n + match[std::size_t(q)]] = 1;
  return p;
}

TokenGrid token_grid(const Pointmap& pm, int h, int w) {
  if (h < 1 || w < 1 || h > pm.h || w > pm.w)
    throw std::invalid_argument("token_grid: need 1 <= h <= H, 1 <= w <= W");
  TokenGrid g;
  g.h = h;
  g.w = w;
  g.points = resize_bilinear(pm.values, pm.h, pm.w, 3, h, w);
  g.valid.assign(std::size_t(h) * w, 0);
  for (int i = 0; i < h * w; ++i) {
    std::size_t b = std::size_t(i) * 3;
    bool ok = std::isfinite(g.points[b]) && std::isfinite(g.points[b + 1]) &&
              std::isfinite(g.points[b + 2]);
    g.valid[std::size_t(i)] = ok ? 1 : 0;
  }
  return g;
}

std::vector<int> nearest_all(const TokenGrid& src, const TokenGrid& dst) {
  int n_src = src.count();
  int n_dst = dst.count();
  std::vector<int> match(std::size_t(n_src), -1);
  bool any_valid = false;
  for (int k = 0; k < n_dst; ++k)
    if (dst.valid[std::size_t(k)]) {
      any_valid = true;
      break;
    }
  if (!any_valid) return match;

#pragma omp parallel for schedule(static)
  for (int q = 0; q < n_src; ++q) {
    if (!src.valid[std::size_t(q)]) continue;
    Vec3 p = src.point(q);
    double best = std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (int k = 0; k < n_dst; ++k) {
      if (!dst.valid[std::size_t(k)]) continue;
      std::size_t b = std::size_t(k) * 3;
      double dx = p.x - dst.points[b];
      double dy = p.y - dst.points[b + 1];
      double dz = p.z - dst.points[b + 2];
      double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < best) {
        best = d2;
        best_k = k;
      }
    }
    match[std::size_t(q)] = best_k;
  }
  return match;
}

std::pair<int, double> nearest_in_3d(const TokenGrid& src,
                                     const TokenGrid& dst, int query) {
  if (query < 0 || query >= src.count() || !src.valid[std::size_t(query)])
    throw std::invalid_argument("nearest_in_3d: invalid query token");
  Vec3 p = src.point(query);
  double best = std::numeric_limits<double>::infinity();
  int best_k = -1;
  for (int k = 0; k < dst.count(); ++k) {
    if (!dst.valid[std::size_t(k)]) continue;
    Vec3 q = dst.point(k);
    double d2 = dot(p - q, p - q);
    if (d2 < best) {
      best = d2;
      best_k = k;
    }
  }
  if (best_k < 0)
    throw std::invalid_argument("nearest_in_3d: dst has no valid token");
  return {best_k, std::sqrt(best)};
}

namespace {

TokenCorrespondence assemble_correspondence(int h, int w, double tau,
                                            const std::vector<int>& fwd,
                                            const std::vector<int>& bwd) {
  TokenCorrespondence tc;
  tc.h = h;
  tc.w = w;
  tc.tau = tau;
  int n = tc.count();
  tc.match.assign(std::size_t(n), 0);
  tc.mask.assign(std::size_t(n), 0);
  for (int q = 0; q < n; ++q) {
    int m = fwd[std::size_t(q)];
    if (m < 0) continue;  // invalid source token: match 0, mask 0
    tc.match[std::size_t(q)] = m;
    int cycle = bwd[std::size_t(m)];
    if (cycle < 0) continue;
    if (token_coord_dist(q, cycle, tc.w) <= tau) tc.mask[std::size_t(q)] = 1;
  }
  return tc;
}

}  // namespace

TokenCorrespondence build_correspondence(const TokenGrid& grid_i,
                                         const TokenGrid& grid_j, double tau) {
  if (grid_i.h != grid_j.h || grid_i.w != grid_j.w)
    throw std::invalid_argument("build_correspondence: grid shape mismatch");
  if (!(tau > 0))
    throw std::invalid_argument("build_correspondence: tau must be > 0");
  std::vector<int> fwd = nearest_all(grid_i, grid_j);
  std::vector<int> bwd = nearest_all(grid_j, grid_i);
  return assemble_correspondence(grid_i.h, grid_i.w, tau, fwd, bwd);
}

std::vector<std::pair<int, int>> mutual_nn_pixels(const Pointmap& pm_i,
                                                  const Pointmap& pm_j) {
  if (pm_i.h < 1 || pm_i.w < 1 || pm_j.h < 1 || pm_j.w < 1)
    throw std::invalid_argument("mutual_nn_pixels: empty pointmap");
  TokenGrid gi, gj;
  gi.h = pm_i.h;
  gi.w = pm_i.w;
  gi.points = pm_i.values;
  gi.valid = pm_i.valid;
  gj.h = pm_j.h;
  gj.w = pm_j.w;
  gj.points = pm_j.values;
  gj.valid = pm_j.valid;

  std::vector<int> fwd = nearest_all(gi, gj);
  std::vector<int> bwd = nearest_all(gj, gi);
  std::vector<std::pair<int, int>> pairs;
  for (int q = 0; q < gi.count(); ++q) {
    int m = fwd[std::size_t(q)];
    if (m >= 0 && bwd[std::size_t(m)] == q) pairs.emplace_back(q, m);
  }
  return pairs;
}

std::vector<TokenCorrespondence> correspondence_set(
    const std::vector<TokenGrid>& grids, double tau) {
  int f = int(grids.size());
  if (f < 2)
    throw std::invalid_argument("correspondence_set: need >= 2 views");
  for (int i = 1; i < f; ++i)
    if (grids[std::size_t(i)].h != grids[0].h ||
        grids[std::size_t(i)].w != grids[0].w)
      throw std::invalid_argument("correspondence_set: grid shape mismatch");
  if (!(tau > 0))
    throw std::invalid_argument("correspondence_set: tau must be > 0");

  // One NN pass per ordered direction, shared between the (i,j) match and
  // the (j,i) cycle check.
  std::vector<std::vector<int>> nn(std::size_t(f) * f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j)
      if (i != j)
        nn[std::size_t(i) * f + j] =
            nearest_all(grids[std::size_t(i)], grids[std::size_t(j)]);

  std::vector<TokenCorrespondence> out;
  out.reserve(std::size_t(f) * (f - 1));
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j) {
      if (i == j) continue;
      TokenCorrespondence tc = assemble_correspondence(
          grids[0].h, grids[0].w, tau, nn[std::size_t(i) * f + j],
          nn[std::size_t(j) * f + i]);
      tc.view_i = i;
      tc.view_j = j;
      out.push_back(std::move(tc));
    }
  return out;
}

}  // namespace cameo
