#pragma once

#include <string>
#include <vector>

#include "cameo/correspondence.hpp"
#include "cameo/resize.hpp"
#include "cameo/scene.hpp"

namespace cameo {

// Latent channels per token: world x/y/z, squared norm of the point,
// lambertian shading, validity flag — geometry-bearing stand-ins for VAE
// latents. Channels are affinely scaled to roughly zero-mean unit variance
// for object-centric scenes (objects ~0.5 m at the origin), matching the
// usual latent normalization of diffusion training; invalid tokens carry
// the off-value of the flag and zeros elsewhere.
inline constexpr int kLatentChannels = 6;

inline void encode_latent(const Vec3& x, double q, double shading,
                          bool valid, double* out) {
  out[0] = 10.0 * x.x;
  out[1] = 10.0 * x.y;
  out[2] = 10.0 * x.z;
  out[3] = 16.0 * q - 1.2;
  out[4] = valid ? 6.0 * (shading - 0.4) : 0.0;
  out[5] = valid ? 2.0 : -2.0;
}

// One scene prepared at token resolution: clean latents, per-token rays,
// ground-truth token geometry, and the full ordered correspondence set.
struct TrainSample {
  std::string name;
  int F = 0, h = 0, w = 0;
  std::vector<double> latents;  // F*hw x kLatentChannels
  std::vector<double> plucker;  // F*hw x 6
  std::vector<TokenGrid> grids;
  std::vector<TokenCorrespondence> corr;

  int hw() const { return h * w; }
};

// Renders every view at render_scale x token resolution, downsamples
// pointmaps to token grids and builds correspondences at threshold tau.
inline TrainSample prepare_sample(const Scene& scene, int h, int w, double tau,
                                  int render_scale = 4) {
  TrainSample s;
  s.name = scene.name;
  s.F = int(scene.cameras.size());
  s.h = h;
  s.w = w;
  const int hw = h * w;
  const int H = h * render_scale, W = w * render_scale;
  s.latents.assign(std::size_t(s.F) * hw * kLatentChannels, 0.0);
  s.plucker.assign(std::size_t(s.F) * hw * 6, 0.0);

  for (int f = 0; f < s.F; ++f) {
    RenderedView rv = render_view(scene, f, H, W);
    TokenGrid grid = token_grid(rv.pointmap, h, w);
    std::vector<double> shade_tok =
        resize_bilinear(rv.shading, H, W, 1, h, w);

    for (int p = 0; p < hw; ++p) {
      std::size_t base = (std::size_t(f) * hw + p) * kLatentChannels;
      if (grid.valid[std::size_t(p)]) {
        Vec3 x = grid.point(p);
        double sh = shade_tok[std::size_t(p)];
        encode_latent(x, dot(x, x), std::isfinite(sh) ? sh : 0.0, true,
                      s.latents.data() + base);
      } else {
        encode_latent({0, 0, 0}, 0.0, 0.0, false, s.latents.data() + base);
      }
    }

    PluckerGrid pg = plucker_embedding(scene.cameras[std::size_t(f)], h, w);
    std::copy(pg.values.begin(), pg.values.end(),
              s.plucker.begin() + std::size_t(f) * hw * 6);
    s.grids.push_back(std::move(grid));
  }
  s.corr = correspondence_set(s.grids, tau);
  return s;
}

}  // namespace cameo
