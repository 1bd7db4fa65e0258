#pragma once

#include <vector>

#include "cameo/dataset.hpp"
#include "cameo/denoiser.hpp"
#include "cameo/schedule.hpp"

namespace cameo {

// Evenly spaced timestep ladder T = t_0 > t_1 > ... > t_steps = 0.
inline std::vector<int> ddim_timesteps(int T, int steps) {
  if (steps < 1) throw std::invalid_argument("ddim: steps must be >= 1");
  if (steps > T) steps = T;
  std::vector<int> ts;
  for (int i = steps; i >= 0; --i) {
    int t = int(std::lround(double(i) * T / steps));
    if (ts.empty() || t != ts.back()) ts.push_back(t);
  }
  return ts;
}

// Deterministic DDIM trajectory over target views with an arbitrary noise
// predictor eps_fn(x, t) -> eps_hat (full F*hw*c buffer). Reference views are
// clamped to their clean latents after every step.
template <typename T, typename EpsFn>
std::vector<T> ddim_sample(const NoiseSchedule& sched, int steps,
                           const std::vector<T>& clean_latents,
                           const std::vector<std::uint8_t>& is_target, int F,
                           int per_view, EpsFn&& eps_fn, Rng& rng) {
  std::vector<T> x = clean_latents;
  for (int f = 0; f < F; ++f) {
    if (!is_target[std::size_t(f)]) continue;
    for (int i = 0; i < per_view; ++i)
      x[std::size_t(f) * per_view + i] = T(rng.normal());
  }
  std::vector<int> ts = ddim_timesteps(sched.T, steps);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    int t = ts[k], t_prev = ts[k + 1];
    std::vector<T> eps_hat = eps_fn(x, t);
    for (int f = 0; f < F; ++f) {
      std::size_t base = std::size_t(f) * per_view;
      if (is_target[std::size_t(f)]) {
        ddim_step(sched, t, t_prev, x.data() + base, eps_hat.data() + base,
                  x.data() + base, std::size_t(per_view));
      } else {
        std::copy(clean_latents.begin() + std::ptrdiff_t(base),
                  clean_latents.begin() + std::ptrdiff_t(base + per_view),
                  x.begin() + std::ptrdiff_t(base));
      }
    }
  }
  return x;
}

// Classifier-free guided sampling with the toy denoiser: the unconditional
// branch zeroes the Plucker channels, and
// eps = eps_uncond + cfg_weight * (eps_cond - eps_uncond).
template <typename T>
std::vector<T> sample(const ToyDenoiser<T>& model, const NoiseSchedule& sched,
                      const TrainSample& scene,
                      const std::vector<std::uint8_t>& is_target, int steps,
                      double cfg_weight, Rng& rng) {
  const int F = model.cfg.F, hw = model.cfg.hw();
  const int c = model.cfg.latent_channels;
  if (scene.F != F || scene.h != model.cfg.h || scene.w != model.cfg.w)
    throw std::invalid_argument("sample: scene/model shape mismatch");

  std::vector<T> clean(std::size_t(F) * hw * c);
  for (std::size_t i = 0; i < clean.size(); ++i)
    clean[i] = T(scene.latents[i]);

  auto make_cond = [&](bool with_camera) {
    std::vector<T> cond(std::size_t(F) * hw * kCondChannels, T(0));
    for (int f = 0; f < F; ++f)
      for (int p = 0; p < hw; ++p) {
        std::size_t dst = (std::size_t(f) * hw + p) * kCondChannels;
        if (with_camera) {
          std::size_t src = (std::size_t(f) * hw + p) * 6;
          for (int k = 0; k < 6; ++k)
            cond[dst + k] = T(scene.plucker[src + k]);
        }
        cond[dst + 6] = is_target[std::size_t(f)] ? T(0) : T(1);
      }
    return cond;
  };
  std::vector<T> cond_cam = make_cond(true);
  std::vector<T> cond_nocam = make_cond(false);

  DenoiserCache<T> cache;
  auto eps_fn = [&](const std::vector<T>& x, int t) {
    std::vector<T> eps_c, eps_u;
    model.forward(x, cond_cam, t, eps_c, cache);
    model.forward(x, cond_nocam, t, eps_u, cache);
    std::vector<T> out(eps_c.size());
    T w = T(cfg_weight);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = eps_u[i] + w * (eps_c[i] - eps_u[i]);
    return out;
  };
  return ddim_sample(sched, steps, clean, is_target, F, hw * c, eps_fn, rng);
}

}  // namespace cameo
