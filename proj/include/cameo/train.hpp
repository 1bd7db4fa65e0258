#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cameo/dataset.hpp"
#include "cameo/model.hpp"
#include "cameo/probe.hpp"
#include "cameo/schedule.hpp"

namespace cameo {

struct TrainConfig {
  double lambda = 0.02;
  double tau = 1.5;
  double cfg_drop_prob = 0.1;
  int iters = 2000;
  double lr = 1e-3;
  LossType loss_type = LossType::CE;
  std::uint64_t seed = 0;
  int checkpoint_every = 200;
  int eval_probes = 7;  // fixed deterministic probes per checkpoint

  void validate() const {
    if (lambda < 0) throw std::invalid_argument("train: lambda must be >= 0");
    if (!(tau > 0)) throw std::invalid_argument("train: tau must be > 0");
    if (iters < 0) throw std::invalid_argument("train: iters must be >= 0");
  }
};

struct MetricsRow {
  int iter = 0;
  double loss_denoise = 0;
  double loss_cameo = 0;
  double precision = 0;  // supervised layer, masked argmax agreement
};

struct CheckpointRow {
  int iter = 0;
  double precision_median = 0;  // median of logged precision in the window
  double precision_probe = 0;   // median over the fixed deterministic probes
  double denoise_median = 0;    // median logged denoise loss in the window
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<CheckpointRow> checkpoints;
};

// Momentum-free adaptive step, fixed repo-wide: RMSProp with decay 0.99.
template <typename T>
struct RmsProp {
  double lr = 1e-3;
  double decay = 0.99;
  double eps = 1e-8;
  std::vector<std::vector<double>> v;

  void init(const std::vector<Param<T>*>& params) {
    v.clear();
    for (auto* p : params) v.emplace_back(p->w.size(), 0.0);
  }
  void step(const std::vector<Param<T>*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      std::vector<double>& vi = v[i];
      for (std::size_t j = 0; j < p.w.size(); ++j) {
        double g = double(p.g[j]);
        vi[j] = decay * vi[j] + (1.0 - decay) * g * g;
        p.w[j] = T(double(p.w[j]) - lr * g / (std::sqrt(vi[j]) + eps));
      }
    }
  }
};

namespace detail {

// One fully-specified training input: which views are noised, at which
// timestep, and with which noise draw.
template <typename T>
struct Batch {
  int scene = 0;
  int t = 1;
  std::vector<std::uint8_t> is_target;   // per view
  std::vector<T> eps;                    // F*hw*c, zero on references
  bool drop_camera_cond = false;
};

template <typename T>
Batch<T> draw_batch(const TrainSample& sample, int scene_index,
                    const NoiseSchedule& sched, double cfg_drop_prob,
                    Rng& rng) {
  Batch<T> b;
  b.scene = scene_index;
  const int F = sample.F, hw = sample.hw(), c = kLatentChannels;
  b.t = 1 + int(rng.below(std::uint64_t(sched.T)));

  // 1..min(3, F-1) target views, chosen uniformly.
  int max_targets = std::min(3, F - 1);
  int n_targets = 1 + int(rng.below(std::uint64_t(max_targets)));
  std::vector<int> order(static_cast<std::size_t>(F), 0);
  for (int i = 0; i < F; ++i) order[std::size_t(i)] = i;
  for (int i = F - 1; i > 0; --i)
    std::swap(order[std::size_t(i)], order[rng.below(std::uint64_t(i) + 1)]);
  b.is_target.assign(std::size_t(F), 0);
  for (int i = 0; i < n_targets; ++i) b.is_target[std::size_t(order[std::size_t(i)])] = 1;

  b.eps.assign(std::size_t(F) * hw * c, T(0));
  for (int f = 0; f < F; ++f) {
    if (!b.is_target[std::size_t(f)]) continue;
    for (int i = 0; i < hw * c; ++i)
      b.eps[std::size_t(f) * hw * c + i] = T(rng.normal());
  }
  b.drop_camera_cond = rng.uniform() < cfg_drop_prob;
  return b;
}

// Model inputs for one sample/batch: noised target latents + conditioning.
template <typename T>
void assemble_inputs(const TrainSample& sample, const Batch<T>& batch,
                     const NoiseSchedule& sched, std::vector<T>& latents,
                     std::vector<T>& cond) {
  const int F = sample.F, hw = sample.hw(), c = kLatentChannels;
  latents.resize(std::size_t(F) * hw * c);
  for (std::size_t i = 0; i < latents.size(); ++i)
    latents[i] = T(sample.latents[i]);
  for (int f = 0; f < F; ++f) {
    if (!batch.is_target[std::size_t(f)]) continue;
    std::size_t base = std::size_t(f) * hw * c;
    forward_noise(sched, batch.t, latents.data() + base,
                  batch.eps.data() + base, latents.data() + base,
                  std::size_t(hw) * c);
  }
  cond.assign(std::size_t(F) * hw * kCondChannels, T(0));
  for (int f = 0; f < F; ++f)
    for (int p = 0; p < hw; ++p) {
      std::size_t dst = (std::size_t(f) * hw + p) * kCondChannels;
      if (!batch.drop_camera_cond) {
        std::size_t src = (std::size_t(f) * hw + p) * 6;
        for (int k = 0; k < 6; ++k) cond[dst + k] = T(sample.plucker[src + k]);
      }
      cond[dst + 6] = batch.is_target[std::size_t(f)] ? T(0) : T(1);
    }
}

// Masked argmax-agreement precision of the supervised layer, without
// touching gradients.
template <typename T>
double supervised_precision(ToyDenoiser<T>& model,
                            const DenoiserCache<T>& cache,
                            const std::vector<TokenCorrespondence>& corr) {
  std::vector<T> unused;
  return supervised_branch(model, cache, corr, 0.0, LossType::CE, unused)
      .precision;
}

}  // namespace detail

// Deterministic training loop over prepared scenes. Aborts with a diagnostic
// on non-finite loss.
template <typename T>
TrainResult train(ToyDenoiser<T>& model, const std::vector<TrainSample>& data,
                  const NoiseSchedule& sched, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: dataset is empty");
  const int F = model.cfg.F;
  for (const auto& s : data)
    if (s.F != F || s.h != model.cfg.h || s.w != model.cfg.w)
      throw std::invalid_argument("train: sample shape mismatch");

  Rng rng(cfg.seed);
  Rng eval_rng = rng.split();

  // Fixed evaluation probes: scene, timestep and noise frozen up front so
  // checkpoint precision is an exact function of the parameters. Timesteps
  // ladder over the low-noise quarter of the schedule, where attention can
  // still read the content it is matching.
  std::vector<detail::Batch<T>> probes;
  for (int k = 0; k < cfg.eval_probes; ++k) {
    detail::Batch<T> b = detail::draw_batch<T>(
        data[std::size_t(k) % data.size()], int(std::size_t(k) % data.size()),
        sched, 0.0, eval_rng);
    b.t = std::max(1, (k + 1) * sched.T / (4 * std::max(1, cfg.eval_probes)));
    probes.push_back(std::move(b));
  }
  auto eval_checkpoint = [&](void) {
    std::vector<double> vals;
    std::vector<T> latents, cond, eps_hat;
    DenoiserCache<T> cache;
    try {
      for (const auto& probe : probes) {
        const TrainSample& s = data[std::size_t(probe.scene)];
        detail::assemble_inputs(s, probe, sched, latents, cond);
        model.forward(latents, cond, probe.t, eps_hat, cache);
        vals.push_back(detail::supervised_precision(model, cache, s.corr));
      }
    } catch (const std::domain_error& e) {
      throw std::runtime_error(std::string("train: diverged parameters at "
                                           "checkpoint eval: ") +
                               e.what());
    }
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
  };

  RmsProp<T> opt;
  opt.lr = cfg.lr;
  auto params = model.params();
  opt.init(params);

  TrainResult result;
  result.checkpoints.push_back({0, 0.0, eval_checkpoint(), 0.0});

  auto median_of = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };

  std::vector<T> latents, cond, eps_hat;
  DenoiserCache<T> cache;
  std::vector<double> window_denoise, window_precision;
  for (int iter = 1; iter <= cfg.iters; ++iter) {
    int scene = int(rng.below(std::uint64_t(data.size())));
    const TrainSample& sample = data[std::size_t(scene)];
    detail::Batch<T> batch = detail::draw_batch<T>(
        sample, scene, sched, cfg.cfg_drop_prob, rng);
    detail::assemble_inputs(sample, batch, sched, latents, cond);

    TotalLossStats stats;
    try {
      model.zero_grad();
      model.forward(latents, cond, batch.t, eps_hat, cache);
      stats = total_loss(model, cache, eps_hat, batch.eps, batch.is_target,
                         sample.corr, cfg.lambda, cfg.loss_type);
    } catch (const std::domain_error& e) {
      throw std::runtime_error("train: diverged at iteration " +
                               std::to_string(iter) + ": " + e.what());
    }
    if (!std::isfinite(stats.total))
      throw std::runtime_error(
          "train: non-finite loss at iteration " + std::to_string(iter) +
          " (denoise=" + std::to_string(stats.denoise) +
          ", cameo=" + std::to_string(stats.cameo) + ")");
    opt.step(params);

    MetricsRow row;
    row.iter = iter;
    row.loss_denoise = stats.denoise;
    row.loss_cameo = stats.cameo;
    row.precision = stats.precision;
    result.metrics.push_back(row);
    window_denoise.push_back(stats.denoise);
    window_precision.push_back(stats.precision);

    if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0) {
      result.checkpoints.push_back({iter, median_of(window_precision),
                                    eval_checkpoint(),
                                    median_of(window_denoise)});
      window_denoise.clear();
      window_precision.clear();
    }
  }
  return result;
}

}  // namespace cameo
