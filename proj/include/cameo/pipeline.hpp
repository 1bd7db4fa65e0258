#pragma once

#include <filesystem>
#include <string>

#include "cameo/checkpoint.hpp"
#include "cameo/report.hpp"
#include "cameo/sampler.hpp"
#include "cameo/train.hpp"

namespace cameo {

// Everything a full experiment needs, pinned by a named preset.
struct PipelineConfig {
  std::string preset = "tiny";
  std::uint64_t seed = 0;
  int precision_bits = 32;

  int scenes = 2;
  int views = 2;
  double spread_deg = 75.0;
  int token_h = 16, token_w = 16;
  int render_scale = 4;
  int d = 32, heads = 4, blocks = 2;
  int supervised_layer = 1;  // last block of the tiny stack; see README
  int schedule_steps = 1000;
  int iters = 2000;
  double lambda = 0.02;
  double tau = 1.5;
  double lr = 2e-3;
  double cfg_drop_prob = 0.1;
  int checkpoint_every = 200;

  DenoiserConfig model_config() const {
    DenoiserConfig mc;
    mc.F = views;
    mc.h = token_h;
    mc.w = token_w;
    mc.d = d;
    mc.heads = heads;
    mc.blocks = blocks;
    mc.supervised_layer = supervised_layer;
    mc.latent_channels = kLatentChannels;
    mc.schedule_steps = schedule_steps;
    return mc;
  }
  TrainConfig train_config(double lambda_override) const {
    TrainConfig tc;
    tc.lambda = lambda_override;
    tc.tau = tau;
    tc.cfg_drop_prob = cfg_drop_prob;
    tc.iters = iters;
    tc.lr = lr;
    tc.seed = seed;
    tc.checkpoint_every = checkpoint_every;
    return tc;
  }
};

PipelineConfig pipeline_preset(const std::string& name, std::uint64_t seed);
std::string pipeline_config_json(const PipelineConfig& cfg);

// Stage helpers shared with the CLI.
std::filesystem::path run_synth_stage(const PipelineConfig& cfg,
                                      const std::filesystem::path& out_dir);
void run_corr_stage(const std::filesystem::path& scene_dir, int token_h,
                    int token_w, double tau,
                    const std::filesystem::path& out_dir);
std::vector<TrainSample> load_samples(const std::filesystem::path& scenes_dir,
                                      int token_h, int token_w, double tau,
                                      int render_scale);

// Paired two-arm training (lambda vs 0) with identical seeds and data.
template <typename T>
struct PipelineArms {
  ToyDenoiser<T> cameo_model, baseline_model;
  TrainResult cameo, baseline;
};

template <typename T>
PipelineArms<T> run_training_arms(const PipelineConfig& cfg,
                                  const std::vector<TrainSample>& samples) {
  NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule_steps);
  PipelineArms<T> arms;
  {
    Rng init(cfg.seed);
    arms.cameo_model.init(cfg.model_config(), init);
  }
  {
    Rng init(cfg.seed);
    arms.baseline_model.init(cfg.model_config(), init);
  }
  arms.cameo = train(arms.cameo_model, samples, sched,
                     cfg.train_config(cfg.lambda));
  arms.baseline = train(arms.baseline_model, samples, sched,
                        cfg.train_config(0.0));
  return arms;
}

struct PipelineSummary {
  double cameo_final_precision = 0;
  double baseline_final_precision = 0;
  double precision_gap = 0;
  bool cameo_monotone = false;
  double denoise_ratio = 0;  // cameo / baseline, final-window medians
};

PipelineSummary summarize_arms(const TrainResult& cameo,
                               const TrainResult& baseline);
std::string pipeline_report_json(const PipelineConfig& cfg,
                                 const PipelineSummary& summary,
                                 const TrainResult& cameo,
                                 const TrainResult& baseline);

// Full experiment: synth -> corr -> paired training -> report + charts.
// Returns the summary; writes config.json, metrics.csv, report.json,
// curves.svg and both checkpoints under out_dir.
PipelineSummary run_pipeline(const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir);

}  // namespace cameo
