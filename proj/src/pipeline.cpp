#include "cameo/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cameo {

PipelineConfig pipeline_preset(const std::string& name, std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.preset = name;
  cfg.seed = seed;
  if (name == "tiny") {
    // Defaults above are the tiny preset.
  } else if (name == "small") {
    cfg.scenes = 6;
    cfg.views = 4;
    cfg.d = 48;
    cfg.blocks = 3;
    cfg.supervised_layer = -1;  // penultimate
    cfg.iters = 4000;
    cfg.checkpoint_every = 400;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return cfg;
}

std::string pipeline_config_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["precision_bits"] = cfg.precision_bits;
  j["scenes"] = cfg.scenes;
  j["views"] = cfg.views;
  j["spread_deg"] = cfg.spread_deg;
  j["tokens"] = {cfg.token_h, cfg.token_w};
  j["render_scale"] = cfg.render_scale;
  j["d"] = cfg.d;
  j["heads"] = cfg.heads;
  j["blocks"] = cfg.blocks;
  j["schedule_steps"] = cfg.schedule_steps;
  j["iters"] = cfg.iters;
  j["lambda"] = cfg.lambda;
  j["tau"] = cfg.tau;
  j["lr"] = cfg.lr;
  j["cfg_drop_prob"] = cfg.cfg_drop_prob;
  j["checkpoint_every"] = cfg.checkpoint_every;
  return j.dump(2);
}

std::filesystem::path run_synth_stage(const PipelineConfig& cfg,
                                      const std::filesystem::path& out_dir) {
  std::filesystem::path scenes_dir = out_dir / "scenes";
  SceneSetSpec spec;
  spec.num_scenes = cfg.scenes;
  spec.num_views = cfg.views;
  spec.spread_deg = cfg.spread_deg;
  Rng rng(cfg.seed);
  std::vector<Scene> scenes = generate_scene_set(spec, rng);
  const int H = cfg.token_h * cfg.render_scale;
  const int W = cfg.token_w * cfg.render_scale;
  for (const auto& sc : scenes) save_scene_dir(sc, scenes_dir / sc.name, H, W);
  return scenes_dir;
}

void run_corr_stage(const std::filesystem::path& scene_dir, int token_h,
                    int token_w, double tau,
                    const std::filesystem::path& out_dir) {
  // Consumes pointmap TensorFiles, so externally produced pointmaps drop in
  // unchanged.
  std::vector<TokenGrid> grids;
  for (int v = 0;; ++v) {
    std::filesystem::path p =
        scene_dir / (std::to_string(v) + ".pointmap.camt");
    if (!std::filesystem::exists(p)) break;
    Tensor<double> t = load_tensor<double>(p);
    if (t.dims.size() != 3 || t.dims[2] != 3)
      throw std::invalid_argument("pointmap tensor must be H x W x 3: " +
                                  p.string());
    Pointmap pm;
    pm.h = int(t.dims[0]);
    pm.w = int(t.dims[1]);
    pm.values = std::move(t.data);
    pm.valid.assign(std::size_t(pm.h) * pm.w, 0);
    for (int i = 0; i < pm.h * pm.w; ++i)
      pm.valid[std::size_t(i)] = std::isfinite(pm.values[std::size_t(i) * 3])
                                     ? 1
                                     : 0;
    grids.push_back(token_grid(pm, token_h, token_w));
  }
  if (grids.size() < 2)
    throw std::invalid_argument("corr: need >= 2 pointmap views in " +
                                scene_dir.string());

  std::vector<TokenCorrespondence> corr = correspondence_set(grids, tau);
  std::filesystem::create_directories(out_dir);
  nlohmann::json index;
  index["tokens"] = {token_h, token_w};
  index["tau"] = tau;
  index["pairs"] = nlohmann::json::array();
  for (const auto& tc : corr) {
    std::string suffix =
        std::to_string(tc.view_i) + "_" + std::to_string(tc.view_j);
    std::uint64_t n = std::uint64_t(tc.count());
    Tensor<std::uint8_t> p({n, n}, tc.onehot());
    save_tensor(out_dir / ("P_" + suffix + ".camt"), p);
    Tensor<std::uint8_t> m({n}, tc.mask);
    save_tensor(out_dir / ("M_" + suffix + ".camt"), m);
    double coverage = 0;
    for (auto v : tc.mask) coverage += v;
    index["pairs"].push_back({{"i", tc.view_i},
                              {"j", tc.view_j},
                              {"P", "P_" + suffix + ".camt"},
                              {"M", "M_" + suffix + ".camt"},
                              {"mask_coverage", coverage / double(n)}});
  }
  write_text_file(out_dir / "index.json", index.dump(2));
}

std::vector<TrainSample> load_samples(const std::filesystem::path& scenes_dir,
                                      int token_h, int token_w, double tau,
                                      int render_scale) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(scenes_dir))
    if (e.is_directory() &&
        std::filesystem::exists(e.path() / "scene.json"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw std::invalid_argument("no scene directories under " +
                                scenes_dir.string());
  std::vector<TrainSample> samples;
  for (const auto& d : dirs) {
    Scene sc = load_scene_dir(d);
    samples.push_back(
        prepare_sample(sc, token_h, token_w, tau, render_scale));
  }
  return samples;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

PipelineSummary summarize_arms(const TrainResult& cameo,
                               const TrainResult& baseline) {
  PipelineSummary s;
  if (cameo.checkpoints.empty() || baseline.checkpoints.empty())
    throw std::invalid_argument("summarize_arms: missing checkpoints");
  s.cameo_final_precision = cameo.checkpoints.back().precision_median;
  s.baseline_final_precision = baseline.checkpoints.back().precision_median;
  s.precision_gap = s.cameo_final_precision - s.baseline_final_precision;

  s.cameo_monotone = true;
  for (std::size_t i = 1; i < cameo.checkpoints.size(); ++i)
    if (cameo.checkpoints[i].precision_median <
        cameo.checkpoints[i - 1].precision_median)
      s.cameo_monotone = false;

  // Final denoise level: median over the last checkpoint window.
  auto window_median = [](const TrainResult& r) {
    if (r.checkpoints.size() >= 2 && r.checkpoints.back().denoise_median > 0)
      return r.checkpoints.back().denoise_median;
    std::vector<double> tail;
    std::size_t n = r.metrics.size();
    for (std::size_t i = n - std::min<std::size_t>(n, 100); i < n; ++i)
      tail.push_back(r.metrics[i].loss_denoise);
    return median(tail);
  };
  double base = window_median(baseline);
  s.denoise_ratio = base > 0 ? window_median(cameo) / base : 1.0;
  return s;
}

std::string pipeline_report_json(const PipelineConfig& cfg,
                                 const PipelineSummary& summary,
                                 const TrainResult& cameo,
                                 const TrainResult& baseline) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["lambda"] = cfg.lambda;
  auto arm_json = [](const TrainResult& r) {
    nlohmann::json a;
    a["checkpoints"] = nlohmann::json::array();
    for (const auto& c : r.checkpoints)
      a["checkpoints"].push_back({{"iter", c.iter},
                                  {"precision_median", c.precision_median},
                                  {"precision_probe", c.precision_probe},
                                  {"denoise_median", c.denoise_median}});
    return a;
  };
  j["arms"]["cameo"] = arm_json(cameo);
  j["arms"]["baseline"] = arm_json(baseline);
  j["summary"] = {
      {"cameo_final_precision", summary.cameo_final_precision},
      {"baseline_final_precision", summary.baseline_final_precision},
      {"precision_gap", summary.precision_gap},
      {"cameo_precision_monotone", summary.cameo_monotone},
      {"denoise_ratio_cameo_over_baseline", summary.denoise_ratio}};
  return j.dump(2);
}

namespace {

template <typename T>
PipelineSummary run_pipeline_typed(const PipelineConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "config.json", pipeline_config_json(cfg));

  std::filesystem::path scenes_dir;
  try {
    scenes_dir = run_synth_stage(cfg, out_dir);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage synth: ") + e.what());
  }

  std::vector<TrainSample> samples;
  try {
    for (const auto& e : std::filesystem::directory_iterator(scenes_dir))
      if (e.is_directory())
        run_corr_stage(e.path(), cfg.token_h, cfg.token_w, cfg.tau,
                       out_dir / "corr" / e.path().filename());
    samples = load_samples(scenes_dir, cfg.token_h, cfg.token_w, cfg.tau,
                           cfg.render_scale);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage corr: ") + e.what());
  }

  PipelineArms<T> arms;
  try {
    arms = run_training_arms<T>(cfg, samples);
    save_checkpoint(arms.cameo_model, out_dir / "checkpoints" / "cameo");
    save_checkpoint(arms.baseline_model,
                    out_dir / "checkpoints" / "baseline");
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage train: ") + e.what());
  }

  try {
    PipelineSummary summary = summarize_arms(arms.cameo, arms.baseline);
    write_text_file(out_dir / "metrics.csv",
                    paired_metrics_csv(arms.cameo.metrics,
                                       arms.baseline.metrics));
    write_text_file(out_dir / "report.json",
                    pipeline_report_json(cfg, summary, arms.cameo,
                                         arms.baseline));

    ChartSeries prec_c{"cameo", {}, {}}, prec_b{"baseline", {}, {}};
    for (const auto& c : arms.cameo.checkpoints) {
      prec_c.x.push_back(c.iter);
      prec_c.y.push_back(c.precision_median);
    }
    for (const auto& c : arms.baseline.checkpoints) {
      prec_b.x.push_back(c.iter);
      prec_b.y.push_back(c.precision_median);
    }
    ChartSeries den_c{"cameo", {}, {}}, den_b{"baseline", {}, {}};
    int stride = std::max(1, cfg.iters / 100);
    for (const auto& m : arms.cameo.metrics)
      if (m.iter % stride == 0) {
        den_c.x.push_back(m.iter);
        den_c.y.push_back(m.loss_denoise);
      }
    for (const auto& m : arms.baseline.metrics)
      if (m.iter % stride == 0) {
        den_b.x.push_back(m.iter);
        den_b.y.push_back(m.loss_denoise);
      }
    write_text_file(out_dir / "curves.svg",
                    svg_line_chart("supervised-layer precision vs iteration",
                                   "iteration", "precision",
                                   {prec_c, prec_b}));
    write_text_file(out_dir / "loss_curves.svg",
                    svg_line_chart("denoise loss vs iteration", "iteration",
                                   "loss", {den_c, den_b}));
    return summary;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage report: ") + e.what());
  }
}

}  // namespace

PipelineSummary run_pipeline(const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir) {
  if (cfg.precision_bits == 32)
    return run_pipeline_typed<float>(cfg, out_dir);
  if (cfg.precision_bits == 64)
    return run_pipeline_typed<double>(cfg, out_dir);
  throw std::invalid_argument("precision must be 32 or 64");
}

}  // namespace cameo
