#include <omp.h>

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cameo/pipeline.hpp"

namespace {

using namespace cameo;
namespace fs = std::filesystem;

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 0;
  int precision = 32;
};

void write_config(const fs::path& out_dir, const nlohmann::json& j) {
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", j.dump(2));
}

int cmd_synth(const GlobalOpts& g, int scenes, int views, double spread,
              int res_h, int res_w, const std::string& out) {
  SceneSetSpec spec;
  spec.num_scenes = scenes;
  spec.num_views = views;
  spec.spread_deg = spread;
  Rng rng(g.seed);
  auto set = generate_scene_set(spec, rng);
  fs::path dir(out);
  write_config(dir, {{"command", "synth"},
                     {"seed", g.seed},
                     {"scenes", scenes},
                     {"views", views},
                     {"spread_deg", spread},
                     {"res", {res_h, res_w}}});
  for (const auto& sc : set) save_scene_dir(sc, dir / sc.name, res_h, res_w);
  std::cout << "wrote " << set.size() << " scenes to " << out << "\n";
  return 0;
}

int cmd_corr(const GlobalOpts& g, const std::string& scene_dir, int h, int w,
             double tau, const std::string& out) {
  fs::path dir(out);
  write_config(dir, {{"command", "corr"},
                     {"seed", g.seed},
                     {"scene", scene_dir},
                     {"tokens", {h, w}},
                     {"tau", tau}});
  run_corr_stage(scene_dir, h, w, tau, dir);
  std::cout << "wrote correspondence artifacts to " << out << "\n";
  return 0;
}

struct TrainOpts {
  std::string data, out;
  double lambda = 0.02, tau = 1.5, lr = 1e-3, cfg_drop = 0.1;
  int iters = 2000, token_h = 16, token_w = 16, dim = 32, heads = 4,
      blocks = 2, supervised = -1, render_scale = 4, checkpoint_every = 200,
      schedule_steps = 1000;
  std::string loss = "ce";
};

template <typename T>
int run_train_typed(const GlobalOpts& g, const TrainOpts& o) {
  auto samples =
      load_samples(o.data, o.token_h, o.token_w, o.tau, o.render_scale);
  DenoiserConfig mc;
  mc.F = samples.front().F;
  mc.h = o.token_h;
  mc.w = o.token_w;
  mc.d = o.dim;
  mc.heads = o.heads;
  mc.blocks = o.blocks;
  mc.supervised_layer = o.supervised;
  mc.latent_channels = kLatentChannels;
  mc.schedule_steps = o.schedule_steps;

  TrainConfig tc;
  tc.lambda = o.lambda;
  tc.tau = o.tau;
  tc.cfg_drop_prob = o.cfg_drop;
  tc.iters = o.iters;
  tc.lr = o.lr;
  tc.loss_type = o.loss == "l1" ? LossType::L1 : LossType::CE;
  tc.seed = g.seed;
  tc.checkpoint_every = o.checkpoint_every;

  ToyDenoiser<T> model;
  {
    Rng init(g.seed);
    model.init(mc, init);
  }
  NoiseSchedule sched = NoiseSchedule::linear(o.schedule_steps);
  TrainResult res = train(model, samples, sched, tc);

  fs::path dir(o.out);
  write_config(dir, {{"command", "train"},
                     {"seed", g.seed},
                     {"data", o.data},
                     {"lambda", o.lambda},
                     {"tau", o.tau},
                     {"iters", o.iters},
                     {"lr", o.lr},
                     {"loss", o.loss},
                     {"tokens", {o.token_h, o.token_w}},
                     {"d", o.dim},
                     {"heads", o.heads},
                     {"blocks", o.blocks},
                     {"supervised_layer", mc.supervised()},
                     {"cfg_drop_prob", o.cfg_drop},
                     {"precision", g.precision}});
  write_text_file(dir / "metrics.csv", metrics_csv(res.metrics));
  {
    std::string ck = "iter,precision_median,precision_probe,denoise_median\n";
    for (const auto& c : res.checkpoints)
      ck += std::to_string(c.iter) + ',' + format_double(c.precision_median) +
            ',' + format_double(c.precision_probe) + ',' +
            format_double(c.denoise_median) + '\n';
    write_text_file(dir / "checkpoints.csv", ck);
  }
  save_checkpoint(model, dir / "checkpoint");
  std::cout << "trained " << o.iters << " iterations; final precision "
            << format_double(res.checkpoints.back().precision_median) << "\n";
  return 0;
}

struct SampleOpts {
  std::string checkpoint, scene, out, targets;
  int steps = 50;
  double cfg_weight = 2.0;
  double tau = 1.5;
  int render_scale = 4;
};

template <typename T>
int run_sample_typed(const GlobalOpts& g, const SampleOpts& o) {
  ToyDenoiser<T> model = load_checkpoint<T>(o.checkpoint);
  Scene sc = load_scene_dir(o.scene);
  TrainSample sample_data =
      prepare_sample(sc, model.cfg.h, model.cfg.w, o.tau, o.render_scale);
  if (sample_data.F != model.cfg.F)
    throw std::invalid_argument("scene view count does not match checkpoint");

  std::vector<std::uint8_t> is_target(std::size_t(model.cfg.F), 0);
  if (o.targets.empty()) {
    is_target.back() = 1;
  } else {
    std::stringstream ss(o.targets);
    std::string tok;
    while (std::getline(ss, tok, ','))
      is_target.at(std::size_t(std::stoi(tok))) = 1;
  }

  NoiseSchedule sched = NoiseSchedule::linear(model.cfg.schedule_steps);
  Rng rng(g.seed);
  std::vector<T> latents =
      sample(model, sched, sample_data, is_target, o.steps, o.cfg_weight, rng);

  fs::path dir(o.out);
  write_config(dir, {{"command", "sample"},
                     {"seed", g.seed},
                     {"checkpoint", o.checkpoint},
                     {"scene", o.scene},
                     {"steps", o.steps},
                     {"cfg_weight", o.cfg_weight},
                     {"targets", o.targets},
                     {"precision", g.precision}});
  const int hw = model.cfg.hw(), c = model.cfg.latent_channels;
  for (int f = 0; f < model.cfg.F; ++f) {
    Tensor<T> t({std::uint64_t(model.cfg.h), std::uint64_t(model.cfg.w),
                 std::uint64_t(c)});
    std::copy(latents.begin() + std::ptrdiff_t(f) * hw * c,
              latents.begin() + std::ptrdiff_t(f + 1) * hw * c,
              t.data.begin());
    save_tensor(dir / ("view" + std::to_string(f) + ".latent.camt"), t);
  }
  std::cout << "sampled " << model.cfg.F << " views with " << o.steps
            << " steps\n";
  return 0;
}

TokenGrid grid_from_tensor(const fs::path& path) {
  Tensor<double> t = load_tensor<double>(path);
  TokenGrid g;
  if (t.dims.size() == 3 && t.dims[2] == 3) {
    g.h = int(t.dims[0]);
    g.w = int(t.dims[1]);
  } else if (t.dims.size() == 2 && t.dims[1] == 3) {
    g.h = 1;
    g.w = int(t.dims[0]);
  } else {
    throw std::invalid_argument("geometry tensor must be HxWx3: " +
                                path.string());
  }
  g.points = std::move(t.data);
  g.valid.assign(std::size_t(g.h) * g.w, 0);
  for (int i = 0; i < g.count(); ++i)
    g.valid[std::size_t(i)] =
        std::isfinite(g.points[std::size_t(i) * 3]) ? 1 : 0;
  return g;
}

int cmd_probe(const std::string& manifest_path, const std::string& source,
              const std::string& metric, int topk, double rho,
              const std::string& out, int resize_grid) {
  nlohmann::json man = nlohmann::json::parse(read_text_file(manifest_path));
  fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  ProbeSource src = source == "features"   ? ProbeSource::Features
                    : source == "attention" ? ProbeSource::Attention
                                            : ProbeSource::PointmapCoords;
  MatchMetric met =
      metric == "cosine" ? MatchMetric::Cosine : MatchMetric::L2;

  std::vector<ProbePair> pairs;
  for (const auto& pj : man.at("pairs")) {
    ProbePair p;
    p.theta_deg = pj.at("theta_deg").get<double>();
    p.geom_a = grid_from_tensor(resolve(pj.at("geometry_a")));
    p.geom_b = grid_from_tensor(resolve(pj.at("geometry_b")));
    p.h = p.geom_a.h;
    p.w = p.geom_a.w;
    if (src == ProbeSource::Features) {
      Tensor<double> fa = load_tensor<double>(resolve(pj.at("features_a")));
      Tensor<double> fb = load_tensor<double>(resolve(pj.at("features_b")));
      if (fa.dims.size() != 3 || fb.dims.size() != 3)
        throw std::invalid_argument("feature tensors must be H x W x D");
      int fh = int(fa.dims[0]), fw = int(fa.dims[1]), fd = int(fa.dims[2]);
      p.feat_dim = fd;
      if (resize_grid > 0 && (fh != resize_grid || fw != resize_grid)) {
        // Protocol knob: resample both features and scoring geometry to a
        // common grid before matching.
        p.feat_a = resize_bilinear(fa.data, fh, fw, fd, resize_grid,
                                   resize_grid);
        p.feat_b = resize_bilinear(fb.data, int(fb.dims[0]), int(fb.dims[1]),
                                   fd, resize_grid, resize_grid);
        Pointmap pm_a{p.geom_a.h, p.geom_a.w, p.geom_a.points, {}};
        pm_a.valid.assign(std::size_t(p.geom_a.h) * p.geom_a.w, 1);
        Pointmap pm_b{p.geom_b.h, p.geom_b.w, p.geom_b.points, {}};
        pm_b.valid.assign(std::size_t(p.geom_b.h) * p.geom_b.w, 1);
        p.geom_a = token_grid(pm_a, resize_grid, resize_grid);
        p.geom_b = token_grid(pm_b, resize_grid, resize_grid);
        p.h = p.w = resize_grid;
      } else {
        p.feat_a = std::move(fa.data);
        p.feat_b = std::move(fb.data);
      }
    } else if (src == ProbeSource::Attention) {
      Tensor<double> at = load_tensor<double>(resolve(pj.at("attention")));
      p.attention = std::move(at.data);
      if (p.attention.size() !=
          std::size_t(p.h) * p.w * std::size_t(p.h) * p.w)
        throw std::invalid_argument("attention tensor must be hw x hw");
    }
    pairs.push_back(std::move(p));
  }

  PrecisionReport rep = evaluate_pairs(pairs, src, met, topk, rho);
  fs::path dir(out);
  fs::create_directories(dir);
  write_text_file(dir / "report.json", precision_report_json(rep));
  write_text_file(dir / "report.csv", precision_report_csv(rep));
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& [label, v] : rep.per_bin) {
    labels.push_back(label);
    values.push_back(v);
  }
  write_text_file(dir / "bins.svg",
                  svg_bar_chart("precision by rotation bin", labels, values));
  std::cout << "overall precision " << format_double(rep.overall) << " over "
            << rep.pairs_evaluated << " pairs\n";
  return 0;
}

struct PerturbOpts {
  std::string checkpoint, scene, out;
  int layer = -1;
  int t = 250;
  double tau = 1.5;
  int render_scale = 4;
};

template <typename T>
int run_perturb_typed(const GlobalOpts& g, const PerturbOpts& o) {
  ToyDenoiser<T> model = load_checkpoint<T>(o.checkpoint);
  int layer = o.layer >= 0 ? o.layer : model.cfg.supervised();
  if (layer >= model.cfg.blocks)
    throw std::invalid_argument("--layer beyond block count");
  Scene sc = load_scene_dir(o.scene);
  TrainSample sample_data =
      prepare_sample(sc, model.cfg.h, model.cfg.w, o.tau, o.render_scale);

  // Deterministic eval input: last view is the noised target.
  NoiseSchedule sched = NoiseSchedule::linear(model.cfg.schedule_steps);
  detail::Batch<T> batch;
  batch.scene = 0;
  batch.t = o.t;
  batch.is_target.assign(std::size_t(model.cfg.F), 0);
  batch.is_target.back() = 1;
  Rng rng(g.seed);
  const int hw = model.cfg.hw(), c = model.cfg.latent_channels;
  batch.eps.assign(std::size_t(model.cfg.F) * hw * c, T(0));
  for (int f = 0; f < model.cfg.F; ++f)
    if (batch.is_target[std::size_t(f)])
      for (int i = 0; i < hw * c; ++i)
        batch.eps[std::size_t(f) * hw * c + i] = T(rng.normal());
  std::vector<T> latents, cond;
  detail::assemble_inputs(sample_data, batch, sched, latents, cond);

  std::vector<T> eps_hat;
  DenoiserCache<T> cache;
  model.forward(latents, cond, batch.t, eps_hat, cache);
  auto pre = pair_maps_at_layer(model, cache, layer);
  double pre_prec = detail::supervised_precision(model, cache, sample_data.corr);

  DenoiserCache<T> cache_p;
  model.forward(latents, cond, batch.t, eps_hat, cache_p, layer);
  auto post = pair_maps_at_layer(model, cache_p, layer);
  double post_prec =
      detail::supervised_precision(model, cache_p, sample_data.corr);

  fs::path dir(o.out);
  write_config(dir, {{"command", "perturb"},
                     {"seed", g.seed},
                     {"checkpoint", o.checkpoint},
                     {"scene", o.scene},
                     {"layer", layer},
                     {"t", o.t},
                     {"precision", g.precision}});
  auto dump = [&](const std::vector<CrossViewAttention<T>>& maps,
                  const std::string& tag) {
    for (const auto& cv : maps) {
      Tensor<T> t2({std::uint64_t(cv.hw), std::uint64_t(cv.hw)}, cv.probs);
      save_tensor(dir / (tag + "_A_" + std::to_string(cv.view_i) + "_" +
                         std::to_string(cv.view_j) + ".camt"),
                  t2);
    }
  };
  dump(pre, "pre");
  dump(post, "post");
  nlohmann::json summary = {{"layer", layer},
                            {"precision_pre", pre_prec},
                            {"precision_post", post_prec}};
  write_text_file(dir / "summary.json", summary.dump(2));
  std::cout << "layer " << layer << " precision " << format_double(pre_prec)
            << " -> " << format_double(post_prec) << " under perturbation\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& metric_files,
               const std::string& out) {
  if (metric_files.empty())
    throw std::invalid_argument("report: need at least one --metrics file");
  std::vector<ChartSeries> loss_series, prec_series;
  std::string summary = "source,rows,final_loss_denoise,final_precision\n";
  for (const auto& mf : metric_files) {
    auto rows = parse_metrics_csv(read_text_file(mf));
    ChartSeries ls{fs::path(mf).parent_path().filename().string(), {}, {}};
    if (ls.label.empty()) ls.label = fs::path(mf).stem().string();
    ChartSeries ps = ls;
    int stride = std::max(1, int(rows.size()) / 200);
    for (std::size_t i = 0; i < rows.size(); i += std::size_t(stride)) {
      ls.x.push_back(rows[i].iter);
      ls.y.push_back(rows[i].loss_denoise);
      ps.x.push_back(rows[i].iter);
      ps.y.push_back(rows[i].precision);
    }
    summary += ls.label + ',' + std::to_string(rows.size()) + ',' +
               format_double(rows.back().loss_denoise) + ',' +
               format_double(rows.back().precision) + '\n';
    loss_series.push_back(std::move(ls));
    prec_series.push_back(std::move(ps));
  }
  // Render everything before touching the filesystem.
  std::string loss_svg = svg_line_chart("denoise loss vs iteration",
                                        "iteration", "loss", loss_series);
  std::string prec_svg =
      svg_line_chart("supervised-layer precision vs iteration", "iteration",
                     "precision", prec_series);
  fs::path dir(out);
  fs::create_directories(dir);
  write_text_file(dir / "loss.svg", loss_svg);
  write_text_file(dir / "precision.svg", prec_svg);
  write_text_file(dir / "summary.csv", summary);
  std::cout << "wrote charts for " << metric_files.size() << " run(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"correspondence-attention alignment toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads, "thread cap (0 = all cores)");
  app.add_option("--precision", g.precision, "float width: 32 or 64")
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes");
  int s_scenes = 4, s_views = 2, s_res_h = 64, s_res_w = 64;
  double s_spread = 120.0;
  std::string s_out = "out/scenes";
  synth->add_option("--scenes", s_scenes)->capture_default_str();
  synth->add_option("--views", s_views)->capture_default_str();
  synth->add_option("--spread-deg", s_spread)->capture_default_str();
  synth->add_option("--res", [&](const std::vector<std::string>& v) {
    s_res_h = std::stoi(v.at(0));
    s_res_w = std::stoi(v.at(1));
    return true;
  }, "render resolution H W")->expected(2);
  synth->add_option("--out", s_out)->capture_default_str();

  auto* corr = app.add_subcommand("corr", "token correspondences from pointmaps");
  std::string c_scene, c_out = "out/corr";
  int c_h = 16, c_w = 16;
  double c_tau = 1.5;
  corr->add_option("--scene", c_scene, "scene directory")->required();
  corr->add_option("--tokens", [&](const std::vector<std::string>& v) {
    c_h = std::stoi(v.at(0));
    c_w = std::stoi(v.at(1));
    return true;
  }, "token grid h w")->expected(2);
  corr->add_option("--tau", c_tau)->capture_default_str();
  corr->add_option("--out", c_out)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train the toy denoiser");
  TrainOpts t_opts;
  train_cmd->add_option("--data", t_opts.data, "scenes directory")->required();
  train_cmd->add_option("--lambda", t_opts.lambda)->capture_default_str();
  train_cmd->add_option("--tau", t_opts.tau)->capture_default_str();
  train_cmd->add_option("--iters", t_opts.iters)->capture_default_str();
  train_cmd->add_option("--lr", t_opts.lr)->capture_default_str();
  train_cmd->add_option("--loss", t_opts.loss, "ce or l1")
      ->capture_default_str();
  train_cmd->add_option("--tokens", [&](const std::vector<std::string>& v) {
    t_opts.token_h = std::stoi(v.at(0));
    t_opts.token_w = std::stoi(v.at(1));
    return true;
  }, "token grid h w")->expected(2);
  train_cmd->add_option("--dim", t_opts.dim)->capture_default_str();
  train_cmd->add_option("--heads", t_opts.heads)->capture_default_str();
  train_cmd->add_option("--blocks", t_opts.blocks)->capture_default_str();
  train_cmd->add_option("--supervised", t_opts.supervised,
                        "supervised block (-1 = penultimate)");
  train_cmd->add_option("--cfg-drop", t_opts.cfg_drop)->capture_default_str();
  train_cmd->add_option("--render-scale", t_opts.render_scale)
      ->capture_default_str();
  train_cmd->add_option("--out", t_opts.out)->required();

  auto* sample_cmd = app.add_subcommand("sample", "DDIM sampling with CFG");
  SampleOpts sm;
  sample_cmd->add_option("--checkpoint", sm.checkpoint)->required();
  sample_cmd->add_option("--scene", sm.scene)->required();
  sample_cmd->add_option("--steps", sm.steps)->capture_default_str();
  sample_cmd->add_option("--cfg", sm.cfg_weight)->capture_default_str();
  sample_cmd->add_option("--targets", sm.targets,
                         "comma-separated target view indices");
  sample_cmd->add_option("--out", sm.out)->required();

  auto* probe_cmd = app.add_subcommand("probe", "correspondence precision");
  std::string p_pairs, p_source = "pointmap", p_metric = "l2",
              p_out = "out/probe";
  int p_topk = 1000, p_resize = 0;
  double p_rho = 0.02;
  probe_cmd->add_option("--pairs", p_pairs, "pair manifest JSON")->required();
  probe_cmd->add_option("--source", p_source, "features|attention|pointmap")
      ->capture_default_str();
  probe_cmd->add_option("--metric", p_metric, "cosine|l2")
      ->capture_default_str();
  probe_cmd->add_option("--topk", p_topk)->capture_default_str();
  probe_cmd->add_option("--rho", p_rho)->capture_default_str();
  probe_cmd->add_option("--resize-grid", p_resize,
                        "resample feature grids to N x N first");
  probe_cmd->add_option("--out", p_out)->capture_default_str();

  auto* perturb_cmd =
      app.add_subcommand("perturb", "identity-perturb one attention block");
  PerturbOpts pb;
  perturb_cmd->add_option("--checkpoint", pb.checkpoint)->required();
  perturb_cmd->add_option("--layer", pb.layer,
                          "block index (-1 = supervised block)");
  perturb_cmd->add_option("--scene", pb.scene)->required();
  perturb_cmd->add_option("--t", pb.t, "diffusion timestep")
      ->capture_default_str();
  perturb_cmd->add_option("--out", pb.out)->required();

  auto* report_cmd = app.add_subcommand("report", "charts from metrics CSVs");
  std::vector<std::string> r_metrics;
  std::string r_out = "out/report";
  report_cmd->add_option("--metrics", r_metrics, "metrics.csv paths")
      ->required();
  report_cmd->add_option("--out", r_out)->capture_default_str();

  auto* pipe = app.add_subcommand("pipeline", "paired two-arm experiment");
  std::string pl_preset = "tiny", pl_out = "out/pipeline";
  pipe->add_option("--preset", pl_preset, "tiny or small")
      ->capture_default_str();
  pipe->add_option("--out", pl_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (const char* env = std::getenv("CAMEO_THREADS")) g.threads = std::atoi(env);
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (g.precision != 32 && g.precision != 64)
      throw std::invalid_argument("--precision must be 32 or 64");
    if (synth->parsed())
      return cmd_synth(g, s_scenes, s_views, s_spread, s_res_h, s_res_w,
                       s_out);
    if (corr->parsed()) return cmd_corr(g, c_scene, c_h, c_w, c_tau, c_out);
    if (train_cmd->parsed())
      return g.precision == 32 ? run_train_typed<float>(g, t_opts)
                               : run_train_typed<double>(g, t_opts);
    if (sample_cmd->parsed())
      return g.precision == 32 ? run_sample_typed<float>(g, sm)
                               : run_sample_typed<double>(g, sm);
    if (probe_cmd->parsed())
      return cmd_probe(p_pairs, p_source, p_metric, p_topk, p_rho, p_out,
                       p_resize);
    if (perturb_cmd->parsed())
      return g.precision == 32 ? run_perturb_typed<float>(g, pb)
                               : run_perturb_typed<double>(g, pb);
    if (report_cmd->parsed()) return cmd_report(r_metrics, r_out);
    if (pipe->parsed()) {
      PipelineConfig cfg = pipeline_preset(pl_preset, g.seed);
      cfg.precision_bits = g.precision;
      run_pipeline(cfg, pl_out);
      std::cout << "pipeline complete: " << pl_out << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TensorIoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
