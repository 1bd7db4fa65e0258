// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy criteria reuse one pipeline run where possible.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>

#include "cameo/pipeline.hpp"

#include "oracle_helpers.hpp"

using namespace cameo;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double elapsed_s(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria 1 + 2: correspondence oracle equivalence and mask monotonicity.

void criteria_1_2() {
  auto t0 = clk::now();
  SceneSetSpec spec;
  spec.num_scenes = 20;
  spec.num_views = 4;
  spec.spread_deg = 120;
  Rng rng(0);
  auto scenes = generate_scene_set(spec, rng);

  const int grid = 32, render = 128;
  const double inf = std::numeric_limits<double>::infinity();
  long agree = 0, total = 0;
  long mono_violations = 0;

  for (const auto& sc : scenes) {
    std::vector<TokenGrid> grids;
    for (std::size_t v = 0; v < sc.cameras.size(); ++v)
      grids.push_back(
          token_grid(render_pointmap(sc, int(v), render, render), grid, grid));
    auto c15 = correspondence_set(grids, 1.5);
    auto c30 = correspondence_set(grids, 3.0);
    auto cinf = correspondence_set(grids, inf);

    for (std::size_t p = 0; p < c15.size(); ++p) {
      const TokenCorrespondence& tc = c15[p];
      const Camera& cam_j = sc.cameras[std::size_t(tc.view_j)];
      const TokenGrid& gi = grids[std::size_t(tc.view_i)];
      for (int q = 0; q < tc.count(); ++q) {
        // Table 2(d) mask nesting across tau = 1.5, 3, inf.
        if (c15[p].mask[std::size_t(q)] > c30[p].mask[std::size_t(q)] ||
            c30[p].mask[std::size_t(q)] > cinf[p].mask[std::size_t(q)])
          ++mono_violations;

        if (!tc.mask[std::size_t(q)]) continue;
        ++total;
        double u, v;
        if (!cam_j.project(gi.point(q), u, v)) continue;  // disagrees
        int tr = int(std::lround(v * grid / cam_j.height - 0.5));
        int tcc = int(std::lround(u * grid / cam_j.width - 0.5));
        if (tr < 0 || tr >= grid || tcc < 0 || tcc >= grid) continue;
        if (tr * grid + tcc == tc.match[std::size_t(q)]) ++agree;
      }
    }
  }
  double rate = total ? double(agree) / double(total) : 0.0;
  double secs = elapsed_s(t0);
  report(1, rate >= 0.99 && secs <= 120,
         fmt("3D-NN vs projection oracle agreement %.4f on %ld masked tokens "
             "(>= 0.99), %.1fs (<= 120s)",
             rate, total, secs));
  report(2, mono_violations == 0,
         fmt("mask coverage nesting tau 1.5 <= 3 <= inf: %ld violations",
             mono_violations));
}

// ---------------------------------------------------------------------------
// Criterion 3: probe sanity.

Scene sphere_pair_scene(double radius, double theta_deg, Rng& rng) {
  Scene sc;
  sc.name = "probe";
  sc.spheres.push_back({{0, 0, 0}, radius, 0.9});
  double az0 = rng.uniform(0, 2 * M_PI);
  Vec3 u0 = normalized(Vec3{std::cos(az0), rng.uniform(-0.2, 0.2),
                            std::sin(az0)});
  Vec3 n = normalized(cross(u0, Vec3{0, 1, 0}));
  double dist = radius * 3.2;
  double f = 64.0 * dist / (radius * 1.25);
  sc.cameras.push_back(
      make_lookat_camera(u0 * dist, {0, 0, 0}, n, f, f, 128, 128));
  Vec3 u1 = Mat3::axis_angle(n, theta_deg * M_PI / 180.0) * u0;
  sc.cameras.push_back(
      make_lookat_camera(u1 * dist, {0, 0, 0}, n, f, f, 128, 128));
  return sc;
}

void criterion_3() {
  const int grid = 128, render = 256;
  Rng rng(0);
  std::vector<ProbePair> pairs;
  Rng shuffle_rng(123);

  for (double theta : {12.0, 24.0, 38.0, 52.0, 66.0, 82.0, 97.0, 112.0}) {
    Scene sc = sphere_pair_scene(rng.uniform(0.10, 0.15), theta, rng);
    ProbePair p;
    p.theta_deg = relative_rotation_deg(sc.cameras[0], sc.cameras[1]);
    p.h = p.w = grid;
    p.geom_a = token_grid(render_pointmap(sc, 0, render, render), grid, grid);
    p.geom_b = token_grid(render_pointmap(sc, 1, render, render), grid, grid);
    p.feat_dim = 3;
    p.feat_a = oracle::visible_features(sc, 0, 1, p.geom_a);
    p.feat_b = oracle::visible_features(sc, 1, 0, p.geom_b);
    pairs.push_back(std::move(p));
  }

  PrecisionReport rep =
      evaluate_pairs(pairs, ProbeSource::Features, MatchMetric::L2, 1000, 0.02);

  bool bins_ok = rep.per_bin.size() == 4 && rep.per_bin.count("0-30") &&
                 rep.per_bin.count("30-60") && rep.per_bin.count("60-90") &&
                 rep.per_bin.count("90-120");

  // Uniformly random matches on the same >= 0.2 m objects.
  double random_prec_max = 0;
  for (auto& p : pairs) {
    auto cands =
        match_descriptors(p.feat_a, p.feat_b, grid * grid, 3, MatchMetric::L2);
    for (auto& c : cands)
      c.dst_token = int(shuffle_rng.below(std::uint64_t(grid) * grid));
    auto top = select_top(std::move(cands), 1000);
    random_prec_max =
        std::max(random_prec_max, score_matches(top, p.geom_a, p.geom_b, 0.02));
  }

  std::string bins;
  for (const auto& [label, v] : rep.per_bin)
    bins += fmt(" %s=%.3f", label.c_str(), v);
  report(3,
         rep.overall >= 0.99 && random_prec_max <= 0.05 && bins_ok,
         fmt("oracle features overall %.4f (>= 0.99), random floor %.4f "
             "(<= 0.05), bins:%s",
             rep.overall, random_prec_max, bins.c_str()));
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient exactness at the tiny shape.

template <typename T>
struct GradSetup {
  ToyDenoiser<T> model;
  TrainSample sample;
  NoiseSchedule sched = NoiseSchedule::linear(60);
  std::vector<T> latents, cond, eps, eps_hat;
  std::vector<std::uint8_t> is_target;
  int t = 23;

  explicit GradSetup(std::uint64_t seed) {
    PipelineConfig cfg = pipeline_preset("tiny", seed);
    DenoiserConfig mc = cfg.model_config();
    mc.schedule_steps = 60;
    Rng r(seed);
    model.init(mc, r);
    SceneSetSpec spec;
    spec.num_scenes = 1;
    spec.num_views = 2;
    spec.spread_deg = 90;
    Rng sr(seed + 7);
    Scene sc = generate_scene_set(spec, sr)[0];
    sample = prepare_sample(sc, mc.h, mc.w, 1.5, 4);

    is_target = {0, 1};
    const int hw = mc.hw(), c = mc.latent_channels;
    eps.assign(std::size_t(2) * hw * c, T(0));
    Rng nr(seed + 13);
    for (int i = hw * c; i < 2 * hw * c; ++i)
      eps[std::size_t(i)] = T(nr.normal());
    detail::Batch<T> batch;
    batch.scene = 0;
    batch.t = t;
    batch.is_target = is_target;
    batch.eps = eps;
    detail::assemble_inputs(sample, batch, sched, latents, cond);
  }

  double loss(double lambda, LossType type) {
    DenoiserCache<T> cache;
    model.forward(latents, cond, t, eps_hat, cache);
    double l = denoise_loss(eps_hat, eps, is_target, 2, model.cfg.hw(),
                            model.cfg.latent_channels,
                            static_cast<std::vector<T>*>(nullptr));
    std::vector<T> unused;
    return l + lambda *
                   supervised_branch(model, cache, sample.corr, 0.0, type,
                                     unused)
                       .cameo;
  }

  double max_tensor_error(double lambda, LossType type, double h,
                          std::uint64_t dir_seed) {
    model.zero_grad();
    DenoiserCache<T> cache;
    model.forward(latents, cond, t, eps_hat, cache);
    total_loss(model, cache, eps_hat, eps, is_target, sample.corr, lambda,
               type);
    auto params = model.params();
    std::vector<std::vector<T>> grads;
    for (auto* p : params) grads.push_back(p->g);

    Rng rng(dir_seed);
    double worst = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Param<T>& p = *params[pi];
      std::vector<double> dir(p.w.size());
      double nrm = 0;
      for (auto& v : dir) {
        v = rng.normal();
        nrm += v * v;
      }
      nrm = std::sqrt(nrm);
      double analytic = 0;
      for (std::size_t i = 0; i < dir.size(); ++i) {
        dir[i] /= nrm;
        analytic += dir[i] * double(grads[pi][i]);
      }
      std::vector<T> saved = p.w;
      for (std::size_t i = 0; i < dir.size(); ++i)
        p.w[i] = T(double(saved[i]) + h * dir[i]);
      double up = loss(lambda, type);
      for (std::size_t i = 0; i < dir.size(); ++i)
        p.w[i] = T(double(saved[i]) - h * dir[i]);
      double dn = loss(lambda, type);
      p.w = saved;
      worst = std::max(worst, oracle::rel_err(analytic, (up - dn) / (2 * h)));
    }
    return worst;
  }
};

// Standalone attention element-wise check (small shape).
template <typename T>
double attention_unit_error(std::uint64_t seed, double h) {
  AttentionConfig cfg{2, 1, 3, 6, 2, 0};
  AttentionParams<T> p;
  Rng rng(seed);
  p.init(6, rng, "a.");
  for (auto* prm : {&p.bq, &p.bk, &p.bv, &p.bo})
    for (auto& v : prm->w) v = T(rng.normal() * 0.1);
  std::vector<T> x(std::size_t(cfg.seq()) * cfg.d);
  for (auto& v : x) v = T(rng.normal());
  std::vector<double> w(x.size());
  for (auto& v : w) v = rng.normal();

  auto loss = [&]() {
    AttentionCache<T> cache;
    std::vector<T> out(x.size());
    attention_block_forward(cfg, p, x.data(), out.data(), cache);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * double(out[i]);
    return s;
  };
  AttentionCache<T> cache;
  std::vector<T> out(x.size());
  attention_block_forward(cfg, p, x.data(), out.data(), cache);
  std::vector<T> d_out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d_out[i] = T(w[i]);
  std::vector<T> d_x(x.size(), T(0));
  attention_block_backward(cfg, p, cache, d_out.data(), d_x.data());

  double worst = 0;
  for (auto* prm : p.params())
    for (std::size_t i = 0; i < prm->w.size(); ++i) {
      T saved = prm->w[i];
      prm->w[i] = T(double(saved) + h);
      double up = loss();
      prm->w[i] = T(double(saved) - h);
      double dn = loss();
      prm->w[i] = saved;
      worst = std::max(worst,
                       oracle::rel_err(double(prm->g[i]), (up - dn) / (2 * h)));
    }
  return worst;
}

void criterion_4() {
  auto t0 = clk::now();
  double worst32 = 0, worst64 = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    {
      GradSetup<double> gs(seed);
      worst64 = std::max(worst64,
                         gs.max_tensor_error(0.02, LossType::CE, 1e-5, seed));
      worst64 = std::max(worst64,
                         gs.max_tensor_error(0.02, LossType::L1, 1e-5, seed));
      worst64 = std::max(worst64,
                         gs.max_tensor_error(0.0, LossType::CE, 1e-5, seed));
    }
    {
      GradSetup<float> gs(seed);
      worst32 = std::max(worst32,
                         gs.max_tensor_error(0.02, LossType::CE, 1e-2, seed));
      worst32 = std::max(worst32,
                         gs.max_tensor_error(0.02, LossType::L1, 1e-2, seed));
    }
    worst64 = std::max(worst64, attention_unit_error<double>(seed, 1e-5));
    worst32 = std::max(worst32, attention_unit_error<float>(seed, 1e-2));
  }
  double secs = elapsed_s(t0);
  report(4, worst32 <= 1e-3 && worst64 <= 1e-6 && secs <= 60,
         fmt("finite differences: max rel err %.2e @32-bit (<= 1e-3), %.2e "
             "@64-bit (<= 1e-6), %.1fs (<= 60s)",
             worst32, worst64, secs));
}

// ---------------------------------------------------------------------------
// Criterion 5: diffusion identities.

void criterion_5() {
  NoiseSchedule s = NoiseSchedule::linear(500);
  Rng rng(5);
  double worst_rt = 0, worst_ddim = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int t = 2 + int(rng.below(499));
    int t_prev = int(rng.below(std::uint64_t(t)));
    const int n = 16;
    std::vector<double> x0(n), eps(n), xt(n), back(n), stepped(n), direct(n);
    for (auto& v : x0) v = rng.normal();
    for (auto& v : eps) v = rng.normal();
    forward_noise(s, t, x0.data(), eps.data(), xt.data(), n);
    predict_x0(s, t, xt.data(), eps.data(), back.data(), n);
    for (int i = 0; i < n; ++i)
      worst_rt = std::max(worst_rt, std::abs(back[std::size_t(i)] -
                                             x0[std::size_t(i)]));
    ddim_step(s, t, t_prev, xt.data(), eps.data(), stepped.data(), n);
    forward_noise(s, t_prev, x0.data(), eps.data(), direct.data(), n);
    for (int i = 0; i < n; ++i)
      worst_ddim = std::max(worst_ddim, std::abs(stepped[std::size_t(i)] -
                                                 direct[std::size_t(i)]));
  }
  report(5, worst_rt <= 1e-6 && worst_ddim <= 1e-6,
         fmt("round-trip err %.2e, ddim-vs-forward err %.2e (both <= 1e-6, "
             "100 tuples)",
             worst_rt, worst_ddim));
}

// ---------------------------------------------------------------------------
// Criterion 8: structural fuzz.

void criterion_8() {
  Rng rng(8);
  long violations = 0;
  fs::path dir = fs::temp_directory_path() / "cameo_acceptance" / "fuzz";
  fs::create_directories(dir);

  for (int c = 0; c < 400; ++c) {
    // Row-stochasticity of pair-normalized projections on random logits.
    int hw = 2 + int(rng.below(7));
    int heads = 1 + int(rng.below(4));
    ProjectionHead<double> head;
    head.init(heads, rng);
    for (auto& v : head.w2.w) v = rng.normal() * 0.2;
    std::vector<double> pl(std::size_t(hw) * hw * heads);
    for (auto& v : pl) v = rng.normal() * 3;
    auto probs = project_and_normalize(head, pl, hw,
                                       (ProjectionCache<double>*)nullptr);
    for (int r = 0; r < hw; ++r) {
      double sum = 0;
      for (int j = 0; j < hw; ++j) {
        double v = probs[std::size_t(r) * hw + j];
        if (v < 0) ++violations;
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-6) ++violations;
    }
  }

  for (int c = 0; c < 300; ++c) {
    // One-hot rows of random correspondences.
    int h = 1 + int(rng.below(5)), w = 1 + int(rng.below(5));
    int n = h * w;
    TokenCorrespondence tc;
    tc.h = h;
    tc.w = w;
    tc.tau = 1.5;
    tc.match.resize(std::size_t(n));
    tc.mask.resize(std::size_t(n));
    for (int q = 0; q < n; ++q) {
      tc.match[std::size_t(q)] = int(rng.below(std::uint64_t(n)));
      tc.mask[std::size_t(q)] = rng.uniform() < 0.6 ? 1 : 0;
    }
    auto onehot = tc.onehot();
    for (int q = 0; q < n; ++q) {
      int sum = 0;
      for (int j = 0; j < n; ++j) sum += onehot[std::size_t(q) * n + j];
      int expect = tc.mask[std::size_t(q)] ? 1 : 0;
      if (sum != expect) ++violations;
    }
  }

  for (int c = 0; c < 300; ++c) {
    // TensorFile round trips across dtypes and shapes.
    int rank = 1 + int(rng.below(3));
    std::vector<std::uint64_t> dims;
    for (int r = 0; r < rank; ++r) dims.push_back(1 + rng.below(6));
    fs::path p = dir / ("fuzz_" + std::to_string(c) + ".camt");
    int dtype = int(rng.below(3));
    if (dtype == 0) {
      Tensor<float> t(dims);
      for (auto& v : t.data) v = float(rng.normal());
      save_tensor(p, t);
      if (load_tensor<float>(p).data != t.data) ++violations;
    } else if (dtype == 1) {
      Tensor<double> t(dims);
      for (auto& v : t.data) v = rng.normal();
      save_tensor(p, t);
      if (load_tensor<double>(p).data != t.data) ++violations;
    } else {
      Tensor<std::uint8_t> t(dims);
      for (auto& v : t.data) v = std::uint8_t(rng.below(256));
      save_tensor(p, t);
      if (load_tensor<std::uint8_t>(p).data != t.data) ++violations;
    }
  }

  report(8, violations == 0,
         fmt("structural fuzz over 1000 cases: %ld violations", violations));
}

// ---------------------------------------------------------------------------
// Criteria 6 + 7 + 9: paired training, perturbation, determinism.

void criteria_6_7_9() {
  fs::path base = fs::temp_directory_path() / "cameo_acceptance";
  fs::remove_all(base / "run_a");
  fs::remove_all(base / "run_b");
  PipelineConfig cfg = pipeline_preset("tiny", 0);

  auto t0 = clk::now();
  PipelineSummary sum = run_pipeline(cfg, base / "run_a");
  double secs = elapsed_s(t0);
  report(6,
         sum.precision_gap >= 0.10 && sum.cameo_monotone &&
             sum.denoise_ratio <= 1.10 && secs <= 900,
         fmt("precision gap %.3f (>= 0.10), monotone medians %s, denoise "
             "ratio %.3f (<= 1.10), %.0fs (<= 900s)",
             sum.precision_gap, sum.cameo_monotone ? "yes" : "no",
             sum.denoise_ratio, secs));

  // Criterion 7: identity perturbation on the trained lambda=0.02 model.
  {
    ToyDenoiser<float> model =
        load_checkpoint<float>(base / "run_a" / "checkpoints" / "cameo");
    auto samples = load_samples(base / "run_a" / "scenes", cfg.token_h,
                                cfg.token_w, cfg.tau, cfg.render_scale);
    NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule_steps);

    bool ce_ok = true;
    bool floor_ok = true;
    int evaluated = 0;
    for (std::size_t si = 0; si < samples.size(); ++si) {
      const TrainSample& s = samples[si];
      for (int t : {60, 140, 250}) {
        detail::Batch<float> b;
        b.scene = int(si);
        b.t = t;
        b.is_target.assign(std::size_t(s.F), 0);
        b.is_target.back() = 1;
        const int hw = s.hw(), c = kLatentChannels;
        b.eps.assign(std::size_t(s.F) * hw * c, 0.f);
        Rng nr(900 + si * 7 + std::uint64_t(t));
        for (int f = 0; f < s.F; ++f)
          if (b.is_target[std::size_t(f)])
            for (int i = 0; i < hw * c; ++i)
              b.eps[std::size_t(f) * hw * c + i] = float(nr.normal());
        std::vector<float> latents, cond, eps_hat;
        detail::assemble_inputs(s, b, sched, latents, cond);

        DenoiserCache<float> cache, cache_p;
        model.forward(latents, cond, b.t, eps_hat, cache);
        model.forward(latents, cond, b.t, eps_hat, cache_p,
                      model.cfg.supervised());
        auto pre = supervised_pair_maps(model, cache);
        auto post = supervised_pair_maps(model, cache_p);

        for (std::size_t p = 0; p < s.corr.size(); ++p) {
          const TokenCorrespondence& tc = s.corr[p];
          double mask_n = 0, self_hits = 0;
          double ce_pre = 0, ce_post = 0, hits_post = 0;
          for (int q = 0; q < tc.count(); ++q) {
            if (!tc.mask[std::size_t(q)]) continue;
            mask_n += 1;
            int target = tc.match[std::size_t(q)];
            if (target == q) self_hits += 1;
            const float* row_pre =
                pre[p].probs.data() + std::size_t(q) * tc.count();
            const float* row_post =
                post[p].probs.data() + std::size_t(q) * tc.count();
            ce_pre -= std::log(std::max(1e-12, double(row_pre[target])));
            ce_post -= std::log(std::max(1e-12, double(row_post[target])));
            int amax = 0;
            for (int j = 1; j < tc.count(); ++j)
              if (row_post[j] > row_post[amax]) amax = j;
            if (amax == target) hits_post += 1;
          }
          if (mask_n == 0) continue;
          ++evaluated;
          if (!(ce_post > ce_pre)) ce_ok = false;
          if (hits_post != self_hits) floor_ok = false;  // self-match floor
        }
      }
    }
    report(7, ce_ok && floor_ok && evaluated > 0,
           fmt("identity perturbation over %d pair evals: masked CE strictly "
               "increased %s, precision at the self-match floor %s",
               evaluated, ce_ok ? "yes" : "no", floor_ok ? "yes" : "no"));
  }

  // Criterion 9: rerun byte-identical.
  {
    run_pipeline(cfg, base / "run_b");
    bool same_metrics = read_text_file(base / "run_a" / "metrics.csv") ==
                        read_text_file(base / "run_b" / "metrics.csv");
    bool same_report = read_text_file(base / "run_a" / "report.json") ==
                       read_text_file(base / "run_b" / "report.json");
    report(9, same_metrics && same_report,
           fmt("pipeline rerun: metrics.csv byte-identical %s, report.json "
               "byte-identical %s",
               same_metrics ? "yes" : "no", same_report ? "yes" : "no"));
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  auto t0 = clk::now();
  criteria_1_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_8();
  criteria_6_7_9();
  std::printf("total: %.0fs, %d failure(s)\n", elapsed_s(t0), g_failures);
  return g_failures == 0 ? 0 : 1;
}
