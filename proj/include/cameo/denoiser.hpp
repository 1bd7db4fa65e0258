#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cameo/attention.hpp"
#include "cameo/linalg.hpp"

namespace cameo {

// Conditioning channels per token: 6 Plucker + 1 reference-visibility flag.
inline constexpr int kCondChannels = 7;

struct DenoiserConfig {
  int F = 2;
  int h = 16, w = 16;
  int d = 32;
  int heads = 4;
  int blocks = 2;
  int latent_channels = 6;
  int supervised_layer = -1;  // default: penultimate block
  int schedule_steps = 1000;

  int hw() const { return h * w; }
  int seq() const { return F * h * w; }
  int ff_dim() const { return 4 * d; }
  int supervised() const {
    return supervised_layer >= 0 ? supervised_layer
                                 : (blocks >= 2 ? blocks - 2 : 0);
  }
  AttentionConfig attn_config(int layer) const {
    return AttentionConfig{F, h, w, d, heads, layer};
  }
};

template <typename T>
struct BlockParams {
  Param<T> ln1_g, ln1_b;
  AttentionParams<T> attn;
  Param<T> temb_w, temb_b;
  Param<T> ln2_g, ln2_b;
  Param<T> ff1_w, ff1_b, ff2_w, ff2_b;

  void init(const DenoiserConfig& cfg, int index, Rng& rng) {
    const int d = cfg.d, dff = cfg.ff_dim();
    std::string pre = "block" + std::to_string(index) + ".";
    auto gauss = [&](Param<T>& p, const std::string& n, int rows, int cols) {
      p.name = pre + n;
      p.resize(std::size_t(rows) * cols);
      T scale = T(1.0 / std::sqrt(double(rows)));
      for (auto& v : p.w) v = T(rng.normal()) * scale;
    };
    auto fill = [&](Param<T>& p, const std::string& n, int len, T value) {
      p.name = pre + n;
      p.resize(std::size_t(len));
      std::fill(p.w.begin(), p.w.end(), value);
    };
    fill(ln1_g, "ln1_g", d, T(1));
    fill(ln1_b, "ln1_b", d, T(0));
    attn.init(d, rng, pre + "attn.");
    gauss(temb_w, "temb_w", d, d);
    fill(temb_b, "temb_b", d, T(0));
    fill(ln2_g, "ln2_g", d, T(1));
    fill(ln2_b, "ln2_b", d, T(0));
    gauss(ff1_w, "ff1_w", d, dff);
    fill(ff1_b, "ff1_b", dff, T(0));
    gauss(ff2_w, "ff2_w", dff, d);
    fill(ff2_b, "ff2_b", d, T(0));
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out = {&ln1_g, &ln1_b};
    for (auto* p : attn.params()) out.push_back(p);
    for (auto* p : {&temb_w, &temb_b, &ln2_g, &ln2_b, &ff1_w, &ff1_b, &ff2_w,
                    &ff2_b})
      out.push_back(p);
    return out;
  }
};

template <typename T>
struct BlockCache {
  std::vector<T> x_in;  // after timestep add; input of ln1 and residual
  std::vector<T> ln1_out, ln1_mean, ln1_rstd;
  AttentionCache<T> attn;
  std::vector<T> x_mid;  // after attention residual
  std::vector<T> ln2_out, ln2_mean, ln2_rstd;
  std::vector<T> ff_pre, ff_act;  // S x dff
};

template <typename T>
struct DenoiserCache {
  int t = 0;
  std::vector<T> latent_in;  // F*hw x c
  std::vector<T> cond_in;    // F*hw x kCondChannels
  std::vector<T> temb;       // d
  std::vector<BlockCache<T>> blocks;
  std::vector<T> x_final;    // S x d
};

// Stack of pre-LN attention blocks over the concatenated multi-view token
// sequence, predicting the noise added to target-view latents.
template <typename T>
struct ToyDenoiser {
  DenoiserConfig cfg;
  Param<T> embed_w, embed_b;  // c -> d
  Param<T> cond_w, cond_b;    // kCondChannels -> d
  Param<T> pos;               // hw x d, shared across views
  std::vector<BlockParams<T>> blocks;
  Param<T> unembed_w, unembed_b;  // d -> c
  ProjectionHead<T> head;

  void init(const DenoiserConfig& config, Rng& rng) {
    cfg = config;
    const int d = cfg.d, c = cfg.latent_channels;
    auto gauss = [&](Param<T>& p, const std::string& n, int rows, int cols,
                     double scale) {
      p.name = n;
      p.resize(std::size_t(rows) * cols);
      for (auto& v : p.w) v = T(rng.normal() * scale);
    };
    gauss(embed_w, "embed_w", c, d, 1.0 / std::sqrt(double(c)));
    embed_b.name = "embed_b";
    embed_b.resize(std::size_t(d));
    gauss(cond_w, "cond_w", kCondChannels, d,
          1.0 / std::sqrt(double(kCondChannels)));
    cond_b.name = "cond_b";
    cond_b.resize(std::size_t(d));
    gauss(pos, "pos", cfg.hw(), d, 0.02);
    blocks.resize(std::size_t(cfg.blocks));
    for (int b = 0; b < cfg.blocks; ++b)
      blocks[std::size_t(b)].init(cfg, b, rng);
    gauss(unembed_w, "unembed_w", d, c, 1.0 / std::sqrt(double(d)));
    unembed_b.name = "unembed_b";
    unembed_b.resize(std::size_t(c));
    head.init(cfg.heads, rng);
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out = {&embed_w, &embed_b, &cond_w,
                                  &cond_b,  &pos,     &unembed_w,
                                  &unembed_b};
    for (auto& b : blocks)
      for (auto* p : b.params()) out.push_back(p);
    for (auto* p : head.params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  // Sinusoidal timestep embedding, frequency ladder over half the dims.
  std::vector<T> timestep_embedding(int t) const {
    const int d = cfg.d;
    std::vector<T> e(std::size_t(d), T(0));
    int half = d / 2;
    for (int i = 0; i < half; ++i) {
      double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
      double ang = double(t) * freq;
      e[std::size_t(2 * i)] = T(std::sin(ang));
      e[std::size_t(2 * i + 1)] = T(std::cos(ang));
    }
    if (d % 2 == 1) e[std::size_t(d - 1)] = T(0);
    return e;
  }

  // latents: F*hw x c (targets noised, references clean); cond: F*hw x 7.
  // perturb_layer >= 0 forces that block's attention to the identity map.
  void forward(const std::vector<T>& latents, const std::vector<T>& cond,
               int t, std::vector<T>& eps_out, DenoiserCache<T>& cache,
               int perturb_layer = -1) const {
    const int S = cfg.seq(), d = cfg.d, c = cfg.latent_channels;
    const int dff = cfg.ff_dim(), hw = cfg.hw();
    if (latents.size() != std::size_t(S) * c)
      throw std::invalid_argument("denoiser: latent shape mismatch");
    if (cond.size() != std::size_t(S) * kCondChannels)
      throw std::invalid_argument("denoiser: cond shape mismatch");

    cache.t = t;
    cache.latent_in = latents;
    cache.cond_in = cond;
    cache.temb = timestep_embedding(t);
    cache.blocks.assign(std::size_t(cfg.blocks), BlockCache<T>{});

    std::vector<T> x(std::size_t(S) * d, T(0));
    matmul(latents.data(), embed_w.w.data(), x.data(), S, c, d);
    matmul_acc(cond.data(), cond_w.w.data(), x.data(), S, kCondChannels, d);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < S; ++i) {
      T* row = x.data() + std::size_t(i) * d;
      const T* prow = pos.w.data() + std::size_t(i % hw) * d;
      for (int j = 0; j < d; ++j)
        row[j] += embed_b.w[std::size_t(j)] + cond_b.w[std::size_t(j)] +
                  prow[j];
    }

    std::vector<T> buf(std::size_t(S) * d);
    for (int b = 0; b < cfg.blocks; ++b) {
      BlockCache<T>& bc = cache.blocks[std::size_t(b)];
      const BlockParams<T>& bp = blocks[std::size_t(b)];

      std::vector<T> tproj(std::size_t(d), T(0));
      matmul(cache.temb.data(), bp.temb_w.w.data(), tproj.data(), 1, d, d);
      for (int j = 0; j < d; ++j) tproj[std::size_t(j)] += bp.temb_b.w[std::size_t(j)];
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < d; ++j)
          x[std::size_t(i) * d + j] += tproj[std::size_t(j)];
      bc.x_in = x;

      bc.ln1_out.resize(std::size_t(S) * d);
      bc.ln1_mean.resize(std::size_t(S));
      bc.ln1_rstd.resize(std::size_t(S));
      layernorm_forward(x.data(), bp.ln1_g.w.data(), bp.ln1_b.w.data(),
                        bc.ln1_out.data(), bc.ln1_mean.data(),
                        bc.ln1_rstd.data(), S, d);
      attention_block_forward(cfg.attn_config(b), bp.attn, bc.ln1_out.data(),
                              buf.data(), bc.attn, perturb_layer == b);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < d; ++j)
          x[std::size_t(i) * d + j] += buf[std::size_t(i) * d + j];
      bc.x_mid = x;

      bc.ln2_out.resize(std::size_t(S) * d);
      bc.ln2_mean.resize(std::size_t(S));
      bc.ln2_rstd.resize(std::size_t(S));
      layernorm_forward(x.data(), bp.ln2_g.w.data(), bp.ln2_b.w.data(),
                        bc.ln2_out.data(), bc.ln2_mean.data(),
                        bc.ln2_rstd.data(), S, d);
      bc.ff_pre.assign(std::size_t(S) * dff, T(0));
      matmul(bc.ln2_out.data(), bp.ff1_w.w.data(), bc.ff_pre.data(), S, d,
             dff);
      bc.ff_act.resize(std::size_t(S) * dff);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < dff; ++j) {
          T pre = bc.ff_pre[std::size_t(i) * dff + j] + bp.ff1_b.w[std::size_t(j)];
          bc.ff_pre[std::size_t(i) * dff + j] = pre;
          bc.ff_act[std::size_t(i) * dff + j] = gelu_tanh(pre);
        }
      matmul(bc.ff_act.data(), bp.ff2_w.w.data(), buf.data(), S, dff, d);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < d; ++j)
          x[std::size_t(i) * d + j] +=
              buf[std::size_t(i) * d + j] + bp.ff2_b.w[std::size_t(j)];
    }

    cache.x_final = x;
    eps_out.assign(std::size_t(S) * c, T(0));
    matmul(x.data(), unembed_w.w.data(), eps_out.data(), S, d, c);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < c; ++j)
        eps_out[std::size_t(i) * c + j] += unembed_b.w[std::size_t(j)];
  }

  // d_eps: gradient w.r.t. the predicted noise. d_scores_sup, when non-empty,
  // carries the supervised branch's gradient w.r.t. the supervised block's
  // scaled attention scores (heads x S x S).
  void backward(const DenoiserCache<T>& cache, const std::vector<T>& d_eps,
                const std::vector<T>& d_scores_sup) {
    const int S = cfg.seq(), d = cfg.d, c = cfg.latent_channels;
    const int dff = cfg.ff_dim(), hw = cfg.hw();

    std::vector<T> d_x(std::size_t(S) * d, T(0));
    matmul_nt(d_eps.data(), unembed_w.w.data(), d_x.data(), S, c, d);
    matmul_tn_acc(cache.x_final.data(), d_eps.data(), unembed_w.g.data(), S,
                  d, c);
    colsum_acc(d_eps.data(), unembed_b.g.data(), S, c);

    std::vector<T> buf(std::size_t(S) * d);
    std::vector<T> d_hidden(std::size_t(S) * dff);
    for (int b = cfg.blocks - 1; b >= 0; --b) {
      const BlockCache<T>& bc = cache.blocks[std::size_t(b)];
      BlockParams<T>& bp = blocks[std::size_t(b)];

      // FFN residual: d_x flows to both the residual input and the branch.
      matmul_nt(d_x.data(), bp.ff2_w.w.data(), d_hidden.data(), S, d, dff);
      matmul_tn_acc(bc.ff_act.data(), d_x.data(), bp.ff2_w.g.data(), S, dff,
                    d);
      colsum_acc(d_x.data(), bp.ff2_b.g.data(), S, d);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < dff; ++j)
          d_hidden[std::size_t(i) * dff + j] *=
              gelu_tanh_grad(bc.ff_pre[std::size_t(i) * dff + j]);
      matmul_tn_acc(bc.ln2_out.data(), d_hidden.data(), bp.ff1_w.g.data(), S,
                    d, dff);
      colsum_acc(d_hidden.data(), bp.ff1_b.g.data(), S, dff);
      std::fill(buf.begin(), buf.end(), T(0));
      matmul_nt(d_hidden.data(), bp.ff1_w.w.data(), buf.data(), S, dff, d);
      layernorm_backward(bc.x_mid.data(), bp.ln2_g.w.data(),
                         bc.ln2_mean.data(), bc.ln2_rstd.data(), buf.data(),
                         d_x.data(), bp.ln2_g.g.data(), bp.ln2_b.g.data(), S,
                         d);

      // Attention residual.
      std::vector<T> d_ln1(std::size_t(S) * d, T(0));
      const T* extra = (b == cfg.supervised() && !d_scores_sup.empty())
                           ? d_scores_sup.data()
                           : nullptr;
      attention_block_backward(cfg.attn_config(b), bp.attn, bc.attn,
                               d_x.data(), d_ln1.data(), extra);
      layernorm_backward(bc.x_in.data(), bp.ln1_g.w.data(),
                         bc.ln1_mean.data(), bc.ln1_rstd.data(), d_ln1.data(),
                         d_x.data(), bp.ln1_g.g.data(), bp.ln1_b.g.data(), S,
                         d);

      // Timestep projection: broadcast add, gradient is the token sum.
      std::vector<T> d_tproj(std::size_t(d), T(0));
      colsum_acc(d_x.data(), d_tproj.data(), S, d);
      matmul_tn_acc(cache.temb.data(), d_tproj.data(), bp.temb_w.g.data(), 1,
                    d, d);
      for (int j = 0; j < d; ++j)
        bp.temb_b.g[std::size_t(j)] += d_tproj[std::size_t(j)];
    }

    matmul_tn_acc(cache.latent_in.data(), d_x.data(), embed_w.g.data(), S, c,
                  d);
    colsum_acc(d_x.data(), embed_b.g.data(), S, d);
    matmul_tn_acc(cache.cond_in.data(), d_x.data(), cond_w.g.data(), S,
                  kCondChannels, d);
    colsum_acc(d_x.data(), cond_b.g.data(), S, d);
    for (int i = 0; i < S; ++i) {
      T* prow = pos.g.data() + std::size_t(i % hw) * d;
      const T* drow = d_x.data() + std::size_t(i) * d;
      for (int j = 0; j < d; ++j) prow[j] += drow[j];
    }
  }
};

}  // namespace cameo
