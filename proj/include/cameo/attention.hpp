#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cameo/linalg.hpp"
#include "cameo/rng.hpp"

namespace cameo {

struct AttentionConfig {
  int F = 2;      // total views (references + targets)
  int h = 16, w = 16;
  int d = 32;     // embedding dim
  int heads = 4;
  int layer_id = 0;

  int hw() const { return h * w; }
  int seq() const { return F * h * w; }
  int head_dim() const { return d / heads; }

  void validate() const {
    if (F < 2) throw std::invalid_argument("attention: F must be >= 2");
    if (d % heads != 0)
      throw std::invalid_argument("attention: d must be divisible by heads");
    if (h < 1 || w < 1 || d < 1 || heads < 1)
      throw std::invalid_argument("attention: sizes must be >= 1");
  }
};

template <typename T>
struct Param {
  std::string name;
  std::vector<T> w;
  std::vector<T> g;

  void resize(std::size_t n) {
    w.assign(n, T(0));
    g.assign(n, T(0));
  }
  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

template <typename T>
struct AttentionParams {
  Param<T> wq, bq, wk, bk, wv, bv, wo, bo;

  void init(int d, Rng& rng, const std::string& prefix) {
    auto mat = [&](Param<T>& p, const std::string& n) {
      p.name = prefix + n;
      p.resize(std::size_t(d) * d);
      T scale = T(1.0 / std::sqrt(double(d)));
      for (auto& v : p.w) v = T(rng.normal()) * scale;
    };
    auto vec = [&](Param<T>& p, const std::string& n) {
      p.name = prefix + n;
      p.resize(std::size_t(d));
    };
    mat(wq, "wq");
    vec(bq, "bq");
    mat(wk, "wk");
    vec(bk, "bk");
    mat(wv, "wv");
    vec(bv, "bv");
    mat(wo, "wo");
    vec(bo, "bo");
  }

  std::vector<Param<T>*> params() {
    return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo};
  }
};

template <typename T>
struct AttentionCache {
  int seq = 0, d = 0, heads = 0;
  std::vector<T> x;       // seq x d input
  std::vector<T> q, k, v; // seq x d
  std::vector<T> probs;   // heads x seq x seq; scaled scores are cheap to
                          // recompute from q/k where needed
  std::vector<T> concat;  // seq x d, heads merged before the out proj
  bool identity_perturbed = false;

  int head_dim() const { return d / heads; }

  // Scaled pre-softmax score row of one head: query token `row` against the
  // hw keys of view j.
  void score_row(int head, int row, int key_begin, int key_count,
                 T* out) const {
    const int dh = head_dim();
    const T scale = T(1.0 / std::sqrt(double(dh)));
    const T* qi = q.data() + std::size_t(row) * d + head * dh;
    for (int c = 0; c < key_count; ++c) {
      const T* kj = k.data() + std::size_t(key_begin + c) * d + head * dh;
      T s = T(0);
      for (int e = 0; e < dh; ++e) s += qi[e] * kj[e];
      out[c] = s * scale;
    }
  }
};

// Full-sequence multi-head attention over F views stacked into one sequence.
// `perturb` forces the map to identity: each token passes through its own
// value vector.
template <typename T>
void attention_block_forward(const AttentionConfig& cfg,
                             const AttentionParams<T>& p, const T* x,
                             T* out, AttentionCache<T>& cache,
                             bool perturb = false) {
  cfg.validate();
  const int S = cfg.seq(), d = cfg.d, H = cfg.heads, dh = cfg.head_dim();
  cache.seq = S;
  cache.d = d;
  cache.heads = H;
  cache.identity_perturbed = perturb;
  cache.x.assign(x, x + std::size_t(S) * d);
  cache.q.resize(std::size_t(S) * d);
  cache.k.resize(std::size_t(S) * d);
  cache.v.resize(std::size_t(S) * d);
  cache.concat.assign(std::size_t(S) * d, T(0));

  matmul(x, p.wq.w.data(), cache.q.data(), S, d, d);
  matmul(x, p.wk.w.data(), cache.k.data(), S, d, d);
  matmul(x, p.wv.w.data(), cache.v.data(), S, d, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < d; ++j) {
      cache.q[std::size_t(i) * d + j] += p.bq.w[std::size_t(j)];
      cache.k[std::size_t(i) * d + j] += p.bk.w[std::size_t(j)];
      cache.v[std::size_t(i) * d + j] += p.bv.w[std::size_t(j)];
    }

  if (perturb) {
    // Identity map: attention output is the token's own value vector.
    cache.probs.clear();
    cache.concat = cache.v;
  } else {
    cache.probs.resize(std::size_t(H) * S * S);
    const T scale = T(1.0 / std::sqrt(double(dh)));
    for (int hd = 0; hd < H; ++hd) {
      T* pr = cache.probs.data() + std::size_t(hd) * S * S;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i) {
        const T* qi = cache.q.data() + std::size_t(i) * d + hd * dh;
        T* row = pr + std::size_t(i) * S;
        for (int j = 0; j < S; ++j) {
          const T* kj = cache.k.data() + std::size_t(j) * d + hd * dh;
          T s = T(0);
          for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
          row[j] = s * scale;
        }
      }
      softmax_rows(pr, S, S);
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i) {
        const T* arow = pr + std::size_t(i) * S;
        T* orow = cache.concat.data() + std::size_t(i) * d + hd * dh;
        for (int j = 0; j < S; ++j) {
          T av = arow[j];
          const T* vj = cache.v.data() + std::size_t(j) * d + hd * dh;
          for (int c = 0; c < dh; ++c) orow[c] += av * vj[c];
        }
      }
    }
  }

  matmul(cache.concat.data(), p.wo.w.data(), out, S, d, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < d; ++j)
      out[std::size_t(i) * d + j] += p.bo.w[std::size_t(j)];
}

// Backward through the block. d_scores_extra, when non-null, holds extra
// gradients w.r.t. the scaled pre-softmax scores (heads x seq x seq) coming
// from the supervised per-pair branch; they join the chain after the full
// softmax Jacobian and before the Q/K projections.
template <typename T>
void attention_block_backward(const AttentionConfig& cfg, AttentionParams<T>& p,
                              const AttentionCache<T>& cache, const T* d_out,
                              T* d_x_acc, const T* d_scores_extra = nullptr) {
  if (cache.seq == 0) throw std::logic_error("attention backward: no cache");
  if (cache.identity_perturbed)
    throw std::logic_error("attention backward: perturbed forward");
  const int S = cfg.seq(), d = cfg.d, H = cfg.heads, dh = cfg.head_dim();

  std::vector<T> d_concat(std::size_t(S) * d, T(0));
  matmul_nt(d_out, p.wo.w.data(), d_concat.data(), S, d, d);
  matmul_tn_acc(cache.concat.data(), d_out, p.wo.g.data(), S, d, d);
  colsum_acc(d_out, p.bo.g.data(), S, d);

  std::vector<T> dq(std::size_t(S) * d, T(0));
  std::vector<T> dk(std::size_t(S) * d, T(0));
  std::vector<T> dv(std::size_t(S) * d, T(0));
  std::vector<T> d_probs(std::size_t(S) * S);
  std::vector<T> d_scores(std::size_t(S) * S);

  const T scale = T(1.0 / std::sqrt(double(dh)));
  for (int hd = 0; hd < H; ++hd) {
    const T* pr = cache.probs.data() + std::size_t(hd) * S * S;
    // d_probs = d_concat_h * V_h^T ; dV_h = probs^T * d_concat_h
#pragma omp parallel for schedule(static)
    for (int i = 0; i < S; ++i) {
      const T* drow = d_concat.data() + std::size_t(i) * d + hd * dh;
      T* dprow = d_probs.data() + std::size_t(i) * S;
      for (int j = 0; j < S; ++j) {
        const T* vj = cache.v.data() + std::size_t(j) * d + hd * dh;
        T s = T(0);
        for (int c = 0; c < dh; ++c) s += drow[c] * vj[c];
        dprow[j] = s;
      }
    }
#pragma omp parallel for schedule(static)
    for (int j = 0; j < S; ++j) {
      T* dvj = dv.data() + std::size_t(j) * d + hd * dh;
      for (int i = 0; i < S; ++i) {
        T av = pr[std::size_t(i) * S + j];
        const T* drow = d_concat.data() + std::size_t(i) * d + hd * dh;
        for (int c = 0; c < dh; ++c) dvj[c] += av * drow[c];
      }
    }

    softmax_backward_rows(pr, d_probs.data(), d_scores.data(), S, S);
    if (d_scores_extra) {
      const T* extra = d_scores_extra + std::size_t(hd) * S * S;
#pragma omp parallel for schedule(static)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
          d_scores[std::size_t(i) * S + j] += extra[std::size_t(i) * S + j];
    }

    // dQ_h += scale * d_scores * K_h ; dK_h += scale * d_scores^T * Q_h
#pragma omp parallel for schedule(static)
    for (int i = 0; i < S; ++i) {
      T* dqi = dq.data() + std::size_t(i) * d + hd * dh;
      const T* dsrow = d_scores.data() + std::size_t(i) * S;
      for (int j = 0; j < S; ++j) {
        T s = dsrow[j] * scale;
        const T* kj = cache.k.data() + std::size_t(j) * d + hd * dh;
        for (int c = 0; c < dh; ++c) dqi[c] += s * kj[c];
      }
    }
#pragma omp parallel for schedule(static)
    for (int j = 0; j < S; ++j) {
      T* dkj = dk.data() + std::size_t(j) * d + hd * dh;
      for (int i = 0; i < S; ++i) {
        T s = d_scores[std::size_t(i) * S + j] * scale;
        const T* qi = cache.q.data() + std::size_t(i) * d + hd * dh;
        for (int c = 0; c < dh; ++c) dkj[c] += s * qi[c];
      }
    }
  }

  matmul_tn_acc(cache.x.data(), dq.data(), p.wq.g.data(), S, d, d);
  matmul_tn_acc(cache.x.data(), dk.data(), p.wk.g.data(), S, d, d);
  matmul_tn_acc(cache.x.data(), dv.data(), p.wv.g.data(), S, d, d);
  colsum_acc(dq.data(), p.bq.g.data(), S, d);
  colsum_acc(dk.data(), p.bk.g.data(), S, d);
  colsum_acc(dv.data(), p.bv.g.data(), S, d);
  matmul_nt_acc(dq.data(), p.wq.w.data(), d_x_acc, S, d, d);
  matmul_nt_acc(dk.data(), p.wk.w.data(), d_x_acc, S, d, d);
  matmul_nt_acc(dv.data(), p.wv.w.data(), d_x_acc, S, d, d);
}

// Head-mean attention map over the concatenated sequence.
template <typename T>
std::vector<T> full_attention_map(const AttentionCache<T>& cache) {
  const int S = cache.seq, H = cache.heads;
  std::vector<T> map(std::size_t(S) * S, T(0));
  if (cache.identity_perturbed) {
    for (int i = 0; i < S; ++i) map[std::size_t(i) * S + i] = T(1);
    return map;
  }
  const T inv = T(1) / T(H);
  for (int hd = 0; hd < H; ++hd) {
    const T* pr = cache.probs.data() + std::size_t(hd) * S * S;
    for (std::size_t i = 0; i < std::size_t(S) * S; ++i) map[i] += pr[i] * inv;
  }
  return map;
}

// Cross-view attention for the ordered pair (i, j). `probs` is row-stochastic
// over the h*w keys of view j only when pair_normalized; a raw sub-block of
// the full-sequence softmax otherwise.
template <typename T>
struct CrossViewAttention {
  int view_i = 0, view_j = 0;
  int hw = 0;
  std::vector<T> logits;  // hw x hw head-mean scaled scores
  std::vector<T> probs;   // hw x hw
  bool pair_normalized = false;
};

// Sub-block [i*hw, (i+1)*hw) x [j*hw, (j+1)*hw) of a full (F*hw x F*hw) map.
// Rows keep their full-sequence normalization.
template <typename T>
CrossViewAttention<T> extract_cross_view(const std::vector<T>& full_map, int F,
                                         int hw, int i, int j) {
  if (i == j)
    throw std::invalid_argument("extract_cross_view: need i != j");
  if (i < 0 || j < 0 || i >= F || j >= F)
    throw std::out_of_range("extract_cross_view: view index out of range");
  if (full_map.size() != std::size_t(F) * hw * F * hw)
    throw std::invalid_argument("extract_cross_view: map size mismatch");
  CrossViewAttention<T> cv;
  cv.view_i = i;
  cv.view_j = j;
  cv.hw = hw;
  cv.pair_normalized = false;
  cv.probs.resize(std::size_t(hw) * hw);
  const int S = F * hw;
  for (int r = 0; r < hw; ++r)
    for (int c = 0; c < hw; ++c)
      cv.probs[std::size_t(r) * hw + c] =
          full_map[std::size_t(i * hw + r) * S + (j * hw + c)];
  return cv;
}

// Scaled per-head scores of pair (i, j), recomputed from the cached q/k,
// interleaved as [hw*hw x heads] (query-major, then key, then head).
template <typename T>
std::vector<T> gather_pair_logits(const AttentionCache<T>& cache, int F,
                                  int hw, int i, int j) {
  const int S = cache.seq, H = cache.heads;
  if (S != F * hw) throw std::invalid_argument("gather_pair_logits: shape");
  std::vector<T> out(std::size_t(hw) * hw * H);
  std::vector<T> row(std::size_t(hw), T(0));
  for (int hd = 0; hd < H; ++hd)
    for (int r = 0; r < hw; ++r) {
      cache.score_row(hd, i * hw + r, j * hw, hw, row.data());
      for (int c = 0; c < hw; ++c)
        out[(std::size_t(r) * hw + c) * H + hd] = row[std::size_t(c)];
    }
  return out;
}

// MLP over the head axis of attention logits: per (query, key) entry the
// heads-vector is aggregated to one scalar as mean(v) + W2 tanh(W1 v + b1)
// + b2. W2 starts at zero so the initial aggregate is exactly the head mean.
template <typename T>
struct ProjectionHead {
  int heads = 0;
  int hidden = 0;
  Param<T> w1, b1, w2, b2;

  void init(int n_heads, Rng& rng) {
    heads = n_heads;
    hidden = 4 * n_heads;
    w1.name = "head.w1";
    w1.resize(std::size_t(hidden) * heads);
    T scale = T(1.0 / std::sqrt(double(heads)));
    for (auto& v : w1.w) v = T(rng.normal()) * scale;
    b1.name = "head.b1";
    b1.resize(std::size_t(hidden));
    w2.name = "head.w2";
    w2.resize(std::size_t(hidden));
    b2.name = "head.b2";
    b2.resize(1);
  }

  std::vector<Param<T>*> params() { return {&w1, &b1, &w2, &b2}; }
};

template <typename T>
struct ProjectionCache {
  int entries = 0;
  std::vector<T> input;   // entries x heads
  std::vector<T> hidden;  // entries x hidden, post-tanh
  std::vector<T> agg;     // hw x hw aggregated pre-softmax logits
  std::vector<T> probs;   // hw x hw pair-normalized map
  int rows = 0, hw = 0;
};

// Aggregates per-head pair logits and row-softmaxes over the keys of the
// target view; this is the supervised distribution.
template <typename T>
std::vector<T> project_and_normalize(const ProjectionHead<T>& head,
                                     const std::vector<T>& pair_logits,
                                     int hw, ProjectionCache<T>* cache) {
  const int H = head.heads, hid = head.hidden;
  if (pair_logits.size() != std::size_t(hw) * hw * H)
    throw std::invalid_argument("project_and_normalize: logits shape");
  const int entries = hw * hw;
  std::vector<T> agg(std::size_t(entries), T(0));
  std::vector<T> hid_act(std::size_t(entries) * hid, T(0));
  const T inv_h = T(1) / T(H);
#pragma omp parallel for schedule(static)
  for (int e = 0; e < entries; ++e) {
    const T* v = pair_logits.data() + std::size_t(e) * H;
    T mean = T(0);
    for (int a = 0; a < H; ++a) mean += v[a];
    mean *= inv_h;
    T* ha = hid_act.data() + std::size_t(e) * hid;
    T out = mean + head.b2.w[0];
    for (int u = 0; u < hid; ++u) {
      T s = head.b1.w[std::size_t(u)];
      const T* wrow = head.w1.w.data() + std::size_t(u) * H;
      for (int a = 0; a < H; ++a) s += wrow[a] * v[a];
      T th = std::tanh(s);
      ha[u] = th;
      out += head.w2.w[std::size_t(u)] * th;
    }
    agg[std::size_t(e)] = out;
  }
  for (std::size_t e = 0; e < std::size_t(entries); ++e)
    if (!std::isfinite(double(agg[e])))
      throw std::domain_error("project_and_normalize: non-finite logits");

  std::vector<T> probs = agg;
  softmax_rows(probs.data(), hw, hw);
  if (cache) {
    cache->entries = entries;
    cache->input = pair_logits;
    cache->hidden = std::move(hid_act);
    cache->agg = std::move(agg);
    cache->probs = probs;
    cache->rows = hw;
    cache->hw = hw;
  }
  return probs;
}

// Backward from gradients w.r.t. the aggregated (pre-softmax) logits to the
// head parameters and the per-head pair logits.
template <typename T>
void projection_head_backward(ProjectionHead<T>& head,
                              const ProjectionCache<T>& cache,
                              const std::vector<T>& d_agg,
                              std::vector<T>& d_pair_logits) {
  const int H = head.heads, hid = head.hidden, entries = cache.entries;
  d_pair_logits.assign(std::size_t(entries) * H, T(0));
  const T inv_h = T(1) / T(H);
  // Parameter gradients are shared across entries; serial accumulation
  // keeps them deterministic.
  for (int e = 0; e < entries; ++e) {
    T da = d_agg[std::size_t(e)];
    if (da == T(0)) continue;
    const T* v = cache.input.data() + std::size_t(e) * H;
    const T* ha = cache.hidden.data() + std::size_t(e) * hid;
    T* dv = d_pair_logits.data() + std::size_t(e) * H;
    head.b2.g[0] += da;
    for (int a = 0; a < H; ++a) dv[a] += da * inv_h;
    for (int u = 0; u < hid; ++u) {
      T th = ha[u];
      head.w2.g[std::size_t(u)] += da * th;
      T dpre = da * head.w2.w[std::size_t(u)] * (T(1) - th * th);
      head.b1.g[std::size_t(u)] += dpre;
      T* w1g = head.w1.g.data() + std::size_t(u) * H;
      const T* w1w = head.w1.w.data() + std::size_t(u) * H;
      for (int a = 0; a < H; ++a) {
        w1g[a] += dpre * v[a];
        dv[a] += dpre * w1w[a];
      }
    }
  }
}

// Identity replacement over the concatenated sequence (each query attends
// only to its own position).
template <typename T>
std::vector<T> perturb_identity_map(int F, int hw) {
  const int S = F * hw;
  std::vector<T> map(std::size_t(S) * S, T(0));
  for (int i = 0; i < S; ++i) map[std::size_t(i) * S + i] = T(1);
  return map;
}

template <typename T>
struct AttentionForwardResult {
  std::vector<T> output;    // seq x d
  std::vector<T> full_map;  // seq x seq, head-mean
  std::vector<CrossViewAttention<T>> pairs;  // all ordered pairs, i != j
  AttentionCache<T> cache;
};

// One-shot forward over stacked view tokens: output features, head-mean full
// map, and per-pair maps re-normalized over the target view's keys (head-mean
// logits, then row softmax).
template <typename T>
AttentionForwardResult<T> attention_forward(const AttentionConfig& cfg,
                                            const AttentionParams<T>& p,
                                            const std::vector<T>& tokens) {
  cfg.validate();
  const int S = cfg.seq(), hw = cfg.hw(), H = cfg.heads;
  if (tokens.size() != std::size_t(S) * cfg.d)
    throw std::invalid_argument("attention_forward: token shape mismatch");
  AttentionForwardResult<T> res;
  res.output.resize(std::size_t(S) * cfg.d);
  attention_block_forward(cfg, p, tokens.data(), res.output.data(), res.cache);
  res.full_map = full_attention_map(res.cache);
  const T inv_h = T(1) / T(H);
  for (int i = 0; i < cfg.F; ++i)
    for (int j = 0; j < cfg.F; ++j) {
      if (i == j) continue;
      CrossViewAttention<T> cv;
      cv.view_i = i;
      cv.view_j = j;
      cv.hw = hw;
      cv.pair_normalized = true;
      cv.logits.assign(std::size_t(hw) * hw, T(0));
      std::vector<T> row(std::size_t(hw), T(0));
      for (int hd = 0; hd < H; ++hd)
        for (int r = 0; r < hw; ++r) {
          res.cache.score_row(hd, i * hw + r, j * hw, hw, row.data());
          for (int c = 0; c < hw; ++c)
            cv.logits[std::size_t(r) * hw + c] += row[std::size_t(c)] * inv_h;
        }
      cv.probs = cv.logits;
      softmax_rows(cv.probs.data(), hw, hw);
      res.pairs.push_back(std::move(cv));
    }
  return res;
}

}  // namespace cameo
