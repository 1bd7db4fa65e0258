#pragma once

#include <cmath>
#include <vector>

#include "cameo/correspondence.hpp"
#include "cameo/denoiser.hpp"

namespace cameo {

enum class LossType { CE, L1 };

// Masked alignment loss between pair-normalized attention rows and one-hot
// correspondence rows, averaged over mask-weighted rows across all pairs.
// d_logits are gradients w.r.t. the aggregated pre-softmax logits of each
// pair (softmax folded in). An all-zero mask yields loss 0 and zero grads.
template <typename T>
struct CameoLossResult {
  double loss = 0;
  double mask_total = 0;
  std::vector<std::vector<T>> d_logits;
};

template <typename T>
CameoLossResult<T> cameo_loss(
    const std::vector<std::vector<T>>& pair_agg_logits,
    const std::vector<const TokenCorrespondence*>& corr, LossType loss_type) {
  if (pair_agg_logits.size() != corr.size())
    throw std::invalid_argument("cameo_loss: pair count mismatch");
  CameoLossResult<T> res;
  res.d_logits.resize(pair_agg_logits.size());

  double mask_total = 0;
  for (const auto* c : corr)
    for (auto m : c->mask) mask_total += m;
  res.mask_total = mask_total;
  for (std::size_t p = 0; p < pair_agg_logits.size(); ++p)
    res.d_logits[p].assign(pair_agg_logits[p].size(), T(0));
  if (mask_total == 0) return res;

  double loss_sum = 0;
  for (std::size_t p = 0; p < pair_agg_logits.size(); ++p) {
    const TokenCorrespondence& tc = *corr[p];
    const int n = tc.count();
    const std::vector<T>& logits = pair_agg_logits[p];
    if (logits.size() != std::size_t(n) * n)
      throw std::invalid_argument("cameo_loss: logits shape mismatch");
    std::vector<T>& dl = res.d_logits[p];

    for (int q = 0; q < n; ++q) {
      if (!tc.mask[std::size_t(q)]) continue;
      const T* row = logits.data() + std::size_t(q) * n;
      T* drow = dl.data() + std::size_t(q) * n;
      int target = tc.match[std::size_t(q)];

      // Row softmax in log space.
      T mx = row[0];
      for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      double sum = 0;
      for (int j = 0; j < n; ++j) sum += std::exp(double(row[j] - mx));
      double lse = std::log(sum) + double(mx);

      if (loss_type == LossType::CE) {
        loss_sum += lse - double(row[target]);
        for (int j = 0; j < n; ++j) {
          double a = std::exp(double(row[j]) - lse);
          double y = (j == target) ? 1.0 : 0.0;
          drow[j] = T((a - y) / mask_total);
        }
      } else {
        std::vector<double> a(static_cast<std::size_t>(n), 0.0);
        double l1 = 0, dot_da = 0;
        for (int j = 0; j < n; ++j) {
          a[std::size_t(j)] = std::exp(double(row[j]) - lse);
          double y = (j == target) ? 1.0 : 0.0;
          l1 += std::abs(a[std::size_t(j)] - y);
        }
        loss_sum += l1;
        std::vector<double> da(static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
          double y = (j == target) ? 1.0 : 0.0;
          double s = a[std::size_t(j)] - y;
          da[std::size_t(j)] = (s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0)) / mask_total;
          dot_da += da[std::size_t(j)] * a[std::size_t(j)];
        }
        for (int j = 0; j < n; ++j)
          drow[j] = T(a[std::size_t(j)] * (da[std::size_t(j)] - dot_da));
      }
    }
  }
  res.loss = loss_sum / mask_total;
  return res;
}

// Mean squared error between predicted and true noise on target views only.
// d_eps is sized for the full F*hw*c output, zero on reference views.
template <typename T>
double denoise_loss(const std::vector<T>& eps_hat, const std::vector<T>& eps,
                    const std::vector<std::uint8_t>& is_target, int F, int hw,
                    int c, std::vector<T>* d_eps) {
  if (d_eps) d_eps->assign(eps_hat.size(), T(0));
  std::size_t n_target = 0;
  for (int f = 0; f < F; ++f) n_target += is_target[std::size_t(f)] ? 1 : 0;
  if (n_target == 0) return 0.0;
  const std::size_t per_view = std::size_t(hw) * c;
  const double norm = double(n_target) * double(per_view);
  double loss = 0;
  for (int f = 0; f < F; ++f) {
    if (!is_target[std::size_t(f)]) continue;
    std::size_t base = std::size_t(f) * per_view;
    for (std::size_t i = 0; i < per_view; ++i) {
      double diff = double(eps_hat[base + i]) - double(eps[base + i]);
      loss += diff * diff;
      if (d_eps) (*d_eps)[base + i] = T(2.0 * diff / norm);
    }
  }
  return loss / norm;
}

// Pair-normalized maps at a block. The supervised block aggregates heads
// through the projection head; other blocks use the head mean. A perturbed
// block yields identity maps (each query keeps its own position).
template <typename T>
std::vector<CrossViewAttention<T>> pair_maps_at_layer(
    const ToyDenoiser<T>& model, const DenoiserCache<T>& cache, int layer) {
  const int F = model.cfg.F, hw = model.cfg.hw();
  const int H = model.cfg.heads;
  const AttentionCache<T>& ac = cache.blocks[std::size_t(layer)].attn;
  const bool use_head = layer == model.cfg.supervised();
  std::vector<CrossViewAttention<T>> out;
  for (int i = 0; i < F; ++i)
    for (int j = 0; j < F; ++j) {
      if (i == j) continue;
      CrossViewAttention<T> cv;
      cv.view_i = i;
      cv.view_j = j;
      cv.hw = hw;
      cv.pair_normalized = true;
      if (ac.identity_perturbed) {
        cv.probs.assign(std::size_t(hw) * hw, T(0));
        for (int r = 0; r < hw; ++r) cv.probs[std::size_t(r) * hw + r] = T(1);
      } else if (use_head) {
        std::vector<T> pl = gather_pair_logits(ac, F, hw, i, j);
        cv.probs = project_and_normalize(model.head, pl, hw,
                                         (ProjectionCache<T>*)nullptr);
      } else {
        cv.logits.assign(std::size_t(hw) * hw, T(0));
        std::vector<T> row(std::size_t(hw), T(0));
        for (int hd = 0; hd < H; ++hd)
          for (int r = 0; r < hw; ++r) {
            ac.score_row(hd, i * hw + r, j * hw, hw, row.data());
            for (int c = 0; c < hw; ++c)
              cv.logits[std::size_t(r) * hw + c] +=
                  row[std::size_t(c)] / T(H);
          }
        cv.probs = cv.logits;
        softmax_rows(cv.probs.data(), hw, hw);
      }
      out.push_back(std::move(cv));
    }
  return out;
}

template <typename T>
std::vector<CrossViewAttention<T>> supervised_pair_maps(
    const ToyDenoiser<T>& model, const DenoiserCache<T>& cache) {
  return pair_maps_at_layer(model, cache, model.cfg.supervised());
}

struct TotalLossStats {
  double denoise = 0;
  double cameo = 0;
  double total = 0;
  double mask_total = 0;
  double precision = 0;  // masked argmax agreement on the supervised layer
};

// Runs the supervised branch on the cached forward state, accumulating head
// parameter gradients scaled by lambda and filling the score-gradient buffer
// for the denoiser backward. Only masked query rows carry loss, gradient or
// precision, so everything streams row by row. Correspondence pairs must
// cover all ordered (i, j), i != j, in correspondence_set order.
template <typename T>
TotalLossStats supervised_branch(ToyDenoiser<T>& model,
                                 const DenoiserCache<T>& cache,
                                 const std::vector<TokenCorrespondence>& corr,
                                 double lambda, LossType loss_type,
                                 std::vector<T>& d_scores_sup) {
  const int F = model.cfg.F, hw = model.cfg.hw();
  const int heads = model.cfg.heads, S = model.cfg.seq();
  if (int(corr.size()) != F * (F - 1))
    throw std::invalid_argument("supervised_branch: pair count mismatch");
  const AttentionCache<T>& ac =
      cache.blocks[std::size_t(model.cfg.supervised())].attn;
  ProjectionHead<T>& head = model.head;
  const int hid = head.hidden;

  TotalLossStats stats;
  d_scores_sup.clear();

  double mask_total = 0;
  for (const auto& tc : corr)
    for (auto m : tc.mask) mask_total += m;
  stats.mask_total = mask_total;
  if (mask_total == 0) return stats;

  const bool want_grad = lambda != 0.0;
  if (want_grad) d_scores_sup.assign(std::size_t(heads) * S * S, T(0));

  // Per-row scratch.
  std::vector<T> scores(std::size_t(hw) * heads, T(0));   // key-major x head
  std::vector<T> hidden(std::size_t(hw) * hid, T(0));     // post-tanh
  std::vector<double> agg(std::size_t(hw), 0.0);
  std::vector<double> prob(std::size_t(hw), 0.0);
  std::vector<double> d_agg(std::size_t(hw), 0.0);

  double loss_sum = 0, hits = 0;
  const double inv_h = 1.0 / heads;
  std::size_t pi = 0;
  for (int i = 0; i < F; ++i)
    for (int j = 0; j < F; ++j) {
      if (i == j) continue;
      const TokenCorrespondence& tc = corr[pi++];
      if (tc.view_i != i || tc.view_j != j)
        throw std::invalid_argument("supervised_branch: pair order mismatch");
      for (int q = 0; q < hw; ++q) {
        if (!tc.mask[std::size_t(q)]) continue;
        const int target = tc.match[std::size_t(q)];

        // Per-head scaled score row, then the head MLP per key entry.
        for (int hd = 0; hd < heads; ++hd) {
          std::vector<T> tmp(std::size_t(hw), T(0));
          ac.score_row(hd, i * hw + q, j * hw, hw, tmp.data());
          for (int c = 0; c < hw; ++c)
            scores[std::size_t(c) * heads + hd] = tmp[std::size_t(c)];
        }
        for (int c = 0; c < hw; ++c) {
          const T* v = scores.data() + std::size_t(c) * heads;
          double mean = 0;
          for (int a = 0; a < heads; ++a) mean += double(v[a]);
          double out = mean * inv_h + double(head.b2.w[0]);
          T* ha = hidden.data() + std::size_t(c) * hid;
          for (int u = 0; u < hid; ++u) {
            T s = head.b1.w[std::size_t(u)];
            const T* wrow = head.w1.w.data() + std::size_t(u) * heads;
            for (int a = 0; a < heads; ++a) s += wrow[a] * v[a];
            T th = std::tanh(s);
            ha[u] = th;
            out += double(head.w2.w[std::size_t(u)]) * double(th);
          }
          agg[std::size_t(c)] = out;
        }

        double mx = agg[0];
        for (int c = 1; c < hw; ++c) mx = std::max(mx, agg[std::size_t(c)]);
        if (!std::isfinite(mx))
          throw std::domain_error("supervised branch: non-finite logits");
        double sum = 0;
        int argmax = 0;
        for (int c = 0; c < hw; ++c) {
          prob[std::size_t(c)] = std::exp(agg[std::size_t(c)] - mx);
          sum += prob[std::size_t(c)];
          if (agg[std::size_t(c)] > agg[std::size_t(argmax)]) argmax = c;
        }
        double lse = std::log(sum) + mx;
        if (argmax == target) hits += 1;

        if (loss_type == LossType::CE) {
          loss_sum += lse - agg[std::size_t(target)];
          if (want_grad)
            for (int c = 0; c < hw; ++c) {
              double a = std::exp(agg[std::size_t(c)] - lse);
              double y = (c == target) ? 1.0 : 0.0;
              d_agg[std::size_t(c)] = lambda * (a - y) / mask_total;
            }
        } else {
          double dot_da = 0;
          for (int c = 0; c < hw; ++c) {
            double a = std::exp(agg[std::size_t(c)] - lse);
            prob[std::size_t(c)] = a;
            double y = (c == target) ? 1.0 : 0.0;
            loss_sum += std::abs(a - y);
            if (want_grad) {
              double sgn = a - y;
              d_agg[std::size_t(c)] =
                  lambda * (sgn > 0 ? 1.0 : (sgn < 0 ? -1.0 : 0.0)) /
                  mask_total;
              dot_da += d_agg[std::size_t(c)] * a;
            }
          }
          if (want_grad)
            for (int c = 0; c < hw; ++c)
              d_agg[std::size_t(c)] =
                  prob[std::size_t(c)] * (d_agg[std::size_t(c)] - dot_da);
        }

        if (!want_grad) continue;

        // Head parameters and per-head score gradients for this row.
        for (int c = 0; c < hw; ++c) {
          double da = d_agg[std::size_t(c)];
          if (da == 0.0) continue;
          const T* v = scores.data() + std::size_t(c) * heads;
          const T* ha = hidden.data() + std::size_t(c) * hid;
          head.b2.g[0] += T(da);
          T dv[64];  // heads <= 64
          for (int a = 0; a < heads; ++a) dv[a] = T(da * inv_h);
          for (int u = 0; u < hid; ++u) {
            T th = ha[u];
            head.w2.g[std::size_t(u)] += T(da) * th;
            T dpre = T(da) * head.w2.w[std::size_t(u)] * (T(1) - th * th);
            head.b1.g[std::size_t(u)] += dpre;
            T* w1g = head.w1.g.data() + std::size_t(u) * heads;
            const T* w1w = head.w1.w.data() + std::size_t(u) * heads;
            for (int a = 0; a < heads; ++a) {
              w1g[a] += dpre * v[a];
              dv[a] += dpre * w1w[a];
            }
          }
          for (int hd = 0; hd < heads; ++hd)
            d_scores_sup[std::size_t(hd) * S * S +
                         std::size_t(i * hw + q) * S + (j * hw + c)] +=
                dv[hd];
        }
      }
    }
  stats.cameo = loss_sum / mask_total;
  stats.precision = hits / mask_total;
  return stats;
}

// L_total = L_denoise + lambda * L_CAMEO with full gradient accumulation
// into the model parameters.
template <typename T>
TotalLossStats total_loss(ToyDenoiser<T>& model, const DenoiserCache<T>& cache,
                          const std::vector<T>& eps_hat,
                          const std::vector<T>& eps,
                          const std::vector<std::uint8_t>& is_target,
                          const std::vector<TokenCorrespondence>& corr,
                          double lambda, LossType loss_type) {
  std::vector<T> d_eps;
  double l_den = denoise_loss(eps_hat, eps, is_target, model.cfg.F,
                              model.cfg.hw(), model.cfg.latent_channels,
                              &d_eps);
  std::vector<T> d_scores_sup;
  TotalLossStats stats =
      supervised_branch(model, cache, corr, lambda, loss_type, d_scores_sup);
  stats.denoise = l_den;
  stats.total = l_den + lambda * stats.cameo;
  model.backward(cache, d_eps, d_scores_sup);
  return stats;
}

}  // namespace cameo
