#pragma once

#include <map>
#include <string>
#include <vector>

#include "cameo/correspondence.hpp"

namespace cameo {

struct MatchCandidate {
  int src_token = 0;
  int dst_token = 0;
  double ratio = 0;        // 1 - D(p, q0) / D(p, q1), in [0, 1]
  double distance_3d = 0;  // meters, filled during scoring
};

enum class MatchMetric { Cosine, L2 };

// First/second nearest neighbor matching from every finite row of feat_a to
// rows of feat_b (n tokens x d dims each). Rows containing non-finite values
// are skipped on both sides. Requires at least two usable destination rows.
std::vector<MatchCandidate> match_descriptors(const std::vector<double>& feat_a,
                                              const std::vector<double>& feat_b,
                                              int n, int d,
                                              MatchMetric metric);

// Argmax matching over a row-stochastic map; the ratio reuses the Lowe
// formula with (1 - weight) as pseudo-distance, so confident rows rank first.
std::vector<MatchCandidate> match_from_attention(
    const std::vector<double>& probs, int n);

// Top k candidates by ratio; stable tie-break by source index; keeps all
// when fewer than k exist. Idempotent.
std::vector<MatchCandidate> select_top(std::vector<MatchCandidate> candidates,
                                       int k);

// Fraction of matches whose ground-truth 3D endpoints lie within rho meters.
// Fills distance_3d on each candidate; matches onto invalid geometry count
// as incorrect.
double score_matches(std::vector<MatchCandidate>& matches,
                     const TokenGrid& geom_a, const TokenGrid& geom_b,
                     double rho);

struct PrecisionReport {
  double overall = 0;
  std::map<std::string, double> per_bin;   // label -> mean precision
  std::map<std::string, int> per_bin_count;
  double rho = 0;
  int top_k = 0;
  int pairs_evaluated = 0;
  std::string source;
  std::string metric;
  int grid_h = 0, grid_w = 0;
};

enum class ProbeSource { Features, Attention, PointmapCoords };

struct ProbePair {
  double theta_deg = 0;
  int h = 0, w = 0;
  int feat_dim = 0;
  std::vector<double> feat_a, feat_b;  // hw x feat_dim (Features source)
  std::vector<double> attention;       // hw x hw (Attention source)
  TokenGrid geom_a, geom_b;            // scoring geometry, also the
                                       // PointmapCoords descriptors
};

// Appendix-style protocol: match, ratio-filter to top k, score at rho, and
// bucket into 30-degree rotation bins up to 120 degrees (pairs beyond 120
// are excluded). Bin edges are closed on the left.
PrecisionReport evaluate_pairs(const std::vector<ProbePair>& pairs,
                               ProbeSource source, MatchMetric metric, int k,
                               double rho);

const char* rotation_bin_label(double theta_deg);  // nullptr when > 120

// Masked token-agreement between attention argmax and the one-hot
// correspondence target; the training-time precision of a supervised layer.
template <typename T>
double attention_match_precision(const std::vector<T>& probs,
                                 const TokenCorrespondence& corr) {
  const int n = corr.count();
  double hits = 0, total = 0;
  for (int q = 0; q < n; ++q) {
    if (!corr.mask[std::size_t(q)]) continue;
    const T* row = probs.data() + std::size_t(q) * n;
    int best = 0;
    for (int j = 1; j < n; ++j)
      if (row[j] > row[best]) best = j;
    total += 1;
    if (best == corr.match[std::size_t(q)]) hits += 1;
  }
  return total > 0 ? hits / total : 0.0;
}

}  // namespace cameo
