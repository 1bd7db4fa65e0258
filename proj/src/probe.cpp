#include "cameo/probe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cameo {

namespace {

bool finite_row(const double* row, int d) {
  for (int i = 0; i < d; ++i)
    if (!std::isfinite(row[i])) return false;
  return true;
}

double cosine_distance(const double* a, const double* b, int d) {
  double ab = 0, aa = 0, bb = 0;
  for (int i = 0; i < d; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  double denom = std::sqrt(aa) * std::sqrt(bb);
  if (denom <= 0) return 1.0;
  return 1.0 - ab / denom;
}

double l2_distance(const double* a, const double* b, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double lowe_ratio(double d0, double d1) {
  if (!(d1 > 0)) return 0.0;  // tie or degenerate second neighbor
  double r = 1.0 - d0 / d1;
  return std::clamp(r, 0.0, 1.0);
}

}  // namespace

std::vector<MatchCandidate> match_descriptors(const std::vector<double>& feat_a,
                                              const std::vector<double>& feat_b,
                                              int n, int d,
                                              MatchMetric metric) {
  if (feat_a.size() != std::size_t(n) * d || feat_b.size() != std::size_t(n) * d)
    throw std::invalid_argument("match_descriptors: shape mismatch");
  int usable_b = 0;
  for (int j = 0; j < n; ++j)
    if (finite_row(feat_b.data() + std::size_t(j) * d, d)) ++usable_b;
  if (usable_b < 2)
    throw std::invalid_argument(
        "match_descriptors: need >= 2 destination tokens");

  std::vector<MatchCandidate> out;
  out.reserve(std::size_t(n));
  for (int q = 0; q < n; ++q) {
    const double* a = feat_a.data() + std::size_t(q) * d;
    if (!finite_row(a, d)) continue;
    double d0 = std::numeric_limits<double>::infinity();
    double d1 = std::numeric_limits<double>::infinity();
    int nn1 = -1;
    for (int j = 0; j < n; ++j) {
      const double* b = feat_b.data() + std::size_t(j) * d;
      if (!finite_row(b, d)) continue;
      double dist = (metric == MatchMetric::Cosine) ? cosine_distance(a, b, d)
                                                    : l2_distance(a, b, d);
      if (dist < d0) {
        d1 = d0;
        d0 = dist;
        nn1 = j;
      } else if (dist < d1) {
        d1 = dist;
      }
    }
    MatchCandidate c;
    c.src_token = q;
    c.dst_token = nn1;
    c.ratio = lowe_ratio(d0, d1);
    out.push_back(c);
  }
  return out;
}

std::vector<MatchCandidate> match_from_attention(
    const std::vector<double>& probs, int n) {
  if (probs.size() != std::size_t(n) * n)
    throw std::invalid_argument("match_from_attention: shape mismatch");
  std::vector<MatchCandidate> out;
  out.reserve(std::size_t(n));
  for (int q = 0; q < n; ++q) {
    const double* row = probs.data() + std::size_t(q) * n;
    int best = 0;
    double w0 = row[0], w1 = -std::numeric_limits<double>::infinity();
    for (int j = 1; j < n; ++j) {
      if (row[j] > w0) {
        w1 = w0;
        w0 = row[j];
        best = j;
      } else if (row[j] > w1) {
        w1 = row[j];
      }
    }
    MatchCandidate c;
    c.src_token = q;
    c.dst_token = best;
    c.ratio = (n < 2) ? 0.0 : lowe_ratio(1.0 - w0, 1.0 - w1);
    out.push_back(c);
  }
  return out;
}

std::vector<MatchCandidate> select_top(std::vector<MatchCandidate> candidates,
                                       int k) {
  if (k < 1) throw std::invalid_argument("select_top: k must be >= 1");
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MatchCandidate& a, const MatchCandidate& b) {
                     if (a.ratio != b.ratio) return a.ratio > b.ratio;
                     return a.src_token < b.src_token;
                   });
  if (int(candidates.size()) > k) candidates.resize(std::size_t(k));
  return candidates;
}

double score_matches(std::vector<MatchCandidate>& matches,
                     const TokenGrid& geom_a, const TokenGrid& geom_b,
                     double rho) {
  if (!(rho > 0)) throw std::invalid_argument("score_matches: rho must be > 0");
  if (matches.empty()) return 0.0;
  int correct = 0;
  for (auto& m : matches) {
    if (m.src_token < 0 || m.src_token >= geom_a.count() || m.dst_token < 0 ||
        m.dst_token >= geom_b.count())
      throw std::out_of_range("score_matches: match index out of grid");
    Vec3 pa = geom_a.point(m.src_token);
    Vec3 pb = geom_b.point(m.dst_token);
    m.distance_3d = norm(pa - pb);
    if (m.distance_3d <= rho) ++correct;  // NaN distance fails the test
  }
  return double(correct) / double(matches.size());
}

const char* rotation_bin_label(double theta_deg) {
  if (theta_deg < 0) return nullptr;
  if (theta_deg < 30) return "0-30";
  if (theta_deg < 60) return "30-60";
  if (theta_deg < 90) return "60-90";
  if (theta_deg <= 120) return "90-120";
  return nullptr;
}

PrecisionReport evaluate_pairs(const std::vector<ProbePair>& pairs,
                               ProbeSource source, MatchMetric metric, int k,
                               double rho) {
  if (pairs.empty())
    throw std::invalid_argument("evaluate_pairs: empty pair list");

  PrecisionReport rep;
  rep.rho = rho;
  rep.top_k = k;
  rep.metric = (metric == MatchMetric::Cosine) ? "cosine" : "l2";
  rep.source = source == ProbeSource::Features ? "features"
               : source == ProbeSource::Attention ? "attention"
                                                  : "pointmap";

  std::map<std::string, double> bin_sum;
  std::map<std::string, int> bin_count;
  double total = 0;
  int evaluated = 0;

  for (const auto& pair : pairs) {
    const char* bin = rotation_bin_label(pair.theta_deg);
    if (!bin) continue;  // beyond 120 degrees
    const int n = pair.h * pair.w;

    std::vector<MatchCandidate> cands;
    switch (source) {
      case ProbeSource::Features:
        cands = match_descriptors(pair.feat_a, pair.feat_b, n, pair.feat_dim,
                                  metric);
        break;
      case ProbeSource::Attention:
        cands = match_from_attention(pair.attention, n);
        break;
      case ProbeSource::PointmapCoords:
        cands = match_descriptors(pair.geom_a.points, pair.geom_b.points, n, 3,
                                  MatchMetric::L2);
        break;
    }
    cands = select_top(std::move(cands), k);
    double prec = score_matches(cands, pair.geom_a, pair.geom_b, rho);

    rep.grid_h = pair.h;
    rep.grid_w = pair.w;
    bin_sum[bin] += prec;
    bin_count[bin] += 1;
    total += prec;
    ++evaluated;
  }
  if (evaluated == 0)
    throw std::invalid_argument(
        "evaluate_pairs: no pair within the 120 degree limit");

  rep.pairs_evaluated = evaluated;
  rep.overall = total / evaluated;
  for (const auto& [label, sum] : bin_sum) {
    rep.per_bin[label] = sum / bin_count[label];
    rep.per_bin_count[label] = bin_count[label];
  }
  return rep;
}

}  // namespace cameo
