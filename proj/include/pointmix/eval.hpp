// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_EVAL_HPP
#define POINTMIX_EVAL_HPP

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pointmix/core.hpp"
#include "pointmix/geom.hpp"

/**
 * Center-distance average precision.
 *
 * Predictions of one class are pooled over all frames and visited by
 * descending score; each takes the nearest still-unmatched ground-truth box of
 * its frame whose BEV center distance is within the threshold. The resulting
 * precision/recall curve is sampled at 101 uniform recall points. Recall
 * points up to 0.1 are discarded, 0.1 is subtracted from precision (clamped
 * at 0) and the mean is divided by 0.9.
 */
namespace pointmix::eval {

using FrameBoxes = std::vector<LabeledBox>;

struct EvalConfig {
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};
  std::string category = "car";
  double min_recall = 0.1;
  double min_precision = 0.1;
  /// Plain mean of the interpolated precision over all 101 recall points.
  bool raw_pr_integration = false;

  void validate() const {
    if (thresholds.empty()) throw ConfigError("eval.thresholds must not be empty");
    for (double t : thresholds)
      if (!(t > 0.0)) throw ConfigError("eval thresholds must be > 0");
    if (!(min_recall >= 0.0 && min_recall < 1.0) || !(min_precision >= 0.0 && min_precision < 1.0))
      throw ConfigError("eval clipping values must lie in [0, 1)");
  }
};

struct MatchResult {
  std::vector<double> scores;  // descending
  std::vector<bool> is_tp;     // aligned with scores
  std::size_t n_gt = 0;
};

inline MatchResult match_predictions(std::span<const FrameBoxes> preds, std::span<const FrameBoxes> gts,
                                     double threshold, const std::string& category) {
  if (preds.size() != gts.size())
    throw InvalidArgument("match_predictions: prediction and ground-truth frame counts differ");
  if (!(threshold > 0.0)) throw InvalidArgument("match_predictions: threshold must be > 0");

  struct Pred {
    double score;
    std::size_t frame;
    geom::Vec2 center;
  };
  std::vector<Pred> pool;
  std::vector<std::vector<geom::Vec2>> gt_centers(gts.size());
  MatchResult r;
  for (std::size_t f = 0; f < gts.size(); ++f) {
    for (const auto& g : gts[f])
      if (g.category == category) gt_centers[f].push_back(geom::bev(g.box.center));
    r.n_gt += gt_centers[f].size();
    for (const auto& p : preds[f]) {
      if (p.category != category) continue;
      if (!p.score) throw InvalidArgument("match_predictions: prediction without score");
      pool.push_back({*p.score, f, geom::bev(p.box.center)});
    }
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Pred& a, const Pred& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> taken(gts.size());
  for (std::size_t f = 0; f < gts.size(); ++f) taken[f].assign(gt_centers[f].size(), false);

  for (const auto& p : pool) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < gt_centers[p.frame].size(); ++i) {
      if (taken[p.frame][i]) continue;
      const double d = geom::bev_range(p.center - gt_centers[p.frame][i]);
      if (d < best) {
        best = d;
        best_i = i;
      }
    }
    const bool tp = best <= threshold;
    if (tp) taken[p.frame][best_i] = true;
    r.scores.push_back(p.score);
    r.is_tp.push_back(tp);
  }
  return r;
}

/// Precision interpolated at 101 uniform recall points; zero beyond the
/// highest recall reached. At a recall value attained by several prefixes the
/// first one counts.
inline std::vector<double> interpolated_precision(const MatchResult& m) {
  std::vector<double> rec, prec;
  double tp = 0, fp = 0;
  for (bool t : m.is_tp) {
    (t ? tp : fp) += 1.0;
    rec.push_back(tp / static_cast<double>(m.n_gt));
    prec.push_back(tp / (tp + fp));
  }
  std::vector<double> out(101, 0.0);
  if (rec.empty()) return out;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double r = static_cast<double>(k) / 100.0;
    const auto it = std::lower_bound(rec.begin(), rec.end(), r - 1e-12);
    if (it == rec.end()) continue;
    const auto j = static_cast<std::size_t>(it - rec.begin());
    if (j == 0 || rec[j] <= r) {
      out[k] = prec[j];
    } else {
      const double w = (r - rec[j - 1]) / (rec[j] - rec[j - 1]);
      out[k] = prec[j - 1] + w * (prec[j] - prec[j - 1]);
    }
  }
  return out;
}

/// AP of a matched sequence; nullopt when there is no ground truth.
inline std::optional<double> average_precision(const MatchResult& m, const EvalConfig& cfg = {}) {
  if (m.n_gt == 0) return std::nullopt;
  const std::vector<double> prec = interpolated_precision(m);
  if (cfg.raw_pr_integration)
    return std::accumulate(prec.begin(), prec.end(), 0.0) / static_cast<double>(prec.size());
  const auto first = static_cast<std::size_t>(std::llround(100.0 * cfg.min_recall)) + 1;
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t k = first; k < prec.size(); ++k, ++n) sum += std::max(prec[k] - cfg.min_precision, 0.0);
  if (n == 0) return 0.0;
  return std::clamp(sum / static_cast<double>(n) / (1.0 - cfg.min_precision), 0.0, 1.0);
}

inline std::optional<double> match_and_ap(std::span<const FrameBoxes> preds, std::span<const FrameBoxes> gts,
                                          double threshold, const std::string& category,
                                          const EvalConfig& cfg = {}) {
  return average_precision(match_predictions(preds, gts, threshold, category), cfg);
}

struct EvalReport {
  std::string category;
  std::map<double, std::optional<double>> per_threshold_ap;
  std::optional<double> mean_ap;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::optional<double> nds;  // externally supplied, never computed here
};

inline EvalReport evaluate(std::span<const FrameBoxes> preds, std::span<const FrameBoxes> gts,
                           const EvalConfig& cfg = {}) {
  cfg.validate();
  EvalReport rep;
  rep.category = cfg.category;
  double sum = 0;
  std::size_t defined = 0;
  for (double t : cfg.thresholds) {
    const MatchResult m = match_predictions(preds, gts, t, cfg.category);
    rep.n_gt = m.n_gt;
    rep.n_pred = m.scores.size();
    const auto ap = average_precision(m, cfg);
    rep.per_threshold_ap[t] = ap;
    if (ap) {
      sum += *ap;
      ++defined;
    }
  }
  if (defined > 0) rep.mean_ap = sum / static_cast<double>(defined);
  return rep;
}

/// Share of the source-only -> oracle gap recovered by a model, in percent.
inline double closed_gap(double ap_model, double ap_source_only, double ap_oracle) {
  const double denom = ap_oracle - ap_source_only;
  if (denom == 0.0) throw InvalidArgument("closed_gap: oracle and source-only scores are equal");
  return (ap_model - ap_source_only) / denom * 100.0;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [t, ap] : r.per_threshold_ap) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", t);
    per[key] = ap ? nlohmann::json(*ap) : nlohmann::json(nullptr);
  }
  nlohmann::json j = {{"category", r.category},
                      {"per_threshold_ap", per},
                      {"mean_ap", r.mean_ap ? nlohmann::json(*r.mean_ap) : nlohmann::json(nullptr)},
                      {"n_gt", r.n_gt},
                      {"n_pred", r.n_pred}};
  if (r.nds) j["nds"] = *r.nds;
  return j;
}

}  // namespace pointmix::eval

#endif  // POINTMIX_EVAL_HPP
