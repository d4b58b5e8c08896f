// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_MIXUP_HPP
#define POINTMIX_MIXUP_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pointmix/core.hpp"
#include "pointmix/cutmix.hpp"
#include "pointmix/geom.hpp"

/**
 * Intra-domain scene mixing of a real-labeled and a pseudo-labeled target frame.
 *
 * Points of both frames are subsampled with complementary keep ratios
 * (lambda and 1 - lambda) so the merged cloud keeps the density of a single
 * frame. Pseudo boxes that collide with a real box are dropped together with
 * the pseudo points in their footprint; the real box and its points win.
 */
namespace pointmix::mixup {

struct LambdaPolicy {
  enum class Kind { fixed, uniform };
  Kind kind = Kind::fixed;
  double lo = 0.5;  // the fixed value when kind == fixed
  double hi = 0.5;

  static LambdaPolicy fixed(double v) { return {Kind::fixed, v, v}; }
  static LambdaPolicy uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }

  double draw(Rng& rng) const { return kind == Kind::fixed ? lo : rng.uniform(lo, hi); }
};

struct MixUpConfig {
  double apply_probability = 0.5;
  LambdaPolicy lambda;
  double score_threshold = 0.3;
  double collision_margin = 0.0;
  /// Pseudo boxes with fewer supporting output points are dropped; 0 disables.
  std::size_t min_points_per_box = 0;
  /// Emissions per batch; 0 means one per frame of labeled + pseudo.
  std::size_t emissions = 0;

  void validate() const {
    if (!(apply_probability >= 0.0 && apply_probability <= 1.0))
      throw ConfigError("mixup.apply_probability must lie in [0, 1]");
    if (!(lambda.lo >= 0.0 && lambda.hi <= 1.0 && lambda.lo <= lambda.hi))
      throw ConfigError("mixup lambda bounds must satisfy 0 <= lo <= hi <= 1");
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0))
      throw ConfigError("mixup.score_threshold must lie in [0, 1]");
    if (!(collision_margin >= 0.0)) throw ConfigError("mixup.collision_margin must be >= 0");
  }
};

/// Keeps pseudo boxes with score >= threshold, preserving order.
inline std::vector<LabeledBox> filter_pseudo_labels(std::span<const LabeledBox> predictions,
                                                    double threshold) {
  std::vector<LabeledBox> kept;
  for (const auto& b : predictions) {
    if (!b.score) throw InvalidArgument("filter_pseudo_labels: prediction without score");
    if (b.provenance != Provenance::pseudo)
      throw InvalidArgument("filter_pseudo_labels: prediction is not marked pseudo");
    if (*b.score >= threshold) kept.push_back(b);
  }
  return kept;
}

using Mask = std::vector<std::uint8_t>;

inline std::size_t count_set(const Mask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

struct PointMasks {
  Mask labeled;    // P
  Mask unlabeled;  // Q
};

namespace detail {

inline Mask take_shuffled(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  Mask m(n, 0);
  for (std::size_t i = 0; i < k; ++i) m[order[i]] = 1;
  return m;
}

}  // namespace detail

/// |P=1| = round(lambda n_l), |Q=1| = n_u - round(lambda n_u); the two keep
/// ratios sum to one up to one point of rounding per frame.
inline PointMasks sample_point_masks(std::size_t n_labeled, std::size_t n_unlabeled, double lambda,
                                     Seed seed) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InvalidArgument("sample_point_masks: lambda must lie in [0, 1]");
  const auto keep_l = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(n_labeled)));
  const auto keep_u =
      n_unlabeled - static_cast<std::size_t>(std::llround(lambda * static_cast<double>(n_unlabeled)));
  Rng rng(seed);
  PointMasks m;
  m.labeled = detail::take_shuffled(n_labeled, keep_l, rng);
  m.unlabeled = detail::take_shuffled(n_unlabeled, keep_u, rng);
  return m;
}

struct CollisionResolution {
  std::vector<LabeledBox> kept_pseudo;
  Mask kept_points;  // over the pseudo frame's cloud
  std::size_t dropped_boxes = 0;
};

inline CollisionResolution resolve_collisions(std::span<const LabeledBox> real_boxes,
                                              std::span<const LabeledBox> pseudo_boxes,
                                              const PointCloud& pseudo_points, double margin) {
  if (!(margin >= 0.0)) throw InvalidArgument("resolve_collisions: margin must be >= 0");
  CollisionResolution r;
  r.kept_points.assign(pseudo_points.size(), 1);
  for (const auto& pb : pseudo_boxes) {
    const bool hit = std::any_of(real_boxes.begin(), real_boxes.end(), [&](const LabeledBox& rb) {
      return geom::boxes_collide(rb.box, pb.box, margin);
    });
    if (!hit) {
      r.kept_pseudo.push_back(pb);
      continue;
    }
    ++r.dropped_boxes;
    const geom::BevRect near = geom::box_footprint(pb.box, margin);
    for (std::size_t i = 0; i < pseudo_points.size(); ++i)
      if (geom::rect_contains(near, geom::bev(pseudo_points[i]))) r.kept_points[i] = 0;
  }
  return r;
}

struct MixUpResult {
  Frame frame;
  double lambda = 0;
  std::size_t labeled_points = 0;     // n_l, size of P
  std::size_t surviving_pseudo = 0;   // n_u after collision scrubbing, size of Q
  std::size_t from_labeled = 0;       // output points taken from the labeled frame (listed first)
  std::size_t dropped_pseudo_boxes = 0;
};

inline MixUpResult mix_frames(const Frame& labeled, const Frame& pseudo, const MixUpConfig& cfg,
                              Seed seed) {
  Rng rng(seed);
  MixUpResult res;
  res.lambda = cfg.lambda.draw(rng);

  const CollisionResolution col =
      resolve_collisions(labeled.labels, pseudo.labels, pseudo.cloud, cfg.collision_margin);
  PointCloud survivors;
  survivors.reserve(pseudo.cloud.size());
  for (std::size_t i = 0; i < pseudo.cloud.size(); ++i)
    if (col.kept_points[i]) survivors.push_back(pseudo.cloud[i]);

  const PointMasks masks =
      sample_point_masks(labeled.cloud.size(), survivors.size(), res.lambda, derive_seed(seed, 1));

  Frame& out = res.frame;
  out.id = labeled.id + "_mx_" + pseudo.id;
  out.domain = Domain::target;
  out.cloud.reserve(count_set(masks.labeled) + count_set(masks.unlabeled));
  for (std::size_t i = 0; i < labeled.cloud.size(); ++i)
    if (masks.labeled[i]) out.cloud.push_back(labeled.cloud[i]);
  res.from_labeled = out.cloud.size();
  for (std::size_t i = 0; i < survivors.size(); ++i)
    if (masks.unlabeled[i]) out.cloud.push_back(survivors[i]);

  out.labels = labeled.labels;
  for (const auto& b : col.kept_pseudo) {
    if (cfg.min_points_per_box > 0) {
      const auto support = std::count_if(out.cloud.begin(), out.cloud.end(), [&](const Point& p) {
        return geom::box_contains(b.box, p);
      });
      if (static_cast<std::size_t>(support) < cfg.min_points_per_box) continue;
    }
    out.labels.push_back(b);
  }

  res.labeled_points = labeled.cloud.size();
  res.surviving_pseudo = survivors.size();
  res.dropped_pseudo_boxes = col.dropped_boxes;
  return res;
}

inline Frame point_mixup(const Frame& labeled, const Frame& pseudo, const MixUpConfig& cfg,
                         Seed seed) {
  return mix_frames(labeled, pseudo, cfg, seed).frame;
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

struct MixUpTrace {
  std::size_t labeled_index = 0;
  std::size_t pseudo_index = 0;
  double lambda = 0;
  std::size_t labeled_points = 0;
  std::size_t surviving_pseudo = 0;
  std::size_t from_labeled = 0;
};

struct Emission {
  std::size_t index = 0;
  bool mixed = false;
  std::optional<Frame> frame;
  std::string error;
  std::optional<MixUpTrace> trace;
};

/// Emission `index` walks labeled frames then pseudo frames in order. A mixed
/// emission pairs the visited frame with a random frame from the other set.
template <cutmix::FrameSet Labeled, cutmix::FrameSet Pseudo>
Emission mixup_emit(const Labeled& labeled, const Pseudo& pseudo, const MixUpConfig& cfg,
                    Seed seed, std::size_t index) {
  Emission em;
  em.index = index;
  const Seed es = derive_seed(seed, index);
  Rng rng(es);
  const std::size_t n_l = labeled.size();
  const std::size_t total = n_l + pseudo.size();
  const std::size_t slot = index % total;
  const bool visit_labeled = slot < n_l;
  em.mixed = rng.bernoulli(cfg.apply_probability);
  try {
    if (!em.mixed) {
      Frame f = visit_labeled ? Frame(labeled.at(slot)) : Frame(pseudo.at(slot - n_l));
      if (index >= total) f.id += "_r" + std::to_string(index / total);
      em.frame = std::move(f);
      return em;
    }
    const std::size_t li = visit_labeled ? slot : rng.index(n_l);
    const std::size_t pi = visit_labeled ? rng.index(pseudo.size()) : slot - n_l;
    const Frame lf = labeled.at(li);
    const Frame pf = pseudo.at(pi);
    MixUpResult r = mix_frames(lf, pf, cfg, derive_seed(es, 1));
    r.frame.id = "mx" + cutmix::emission_id(index, r.frame.id).substr(2);
    em.trace = MixUpTrace{li, pi, r.lambda, r.labeled_points, r.surviving_pseudo, r.from_labeled};
    em.frame = std::move(r.frame);
  } catch (const Error& e) {
    em.frame.reset();
    em.error = e.what();
  }
  return em;
}

template <cutmix::FrameSet Labeled, cutmix::FrameSet Pseudo, class Sink>
cutmix::BatchStats mixup_batch(const Labeled& labeled, const Pseudo& pseudo,
                               const MixUpConfig& cfg, Seed seed, Sink&& sink) {
  cfg.validate();
  if (labeled.size() == 0 || pseudo.size() == 0)
    throw InvalidArgument("mixup_batch: labeled and pseudo sets must be non-empty");
  cutmix::BatchStats stats;
  const std::size_t n = cutmix::emission_count(cfg.emissions, labeled.size() + pseudo.size());
  for (std::size_t i = 0; i < n; ++i) {
    Emission em = mixup_emit(labeled, pseudo, cfg, seed, i);
    if (!em.frame) {
      ++stats.skipped;
      stats.errors.push_back("emission " + std::to_string(i) + ": " + em.error);
      continue;
    }
    ++stats.emitted;
    stats.mixed += em.mixed;
    sink(std::move(em));
  }
  return stats;
}

}  // namespace pointmix::mixup

#endif  // POINTMIX_MIXUP_HPP
