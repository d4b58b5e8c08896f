// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_CUTMIX_HPP
#define POINTMIX_CUTMIX_HPP

#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "pointmix/core.hpp"
#include "pointmix/geom.hpp"

/**
 * Inter-domain region mixing.
 *
 * A BEV rectangle is cut around a random point c_T of a labeled target frame
 * and pasted into a source frame around a point c_S of (approximately) the
 * same BEV range. The cut region is carried over by rotating it about the
 * sensor origin by azimuth(c_S) - azimuth(c_T), which keeps the range of every
 * transported point (and therefore the beam ring pattern) unchanged. Source
 * points and boxes inside the transported footprint are removed, then both
 * parts are concatenated. Boxes follow the region iff their center is inside.
 */
namespace pointmix::cutmix {

struct CutMixConfig {
  double apply_probability = 0.5;
  double half_extent_min = 10.0;
  double half_extent_max = 40.0;
  double range_tolerance = 1.0;
  int max_center_retries = 4;
  /// Emissions per batch; 0 means one per target frame.
  std::size_t emissions = 0;

  void validate() const {
    if (!(apply_probability >= 0.0 && apply_probability <= 1.0))
      throw ConfigError("cutmix.apply_probability must lie in [0, 1]");
    if (!(half_extent_min > 0.0 && half_extent_min <= half_extent_max))
      throw ConfigError("cutmix half extents require 0 < min <= max");
    if (!(range_tolerance >= 0.0)) throw ConfigError("cutmix.range_tolerance must be >= 0");
    if (max_center_retries < 0) throw ConfigError("cutmix.max_center_retries must be >= 0");
  }
};

struct CutRegion {
  Point center_point;
  geom::BevRect rect;
};

inline CutRegion sample_cut_region(const Frame& target, const CutMixConfig& cfg, Seed seed) {
  if (target.cloud.empty()) throw InvalidArgument("sample_cut_region: empty target cloud");
  Rng rng(seed);
  const Point c = target.cloud[rng.index(target.cloud.size())];
  const double hx = rng.uniform(cfg.half_extent_min, cfg.half_extent_max);
  const double hy = rng.uniform(cfg.half_extent_min, cfg.half_extent_max);
  return {c, geom::BevRect{geom::bev(c), {hx, hy}, geom::azimuth(c)}};
}

/// Picks a source point whose BEV range is within the tolerance of c_T's,
/// doubling the tolerance up to max_center_retries times.
inline Point match_source_center(const Frame& source, const Point& c_t, const CutMixConfig& cfg,
                                 Seed seed) {
  if (source.cloud.empty()) throw InvalidArgument("match_source_center: empty source cloud");
  const double target_range = geom::bev_range(c_t);
  Rng rng(seed);
  double tol = cfg.range_tolerance;
  std::vector<std::size_t> candidates;
  for (int attempt = 0; attempt <= cfg.max_center_retries; ++attempt, tol *= 2.0) {
    candidates.clear();
    for (std::size_t i = 0; i < source.cloud.size(); ++i)
      if (std::abs(geom::bev_range(source.cloud[i]) - target_range) <= tol) candidates.push_back(i);
    if (!candidates.empty()) return source.cloud[candidates[rng.index(candidates.size())]];
  }
  throw NoMatchingRange("no source point within range " + std::to_string(target_range) +
                        " m of the cut center after " + std::to_string(cfg.max_center_retries) +
                        " retries");
}

inline double transport_angle(const CutRegion& region, const Point& c_s) {
  return geom::azimuth(c_s) - geom::azimuth(region.center_point);
}

/// Footprint of the cut region after it has been carried over to c_S's bearing.
inline geom::BevRect transported_rect(const CutRegion& region, const Point& c_s) {
  return geom::rotate_rect(region.rect, transport_angle(region, c_s));
}

inline Frame point_cutmix(const Frame& source, const Frame& target, const CutRegion& region,
                          const Point& c_s) {
  const double delta = transport_angle(region, c_s);
  const geom::BevRect footprint = geom::rotate_rect(region.rect, delta);

  Frame out;
  out.id = source.id + "_x_" + target.id;
  out.domain = target.domain;

  for (const auto& p : source.cloud)
    if (!geom::rect_contains(footprint, geom::bev(p))) out.cloud.push_back(p);
  for (const auto& p : target.cloud) {
    if (!geom::rect_contains(region.rect, geom::bev(p))) continue;
    const geom::Vec2 q = geom::rotate_about_origin(geom::bev(p), delta);
    out.cloud.push_back({q.x, q.y, p.z, p.intensity});
  }

  for (const auto& l : source.labels)
    if (!geom::rect_contains(footprint, geom::bev(l.box.center))) out.labels.push_back(l);
  for (const auto& l : target.labels) {
    if (!geom::rect_contains(region.rect, geom::bev(l.box.center))) continue;
    LabeledBox moved = l;
    const geom::Vec2 c = geom::rotate_about_origin(geom::bev(l.box.center), delta);
    moved.box.center.x = c.x;
    moved.box.center.y = c.y;
    moved.box.yaw = normalize_yaw(l.box.yaw + delta);
    out.labels.push_back(std::move(moved));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

/// Random-access frame collection: std::vector<Frame> or a lazy on-disk view.
template <class S>
concept FrameSet = requires(const S& s, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.at(i) } -> std::convertible_to<Frame>;
};

struct CutMixTrace {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  CutRegion region;
  Point source_center;
};

struct Emission {
  std::size_t index = 0;
  bool mixed = false;
  std::optional<Frame> frame;
  std::string error;
  std::optional<CutMixTrace> trace;
};

inline std::string emission_id(std::size_t index, const std::string& base) {
  std::string n = std::to_string(index);
  if (n.size() < 6) n.insert(0, 6 - n.size(), '0');
  return "cm" + n + "_" + base;
}

inline std::size_t emission_count(std::size_t configured, std::size_t natural) {
  return configured == 0 ? natural : configured;
}

/// Emission `index` of a batch. Target frames are visited in order; with
/// apply_probability the visited frame is mixed into a random source frame,
/// otherwise it passes through unchanged.
template <FrameSet Sources, FrameSet Targets>
Emission cutmix_emit(const Sources& sources, const Targets& targets, const CutMixConfig& cfg,
                     Seed seed, std::size_t index) {
  Emission em;
  em.index = index;
  const Seed es = derive_seed(seed, index);
  Rng rng(es);
  const std::size_t ti = index % targets.size();
  em.mixed = rng.bernoulli(cfg.apply_probability);
  try {
    Frame target = targets.at(ti);
    if (!em.mixed) {
      if (index >= targets.size()) target.id += "_r" + std::to_string(index / targets.size());
      em.frame = std::move(target);
      return em;
    }
    const std::size_t si = rng.index(sources.size());
    const Frame source = sources.at(si);
    CutMixTrace tr{si, ti, sample_cut_region(target, cfg, derive_seed(es, 1)), {}};
    tr.source_center = match_source_center(source, tr.region.center_point, cfg, derive_seed(es, 2));
    Frame mixed = point_cutmix(source, target, tr.region, tr.source_center);
    mixed.id = emission_id(index, mixed.id);
    em.frame = std::move(mixed);
    em.trace = tr;
  } catch (const Error& e) {
    em.frame.reset();
    em.error = e.what();
  }
  return em;
}

struct BatchStats {
  std::size_t emitted = 0;
  std::size_t mixed = 0;
  std::size_t skipped = 0;
  std::vector<std::string> errors;
};

template <FrameSet Sources, FrameSet Targets, class Sink>
BatchStats cutmix_batch(const Sources& sources, const Targets& targets, const CutMixConfig& cfg,
                        Seed seed, Sink&& sink) {
  cfg.validate();
  if (sources.size() == 0 || targets.size() == 0)
    throw InvalidArgument("cutmix_batch: source and target sets must be non-empty");
  BatchStats stats;
  const std::size_t n = emission_count(cfg.emissions, targets.size());
  for (std::size_t i = 0; i < n; ++i) {
    Emission em = cutmix_emit(sources, targets, cfg, seed, i);
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

}  // namespace pointmix::cutmix

#endif  // POINTMIX_CUTMIX_HPP
