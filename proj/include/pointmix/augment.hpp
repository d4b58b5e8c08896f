// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_AUGMENT_HPP
#define POINTMIX_AUGMENT_HPP

#include <algorithm>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pointmix/core.hpp"
#include "pointmix/geom.hpp"
#include "pointmix/io.hpp"

namespace pointmix::augment {

struct AugmentConfig {
  double flip_probability = 0.5;  // per axis
  double rotation_range = std::numbers::pi / 4.0;  // uniform in [-range, range]
  double scale_min = 0.95;
  double scale_max = 1.05;
  std::size_t gt_sample_max_per_class = 5;
  double gt_placement_extent = 40.0;  // pasted centers uniform in [-e, e]^2
  int gt_placement_attempts = 10;
  /// When set, intensities are mapped from [first, second] onto [0, 1].
  std::optional<std::pair<double, double>> intensity_range;
  RangeLimits crop;

  void validate() const {
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
      throw ConfigError("augment.flip_probability must lie in [0, 1]");
    if (!(rotation_range >= 0.0)) throw ConfigError("augment.rotation_range must be >= 0");
    if (!(scale_min > 0.0 && scale_min <= scale_max))
      throw ConfigError("augment scale range requires 0 < min <= max");
    if (!(gt_placement_extent > 0.0)) throw ConfigError("augment.gt_placement_extent must be > 0");
    if (intensity_range && !(intensity_range->first < intensity_range->second))
      throw ConfigError("augment intensity range requires min < max");
    if (!(crop.xy_limit > 0.0 && crop.z_min < crop.z_max))
      throw ConfigError("augment crop limits are invalid");
  }
};

enum class Axis { x, y };

/// Mirror across the given axis: over x negates y (yaw -> -yaw), over y negates x (yaw -> pi - yaw).
inline Frame world_flip(Frame frame, Axis axis) {
  for (auto& p : frame.cloud) (axis == Axis::x ? p.y : p.x) = -(axis == Axis::x ? p.y : p.x);
  for (auto& l : frame.labels) {
    auto& b = l.box;
    if (axis == Axis::x) {
      b.center.y = -b.center.y;
      b.yaw = normalize_yaw(-b.yaw);
    } else {
      b.center.x = -b.center.x;
      b.yaw = normalize_yaw(std::numbers::pi - b.yaw);
    }
  }
  return frame;
}

inline Frame world_rotate(Frame frame, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  auto rot = [&](double& x, double& y) {
    const double nx = c * x - s * y;
    y = s * x + c * y;
    x = nx;
  };
  for (auto& p : frame.cloud) rot(p.x, p.y);
  for (auto& l : frame.labels) {
    rot(l.box.center.x, l.box.center.y);
    l.box.yaw = normalize_yaw(l.box.yaw + angle);
  }
  return frame;
}

inline Frame world_scale(Frame frame, double s) {
  if (!(s > 0.0)) throw InvalidArgument("world_scale: factor must be > 0");
  for (auto& p : frame.cloud) {
    p.x *= s;
    p.y *= s;
    p.z *= s;
  }
  for (auto& l : frame.labels) {
    auto& b = l.box;
    b.center = {b.center.x * s, b.center.y * s, b.center.z * s};
    b.size = {b.size.x * s, b.size.y * s, b.size.z * s};
  }
  return frame;
}

inline Frame normalize_intensity(Frame frame, double in_min, double in_max) {
  if (!(in_min < in_max)) throw InvalidArgument("normalize_intensity: requires in_min < in_max");
  const double span = in_max - in_min;
  for (auto& p : frame.cloud) p.intensity = std::clamp((p.intensity - in_min) / span, 0.0, 1.0);
  return frame;
}

/// Random flip on each axis, then rotation, then scaling.
inline Frame random_world_augment(Frame frame, const AugmentConfig& cfg, Seed seed) {
  Rng rng(seed);
  if (rng.bernoulli(cfg.flip_probability)) frame = world_flip(std::move(frame), Axis::x);
  if (rng.bernoulli(cfg.flip_probability)) frame = world_flip(std::move(frame), Axis::y);
  const double angle = cfg.rotation_range > 0 ? rng.uniform(-cfg.rotation_range, cfg.rotation_range) : 0.0;
  const double scale = cfg.scale_min < cfg.scale_max ? rng.uniform(cfg.scale_min, cfg.scale_max) : cfg.scale_min;
  frame = world_rotate(std::move(frame), angle);
  return world_scale(std::move(frame), scale);
}

// ---------------------------------------------------------------------------
// Ground-truth database
// ---------------------------------------------------------------------------

inline constexpr double kContainmentTol = 1e-6;

/// One annotated object. `points` are in the box's canonical frame (box
/// center at the origin, heading along +x); `box` is the original pose.
struct GtEntry {
  std::string category;
  PointCloud points;
  Box3D box;
  std::string frame_id;

  bool empty() const { return points.empty(); }
  Box3D canonical_box() const { return {{0, 0, 0}, box.size, 0.0}; }
};

struct GtDatabase {
  std::vector<GtEntry> entries;
};

inline Point to_box_local(const Box3D& b, const Point& p) {
  const geom::Vec2 uv = geom::rotate_about_origin({p.x - b.center.x, p.y - b.center.y}, -b.yaw);
  return {uv.x, uv.y, p.z - b.center.z, p.intensity};
}

inline Point from_box_local(const Box3D& b, const Point& p) {
  const geom::Vec2 xy = geom::rotate_about_origin({p.x, p.y}, b.yaw);
  return {xy.x + b.center.x, xy.y + b.center.y, p.z + b.center.z, p.intensity};
}

inline GtEntry extract_gt_entry(const Frame& frame, const LabeledBox& label) {
  GtEntry e{label.category, {}, label.box, frame.id};
  for (const auto& p : frame.cloud)
    if (geom::box_contains(label.box, p)) e.points.push_back(to_box_local(label.box, p));
  return e;
}

/// Entries for every real box of the given frames, in frame then label order.
inline GtDatabase build_gt_database(std::span<const Frame> frames) {
  GtDatabase db;
  for (const auto& f : frames)
    for (const auto& l : f.labels)
      if (l.provenance == Provenance::real) db.entries.push_back(extract_gt_entry(f, l));
  return db;
}

/// Object points placed at `pose`.
inline PointCloud place_entry(const GtEntry& e, const Box3D& pose) {
  PointCloud out;
  out.reserve(e.points.size());
  for (const auto& p : e.points) out.push_back(from_box_local(pose, p));
  return out;
}

/// Pastes database objects at random collision-free poses. Existing points
/// inside a pasted box are removed so the box holds exactly its object points.
inline Frame gt_sample(Frame frame, const GtDatabase& db, const AugmentConfig& cfg, Seed seed) {
  if (cfg.gt_sample_max_per_class == 0) return frame;
  if (db.entries.empty()) throw InvalidArgument("gt_sample: database is empty");

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < db.entries.size(); ++i)
    if (!db.entries[i].empty()) by_class[db.entries[i].category].push_back(i);

  Rng rng(seed);
  std::vector<Box3D> occupied;
  for (const auto& l : frame.labels) occupied.push_back(l.box);

  for (auto& [category, pool] : by_class) {
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    const std::size_t take = std::min(cfg.gt_sample_max_per_class, pool.size());
    for (std::size_t k = 0; k < take; ++k) {
      const GtEntry& e = db.entries[pool[k]];
      for (int attempt = 0; attempt < cfg.gt_placement_attempts; ++attempt) {
        Box3D pose = e.box;
        pose.center.x = rng.uniform(-cfg.gt_placement_extent, cfg.gt_placement_extent);
        pose.center.y = rng.uniform(-cfg.gt_placement_extent, cfg.gt_placement_extent);
        pose.yaw = normalize_yaw(rng.uniform(-std::numbers::pi, std::numbers::pi));
        const bool blocked = std::any_of(occupied.begin(), occupied.end(),
                                         [&](const Box3D& o) { return geom::boxes_collide(o, pose); });
        if (blocked) continue;

        std::erase_if(frame.cloud,
                      [&](const Point& p) { return geom::box_contains(pose, p, kContainmentTol); });
        const PointCloud pts = place_entry(e, pose);
        frame.cloud.insert(frame.cloud.end(), pts.begin(), pts.end());
        frame.labels.push_back({pose, e.category, std::nullopt, Provenance::real});
        occupied.push_back(pose);
        break;
      }
    }
  }
  return frame;
}

// Persistence: <dir>/index.json plus one cloud file per entry under <dir>/points/.

inline void save_gt_database(const GtDatabase& db, const std::filesystem::path& dir) {
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    const auto& e = db.entries[i];
    std::string name = std::to_string(i);
    name.insert(0, name.size() < 6 ? 6 - name.size() : 0, '0');
    const std::string rel = "points/" + name + ".bin";
    io::write_cloud(dir / rel, e.points);
    nlohmann::json entry = io::label_to_json({e.box, e.category, std::nullopt, Provenance::real});
    entry["frame_id"] = e.frame_id;
    entry["points"] = rel;
    entry["num_points"] = e.points.size();
    index.push_back(std::move(entry));
  }
  io::detail::write_text(dir / "index.json", io::dump_canonical(index));
}

inline GtDatabase load_gt_database(const std::filesystem::path& dir) {
  const auto index = nlohmann::json::parse(io::detail::read_text(dir / "index.json"));
  if (!index.is_array()) throw SchemaError((dir / "index.json").string() + ": expected an array");
  GtDatabase db;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    nlohmann::json box = index[i];
    if (!box.is_object() || !box.contains("points") || !box.contains("frame_id") || !box.contains("num_points"))
      throw SchemaError((dir / "index.json").string() + ": " + path + ": incomplete entry");
    GtEntry e;
    e.frame_id = box.at("frame_id").get<std::string>();
    e.points = io::read_cloud(dir / box.at("points").get<std::string>());
    if (e.points.size() != box.at("num_points").get<std::size_t>())
      throw FormatError(path + ": point count does not match index");
    box.erase("frame_id");
    box.erase("points");
    box.erase("num_points");
    const LabeledBox l = io::label_from_json(box, io::LabelKind::annotation, path);
    e.category = l.category;
    e.box = l.box;
    db.entries.push_back(std::move(e));
  }
  return db;
}

}  // namespace pointmix::augment

#endif  // POINTMIX_AUGMENT_HPP
