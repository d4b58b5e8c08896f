// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_SYNTH_HPP
#define POINTMIX_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pointmix/core.hpp"
#include "pointmix/geom.hpp"
#include "pointmix/io.hpp"

/**
 * Synthetic dual-domain scans: cuboid objects on a flat ground plane seen by a
 * spinning multi-beam sensor. Two beam models with different beam counts and
 * elevation fields of view reproduce a cross-sensor domain gap.
 */
namespace pointmix::synth {

inline constexpr double kDeg = std::numbers::pi / 180.0;

struct BeamModel {
  int n_beams = 32;
  double elevation_min = -30.0;  // degrees
  double elevation_max = 10.0;   // degrees
  double azimuth_step = 0.5;     // degrees
  double sensor_height = 1.8;
  double max_range = 60.0;
  double dropout_probability = 0.05;

  void validate() const {
    if (n_beams < 1) throw ConfigError("beam model needs at least one beam");
    if (!(elevation_min < elevation_max)) throw ConfigError("beam elevation_min must be < elevation_max");
    if (!(azimuth_step > 0.0)) throw ConfigError("beam azimuth_step must be > 0");
    if (!(max_range > 0.0)) throw ConfigError("beam max_range must be > 0");
    if (!(dropout_probability >= 0.0 && dropout_probability < 1.0))
      throw ConfigError("beam dropout_probability must lie in [0, 1)");
  }
};

/// 64 beams over [-18, 2] degrees.
inline BeamModel source_beams() { return {64, -18.0, 2.0}; }
/// 32 beams over [-30, 10] degrees.
inline BeamModel target_beams() { return {32, -30.0, 10.0}; }

/// Uniformly spaced, both endpoints included.
inline std::vector<double> elevation_angles(const BeamModel& m) {
  if (m.n_beams == 1) return {m.elevation_min};
  std::vector<double> out(static_cast<std::size_t>(m.n_beams));
  const double step = (m.elevation_max - m.elevation_min) / (m.n_beams - 1);
  for (int i = 0; i < m.n_beams; ++i) out[i] = m.elevation_min + step * i;
  out.back() = m.elevation_max;
  return out;
}

struct ClassProfile {
  std::string name;
  double weight;
  Vec3 size_min, size_max;
  double intensity;
};

inline std::vector<ClassProfile> default_class_mix() {
  return {
      {"car", 0.7, {3.8, 1.6, 1.4}, {5.0, 2.0, 1.8}, 0.9},
      {"pedestrian", 0.2, {0.5, 0.5, 1.6}, {0.9, 0.9, 1.9}, 0.5},
      {"cyclist", 0.1, {1.6, 0.5, 1.5}, {1.9, 0.8, 1.8}, 0.7},
  };
}

inline constexpr double kGroundIntensity = 0.2;

struct SceneSpec {
  double extent = 50.0;  // objects lie in [-extent, extent]^2
  std::vector<LabeledBox> objects;
};

struct SceneConfig {
  double extent = 50.0;
  std::size_t n_objects = 12;
  double min_object_range = 4.0;  // keeps the sensor outside every object
  std::vector<ClassProfile> class_mix = default_class_mix();
  int placement_budget = 200;     // attempts per object
};

/// Rejection-samples non-colliding ground-standing cuboids. Returns fewer
/// objects when the placement budget runs out.
inline SceneSpec generate_scene(const SceneConfig& cfg, Seed seed) {
  if (cfg.class_mix.empty()) throw ConfigError("synth class mix is empty");
  Rng rng(seed);
  std::vector<double> weights;
  for (const auto& c : cfg.class_mix) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  SceneSpec scene{cfg.extent, {}};
  for (std::size_t k = 0; k < cfg.n_objects; ++k) {
    const ClassProfile& cls = cfg.class_mix[pick(rng.engine())];
    for (int attempt = 0; attempt < cfg.placement_budget; ++attempt) {
      Box3D b;
      b.size = {rng.uniform(cls.size_min.x, cls.size_max.x), rng.uniform(cls.size_min.y, cls.size_max.y),
                rng.uniform(cls.size_min.z, cls.size_max.z)};
      b.center = {rng.uniform(-cfg.extent, cfg.extent), rng.uniform(-cfg.extent, cfg.extent), 0.5 * b.size.z};
      b.yaw = normalize_yaw(rng.uniform(-std::numbers::pi, std::numbers::pi));
      const double reach = 0.5 * std::hypot(b.size.x, b.size.y);
      if (geom::bev_range(geom::bev(b.center)) - reach < cfg.min_object_range) continue;
      const bool clash = std::any_of(scene.objects.begin(), scene.objects.end(),
                                     [&](const LabeledBox& o) { return geom::boxes_collide(o.box, b); });
      if (clash) continue;
      scene.objects.push_back({b, cls.name, std::nullopt, Provenance::real});
      break;
    }
  }
  return scene;
}

/// Slab test in the box's local frame; entry distance along a unit ray, if any.
inline std::optional<double> ray_box_entry(const Vec3& origin, const Vec3& dir, const Box3D& b) {
  const geom::Vec2 o2 = geom::rotate_about_origin({origin.x - b.center.x, origin.y - b.center.y}, -b.yaw);
  const geom::Vec2 d2 = geom::rotate_about_origin({dir.x, dir.y}, -b.yaw);
  const double o[3] = {o2.x, o2.y, origin.z - b.center.z};
  const double d[3] = {d2.x, d2.y, dir.z};
  const double h[3] = {0.5 * b.size.x, 0.5 * b.size.y, 0.5 * b.size.z};
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (std::abs(o[a]) > h[a]) return std::nullopt;
      continue;
    }
    double t0 = (-h[a] - o[a]) / d[a];
    double t1 = (h[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_enter <= 0.0) return std::nullopt;
  return t_enter;
}

inline double class_intensity(const std::string& category, const std::vector<ClassProfile>& mix) {
  for (const auto& c : mix)
    if (c.name == category) return c.intensity;
  return 0.6;
}

/// One sweep: every (elevation, azimuth) ray returns its first hit on an
/// object or the ground within max_range. Labels are the objects that hold at
/// least one returned point.
inline Frame render_scan(const SceneSpec& scene, const BeamModel& beams, Seed seed,
                         const std::vector<ClassProfile>& class_mix = default_class_mix()) {
  beams.validate();
  Rng rng(seed);
  Frame f;
  const Vec3 origin{0.0, 0.0, beams.sensor_height};
  const auto n_az = static_cast<std::size_t>(std::floor(360.0 / beams.azimuth_step + 1e-9));

  for (double elev : elevation_angles(beams)) {
    const double ce = std::cos(elev * kDeg), se = std::sin(elev * kDeg);
    for (std::size_t j = 0; j < n_az; ++j) {
      const double az = static_cast<double>(j) * beams.azimuth_step * kDeg;
      const Vec3 dir{ce * std::cos(az), ce * std::sin(az), se};
      if (rng.bernoulli(beams.dropout_probability)) continue;

      double best = std::numeric_limits<double>::infinity();
      double intensity = kGroundIntensity;
      bool ground = false;
      for (const auto& o : scene.objects) {
        if (auto t = ray_box_entry(origin, dir, o.box); t && *t < best) {
          best = *t;
          intensity = class_intensity(o.category, class_mix);
        }
      }
      if (dir.z < 0.0) {
        const double t_ground = beams.sensor_height / -dir.z;
        if (t_ground < best) {
          best = t_ground;
          intensity = kGroundIntensity;
          ground = true;
        }
      }
      if (!(best <= beams.max_range)) continue;
      Point p{origin.x + best * dir.x, origin.y + best * dir.y, origin.z + best * dir.z, intensity};
      if (ground) p.z = 0.0;
      f.cloud.push_back(p);
    }
  }

  for (const auto& o : scene.objects) {
    const bool seen = std::any_of(f.cloud.begin(), f.cloud.end(),
                                  [&](const Point& p) { return geom::box_contains(o.box, p, 1e-6); });
    if (seen) f.labels.push_back(o);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Domain pairs
// ---------------------------------------------------------------------------

struct SynthConfig {
  std::size_t scenes = 20;
  SceneConfig scene;
  BeamModel source = source_beams();
  BeamModel target = target_beams();
  /// Render the same scene list in both domains instead of independent draws.
  bool shared_scenes = false;

  void validate() const {
    source.validate();
    target.validate();
    if (scenes < 1) throw ConfigError("synth.scenes must be >= 1");
  }
};

/// Frame `index` of the given domain. Streams are independent per domain
/// unless scenes are shared.
inline Frame render_domain_frame(const SynthConfig& cfg, Domain domain, std::size_t index, Seed seed) {
  const std::uint64_t stream = cfg.shared_scenes ? 0 : (domain == Domain::source ? 1 : 2);
  const Seed scene_seed = derive_seed(derive_seed(seed, stream), index);
  const SceneSpec scene = generate_scene(cfg.scene, scene_seed);
  const Seed render_seed = derive_seed(derive_seed(seed, domain == Domain::source ? 11 : 12), index);
  Frame f = render_scan(scene, domain == Domain::source ? cfg.source : cfg.target, render_seed,
                        cfg.scene.class_mix);
  std::string n = std::to_string(index);
  n.insert(0, n.size() < 6 ? 6 - n.size() : 0, '0');
  f.id = (domain == Domain::source ? "src_" : "tgt_") + n;
  f.domain = domain;
  return f;
}

/// Writes <out_dir>/{source,target}/ frames plus source.json and target.json.
inline std::pair<DatasetManifest, DatasetManifest> make_domain_pair(const SynthConfig& cfg, Seed seed,
                                                                    const std::filesystem::path& out_dir) {
  cfg.validate();
  std::pair<DatasetManifest, DatasetManifest> out;
  for (Domain d : {Domain::source, Domain::target}) {
    DatasetManifest& m = d == Domain::source ? out.first : out.second;
    const std::string sub(to_string(d));
    for (std::size_t i = 0; i < cfg.scenes; ++i) {
      const Frame f = render_domain_frame(cfg, d, i, seed);
      ManifestEntry e{f.id, out_dir / sub / (f.id + ".bin"), out_dir / sub / (f.id + ".json"), d, SplitTag::none};
      io::write_frame(f, e.cloud_path, e.label_path);
      m.frames.push_back(std::move(e));
    }
    io::write_manifest(out_dir / (sub + ".json"), m);
  }
  return out;
}

}  // namespace pointmix::synth

#endif  // POINTMIX_SYNTH_HPP
