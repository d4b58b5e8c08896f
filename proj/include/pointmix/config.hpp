// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_CONFIG_HPP
#define POINTMIX_CONFIG_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "pointmix/augment.hpp"
#include "pointmix/core.hpp"
#include "pointmix/cutmix.hpp"
#include "pointmix/eval.hpp"
#include "pointmix/mixup.hpp"
#include "pointmix/synth.hpp"

namespace pointmix {

struct SplitConfig {
  double fraction = 0.1;
};

struct ClosedGapInputs {
  std::optional<double> ap_source_only;
  std::optional<double> ap_oracle;
};

/// Every tunable of every stage plus seed and dataset locations.
struct PipelineConfig {
  Seed seed{0};
  unsigned workers = 1;
  std::map<std::string, std::string> paths;  // input manifests/directories and output_dir

  SplitConfig split;
  cutmix::CutMixConfig cutmix;
  mixup::MixUpConfig mixup;
  augment::AugmentConfig augment;
  synth::SynthConfig synth;
  eval::EvalConfig eval;
  ClosedGapInputs gap;
  std::string eval_frames = "all";  // all | labeled | unlabeled
  std::vector<double> voxel_size{0.075, 0.075, 0.2};  // carried as metadata

  void validate() const {
    if (!(split.fraction > 0.0 && split.fraction <= 1.0)) throw ConfigError("split.fraction must lie in (0, 1]");
    if (workers == 0) throw ConfigError("workers must be >= 1");
    cutmix.validate();
    mixup.validate();
    augment.validate();
    synth.validate();
    eval.validate();
    if (eval_frames != "all" && eval_frames != "labeled" && eval_frames != "unlabeled")
      throw ConfigError("eval.frames must be \"all\", \"labeled\" or \"unlabeled\"");
  }
};

inline const std::set<std::string>& path_keys() {
  static const std::set<std::string> keys{"input_manifest", "source_manifest", "target_manifest",
                                          "labeled_manifest", "pseudo_manifest", "predictions_dir",
                                          "gt_manifest",      "gtdb_dir",        "output_dir"};
  return keys;
}

namespace detail {

class TableReader {
public:
  TableReader(const toml::table& t, std::string name) : table_(t), name_(std::move(name)) {}

  /// Rejects keys that were never asked for.
  void finish() const {
    for (const auto& [k, v] : table_) {
      if (!seen_.count(std::string(k.str()))) throw ConfigError("unknown config key '" + qualified(k.str()) + "'");
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const toml::node* n = table_.get(key);
    if (!n) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!v) fail(key, "boolean");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = n->value<std::string>();
      if (!v) fail(key, "string");
      out = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = n->value<double>();
      if (!v) fail(key, "number");
      out = *v;
    } else {
      auto v = n->value<std::int64_t>();
      if (!v || *v < 0) fail(key, "non-negative integer");
      out = static_cast<T>(*v);
    }
  }

  void get(const char* key, std::vector<double>& out) {
    seen_.insert(key);
    const toml::node* n = table_.get(key);
    if (!n) return;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "array of numbers");
    out.clear();
    for (const auto& e : *arr) {
      auto v = e.value<double>();
      if (!v) fail(key, "array of numbers");
      out.push_back(*v);
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!table_.get(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  const toml::table* sub(const char* key) {
    seen_.insert(key);
    const toml::node* n = table_.get(key);
    if (!n) return nullptr;
    if (!n->as_table()) fail(key, "table");
    return n->as_table();
  }

private:
  std::string qualified(std::string_view k) const {
    return name_.empty() ? std::string(k) : name_ + "." + std::string(k);
  }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("config key '" + qualified(key) + "' must be a " + what);
  }

  const toml::table& table_;
  std::string name_;
  std::set<std::string> seen_;
};

inline void read_beams(TableReader& r, const std::string& prefix, synth::BeamModel& m) {
  r.get((prefix + "_beams").c_str(), m.n_beams);
  r.get((prefix + "_elevation_min").c_str(), m.elevation_min);
  r.get((prefix + "_elevation_max").c_str(), m.elevation_max);
}

}  // namespace detail

inline PipelineConfig config_from_toml(const toml::table& root) {
  PipelineConfig cfg;
  {
    detail::TableReader top(root, "");
    top.get("seed", cfg.seed.value);
    top.get("workers", cfg.workers);
    for (const auto& k : path_keys()) {
      std::optional<std::string> v;
      top.get(k.c_str(), v);
      if (v) cfg.paths[k] = *v;
    }
    if (const auto* t = top.sub("split")) {
      detail::TableReader r(*t, "split");
      r.get("fraction", cfg.split.fraction);
      r.finish();
    }
    if (const auto* t = top.sub("cutmix")) {
      detail::TableReader r(*t, "cutmix");
      auto& c = cfg.cutmix;
      r.get("apply_probability", c.apply_probability);
      r.get("half_extent_min", c.half_extent_min);
      r.get("half_extent_max", c.half_extent_max);
      r.get("range_tolerance", c.range_tolerance);
      r.get("max_center_retries", c.max_center_retries);
      r.get("emissions", c.emissions);
      r.finish();
    }
    if (const auto* t = top.sub("mixup")) {
      detail::TableReader r(*t, "mixup");
      auto& c = cfg.mixup;
      r.get("apply_probability", c.apply_probability);
      std::string policy = "fixed";
      r.get("lambda_policy", policy);
      std::optional<double> lambda, lo, hi;
      r.get("lambda", lambda);
      r.get("lambda_min", lo);
      r.get("lambda_max", hi);
      if (policy == "fixed") {
        c.lambda = mixup::LambdaPolicy::fixed(lambda.value_or(0.5));
      } else if (policy == "uniform") {
        c.lambda = mixup::LambdaPolicy::uniform(lo.value_or(0.4), hi.value_or(0.6));
      } else {
        throw ConfigError("mixup.lambda_policy must be \"fixed\" or \"uniform\"");
      }
      r.get("score_threshold", c.score_threshold);
      r.get("collision_margin", c.collision_margin);
      r.get("min_points_per_box", c.min_points_per_box);
      r.get("emissions", c.emissions);
      r.finish();
    }
    if (const auto* t = top.sub("augment")) {
      detail::TableReader r(*t, "augment");
      auto& c = cfg.augment;
      r.get("flip_probability", c.flip_probability);
      r.get("rotation_range", c.rotation_range);
      r.get("scale_min", c.scale_min);
      r.get("scale_max", c.scale_max);
      r.get("gt_sample_max_per_class", c.gt_sample_max_per_class);
      r.get("gt_placement_extent", c.gt_placement_extent);
      r.get("gt_placement_attempts", c.gt_placement_attempts);
      std::optional<double> imin, imax;
      r.get("intensity_min", imin);
      r.get("intensity_max", imax);
      if (imin.has_value() != imax.has_value())
        throw ConfigError("augment.intensity_min and intensity_max must be given together");
      if (imin) c.intensity_range = std::make_pair(*imin, *imax);
      r.get("crop_xy", c.crop.xy_limit);
      r.get("crop_z_min", c.crop.z_min);
      r.get("crop_z_max", c.crop.z_max);
      r.get("voxel_size", cfg.voxel_size);
      r.finish();
    }
    if (const auto* t = top.sub("synth")) {
      detail::TableReader r(*t, "synth");
      auto& c = cfg.synth;
      r.get("scenes", c.scenes);
      r.get("objects_per_scene", c.scene.n_objects);
      r.get("extent", c.scene.extent);
      r.get("min_object_range", c.scene.min_object_range);
      r.get("shared_scenes", c.shared_scenes);
      detail::read_beams(r, "source", c.source);
      detail::read_beams(r, "target", c.target);
      double step = c.source.azimuth_step, height = c.source.sensor_height;
      double range = c.source.max_range, dropout = c.source.dropout_probability;
      r.get("azimuth_step", step);
      r.get("sensor_height", height);
      r.get("max_range", range);
      r.get("dropout_probability", dropout);
      for (auto* m : {&c.source, &c.target}) {
        m->azimuth_step = step;
        m->sensor_height = height;
        m->max_range = range;
        m->dropout_probability = dropout;
      }
      r.finish();
    }
    if (const auto* t = top.sub("eval")) {
      detail::TableReader r(*t, "eval");
      auto& c = cfg.eval;
      r.get("category", c.category);
      r.get("thresholds", c.thresholds);
      r.get("min_recall", c.min_recall);
      r.get("min_precision", c.min_precision);
      r.get("raw_pr_integration", c.raw_pr_integration);
      r.get("ap_source_only", cfg.gap.ap_source_only);
      r.get("ap_oracle", cfg.gap.ap_oracle);
      r.get("frames", cfg.eval_frames);
      r.finish();
    }
    top.finish();
  }
  return cfg;
}

inline PipelineConfig parse_config(std::string_view text, const std::string& origin = "<config>") {
  try {
    return config_from_toml(toml::parse(text, origin));
  } catch (const toml::parse_error& e) {
    throw ConfigError(origin + ": " + std::string(e.description()));
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::detail::read_text(path), path.string());
}

/// POINTMIX_SEED, when set, replaces the configured seed.
inline void apply_seed_env(PipelineConfig& cfg) {
  const char* env = std::getenv("POINTMIX_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-')
    throw ConfigError(std::string("POINTMIX_SEED is not an unsigned integer: ") + env);
  cfg.seed.value = v;
}

/// Tunables only (no paths, no worker count): two runs with equal JSON produce equal data.
inline nlohmann::json tunables_to_json(const PipelineConfig& c) {
  using nlohmann::json;
  const auto& m = c.mixup;
  const auto beams = [](const synth::BeamModel& b) {
    return json{{"n_beams", b.n_beams}, {"elevation_min", b.elevation_min}, {"elevation_max", b.elevation_max},
                {"azimuth_step", b.azimuth_step}, {"sensor_height", b.sensor_height},
                {"max_range", b.max_range}, {"dropout_probability", b.dropout_probability}};
  };
  json j;
  j["seed"] = c.seed.value;
  j["split"] = {{"fraction", c.split.fraction}};
  j["cutmix"] = {{"apply_probability", c.cutmix.apply_probability},
                 {"half_extent_min", c.cutmix.half_extent_min},
                 {"half_extent_max", c.cutmix.half_extent_max},
                 {"range_tolerance", c.cutmix.range_tolerance},
                 {"max_center_retries", c.cutmix.max_center_retries},
                 {"emissions", c.cutmix.emissions}};
  j["mixup"] = {{"apply_probability", m.apply_probability},
                {"lambda_policy", m.lambda.kind == mixup::LambdaPolicy::Kind::fixed ? "fixed" : "uniform"},
                {"lambda_min", m.lambda.lo},
                {"lambda_max", m.lambda.hi},
                {"score_threshold", m.score_threshold},
                {"collision_margin", m.collision_margin},
                {"min_points_per_box", m.min_points_per_box},
                {"emissions", m.emissions}};
  const auto& a = c.augment;
  j["augment"] = {{"flip_probability", a.flip_probability},
                  {"rotation_range", a.rotation_range},
                  {"scale_min", a.scale_min},
                  {"scale_max", a.scale_max},
                  {"gt_sample_max_per_class", a.gt_sample_max_per_class},
                  {"gt_placement_extent", a.gt_placement_extent},
                  {"gt_placement_attempts", a.gt_placement_attempts},
                  {"crop_xy", a.crop.xy_limit},
                  {"crop_z_min", a.crop.z_min},
                  {"crop_z_max", a.crop.z_max},
                  {"voxel_size", c.voxel_size}};
  if (a.intensity_range) {
    j["augment"]["intensity_min"] = a.intensity_range->first;
    j["augment"]["intensity_max"] = a.intensity_range->second;
  }
  j["synth"] = {{"scenes", c.synth.scenes},
                {"objects_per_scene", c.synth.scene.n_objects},
                {"extent", c.synth.scene.extent},
                {"min_object_range", c.synth.scene.min_object_range},
                {"shared_scenes", c.synth.shared_scenes},
                {"source", beams(c.synth.source)},
                {"target", beams(c.synth.target)}};
  j["eval"] = {{"category", c.eval.category},
               {"thresholds", c.eval.thresholds},
               {"min_recall", c.eval.min_recall},
               {"min_precision", c.eval.min_precision},
               {"raw_pr_integration", c.eval.raw_pr_integration},
               {"frames", c.eval_frames}};
  if (c.gap.ap_source_only) j["eval"]["ap_source_only"] = *c.gap.ap_source_only;
  if (c.gap.ap_oracle) j["eval"]["ap_oracle"] = *c.gap.ap_oracle;
  return j;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const PipelineConfig& c) { return fnv1a_hex(tunables_to_json(c).dump()); }

}  // namespace pointmix

#endif  // POINTMIX_CONFIG_HPP
