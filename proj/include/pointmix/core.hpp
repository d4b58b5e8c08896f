// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_CORE_HPP
#define POINTMIX_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pointmix {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

struct InvalidArgument : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "InvalidArgument"; }
};

struct FormatError : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "FormatError"; }
};

struct SchemaError : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "SchemaError"; }
};

struct ManifestError : Error {
  ManifestError(const std::string& what, std::vector<std::string> missing_entries = {})
      : Error(what), missing(std::move(missing_entries)) {}
  const char* kind() const noexcept override { return "ManifestError"; }
  std::vector<std::string> missing;
};

struct ConfigError : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
};

struct NoMatchingRange : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "NoMatchingRange"; }
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

struct Seed {
  std::uint64_t value = 0;
  friend bool operator==(Seed, Seed) = default;
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent sub-seed for stream `stream` of `parent`. Used for per-emission
/// and per-frame seeding so batch work can be split across threads.
constexpr Seed derive_seed(Seed parent, std::uint64_t stream) noexcept {
  return Seed{mix64(parent.value ^ mix64(stream))};
}

class Rng {
public:
  explicit Rng(Seed seed) : engine_(seed.value) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Point {
  double x = 0, y = 0, z = 0;
  double intensity = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

using PointCloud = std::vector<Point>;

/// Wraps an angle into (-pi, pi].
inline double normalize_yaw(double yaw) {
  constexpr double pi = std::numbers::pi;
  double a = std::remainder(yaw, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

/// Oriented box. size = (length along heading, width across, height).
struct Box3D {
  Vec3 center;
  Vec3 size{1, 1, 1};
  double yaw = 0;
  friend bool operator==(const Box3D&, const Box3D&) = default;
};

enum class Provenance { real, pseudo };
enum class Domain { source, target };
enum class SplitTag { none, labeled, unlabeled };

struct LabeledBox {
  Box3D box;
  std::string category = "car";
  std::optional<double> score;
  Provenance provenance = Provenance::real;
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

struct Frame {
  std::string id;
  PointCloud cloud;
  std::vector<LabeledBox> labels;
  Domain domain = Domain::target;
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path cloud_path;
  std::filesystem::path label_path;
  Domain domain = Domain::target;
  SplitTag split = SplitTag::none;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> frames;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline std::string_view to_string(Provenance p) { return p == Provenance::real ? "real" : "pseudo"; }
inline std::string_view to_string(Domain d) { return d == Domain::source ? "source" : "target"; }
inline std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::labeled: return "labeled";
    case SplitTag::unlabeled: return "unlabeled";
    default: return "none";
  }
}

/// Throws InvalidArgument when a box or point violates the type invariants.
inline void validate_box(const Box3D& b) {
  if (!(b.size.x > 0 && b.size.y > 0 && b.size.z > 0))
    throw InvalidArgument("box size components must be strictly positive");
  if (!std::isfinite(b.center.x) || !std::isfinite(b.center.y) || !std::isfinite(b.center.z) ||
      !std::isfinite(b.yaw) || !std::isfinite(b.size.x) || !std::isfinite(b.size.y) ||
      !std::isfinite(b.size.z))
    throw InvalidArgument("box fields must be finite");
}

inline void validate_label(const LabeledBox& l) {
  validate_box(l.box);
  if (l.provenance == Provenance::pseudo && !l.score)
    throw InvalidArgument("pseudo label without score");
  if (l.score && !(*l.score >= 0.0 && *l.score <= 1.0))
    throw InvalidArgument("score outside [0, 1]");
}

// ---------------------------------------------------------------------------
// Splits and range cropping
// ---------------------------------------------------------------------------

/// Tags every stride-th target frame (starting at ordinal 0) as labeled and
/// the rest as unlabeled, stride = round(1 / fraction). Order is unchanged.
inline DatasetManifest make_ssda_split(const DatasetManifest& manifest, double fraction) {
  if (manifest.frames.empty()) throw InvalidArgument("make_ssda_split: empty manifest");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidArgument("make_ssda_split: fraction must lie in (0, 1]");
  for (const auto& e : manifest.frames)
    if (e.domain != Domain::target)
      throw InvalidArgument("make_ssda_split: frame '" + e.id + "' is not target-domain");

  const auto stride = static_cast<std::size_t>(std::llround(1.0 / fraction));
  DatasetManifest out = manifest;
  for (std::size_t i = 0; i < out.frames.size(); ++i)
    out.frames[i].split = (i % stride == 0) ? SplitTag::labeled : SplitTag::unlabeled;
  return out;
}

inline std::size_t count_split(const DatasetManifest& m, SplitTag tag) {
  std::size_t n = 0;
  for (const auto& e : m.frames) n += e.split == tag;
  return n;
}

struct RangeLimits {
  double xy_limit = 54.0;
  double z_min = -5.0;
  double z_max = 4.8;

  bool contains(double x, double y, double z) const {
    return std::abs(x) <= xy_limit && std::abs(y) <= xy_limit && z >= z_min && z <= z_max;
  }
};

/// Keeps points inside the detection volume and boxes whose center is inside it.
inline Frame crop_to_range(const Frame& frame, const RangeLimits& limits) {
  if (!(limits.xy_limit > 0) || !(limits.z_min < limits.z_max))
    throw InvalidArgument("crop_to_range: invalid limits");
  Frame out;
  out.id = frame.id;
  out.domain = frame.domain;
  out.cloud.reserve(frame.cloud.size());
  for (const auto& p : frame.cloud)
    if (limits.contains(p.x, p.y, p.z)) out.cloud.push_back(p);
  for (const auto& l : frame.labels)
    if (limits.contains(l.box.center.x, l.box.center.y, l.box.center.z)) out.labels.push_back(l);
  return out;
}

inline Frame crop_to_range(const Frame& frame, double xy_limit, double z_min, double z_max) {
  return crop_to_range(frame, RangeLimits{xy_limit, z_min, z_max});
}

}  // namespace pointmix

#endif  // POINTMIX_CORE_HPP
