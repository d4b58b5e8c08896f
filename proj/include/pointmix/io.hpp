// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_IO_HPP
#define POINTMIX_IO_HPP

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pointmix/core.hpp"

/**
 * File formats.
 *
 * Cloud files: headerless little-endian float32 records (x, y, z, intensity),
 * 16 bytes per point. Label files: canonical JSON (sorted keys, floats rounded
 * to 6 significant digits)
 *
 *   { "frame_id": "...",
 *     "boxes": [ { "center": [x, y, z], "size": [l, w, h], "yaw": r,
 *                  "class": "car", "score": s, "provenance": "real|pseudo" } ] }
 *
 * Manifests: a JSON array of {id, cloud, labels, domain, split}; relative
 * paths resolve against the manifest's directory.
 */
namespace pointmix::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::size_t kBytesPerPoint = 16;

// ---------------------------------------------------------------------------
// Cloud files
// ---------------------------------------------------------------------------

namespace detail {

inline void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

inline double get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_cloud(std::span<const Point> cloud) {
  std::vector<std::uint8_t> out;
  out.reserve(cloud.size() * kBytesPerPoint);
  for (const auto& p : cloud) {
    detail::put_f32(out, p.x);
    detail::put_f32(out, p.y);
    detail::put_f32(out, p.z);
    detail::put_f32(out, p.intensity);
  }
  return out;
}

inline PointCloud decode_cloud(std::span<const std::uint8_t> bytes, const std::string& origin = "") {
  if (bytes.size() % kBytesPerPoint != 0)
    throw FormatError("cloud " + origin + ": length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16 bytes");
  PointCloud cloud(bytes.size() / kBytesPerPoint);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::uint8_t* r = bytes.data() + i * kBytesPerPoint;
    cloud[i] = {detail::get_f32(r), detail::get_f32(r + 4), detail::get_f32(r + 8),
                detail::get_f32(r + 12)};
  }
  return cloud;
}

inline PointCloud read_cloud(const fs::path& path) {
  const auto bytes = detail::read_bytes(path);
  return decode_cloud(bytes, path.string());
}

inline void write_cloud(const fs::path& path, std::span<const Point> cloud) {
  detail::write_bytes(path, encode_cloud(cloud));
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Rounds to 6 significant digits; -0 becomes 0.
inline double canonical_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  const double r = std::strtod(buf, nullptr);
  return r == 0.0 ? 0.0 : r;
}

inline std::string dump_canonical(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class LabelKind {
  annotation,  // real boxes carry no score; pseudo boxes must carry one
  prediction,  // every box must carry a score
};

inline json label_to_json(const LabeledBox& l) {
  const auto& b = l.box;
  json j = {
      {"center", {canonical_number(b.center.x), canonical_number(b.center.y), canonical_number(b.center.z)}},
      {"size", {canonical_number(b.size.x), canonical_number(b.size.y), canonical_number(b.size.z)}},
      {"yaw", canonical_number(normalize_yaw(b.yaw))},
      {"class", l.category},
      {"provenance", std::string(to_string(l.provenance))},
  };
  if (l.score) j["score"] = canonical_number(*l.score);
  return j;
}

inline json labels_to_json(const std::string& frame_id, std::span<const LabeledBox> labels) {
  json boxes = json::array();
  for (const auto& l : labels) boxes.push_back(label_to_json(l));
  return {{"frame_id", frame_id}, {"boxes", std::move(boxes)}};
}

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& msg) {
  throw SchemaError(path + ": " + msg);
}

inline double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) schema_fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_fail(path, "must be finite");
  return v;
}

inline Vec3 triple_at(const json& parent, const char* key, const std::string& path) {
  const std::string p = path + "." + key;
  if (!parent.contains(key)) schema_fail(p, "missing");
  const json& a = parent.at(key);
  if (!a.is_array() || a.size() != 3) schema_fail(p, "expected an array of 3 numbers");
  return {number_at(a[0], p + "[0]"), number_at(a[1], p + "[1]"), number_at(a[2], p + "[2]")};
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& path) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) schema_fail(path + "." + k, "unknown key");
  }
}

}  // namespace detail

inline LabeledBox label_from_json(const json& j, LabelKind kind, const std::string& path) {
  using detail::schema_fail;
  if (!j.is_object()) schema_fail(path, "expected an object");
  detail::check_keys(j, {"center", "size", "yaw", "class", "score", "provenance"}, path);

  LabeledBox l;
  l.box.center = detail::triple_at(j, "center", path);
  l.box.size = detail::triple_at(j, "size", path);
  if (!(l.box.size.x > 0)) schema_fail(path + ".size[0]", "must be > 0");
  if (!(l.box.size.y > 0)) schema_fail(path + ".size[1]", "must be > 0");
  if (!(l.box.size.z > 0)) schema_fail(path + ".size[2]", "must be > 0");
  if (!j.contains("yaw")) schema_fail(path + ".yaw", "missing");
  l.box.yaw = normalize_yaw(detail::number_at(j.at("yaw"), path + ".yaw"));

  if (!j.contains("class") || !j.at("class").is_string() || j.at("class").get<std::string>().empty())
    schema_fail(path + ".class", "expected a non-empty string");
  l.category = j.at("class").get<std::string>();

  if (!j.contains("provenance") || !j.at("provenance").is_string())
    schema_fail(path + ".provenance", "expected \"real\" or \"pseudo\"");
  const auto prov = j.at("provenance").get<std::string>();
  if (prov == "real") l.provenance = Provenance::real;
  else if (prov == "pseudo") l.provenance = Provenance::pseudo;
  else schema_fail(path + ".provenance", "expected \"real\" or \"pseudo\", got \"" + prov + "\"");

  if (j.contains("score")) {
    const double s = detail::number_at(j.at("score"), path + ".score");
    if (!(s >= 0.0 && s <= 1.0)) schema_fail(path + ".score", "must lie in [0, 1]");
    if (kind == LabelKind::annotation && l.provenance == Provenance::real)
      schema_fail(path + ".score", "real annotation must not carry a score");
    l.score = s;
  } else if (kind == LabelKind::prediction || l.provenance == Provenance::pseudo) {
    schema_fail(path + ".score", "missing");
  }
  return l;
}

struct LabelFile {
  std::string frame_id;
  std::vector<LabeledBox> boxes;
};

inline LabelFile labels_from_json(const json& j, LabelKind kind = LabelKind::annotation) {
  using detail::schema_fail;
  if (!j.is_object()) schema_fail("$", "expected an object");
  detail::check_keys(j, {"frame_id", "boxes"}, "$");
  if (!j.contains("frame_id") || !j.at("frame_id").is_string())
    schema_fail("$.frame_id", "expected a string");
  if (!j.contains("boxes") || !j.at("boxes").is_array()) schema_fail("$.boxes", "expected an array");
  LabelFile f;
  f.frame_id = j.at("frame_id").get<std::string>();
  const json& boxes = j.at("boxes");
  for (std::size_t i = 0; i < boxes.size(); ++i)
    f.boxes.push_back(label_from_json(boxes[i], kind, "$.boxes[" + std::to_string(i) + "]"));
  return f;
}

inline LabelFile read_labels(const fs::path& path, LabelKind kind = LabelKind::annotation) {
  json j;
  try {
    j = json::parse(detail::read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return labels_from_json(j, kind);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline void write_labels(const fs::path& path, const std::string& frame_id,
                         std::span<const LabeledBox> labels) {
  detail::write_text(path, dump_canonical(labels_to_json(frame_id, labels)));
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

inline Frame read_frame(const fs::path& cloud_path, const fs::path& label_path,
                        Domain domain = Domain::target) {
  Frame f;
  f.cloud = read_cloud(cloud_path);
  for (const auto& p : f.cloud)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.intensity))
      throw FormatError(cloud_path.string() + ": non-finite point value");
  LabelFile lf = read_labels(label_path);
  f.id = std::move(lf.frame_id);
  f.labels = std::move(lf.boxes);
  f.domain = domain;
  return f;
}

inline void write_frame(const Frame& frame, const fs::path& cloud_path, const fs::path& label_path) {
  write_cloud(cloud_path, frame.cloud);
  write_labels(label_path, frame.id, frame.labels);
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

inline Domain parse_domain(const std::string& s, const std::string& path) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw SchemaError(path + ": expected \"source\" or \"target\"");
}

inline SplitTag parse_split(const std::string& s, const std::string& path) {
  if (s == "labeled") return SplitTag::labeled;
  if (s == "unlabeled") return SplitTag::unlabeled;
  if (s == "none") return SplitTag::none;
  throw SchemaError(path + ": expected \"labeled\", \"unlabeled\" or \"none\"");
}

/// Lists every entry whose cloud or label file is missing.
inline void validate_manifest(const DatasetManifest& m) {
  std::vector<std::string> missing;
  for (const auto& e : m.frames) {
    if (!fs::exists(e.cloud_path)) missing.push_back(e.id + ": " + e.cloud_path.string());
    if (!fs::exists(e.label_path)) missing.push_back(e.id + ": " + e.label_path.string());
  }
  if (!missing.empty()) {
    std::string msg = "manifest references missing files:";
    for (const auto& s : missing) msg += "\n  " + s;
    throw ManifestError(msg, missing);
  }
}

inline DatasetManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_array()) throw SchemaError("$: manifest must be a JSON array");
  DatasetManifest m;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const json& e = j[i];
    if (!e.is_object()) throw SchemaError(path + ": expected an object");
    detail::check_keys(e, {"id", "cloud", "labels", "domain", "split"}, path);
    for (const char* k : {"id", "cloud", "labels", "domain", "split"})
      if (!e.contains(k) || !e.at(k).is_string())
        throw SchemaError(path + "." + k + ": expected a string");
    ManifestEntry me;
    me.id = e.at("id").get<std::string>();
    if (!ids.insert(me.id).second) throw SchemaError(path + ".id: duplicate frame id '" + me.id + "'");
    me.cloud_path = base_dir / fs::path(e.at("cloud").get<std::string>());
    me.label_path = base_dir / fs::path(e.at("labels").get<std::string>());
    me.domain = parse_domain(e.at("domain").get<std::string>(), path + ".domain");
    me.split = parse_split(e.at("split").get<std::string>(), path + ".split");
    m.frames.push_back(std::move(me));
  }
  return m;
}

inline DatasetManifest read_manifest(const fs::path& path, bool check_files = true) {
  json j;
  try {
    j = json::parse(detail::read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    m = manifest_from_json(j, path.parent_path());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  for (auto& e : m.frames) {
    e.cloud_path = e.cloud_path.lexically_normal();
    e.label_path = e.label_path.lexically_normal();
  }
  if (check_files) validate_manifest(m);
  return m;
}

inline std::string portable_relative(const fs::path& p, const fs::path& base) {
  const fs::path abs_p = fs::absolute(p).lexically_normal();
  const fs::path abs_b = fs::absolute(base).lexically_normal();
  const fs::path rel = abs_p.lexically_relative(abs_b);
  return (rel.empty() ? abs_p : rel).generic_string();
}

inline json manifest_to_json(const DatasetManifest& m, const fs::path& base_dir) {
  json arr = json::array();
  for (const auto& e : m.frames)
    arr.push_back({{"id", e.id},
                   {"cloud", portable_relative(e.cloud_path, base_dir)},
                   {"labels", portable_relative(e.label_path, base_dir)},
                   {"domain", std::string(to_string(e.domain))},
                   {"split", std::string(to_string(e.split))}});
  return arr;
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  detail::write_text(path, dump_canonical(manifest_to_json(m, base)));
}

inline Frame read_frame(const ManifestEntry& e) {
  Frame f = read_frame(e.cloud_path, e.label_path, e.domain);
  f.id = e.id;
  return f;
}

/// Lazy random-access view over the frames of a manifest.
class ManifestFrames {
public:
  ManifestFrames() = default;
  explicit ManifestFrames(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {}

  std::size_t size() const { return entries_.size(); }
  Frame at(std::size_t i) const { return read_frame(entries_.at(i)); }
  const ManifestEntry& entry(std::size_t i) const { return entries_.at(i); }

private:
  std::vector<ManifestEntry> entries_;
};

inline std::vector<ManifestEntry> select(const DatasetManifest& m, SplitTag tag) {
  std::vector<ManifestEntry> out;
  for (const auto& e : m.frames)
    if (e.split == tag) out.push_back(e);
  return out;
}

}  // namespace pointmix::io

#endif  // POINTMIX_IO_HPP
