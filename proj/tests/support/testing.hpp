// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

// Shared test helpers: random generators, independent oracles and invariant
// checkers. Oracles here deliberately avoid the library's code paths.

#ifndef POINTMIX_TESTS_TESTING_HPP
#define POINTMIX_TESTS_TESTING_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pointmix/pointmix.hpp"

namespace pmtest {

namespace fs = std::filesystem;
using namespace pointmix;

/// Fresh, empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pointmix_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

class Gen {
public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }
  std::mt19937_64& engine() { return eng_; }

  Box3D box(double extent = 20.0, double min_size = 0.5, double max_size = 5.0) {
    return {{uniform(-extent, extent), uniform(-extent, extent), uniform(-1, 1)},
            {uniform(min_size, max_size), uniform(min_size, max_size), uniform(min_size, max_size)},
            uniform(-std::numbers::pi, std::numbers::pi)};
  }

  Point point(double extent = 50.0) {
    return {uniform(-extent, extent), uniform(-extent, extent), uniform(-2, 3), uniform(0, 1)};
  }

  /// Frame with `n` points and up to `boxes` mutually non-colliding real boxes.
  Frame frame(const std::string& id, std::size_t n, std::size_t boxes, Domain d = Domain::target,
              double extent = 50.0) {
    Frame f;
    f.id = id;
    f.domain = d;
    for (std::size_t i = 0; i < n; ++i) f.cloud.push_back(point(extent));
    for (std::size_t k = 0; k < boxes; ++k) {
      Box3D b = box(extent * 0.8, 1.0, 4.0);
      const bool clash = std::any_of(f.labels.begin(), f.labels.end(),
                                     [&](const LabeledBox& o) { return geom::boxes_collide(o.box, b); });
      if (clash) continue;
      f.labels.push_back({b, "car", std::nullopt, Provenance::real});
      // a few points inside each box
      for (int j = 0; j < 5; ++j) {
        const geom::Vec2 uv{uniform(-0.45, 0.45) * b.size.x, uniform(-0.45, 0.45) * b.size.y};
        const geom::Vec2 xy = geom::rotate_about_origin(uv, b.yaw);
        f.cloud.push_back({xy.x + b.center.x, xy.y + b.center.y, b.center.z, 0.5});
      }
    }
    return f;
  }

private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Coordinates of point p in a frame rotated by `angle`, written with explicit
/// trigonometric identities rather than the library's rotation helper.
inline double oracle_range(double x, double y) { return std::sqrt(x * x + y * y); }

/// Greedy center-distance matching done by explicit selection of the highest
/// remaining score and a full scan of ground truth. Returns TP flags in visit order.
struct OracleMatch {
  std::vector<bool> is_tp;
  std::size_t n_gt = 0;
};

inline OracleMatch oracle_match(const std::vector<std::vector<LabeledBox>>& preds,
                                const std::vector<std::vector<LabeledBox>>& gts, double threshold,
                                const std::string& category) {
  struct P {
    double score;
    std::size_t frame, order;
    double x, y;
    bool used;
  };
  std::vector<P> all;
  std::size_t order = 0;
  for (std::size_t f = 0; f < preds.size(); ++f)
    for (const auto& p : preds[f])
      if (p.category == category) all.push_back({*p.score, f, order++, p.box.center.x, p.box.center.y, false});
  std::vector<std::vector<int>> matched(gts.size());
  OracleMatch out;
  for (std::size_t f = 0; f < gts.size(); ++f) {
    for (const auto& g : gts[f]) {
      matched[f].push_back(g.category == category ? 0 : -1);
      out.n_gt += g.category == category;
    }
  }
  for (std::size_t step = 0; step < all.size(); ++step) {
    std::size_t best = all.size();
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].used) continue;
      if (best == all.size() || all[i].score > all[best].score ||
          (all[i].score == all[best].score && all[i].order < all[best].order))
        best = i;
    }
    P& p = all[best];
    p.used = true;
    double dmin = 1e300;
    std::size_t gi = 0;
    for (std::size_t g = 0; g < gts[p.frame].size(); ++g) {
      if (matched[p.frame][g] != 0) continue;
      const double d = oracle_range(p.x - gts[p.frame][g].box.center.x, p.y - gts[p.frame][g].box.center.y);
      if (d < dmin) {
        dmin = d;
        gi = g;
      }
    }
    const bool tp = dmin <= threshold;
    if (tp) matched[p.frame][gi] = 1;
    out.is_tp.push_back(tp);
  }
  return out;
}

/// AP from a TP/FP sequence: precision at each of the 101 recall levels is the
/// precision of the first prefix reaching it (linear between the surrounding
/// prefixes otherwise), clipped as in the evaluator's protocol.
inline double oracle_ap(const OracleMatch& m) {
  std::vector<double> rec{}, prec{};
  double tp = 0;
  for (std::size_t k = 0; k < m.is_tp.size(); ++k) {
    tp += m.is_tp[k];
    rec.push_back(tp / static_cast<double>(m.n_gt));
    prec.push_back(tp / static_cast<double>(k + 1));
  }
  double sum = 0;
  for (int level = 11; level <= 100; ++level) {
    const double r = level / 100.0;
    double p = 0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
      if (rec[k] + 1e-12 >= r) {
        if (k == 0 || rec[k] <= r) p = prec[k];
        else p = prec[k - 1] + (r - rec[k - 1]) / (rec[k] - rec[k - 1]) * (prec[k] - prec[k - 1]);
        break;
      }
    }
    sum += std::max(0.0, p - 0.1);
  }
  return sum / 90.0 / 0.9;
}

// ---------------------------------------------------------------------------
// Invariant checkers: return an empty string on success, else a description.
// ---------------------------------------------------------------------------

/// Mask partition, range preservation, region exclusivity and box/point
/// consistency of one region-mix output.
inline std::string check_cutmix(const Frame& source, const Frame& target, const cutmix::CutRegion& region,
                                const Point& c_s, const Frame& out, double range_rel_tol = 1e-9) {
  std::ostringstream err;
  const geom::BevRect footprint = cutmix::transported_rect(region, c_s);
  std::vector<Point> kept_src, moved_src;
  for (const auto& p : source.cloud)
    if (!geom::rect_contains(footprint, geom::bev(p))) kept_src.push_back(p);
  std::vector<Point> in_region;
  for (const auto& p : target.cloud)
    if (geom::rect_contains(region.rect, geom::bev(p))) in_region.push_back(p);

  if (out.cloud.size() != kept_src.size() + in_region.size()) {
    err << "partition: " << out.cloud.size() << " != " << kept_src.size() << " + " << in_region.size();
    return err.str();
  }
  for (std::size_t i = 0; i < kept_src.size(); ++i) {
    if (!(out.cloud[i] == kept_src[i])) return "source point " + std::to_string(i) + " altered or reordered";
    if (geom::rect_contains(footprint, geom::bev(out.cloud[i]))) return "surviving source point inside footprint";
  }
  for (std::size_t k = 0; k < in_region.size(); ++k) {
    const Point& before = in_region[k];
    const Point& after = out.cloud[kept_src.size() + k];
    const double r0 = oracle_range(before.x, before.y), r1 = oracle_range(after.x, after.y);
    if (std::abs(r1 - r0) > range_rel_tol * std::max(1.0, r0)) {
      err << "range not preserved: " << r0 << " -> " << r1;
      return err.str();
    }
    if (after.z != before.z || after.intensity != before.intensity) return "transported point z/intensity changed";
    if (!geom::rect_contains(footprint, geom::bev(after))) return "transported point outside footprint";
  }
  std::size_t expected_boxes = 0;
  for (const auto& l : source.labels) expected_boxes += !geom::rect_contains(footprint, geom::bev(l.box.center));
  for (const auto& l : target.labels) {
    if (!geom::rect_contains(region.rect, geom::bev(l.box.center))) continue;
    ++expected_boxes;
    // Boxes well inside the region carry all their points along.
    const double half_diag = 0.5 * std::hypot(l.box.size.x, l.box.size.y);
    geom::BevRect shrunk = region.rect;
    shrunk.half_extent = {shrunk.half_extent.x - half_diag, shrunk.half_extent.y - half_diag};
    if (shrunk.half_extent.x <= 0 || shrunk.half_extent.y <= 0) continue;
    if (!geom::rect_contains(shrunk, geom::bev(l.box.center))) continue;
    for (const auto& p : target.cloud)
      if (geom::box_contains(l.box, p) && !geom::rect_contains(region.rect, geom::bev(p)))
        return "point of a region-owned box left behind";
  }
  if (out.labels.size() != expected_boxes) {
    err << "box count " << out.labels.size() << " != " << expected_boxes;
    return err.str();
  }
  return {};
}

/// Density bound, provenance partition and absence of real/pseudo collisions.
inline std::string check_mixup(const Frame& labeled, const Frame& pseudo, const mixup::MixUpTrace& tr,
                               const Frame& out) {
  std::ostringstream err;
  const double predicted = tr.lambda * static_cast<double>(tr.labeled_points) +
                           (1.0 - tr.lambda) * static_cast<double>(tr.surviving_pseudo);
  if (std::abs(static_cast<double>(out.cloud.size()) - predicted) > 1.0 + 1e-9) {
    err << "density: " << out.cloud.size() << " points vs predicted " << predicted;
    return err.str();
  }
  // First block: ordered subsequence of the labeled cloud; second: of the pseudo cloud.
  std::size_t j = 0;
  for (std::size_t i = 0; i < tr.from_labeled; ++i) {
    while (j < labeled.cloud.size() && !(labeled.cloud[j] == out.cloud[i])) ++j;
    if (j == labeled.cloud.size()) return "point " + std::to_string(i) + " not from the labeled frame";
    ++j;
  }
  j = 0;
  for (std::size_t i = tr.from_labeled; i < out.cloud.size(); ++i) {
    while (j < pseudo.cloud.size() && !(pseudo.cloud[j] == out.cloud[i])) ++j;
    if (j == pseudo.cloud.size()) return "point " + std::to_string(i) + " not from the pseudo frame";
    ++j;
  }
  for (const auto& r : labeled.labels)
    if (std::find(out.labels.begin(), out.labels.end(), r) == out.labels.end()) return "real label lost";
  for (const auto& a : out.labels) {
    if (a.provenance != Provenance::real) continue;
    for (const auto& b : out.labels) {
      if (b.provenance != Provenance::pseudo) continue;
      const auto ov = geom::oracle_boxes_collide(a.box, b.box);
      if (ov.collide) {
        err << "real/pseudo collision, overlap area " << ov.area;
        return err.str();
      }
    }
  }
  return {};
}

/// Distance from p to the closest face of box b (p assumed inside up to tol).
inline double distance_to_surface(const Box3D& b, const Point& p) {
  const Point local = augment::to_box_local(b, p);
  const double dx = 0.5 * b.size.x - std::abs(local.x);
  const double dy = 0.5 * b.size.y - std::abs(local.y);
  const double dz = 0.5 * b.size.z - std::abs(local.z);
  return std::abs(std::min({dx, dy, dz}));
}

}  // namespace pmtest

#endif  // POINTMIX_TESTS_TESTING_HPP
