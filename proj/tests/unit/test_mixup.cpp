#include <gtest/gtest.h>

#include "testing.hpp"

using namespace pointmix;
using namespace pointmix::mixup;

namespace {

LabeledBox real_box(double x, double y, double l = 2, double w = 1, double yaw = 0) {
  return {{{x, y, 0}, {l, w, 1}, yaw}, "car", std::nullopt, Provenance::real};
}

LabeledBox pseudo_box(double x, double y, double score, double l = 2, double w = 1, double yaw = 0) {
  return {{{x, y, 0}, {l, w, 1}, yaw}, "car", score, Provenance::pseudo};
}

Frame pseudo_frame(pmtest::Gen& g, const std::string& id, std::size_t n, std::size_t boxes) {
  Frame f = g.frame(id, n, boxes);
  for (auto& l : f.labels) {
    l.provenance = Provenance::pseudo;
    l.score = g.uniform(0.3, 1.0);
  }
  return f;
}

}  // namespace

TEST(Filter, KeepsScoresAtOrAboveThreshold) {
  const std::vector<LabeledBox> p{pseudo_box(0, 0, 0.9), pseudo_box(5, 0, 0.2), pseudo_box(9, 0, 0.3),
                                  pseudo_box(12, 0, 1.0)};
  const auto kept = filter_pseudo_labels(p, 0.3);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0], p[0]);
  EXPECT_EQ(kept[1], p[2]);
  EXPECT_EQ(filter_pseudo_labels(p, 0.0).size(), 4u);
  const auto top = filter_pseudo_labels(p, 1.0);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0], p[3]);
}

TEST(Filter, RejectsUnscoredOrRealBoxes) {
  std::vector<LabeledBox> p{pseudo_box(0, 0, 0.9)};
  p[0].score.reset();
  EXPECT_THROW(filter_pseudo_labels(p, 0.3), InvalidArgument);
  const std::vector<LabeledBox> r{real_box(0, 0)};
  EXPECT_THROW(filter_pseudo_labels(r, 0.3), InvalidArgument);
}

TEST(Masks, HandCounts) {
  PointMasks m = sample_point_masks(10, 7, 0.3, Seed{1});
  EXPECT_EQ(count_set(m.labeled), 3u);
  EXPECT_EQ(count_set(m.unlabeled), 5u);

  m = sample_point_masks(1000, 1000, 0.5, Seed{2});
  EXPECT_EQ(count_set(m.labeled), 500u);
  EXPECT_EQ(count_set(m.unlabeled), 500u);

  m = sample_point_masks(40, 30, 1.0, Seed{3});
  EXPECT_EQ(count_set(m.labeled), 40u);
  EXPECT_EQ(count_set(m.unlabeled), 0u);

  m = sample_point_masks(0, 0, 0.5, Seed{3});
  EXPECT_TRUE(m.labeled.empty());
  EXPECT_TRUE(m.unlabeled.empty());
}

TEST(Masks, ConstraintHoldsWithinOnePointPerFrame) {
  pmtest::Gen g(31);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t nl = 1 + g.index(500), nu = 1 + g.index(500);
    const double lambda = g.uniform(0, 1);
    const PointMasks m = sample_point_masks(nl, nu, lambda, Seed{static_cast<std::uint64_t>(i)});
    const double sum = static_cast<double>(count_set(m.labeled)) / static_cast<double>(nl) +
                       static_cast<double>(count_set(m.unlabeled)) / static_cast<double>(nu);
    EXPECT_LE(std::abs(sum - 1.0), 0.5 / static_cast<double>(nl) + 0.5 / static_cast<double>(nu) + 1e-12);
  }
}

TEST(Masks, SelectionIsRoughlyUniform) {
  std::vector<int> hits(20, 0);
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const PointMasks m = sample_point_masks(20, 1, 0.25, Seed{s});
    for (std::size_t i = 0; i < 20; ++i) hits[i] += m.labeled[i];
  }
  // each index kept with probability 5/20; 4000 trials give mean 1000, sd ~27
  for (int h : hits) {
    EXPECT_GT(h, 880);
    EXPECT_LT(h, 1120);
  }
}

TEST(Masks, RejectsLambdaOutsideUnitInterval) {
  EXPECT_THROW(sample_point_masks(3, 3, 1.5, Seed{1}), InvalidArgument);
}

TEST(Collisions, HandCase) {
  const std::vector<LabeledBox> real{real_box(0, 0)};
  const std::vector<LabeledBox> pseudo{pseudo_box(0.5, 0, 0.8), pseudo_box(10, 0, 0.8)};
  const PointCloud pts{{1.3, 0, 0, 0}, {3, 0, 0, 0}, {10, 0.2, 0, 0}};
  const auto r = resolve_collisions(real, pseudo, pts, 0.0);
  ASSERT_EQ(r.kept_pseudo.size(), 1u);
  EXPECT_EQ(r.kept_pseudo[0], pseudo[1]);
  EXPECT_EQ(r.dropped_boxes, 1u);
  EXPECT_EQ(r.kept_points, (Mask{0, 1, 1}));
  EXPECT_NEAR(geom::oracle_boxes_collide(real[0].box, pseudo[0].box).area, 1.5, 1e-12);
}

TEST(Collisions, IdenticalBoxIsDropped) {
  const std::vector<LabeledBox> real{real_box(4, 4, 4, 2, 0.3)};
  LabeledBox twin = real[0];
  twin.provenance = Provenance::pseudo;
  twin.score = 0.9;
  const PointCloud pts{{4, 4, 0, 0}, {20, 20, 0, 0}};
  const auto r = resolve_collisions(real, std::vector<LabeledBox>{twin}, pts, 0.0);
  EXPECT_TRUE(r.kept_pseudo.empty());
  EXPECT_EQ(r.kept_points, (Mask{0, 1}));
}

TEST(Collisions, MarginWidensDetectionAndScrub) {
  const std::vector<LabeledBox> real{real_box(0, 0)};
  const std::vector<LabeledBox> pseudo{pseudo_box(2.4, 0, 0.8)};
  const PointCloud pts{{3.5, 0, 0, 0}, {3.7, 0, 0, 0}};
  EXPECT_EQ(resolve_collisions(real, pseudo, pts, 0.0).kept_pseudo.size(), 1u);
  const auto r = resolve_collisions(real, pseudo, pts, 0.25);
  EXPECT_TRUE(r.kept_pseudo.empty());
  EXPECT_EQ(r.kept_points, (Mask{0, 1}));  // footprint reaches x = 3.65
  EXPECT_THROW(resolve_collisions(real, pseudo, pts, -1.0), InvalidArgument);
}

TEST(PointMixUp, LambdaOneKeepsLabeledCloud) {
  pmtest::Gen g(2);
  const Frame lab = g.frame("l", 300, 3);
  const Frame pse = pseudo_frame(g, "p", 300, 3);
  MixUpConfig cfg;
  cfg.lambda = LambdaPolicy::fixed(1.0);
  const Frame out = point_mixup(lab, pse, cfg, Seed{5});
  EXPECT_EQ(out.cloud, lab.cloud);
  const auto col = resolve_collisions(lab.labels, pse.labels, pse.cloud, 0.0);
  std::vector<LabeledBox> expected = lab.labels;
  expected.insert(expected.end(), col.kept_pseudo.begin(), col.kept_pseudo.end());
  EXPECT_EQ(out.labels, expected);
}

TEST(PointMixUp, EqualFramesConserveCount) {
  pmtest::Gen g(3);
  Frame lab = g.frame("l", 1000, 0);
  Frame pse = g.frame("p", 1000, 0);
  const Frame out = point_mixup(lab, pse, {}, Seed{8});
  EXPECT_EQ(out.cloud.size(), 1000u);
}

TEST(PointMixUp, CollidingPairKeepsRealBox) {
  Frame lab;
  lab.id = "l";
  lab.cloud = {{0, 0, 0, 0.5}, {0.5, 0.2, 0, 0.5}};
  lab.labels = {real_box(0, 0)};
  Frame pse;
  pse.id = "p";
  pse.cloud = {{1.3, 0, 0, 0.1}, {3, 0, 0, 0.1}};
  pse.labels = {pseudo_box(0.5, 0, 0.8)};
  const MixUpResult r = mix_frames(lab, pse, {}, Seed{1});
  ASSERT_EQ(r.frame.labels.size(), 1u);
  EXPECT_EQ(r.frame.labels[0], lab.labels[0]);
  EXPECT_EQ(r.surviving_pseudo, 1u);
  EXPECT_EQ(r.dropped_pseudo_boxes, 1u);
  EXPECT_EQ(r.frame.id, "l_mx_p");
}

TEST(PointMixUp, DensityBoundForEqualSizes) {
  pmtest::Gen g(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 50 + g.index(400);
    Frame lab = g.frame("l", n, 0);
    Frame pse = g.frame("p", n, 0);
    MixUpConfig cfg;
    cfg.lambda = LambdaPolicy::uniform(0.0, 1.0);
    const Frame out = point_mixup(lab, pse, cfg, Seed{static_cast<std::uint64_t>(trial)});
    EXPECT_GE(out.cloud.size() + 1, n);
    EXPECT_LE(out.cloud.size(), n + 1);
  }
}

TEST(PointMixUp, RandomPairsSatisfyInvariants) {
  pmtest::Gen g(43);
  for (int trial = 0; trial < 300; ++trial) {
    const Frame lab = g.frame("l", 200 + g.index(200), 8, Domain::target, 20.0);
    const Frame pse = pseudo_frame(g, "p", 200 + g.index(200), 8);
    const MixUpConfig cfg;
    const Seed seed{static_cast<std::uint64_t>(trial)};
    const MixUpResult r = mix_frames(lab, pse, cfg, seed);
    const MixUpTrace tr{0, 0, r.lambda, r.labeled_points, r.surviving_pseudo, r.from_labeled};
    EXPECT_EQ(pmtest::check_mixup(lab, pse, tr, r.frame), "") << "trial " << trial;
    EXPECT_EQ(mix_frames(lab, pse, cfg, seed).frame, r.frame);
  }
}

TEST(PointMixUp, MinPointsFilterOnlyTouchesPseudoBoxes) {
  Frame lab;
  lab.id = "l";
  lab.cloud = {{0, 0, 0, 0}};
  lab.labels = {real_box(20, 20)};
  Frame pse;
  pse.id = "p";
  pse.cloud = {{-20, -20, 0, 0}};
  pse.labels = {pseudo_box(-20, -20, 0.9), pseudo_box(10, -10, 0.9)};
  MixUpConfig cfg;
  cfg.lambda = LambdaPolicy::fixed(0.0);
  cfg.min_points_per_box = 1;
  const Frame out = point_mixup(lab, pse, cfg, Seed{0});
  ASSERT_EQ(out.labels.size(), 2u);
  EXPECT_EQ(out.labels[0], lab.labels[0]);
  EXPECT_EQ(out.labels[1], pse.labels[0]);
}

TEST(MixUpBatch, PassThroughAndFullMix) {
  pmtest::Gen g(6);
  std::vector<Frame> lab{g.frame("l0", 100, 2), g.frame("l1", 100, 2)};
  std::vector<Frame> pse{pseudo_frame(g, "p0", 100, 2)};
  MixUpConfig cfg;
  cfg.apply_probability = 0.0;
  std::vector<Frame> out;
  mixup_batch(lab, pse, cfg, Seed{1}, [&](Emission em) { out.push_back(*em.frame); });
  EXPECT_EQ(out, (std::vector<Frame>{lab[0], lab[1], pse[0]}));

  cfg.apply_probability = 1.0;
  cfg.emissions = 12;
  const auto st = mixup_batch(lab, pse, cfg, Seed{1}, [&](Emission em) {
    ASSERT_TRUE(em.trace);
    EXPECT_EQ(em.frame->id.substr(0, 2), "mx");
  });
  EXPECT_EQ(st.mixed, 12u);
}

TEST(MixUpBatch, MixedFractionNearHalf) {
  std::vector<Frame> lab(1), pse(1);
  lab[0].cloud = {{1, 1, 0, 0}};
  pse[0].cloud = {{2, 2, 0, 0}};
  MixUpConfig cfg;
  cfg.emissions = 10000;
  const auto st = mixup_batch(lab, pse, cfg, Seed{77}, [](Emission) {});
  EXPECT_GE(st.mixed, 4700u);
  EXPECT_LE(st.mixed, 5300u);
}

TEST(MixUpConfigTest, ValidateRejectsBadValues) {
  MixUpConfig c;
  c.lambda = LambdaPolicy::uniform(0.7, 0.2);
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.score_threshold = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.collision_margin = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}
