#include "cornpoint/select.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "cornpoint/rng.hpp"

namespace cornpoint {
namespace {

StalkCandidate make_candidate(const Vec3& point, double c = 0.9, double w = 30,
                              double h = 64, double d = 0.1, int id = 1) {
  StalkCandidate cand;
  cand.line = make_line(point, {0, 0, 1});
  cand.features = {c, w, h, d};
  cand.inlier_count = 10;
  cand.insertion_point = point;
  cand.instance_id = id;
  return cand;
}

TEST(Score, HandEvaluatedExamples) {
  // 0.9^2 * 40 * cbrt(125) * (1 - 0.2) = 0.81 * 40 * 5 * 0.8 = 129.6
  EXPECT_NEAR(score({0.9, 40, 125, 0.2}), 129.6, 1e-9);
  EXPECT_DOUBLE_EQ(score({1, 1, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(score({0.7, 55, 90, 1.0}), 0.0);
}

TEST(Score, MonotonicityProperties) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    MaskFeatures f{rng.uniform(0.05, 0.95), rng.uniform(1.0, 200.0),
                   rng.uniform(1.0, 300.0), rng.uniform(0.0, 0.95)};
    const double base = score(f);
    MaskFeatures up = f;
    up.c = f.c + 0.04;
    EXPECT_GT(score(up), base);
    up = f;
    up.w = f.w * 1.1;
    EXPECT_GT(score(up), base);
    up = f;
    up.h = f.h * 1.1;
    EXPECT_GT(score(up), base);
    up = f;
    up.d = f.d + 0.04;
    EXPECT_LT(score(up), base);
  }
}

TEST(Score, ArgmaxInvariantUnderCommonWidthScaling) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    std::vector<StalkCandidate> cands;
    for (int k = 0; k < 5; ++k)
      cands.push_back(make_candidate({0.4, 0.05 * k, 0.05}, rng.uniform(0.3, 1.0),
                                     rng.uniform(5, 80), rng.uniform(10, 200),
                                     rng.uniform(0.0, 0.9), k));
    const auto best = select_frame_best(cands);
    const double k_scale = rng.uniform(0.1, 10.0);
    for (auto& c : cands) c.features.w *= k_scale;
    const auto scaled_best = select_frame_best(cands);
    ASSERT_TRUE(best && scaled_best);
    EXPECT_EQ(best->instance_id, scaled_best->instance_id);
  }
}

TEST(FilterWorkspace, ClosedBoundsAndMillimeterOutside) {
  WorkspaceBox box;
  const StalkCandidate corner = make_candidate({box.x_max, box.y_max, box.z_max});
  const StalkCandidate outside = make_candidate({box.x_max + 0.001, 0.0, 0.05});
  auto kept = filter_workspace({corner, outside}, box);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].insertion_point.x, box.x_max);

  EXPECT_TRUE(filter_workspace({}, box).empty());
}

TEST(FilterWorkspace, Idempotent) {
  WorkspaceBox box;
  std::vector<StalkCandidate> cands = {make_candidate({0.4, 0.0, 0.05}),
                                       make_candidate({0.9, 0.0, 0.05}),
                                       make_candidate({0.5, 0.2, 0.05})};
  const auto once = filter_workspace(cands, box);
  const auto twice = filter_workspace(once, box);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i)
    EXPECT_EQ(once[i].instance_id, twice[i].instance_id);
}

TEST(FilterSpacing, PairRemovalIsSymmetric) {
  const auto close_pair = filter_spacing(
      {make_candidate({0.4, 0.0, 0.05}, 0.9, 30, 64, 0.1, 1),
       make_candidate({0.4, 0.05, 0.05}, 0.9, 30, 64, 0.1, 2)},
      0.080);
  EXPECT_TRUE(close_pair.empty());  // 50 mm apart, 80 mm clearance

  const auto far_pair = filter_spacing(
      {make_candidate({0.4, 0.0, 0.05}, 0.9, 30, 64, 0.1, 1),
       make_candidate({0.4, 0.12, 0.05}, 0.9, 30, 64, 0.1, 2)},
      0.080);
  EXPECT_EQ(far_pair.size(), 2u);

  const auto single = filter_spacing({make_candidate({0.4, 0.0, 0.05})}, 0.080);
  EXPECT_EQ(single.size(), 1u);
}

TEST(FilterSpacing, Idempotent) {
  Rng rng(35);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<StalkCandidate> cands;
    for (int k = 0; k < 6; ++k)
      cands.push_back(make_candidate(
          {rng.uniform(0.3, 0.6), rng.uniform(-0.3, 0.3), 0.05}, 0.9, 30, 64, 0.1, k));
    const auto once = filter_spacing(cands, 0.080);
    const auto twice = filter_spacing(once, 0.080);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
      EXPECT_EQ(once[i].instance_id, twice[i].instance_id);
  }
}

TEST(FilterSpacing, MiddleOfThreeBlocksBothNeighbors) {
  // A-B close, B-C close, A-C far: all three go (B blocks both).
  const auto kept = filter_spacing(
      {make_candidate({0.4, 0.00, 0.05}, 0.9, 30, 64, 0.1, 1),
       make_candidate({0.4, 0.07, 0.05}, 0.9, 30, 64, 0.1, 2),
       make_candidate({0.4, 0.14, 0.05}, 0.9, 30, 64, 0.1, 3)},
      0.080);
  EXPECT_TRUE(kept.empty());
}

TEST(SelectFrameBest, HandEvaluatedComparison) {
  // A: 0.95^2*30*cbrt(64)*0.9 = 97.47;  B: 0.8^2*50*cbrt(27)*0.9 = 86.4
  const StalkCandidate a = make_candidate({0.4, 0.0, 0.05}, 0.95, 30, 64, 0.1, 1);
  const StalkCandidate b = make_candidate({0.4, 0.1, 0.05}, 0.8, 50, 27, 0.1, 2);
  EXPECT_NEAR(score(a.features), 97.47, 0.01);
  EXPECT_NEAR(score(b.features), 86.4, 1e-9);
  const auto best = select_frame_best({a, b});
  ASSERT_TRUE(best);
  EXPECT_EQ(best->instance_id, 1);
}

TEST(SelectFrameBest, EmptyGivesNone) {
  EXPECT_FALSE(select_frame_best({}));
}

TEST(SelectFrameBest, TieBreaksByLowerInstanceId) {
  const StalkCandidate a = make_candidate({0.4, 0.0, 0.05}, 0.9, 30, 64, 0.1, 3);
  const StalkCandidate b = make_candidate({0.4, 0.1, 0.05}, 0.9, 30, 64, 0.1, 1);
  const auto best = select_frame_best({a, b});
  ASSERT_TRUE(best);
  EXPECT_EQ(best->instance_id, 1);
}

std::vector<FrameResult> as_frames(const std::vector<StalkCandidate>& bests,
                                   int raw_per_frame = 1) {
  std::vector<FrameResult> frames;
  for (const auto& b : bests) frames.push_back({raw_per_frame, b});
  return frames;
}

TEST(Consensus, LargestClusterWinsOverOutlierFrame) {
  SelectionConfig cfg;
  std::vector<StalkCandidate> bests;
  for (int i = 0; i < 4; ++i)
    bests.push_back(make_candidate({0.45 + 0.002 * i, 0.10, 0.05}, 0.9, 30, 64, 0.1,
                                   i + 1));
  bests.push_back(make_candidate({0.45, 0.20, 0.05}, 0.99, 60, 64, 0.0, 5));

  const auto outcome = consensus(as_frames(bests), cfg, {0, 0, 0.16});
  const auto* target = std::get_if<InsertionTarget>(&outcome);
  ASSERT_NE(target, nullptr);
  EXPECT_EQ(target->source_cluster_size, 4);
  EXPECT_NEAR(target->point.y, 0.10, 1e-12);  // not the high-scoring outlier
  EXPECT_DOUBLE_EQ(target->approach_direction.z, 0.0);
  EXPECT_NEAR(target->approach_direction.norm(), 1.0, 1e-12);
}

TEST(Consensus, NoCandidatesAnywhereIsNoDetections) {
  SelectionConfig cfg;
  std::vector<FrameResult> frames(5);  // raw_count 0, no best
  const auto outcome = consensus(frames, cfg, {0, 0, 0.16});
  const auto* repo = std::get_if<RepositionSignal>(&outcome);
  ASSERT_NE(repo, nullptr);
  EXPECT_EQ(repo->reason, RepositionReason::NoDetections);
}

TEST(Consensus, CandidatesAllFiltered) {
  SelectionConfig cfg;
  std::vector<FrameResult> frames(5);
  for (auto& f : frames) f.raw_count = 3;  // detections existed, none survived
  const auto outcome = consensus(frames, cfg, {0, 0, 0.16});
  const auto* repo = std::get_if<RepositionSignal>(&outcome);
  ASSERT_NE(repo, nullptr);
  EXPECT_EQ(repo->reason, RepositionReason::AllFiltered);
}

TEST(Consensus, SingleFrameSingleCandidate) {
  SelectionConfig cfg;
  cfg.n_frames = 1;
  const auto bests = as_frames({make_candidate({0.45, 0.0, 0.05})});
  const auto outcome = consensus(bests, cfg, {0, 0, 0.16});
  const auto* target = std::get_if<InsertionTarget>(&outcome);
  ASSERT_NE(target, nullptr);
  EXPECT_EQ(target->source_cluster_size, 1);
}

TEST(Consensus, ScatteredFramesYieldNoCluster) {
  SelectionConfig cfg;  // n_frames = 5 >= 3
  std::vector<StalkCandidate> bests;
  for (int i = 0; i < 5; ++i)
    bests.push_back(make_candidate({0.45, 0.10 * i, 0.05}, 0.9, 30, 64, 0.1, i + 1));
  const auto outcome = consensus(as_frames(bests), cfg, {0, 0, 0.16});
  const auto* repo = std::get_if<RepositionSignal>(&outcome);
  ASSERT_NE(repo, nullptr);
  EXPECT_EQ(repo->reason, RepositionReason::NoCluster);
}

TEST(Consensus, PermutationInvariant) {
  SelectionConfig cfg;
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<StalkCandidate> bests;
    for (int i = 0; i < 5; ++i)
      bests.push_back(make_candidate(
          {0.45 + rng.uniform(-0.008, 0.008), 0.1 + rng.uniform(-0.008, 0.008), 0.05},
          rng.uniform(0.5, 1.0), rng.uniform(10, 60), rng.uniform(20, 200),
          rng.uniform(0.0, 0.9), i + 1));
    const auto base = consensus(as_frames(bests), cfg, {0, 0, 0.16});
    const auto* base_target = std::get_if<InsertionTarget>(&base);
    ASSERT_NE(base_target, nullptr);

    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      auto perm = bests;
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
      const auto again = consensus(as_frames(perm), cfg, {0, 0, 0.16});
      const auto* target = std::get_if<InsertionTarget>(&again);
      ASSERT_NE(target, nullptr);
      EXPECT_EQ(target->point, base_target->point);
    }
  }
}

TEST(Consensus, CorruptedFrameDoesNotMoveTarget) {
  SelectionConfig cfg;
  std::vector<StalkCandidate> bests;
  for (int i = 0; i < 5; ++i)
    bests.push_back(make_candidate({0.45 + 0.003 * i, 0.10, 0.05}, 0.8 + 0.03 * i, 30,
                                   64, 0.1, i + 1));
  const auto base = consensus(as_frames(bests), cfg, {0, 0, 0.16});
  const auto* base_target = std::get_if<InsertionTarget>(&base);
  ASSERT_NE(base_target, nullptr);

  // Corrupt the lowest-scoring member by 2x the cluster radius.
  auto corrupted = bests;
  corrupted[0].insertion_point.y += 2.0 * cfg.cluster_radius;
  const auto after = consensus(as_frames(corrupted), cfg, {0, 0, 0.16});
  const auto* target = std::get_if<InsertionTarget>(&after);
  ASSERT_NE(target, nullptr);
  EXPECT_EQ(target->point, base_target->point);
  EXPECT_EQ(target->source_cluster_size, 4);
}

}  // namespace
}  // namespace cornpoint
