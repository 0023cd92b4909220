// Acceptance suite: one test per release criterion, each printing a
// [criterion N] PASS/FAIL line. Tolerances are pinned in code; run via
// ctest or directly as ./acceptance.

#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "cornpoint/cli.hpp"
#include "cornpoint/cornpoint.hpp"

namespace cornpoint {
namespace {

class Criterion {
 public:
  Criterion(int number, std::string name) : number_(number), name_(std::move(name)) {}
  ~Criterion() {
    const bool failed = ::testing::Test::HasFailure();
    std::printf("[criterion %2d] %s - %s\n", number_, failed ? "FAIL" : "PASS",
                name_.c_str());
    std::fflush(stdout);
  }

 private:
  int number_;
  std::string name_;
};

RunConfig noiseless_config() {
  RunConfig cfg;
  cfg.noise = NoiseConfig{};
  cfg.trial.approach_sigma = 0.0;
  return cfg;
}

// --------------------------------------------------------------------------
// 1. Scoring function exactness and monotonicity
// --------------------------------------------------------------------------
TEST(Acceptance, C01_ScoreExactnessAndMonotonicity) {
  Criterion guard(1, "score exactness + monotonicity over 1000 tuples");
  EXPECT_NEAR(score({0.9, 40, 125, 0.2}), 129.6, 1e-9);
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    MaskFeatures f{rng.uniform(0.05, 0.95), rng.uniform(1.0, 200.0),
                   rng.uniform(1.0, 300.0), rng.uniform(0.0, 0.95)};
    const double base = score(f);
    MaskFeatures g = f;
    g.c += 0.03;
    EXPECT_GT(score(g), base);
    g = f;
    g.w *= 1.05;
    EXPECT_GT(score(g), base);
    g = f;
    g.h *= 1.05;
    EXPECT_GT(score(g), base);
    g = f;
    g.d += 0.03;
    EXPECT_LT(score(g), base);
  }
}

// --------------------------------------------------------------------------
// 2. Noiseless oracle equivalence over 100 scenes, under 60 s
// --------------------------------------------------------------------------
TEST(Acceptance, C02_NoiselessOracleEquivalence) {
  Criterion guard(2, "noiseless consensus within 1 mm on >= 99% of 100 scenes, < 60 s");
  RunConfig cfg = noiseless_config();
  cfg.seed = 2024;

  const auto start = std::chrono::steady_clock::now();
  const PoseBenchReport report = pose_bench_run(cfg, 100);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // Scenes where every stalk is rightly rejected (too close together for
  // the gripper) reposition instead of producing a point; accuracy is
  // graded over the scenes that did select one.
  int within_1mm = 0;
  for (double err : report.consensus_errors) within_1mm += (err < 0.001);
  const int targets = static_cast<int>(report.consensus_errors.size());
  ASSERT_GE(targets, 95) << "repositioned: " << report.repositioned;
  EXPECT_GE(within_1mm * 100, targets * 99);
  EXPECT_LT(seconds, 60.0);
}

// --------------------------------------------------------------------------
// 3. Pose accuracy at calibrated noise
// --------------------------------------------------------------------------
TEST(Acceptance, C03_PoseAccuracyCalibratedNoise) {
  Criterion guard(3, "calibrated pose-bench mean in [2 mm, 7 mm], worse when farther");
  RunConfig cfg = default_run_config();
  cfg.seed = 31415;
  // The calibrated regime this criterion pins:
  ASSERT_NEAR(cfg.noise.depth_sigma0 * 0.16, 0.002, 1e-12);  // sigma(0.4 m) = 2 mm
  ASSERT_DOUBLE_EQ(cfg.noise.occlusion_fraction, 0.20);
  ASSERT_DOUBLE_EQ(cfg.noise.mask_boundary_jitter, 2.0);

  const PoseBenchReport report = pose_bench_run(cfg, 100);
  EXPECT_GE(report.consensus_errors.size(), 95u);
  EXPECT_LE(report.mean_error, 0.007);
  EXPECT_GE(report.mean_error, 0.002);

  const double near_err = report.mean_candidate_error(0.0, 0.3);
  const double far_err = report.mean_candidate_error(0.5, 1e9);
  ASSERT_TRUE(std::isfinite(near_err));
  ASSERT_TRUE(std::isfinite(far_err));
  EXPECT_GE(far_err, near_err);
}

// --------------------------------------------------------------------------
// 4. Occlusion robustness of the line fit
// --------------------------------------------------------------------------
TEST(Acceptance, C04_OcclusionRobustness) {
  Criterion guard(4, "bottom-30% mask cut moves insertion < 2 mm in >= 95% of cases");
  RunConfig cfg = noiseless_config();
  DetectionConfig det = cfg.detection;
  int cases = 0, robust = 0;
  for (int s = 0; s < 50; ++s) {
    const SceneTruth scene = generate_scene(cfg.scene, 4000 + s);
    FrameObservation obs;
    try {
      obs = render_frame(scene, cfg.camera.scan_pose(), cfg.camera.intrinsics,
                         cfg.noise, 1);
    } catch (const Error&) {
      continue;
    }
    for (int label = 1; label <= obs.instance_count(); ++label) {
      Rng rng_a(9000 + label), rng_b(9000 + label);
      StalkCandidate full;
      try {
        full = candidate_from_instance(obs, label, det, rng_a);
      } catch (const Error&) {
        continue;
      }
      FrameObservation cut = obs;
      int top = -1, bottom = -1;
      for (int v = 0; v < cut.height(); ++v)
        for (int u = 0; u < cut.width(); ++u)
          if (cut.mask_at(u, v) == label) {
            if (top < 0) top = v;
            bottom = v;
          }
      const int cut_from = bottom - (bottom - top + 1) * 3 / 10;
      for (int v = cut_from; v <= bottom; ++v)
        for (int u = 0; u < cut.width(); ++u)
          if (cut.mask_at(u, v) == label)
            cut.masks[static_cast<std::size_t>(v) * cut.width() + u] = 0;
      StalkCandidate partial;
      try {
        partial = candidate_from_instance(cut, label, det, rng_b);
      } catch (const Error&) {
        continue;
      }
      ++cases;
      robust += ((partial.insertion_point - full.insertion_point).norm() < 0.002);
    }
  }
  ASSERT_GE(cases, 100);
  EXPECT_GE(robust, (cases * 95 + 99) / 100);
}

// --------------------------------------------------------------------------
// 5. RANSAC robustness + brute-force least-squares oracle
// --------------------------------------------------------------------------

// Test-side least squares, independent of the implementation: principal
// axis via a Jacobi eigensolver on the covariance.
Line3 jacobi_least_squares(const std::vector<Vec3>& pts) {
  Vec3 mu;
  for (const auto& p : pts) mu = mu + p;
  mu = mu * (1.0 / pts.size());
  double a[3][3] = {};
  for (const auto& p : pts) {
    const Vec3 r = p - mu;
    const double v[3] = {r.x, r.y, r.z};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a[i][j] += v[i] * v[j];
  }
  double vmat[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    int p = 0, q = 1;
    double off = std::abs(a[0][1]);
    if (std::abs(a[0][2]) > off) { p = 0; q = 2; off = std::abs(a[0][2]); }
    if (std::abs(a[1][2]) > off) { p = 1; q = 2; off = std::abs(a[1][2]); }
    if (off < 1e-18) break;
    const double theta = 0.5 * std::atan2(2 * a[p][q], a[q][q] - a[p][p]);
    const double c = std::cos(theta), s = std::sin(theta);
    for (int k = 0; k < 3; ++k) {
      const double akp = a[k][p], akq = a[k][q];
      a[k][p] = c * akp - s * akq;
      a[k][q] = s * akp + c * akq;
    }
    for (int k = 0; k < 3; ++k) {
      const double apk = a[p][k], aqk = a[q][k];
      a[p][k] = c * apk - s * aqk;
      a[q][k] = s * apk + c * aqk;
    }
    for (int k = 0; k < 3; ++k) {
      const double vkp = vmat[k][p], vkq = vmat[k][q];
      vmat[k][p] = c * vkp - s * vkq;
      vmat[k][q] = s * vkp + c * vkq;
    }
  }
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (a[i][i] > a[best][best]) best = i;
  return make_line(mu, {vmat[0][best], vmat[1][best], vmat[2][best]});
}

TEST(Acceptance, C05_RansacRobustnessAndOracle) {
  Criterion guard(5, "RANSAC 2 mm/2 deg on >= 95% of 1000 trials + oracle agreement");
  Rng rng(505);
  int good = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const Vec3 origin{rng.uniform(0.3, 0.6), rng.uniform(-0.2, 0.2), 0.0};
    Vec3 dir{rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), 1.0};
    dir = dir.normalized();
    const Line3 truth = make_line(origin, dir);
    std::vector<FeaturePoint> pts;
    const int n_in = 14, n_out = 6;  // 30% outliers
    for (int i = 0; i < n_in; ++i) {
      FeaturePoint fp;
      fp.p3d = origin + dir * (i * 0.02);
      pts.push_back(fp);
    }
    for (int o = 0; o < n_out; ++o) {
      FeaturePoint fp;
      fp.p3d = origin + dir * rng.uniform(0.0, 0.26) +
               Vec3{rng.uniform(0.02, 0.08), rng.uniform(-0.08, 0.08), 0.0};
      pts.push_back(fp);
    }
    DetectionConfig det;
    const LineFit fit = fit_stalk_line(pts, det, rng);
    const double lateral =
        point_line_distance(line_point_at_height(fit.line, 0.05), truth);
    const double angle = std::acos(
        std::clamp(std::abs(fit.line.direction.dot(truth.direction)), 0.0, 1.0));
    if (lateral < 0.002 && angle < deg_to_rad(2.0)) ++good;
  }
  EXPECT_GE(good, 950);

  // Brute-force oracle on <= 12-point instances: exhaustive 2-point
  // hypotheses pick the max-consensus inlier set; the fitted line must
  // match the oracle's least squares over that set to 1e-6.
  Rng orc(506);
  for (int t = 0; t < 200; ++t) {
    const Vec3 origin{orc.uniform(0.3, 0.6), orc.uniform(-0.2, 0.2), 0.0};
    Vec3 dir{orc.uniform(-0.1, 0.1), orc.uniform(-0.1, 0.1), 1.0};
    dir = dir.normalized();
    std::vector<FeaturePoint> pts;
    const int n_in = 9;
    for (int i = 0; i < n_in; ++i) {
      FeaturePoint fp;
      fp.p3d = origin + dir * (i * 0.03) +
               Vec3{orc.uniform(-2e-4, 2e-4), orc.uniform(-2e-4, 2e-4), 0.0};
      pts.push_back(fp);
    }
    for (int o = 0; o < 3; ++o) {
      FeaturePoint fp;
      fp.p3d = origin + dir * orc.uniform(0.0, 0.24) +
               Vec3{orc.uniform(0.05, 0.09), orc.uniform(0.05, 0.09), 0.0};
      pts.push_back(fp);
    }
    DetectionConfig det;
    const LineFit fit = fit_stalk_line(pts, det, orc);

    std::size_t oracle_best = 0;
    std::vector<int> oracle_set;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const Vec3 d = pts[j].p3d - pts[i].p3d;
        if (d.norm() < 1e-9) continue;
        const Line3 hyp = make_line(pts[i].p3d, d);
        std::vector<int> inl;
        for (std::size_t k = 0; k < pts.size(); ++k)
          if (point_line_distance(pts[k].p3d, hyp) < det.inlier_threshold)
            inl.push_back(static_cast<int>(k));
        if (inl.size() > oracle_best) {
          oracle_best = inl.size();
          oracle_set = inl;
        }
      }
    }
    ASSERT_EQ(fit.inliers.size(), oracle_best);
    ASSERT_EQ(fit.inliers, oracle_set);
    std::vector<Vec3> inlier_pts;
    for (int k : oracle_set) inlier_pts.push_back(pts[k].p3d);
    const Line3 oracle_line = jacobi_least_squares(inlier_pts);
    for (double z : {0.0, 0.1, 0.24}) {
      const Vec3 on_fit = line_point_at_height(fit.line, z);
      EXPECT_LT(point_line_distance(on_fit, oracle_line), 1e-6);
    }
  }
}

// --------------------------------------------------------------------------
// 6. Consensus outlier rejection, 100 seeded cases
// --------------------------------------------------------------------------
TEST(Acceptance, C06_ConsensusOutlierRejection) {
  Criterion guard(6, "corrupting 1 of 5 frames by >= 40 mm never moves the target");
  SelectionConfig cfg;
  Rng rng(606);
  int unchanged = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<FrameResult> frames;
    std::vector<StalkCandidate> bests;
    const Vec3 center{rng.uniform(0.35, 0.6), rng.uniform(-0.3, 0.3), cfg.z_target};
    for (int i = 0; i < 5; ++i) {
      StalkCandidate cand;
      cand.insertion_point = center + Vec3{rng.uniform(-0.005, 0.005),
                                           rng.uniform(-0.005, 0.005), 0.0};
      cand.insertion_point.z = cfg.z_target;
      cand.line = make_line(cand.insertion_point, {0, 0, 1});
      cand.features = {0.5 + 0.08 * i, 30, 64, 0.1};  // distinct scores
      cand.instance_id = i + 1;
      bests.push_back(cand);
    }
    for (const auto& b : bests) frames.push_back({1, b});
    const auto base = consensus(frames, cfg, {0, 0, 0.16});
    const auto* base_target = std::get_if<InsertionTarget>(&base);
    ASSERT_NE(base_target, nullptr);

    // Corrupt a non-representative member (the lowest-scored) by >= 2r.
    auto corrupted = frames;
    corrupted[0].best->insertion_point.y +=
        (rng.bernoulli(0.5) ? 1.0 : -1.0) * (0.040 + rng.uniform(0.0, 0.02));
    const auto after = consensus(corrupted, cfg, {0, 0, 0.16});
    const auto* target = std::get_if<InsertionTarget>(&after);
    ASSERT_NE(target, nullptr);
    unchanged += (target->point == base_target->point);
  }
  EXPECT_EQ(unchanged, 100);
}

// --------------------------------------------------------------------------
// 7. FSM verification
// --------------------------------------------------------------------------
TEST(Acceptance, C07_FsmVerification) {
  Criterion guard(7, "FSM total, deterministic, Done reachable, safety transitions");
  for (int s = 0; s < kFsmStateCount; ++s) {
    for (int e = 0; e < kFsmEventCount; ++e) {
      const auto state = static_cast<FsmState>(s);
      const auto event = static_cast<FsmEvent>(e);
      const FsmStep once = fsm_step(state, event);
      const FsmStep twice = fsm_step(state, event);
      EXPECT_EQ(once.next, twice.next);
      EXPECT_GE(static_cast<int>(once.next), 0);
      EXPECT_LT(static_cast<int>(once.next), kFsmStateCount);
    }
    EXPECT_EQ(fsm_step(static_cast<FsmState>(s), FsmEvent::CollisionStop).next,
              FsmState::Fault);
  }
  EXPECT_EQ(fsm_step(FsmState::Scan, FsmEvent::Reposition).next,
            FsmState::AwaitOperator);

  std::set<FsmState> reachable{FsmState::Stow};
  std::vector<FsmState> frontier{FsmState::Stow};
  while (!frontier.empty()) {
    const FsmState state = frontier.back();
    frontier.pop_back();
    for (int e = 0; e < kFsmEventCount; ++e) {
      const FsmState next = fsm_step(state, static_cast<FsmEvent>(e)).next;
      if (reachable.insert(next).second) frontier.push_back(next);
    }
  }
  EXPECT_EQ(static_cast<int>(reachable.size()), kFsmStateCount);
  EXPECT_TRUE(reachable.count(FsmState::Done));
}

// --------------------------------------------------------------------------
// 8. Contact-model properties
// --------------------------------------------------------------------------
TEST(Acceptance, C08_ContactModelProperties) {
  Criterion guard(8, "funnel boundary, V-block contraction, glance math, axis asymmetry");
  const GripperSpec gripper;
  StalkTruth stalk;
  stalk.axis = make_line({0.45, 0, 0}, {0, 0, 1});
  stalk.section = {0.01, 0.01, 0.0};
  stalk.top_z = 0.5;
  stalk.pith_top_z = 0.08;

  // Capture criterion holds exactly at |e| = funnel_half_opening.
  const InsertionTarget target{{0.45, 0.0, 0.05}, {1, 0, 0}, 5};
  for (double sign : {-1.0, 1.0}) {
    const GraspOutcome at =
        simulate_grasp(target, stalk, {0, sign * gripper.funnel_half_opening, 0},
                       gripper);
    EXPECT_TRUE(at.captured);
    const GraspOutcome past = simulate_grasp(
        target, stalk, {0, sign * (gripper.funnel_half_opening + 1e-6), 0}, gripper);
    EXPECT_FALSE(past.captured);
  }

  // |delta| <= |e| always.
  Rng rng(808);
  for (int i = 0; i < 2000; ++i) {
    StalkTruth s = stalk;
    s.stiffness = rng.uniform(0.0, 1.0);
    const double e = rng.uniform(-0.03, 0.03);
    EXPECT_LE(std::abs(simulate_vblock_alignment(e, s, gripper)), std::abs(e));
  }

  // Glance angle: even, zero at center, strictly increasing, and within
  // 1e-6 rad of the finite-difference ellipse normal.
  for (int i = 0; i < 300; ++i) {
    const EllipseSection sec{rng.uniform(0.004, 0.02), rng.uniform(0.004, 0.02), 0.0};
    const auto axis = rng.bernoulli(0.5) ? InsertAxis::Major : InsertAxis::Minor;
    const double along = insertion_semi_axis(sec, axis);
    const double perp = perpendicular_semi_axis(sec, axis);
    EXPECT_DOUBLE_EQ(entry_glance_angle(sec, 0.0, axis), 0.0);
    double prev = -1.0;
    for (int k = 0; k <= 12; ++k) {
      const double d = 0.96 * perp * k / 12.0;
      const double ang = entry_glance_angle(sec, d, axis);
      EXPECT_DOUBLE_EQ(ang, entry_glance_angle(sec, -d, axis));
      EXPECT_GT(ang, prev);
      prev = ang;

      auto implicit_fn = [&](double x, double y) {
        return x * x / (along * along) + y * y / (perp * perp) - 1.0;
      };
      const double x0 = along * std::sqrt(1.0 - (d / perp) * (d / perp));
      const double h = 1e-7;
      const double gx = (implicit_fn(x0 + h, d) - implicit_fn(x0 - h, d)) / (2 * h);
      const double gy = (implicit_fn(x0, d + h) - implicit_fn(x0, d - h)) / (2 * h);
      const double gn = std::hypot(gx, gy);
      const double fd_angle = std::acos(std::clamp(gx / gn, -1.0, 1.0));
      EXPECT_NEAR(ang, fd_angle, 1e-6);
    }
  }

  // Minor-axis insertions succeed at least as often as major-axis ones
  // under the same offset distribution, over 1000 elliptical stalks.
  int minor_ok = 0, major_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const double major = rng.uniform(0.008, 0.020);
    const double minor = major * rng.uniform(0.5, 0.9);
    const double delta = rng.normal(0.0, 0.003);
    StalkTruth a = stalk;
    a.section = {minor, major, 0.0};  // approach along x = along the minor axis
    StalkTruth b = stalk;
    b.section = {major, minor, 0.0};
    minor_ok += simulate_insertion(delta, a, gripper, 0.0, 0.05).retained;
    major_ok += simulate_insertion(delta, b, gripper, 0.0, 0.05).retained;
  }
  EXPECT_GE(minor_ok, major_ok);
}

// --------------------------------------------------------------------------
// 9. Funnel reproduction with the shipped calibration config
// --------------------------------------------------------------------------
TEST(Acceptance, C09_FunnelReproduction) {
  Criterion guard(9, "48-trial funnel monotone; insert in [0.40,0.80], detect in [0.85,1]");
  const std::string path = std::string(CORNPOINT_REPO_DIR) + "/configs/calibration.json";
  RunConfig cfg = io::run_config_from_json(io::load_json_file(path));
  // The shipped file is the built-in calibration, serialized.
  EXPECT_EQ(io::to_json(cfg).dump(), io::to_json(default_run_config()).dump());

  cfg.trial.n_trials = 48;
  const EvaluateReport report = evaluate_run(cfg);
  const FunnelSummary& s = report.summary;
  std::printf("    funnel: %d/%d/%d/%d/%d of %d\n", s.detected, s.grasped, s.inserted,
              s.pads_covered, s.through_pith, s.n_trials);

  EXPECT_GE(s.detected, s.grasped);
  EXPECT_GE(s.grasped, s.inserted);
  EXPECT_GE(s.inserted, s.pads_covered);
  EXPECT_GE(s.pads_covered, s.through_pith);
  EXPECT_GE(s.rate(s.detected), 0.85);
  EXPECT_LE(s.rate(s.detected), 1.0);
  EXPECT_GE(s.rate(s.inserted), 0.40);
  EXPECT_LE(s.rate(s.inserted), 0.80);
}

// --------------------------------------------------------------------------
// 10. Determinism, including parallel runs and file outputs
// --------------------------------------------------------------------------
TEST(Acceptance, C10_Determinism) {
  Criterion guard(10, "same seed => byte-identical outputs, any thread count");
  RunConfig cfg = default_run_config();
  cfg.trial.n_trials = 8;
  cfg.seed = 1001;

  setenv("CORNPOINT_THREADS", "2", 1);
  const std::string parallel = io::to_json(evaluate_run(cfg)).dump();
  setenv("CORNPOINT_THREADS", "1", 1);
  const std::string serial = io::to_json(evaluate_run(cfg)).dump();
  unsetenv("CORNPOINT_THREADS");
  EXPECT_EQ(parallel, serial);

  const std::string bench_a = io::to_json(pose_bench_run(cfg, 4)).dump();
  const std::string bench_b = io::to_json(pose_bench_run(cfg, 4)).dump();
  EXPECT_EQ(bench_a, bench_b);

  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cornpoint_acceptance_c10";
  fs::remove_all(root);
  const fs::path cfg_path = root / "config.json";
  fs::create_directories(root);
  io::write_json_file(cfg_path, io::to_json(cfg));

  cli::GenerateOptions gen;
  gen.config_path = cfg_path.string();
  gen.seed = 77;
  std::ostringstream os;
  gen.out_dir = (root / "a").string();
  ASSERT_EQ(cli::cmd_generate(gen, os), cli::kExitOk);
  gen.out_dir = (root / "b").string();
  ASSERT_EQ(cli::cmd_generate(gen, os), cli::kExitOk);

  auto slurp = [](const fs::path& p) {
    std::FILE* f = std::fopen(p.string().c_str(), "rb");
    std::string data;
    char buf[8192];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) data.append(buf, n);
    std::fclose(f);
    return data;
  };
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(root / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_EQ(compared, 16);
  fs::remove_all(root);
}

}  // namespace
}  // namespace cornpoint
