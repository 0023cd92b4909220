#pragma once

// The operational shell: run configuration, the per-frame detection
// pipeline, full Monte Carlo insertion trials (scene -> frames -> selection
// -> FSM -> contact model -> grading), the pose accuracy benchmark, and
// deterministic parallel execution.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <thread>

#include "cornpoint/detect.hpp"
#include "cornpoint/insertion.hpp"
#include "cornpoint/io.hpp"
#include "cornpoint/render.hpp"
#include "cornpoint/scene.hpp"
#include "cornpoint/select.hpp"

namespace cornpoint {

struct CameraConfig {
  CameraIntrinsics intrinsics{720.0, 720.0, 479.5, 359.5, 960, 720};
  Vec3 position{0.0, 0.0, 0.16};
  int n_frames = 5;

  Pose3 scan_pose() const { return make_scan_pose(position); }

  void validate() const {
    intrinsics.validate();
    if (n_frames < 1) throw Error(Errc::Config, "camera: n_frames must be >= 1");
  }
};

struct TrialConfig {
  int n_trials = 48;
  double approach_sigma = 0.018;   // m, execution jitter per horizontal axis
  double match_radius = 0.025;     // m, detection-success radius
  double collision_margin = 0.010; // m above local terrain needed at z_target
  double collision_prob = 0.5;     // chance of a CollisionStop when violated

  void validate() const {
    if (n_trials < 1) throw Error(Errc::Config, "trial: n_trials must be >= 1");
    if (approach_sigma < 0.0 || match_radius <= 0.0 || collision_margin < 0.0 ||
        collision_prob < 0.0 || collision_prob > 1.0)
      throw Error(Errc::Config, "trial: bad parameters");
  }
};

struct RunConfig {
  SceneConfig scene;
  NoiseConfig noise;
  CameraConfig camera;
  DetectionConfig detection;
  SelectionConfig selection;
  WorkspaceBox workspace;
  GripperSpec gripper;
  TrialConfig trial;
  std::uint64_t seed = 1;

  void validate() const {
    scene.validate();
    noise.validate();
    camera.validate();
    detection.validate();
    selection.validate();
    workspace.validate();
    gripper.validate();
    trial.validate();
    if (detection.z_target != selection.z_target)
      throw Error(Errc::Config, "config: z_target mismatch between stages");
    if (selection.n_frames != camera.n_frames)
      throw Error(Errc::Config, "config: camera and selection disagree on n_frames");
  }
};

/// The shipped calibration: stereo noise with sigma(0.4 m) = 2 mm, a
/// per-instance stereo bias, 20% leaf occlusion, 2 px boundary jitter, and
/// stalk placements spread across the workspace depth range.
inline RunConfig default_run_config() {
  RunConfig cfg;
  cfg.scene.row_x = 0.48;
  cfg.scene.row_x_jitter = 0.22;  // ranges from ~0.26 m to ~0.70 m
  cfg.noise.depth_sigma0 = 0.0125;       // 2 mm at 0.4 m
  cfg.noise.depth_bias_sigma0 = 0.020;   // 3.2 mm at 0.4 m, one draw per instance
  cfg.noise.depth_dropout = 0.02;
  cfg.noise.mask_boundary_jitter = 2.0;
  cfg.noise.occlusion_fraction = 0.20;
  cfg.noise.confidence_min = 0.80;
  cfg.noise.confidence_max = 1.00;
  cfg.noise.false_negative_rate = 0.05;
  return cfg;
}

// ---------------------------------------------------------------------------
// Per-frame pipeline and multi-frame detection
// ---------------------------------------------------------------------------

struct FramePipelineResult {
  std::vector<StalkCandidate> raw;       // one per usable instance
  std::vector<StalkCandidate> filtered;  // after workspace + spacing filters
  std::optional<StalkCandidate> best;
};

/// Candidate extraction, filtering and per-frame best for one observation.
/// Instances that fail (no depth, too few points, degenerate or horizontal
/// fits) are skipped, not fatal.
inline FramePipelineResult run_frame_pipeline(const FrameObservation& frame,
                                              const DetectionConfig& det,
                                              const SelectionConfig& sel,
                                              const WorkspaceBox& box, Rng& rng) {
  FramePipelineResult res;
  for (int label = 1; label <= frame.instance_count(); ++label) {
    try {
      res.raw.push_back(candidate_from_instance(frame, label, det, rng));
    } catch (const Error&) {
      // unusable instance
    }
  }
  res.filtered = filter_spacing(filter_workspace(res.raw, box), sel.gripper_clearance);
  res.best = select_frame_best(res.filtered);
  return res;
}

struct DetectionRun {
  std::vector<FramePipelineResult> frames;
  std::variant<InsertionTarget, RepositionSignal> outcome =
      RepositionSignal{RepositionReason::NoDetections};
};

inline DetectionRun run_detection(const std::vector<FrameObservation>& frames,
                                  const DetectionConfig& det, const SelectionConfig& sel,
                                  const WorkspaceBox& box, const Vec3& camera_position,
                                  Rng& rng) {
  DetectionRun run;
  std::vector<FrameResult> results;
  for (const auto& frame : frames) {
    FramePipelineResult res = run_frame_pipeline(frame, det, sel, box, rng);
    results.push_back({static_cast<int>(res.raw.size()), res.best});
    run.frames.push_back(std::move(res));
  }
  run.outcome = consensus(results, sel, camera_position);
  return run;
}

// ---------------------------------------------------------------------------
// One full insertion trial
// ---------------------------------------------------------------------------

struct TrialResult {
  TrialReport report;
  std::optional<InsertionTarget> target;
  double detect_error = std::numeric_limits<double>::quiet_NaN();
  int matched_stalk = -1;
  FsmState final_state = FsmState::Stow;
  std::uint64_t scene_seed = 0;
};

/// Nearest stalk to a point by horizontal distance of the axis at the
/// point's height. Returns index and distance.
inline std::pair<int, double> match_nearest_stalk(const SceneTruth& scene,
                                                  const Vec3& point) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.stalks.size(); ++i) {
    const Vec3 axis_pt = line_point_at_height(scene.stalks[i].axis, point.z);
    const double d = horizontal_distance(axis_pt, point);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return {best, best_d};
}

/// Runs trial `index` of a config: fresh scene, n_frames renders, the
/// detection pipeline, the FSM driven by simulated events, the contact
/// model, and grading. Fully determined by (config.seed, index).
inline TrialResult run_trial(const RunConfig& cfg, int index) {
  TrialResult result;
  result.scene_seed = derive_seed(cfg.seed, index, 1);
  const SceneTruth scene = generate_scene(cfg.scene, result.scene_seed);
  const Pose3 scan_pose = cfg.camera.scan_pose();

  std::vector<FrameObservation> frames;
  bool empty_frustum = false;
  for (int f = 0; f < cfg.camera.n_frames; ++f) {
    try {
      frames.push_back(render_frame(scene, scan_pose, cfg.camera.intrinsics, cfg.noise,
                                    derive_seed(cfg.seed, index, 100 + f)));
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyFrustum) throw;
      empty_frustum = true;
    }
  }

  Rng pipeline_rng(derive_seed(cfg.seed, index, 2));
  Rng event_rng(derive_seed(cfg.seed, index, 3));

  TrialEvidence evidence;
  FsmState state = FsmState::Stow;
  auto step = [&](FsmEvent e) { state = fsm_step(state, e).next; };

  step(FsmEvent::InsertCommand);  // Stow -> Scan
  step(FsmEvent::MotionDone);     // Scan -> Detect

  DetectionRun detection;
  if (!frames.empty())
    detection = run_detection(frames, cfg.detection, cfg.selection, cfg.workspace,
                              cfg.camera.position, pipeline_rng);
  (void)empty_frustum;  // an all-empty view simply yields NoDetections

  if (const auto* target = std::get_if<InsertionTarget>(&detection.outcome)) {
    evidence.target_returned = true;
    result.target = *target;
    const auto [stalk_idx, dist] = match_nearest_stalk(scene, target->point);
    result.matched_stalk = stalk_idx;
    result.detect_error = dist;
    evidence.detect_error = dist;
    step(FsmEvent::DetectOk);  // Detect -> Approach

    // Ground collision hazard: inserting below the local terrain margin can
    // trip the arm's current limits during the approach.
    const double ground =
        scene.terrain.height(target->point.x, target->point.y);
    const bool hazard = target->point.z - ground < cfg.trial.collision_margin;
    if (hazard && event_rng.bernoulli(cfg.trial.collision_prob)) {
      step(FsmEvent::CollisionStop);
      evidence.faulted = true;
    } else if (stalk_idx >= 0) {
      step(FsmEvent::MotionDone);  // Approach -> AlignFunnel
      step(FsmEvent::MotionDone);  // AlignFunnel -> AlignVBlock

      const StalkTruth& stalk = scene.stalks[stalk_idx];
      const Vec3 jitter{event_rng.normal(0.0, cfg.trial.approach_sigma),
                        event_rng.normal(0.0, cfg.trial.approach_sigma), 0.0};
      const GraspOutcome grasp = simulate_grasp(*target, stalk, jitter, cfg.gripper);
      evidence.grasp = grasp;

      if (grasp.captured) {
        step(FsmEvent::ContactMade);  // AlignVBlock -> Insert
        const double delta =
            simulate_vblock_alignment(grasp.lateral_offset, stalk, cfg.gripper);
        const double approach_azimuth =
            std::atan2(target->approach_direction.y, target->approach_direction.x);
        evidence.insertion = simulate_insertion(delta, stalk, cfg.gripper,
                                                approach_azimuth, target->point.z);
      }
      step(FsmEvent::ActuatorExtended);   // (AlignVBlock|Insert) -> Retract
      step(FsmEvent::ActuatorRetracted);  // Retract -> DeployLogger
      LoggerMagazine magazine;
      if (magazine.release()) step(FsmEvent::LoggerReleased);  // -> Done
    }
  } else {
    step(FsmEvent::Reposition);  // Detect -> AwaitOperator, trial over
  }

  result.final_state = state;
  result.report = grade_trial(evidence, cfg.trial.match_radius);
  return result;
}

// ---------------------------------------------------------------------------
// Parallel execution
// ---------------------------------------------------------------------------

/// Worker cap: CORNPOINT_THREADS when set, hardware concurrency otherwise.
inline int thread_cap() {
  if (const char* env = std::getenv("CORNPOINT_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(0..n-1) across a worker pool; results are keyed by index so the
/// output is identical regardless of thread count.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_cap(), std::max(1, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Monte Carlo evaluation
// ---------------------------------------------------------------------------

/// Staged success funnel over a batch of trials, plus pose error statistics
/// and the per-failure-stage histogram.
struct FunnelSummary {
  int n_trials = 0;
  int detected = 0;
  int grasped = 0;
  int inserted = 0;
  int pads_covered = 0;
  int through_pith = 0;
  double mean_error = 0.0;    // lateral, detected trials only
  double median_error = 0.0;
  double p95_error = 0.0;
  std::array<int, 6> stage_histogram{};  // Detect..Pith failures, then successes

  double rate(int count) const {
    return n_trials > 0 ? static_cast<double>(count) / n_trials : 0.0;
  }
};

inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = p * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

inline FunnelSummary summarize(const std::vector<TrialResult>& trials) {
  FunnelSummary s;
  s.n_trials = static_cast<int>(trials.size());
  std::vector<double> errors;
  for (const auto& t : trials) {
    const TrialReport& r = t.report;
    s.detected += r.detected;
    s.grasped += r.grasped;
    s.inserted += r.inserted;
    s.pads_covered += r.pads_covered;
    s.through_pith += r.through_pith;
    if (r.failure_stage)
      ++s.stage_histogram[static_cast<int>(*r.failure_stage)];
    else
      ++s.stage_histogram[5];
    if (r.detected && std::isfinite(t.detect_error)) errors.push_back(t.detect_error);
  }
  if (!errors.empty()) {
    s.mean_error =
        std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
    s.median_error = percentile(errors, 0.5);
    s.p95_error = percentile(errors, 0.95);
  }
  return s;
}

struct EvaluateReport {
  FunnelSummary summary;
  std::vector<TrialResult> trials;
};

/// N independent insertion trials with per-trial seed streams; parallel but
/// deterministically ordered by trial index.
inline EvaluateReport evaluate_run(const RunConfig& cfg) {
  cfg.validate();
  EvaluateReport report;
  report.trials.resize(cfg.trial.n_trials);
  parallel_for(cfg.trial.n_trials,
               [&](int i) { report.trials[i] = run_trial(cfg, i); });
  report.summary = summarize(report.trials);
  return report;
}

// ---------------------------------------------------------------------------
// Pose accuracy benchmark
// ---------------------------------------------------------------------------

struct PoseBenchRecord {
  double error = 0.0;     // horizontal distance to the true axis at z_target
  double range = 0.0;     // camera-frame depth of the estimate
  double diameter = 0.0;  // matched stalk's major-axis diameter
};

struct PoseBenchReport {
  int n_scenes = 0;
  int repositioned = 0;
  double mean_error = 0.0;  // over per-scene consensus estimates
  double median_error = 0.0;
  double p95_error = 0.0;
  std::vector<double> consensus_errors;
  std::vector<PoseBenchRecord> candidates;  // every per-frame candidate

  double mean_candidate_error(double range_min, double range_max) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : candidates)
      if (r.range > range_min && r.range <= range_max) {
        sum += r.error;
        ++n;
      }
    return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  double mean_candidate_error_by_diameter(double d_min, double d_max) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : candidates)
      if (r.diameter > d_min && r.diameter <= d_max) {
        sum += r.error;
        ++n;
      }
    return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Pose accuracy over N scenes: per scene the consensus estimate's lateral
/// error against the matched true axis (height error is ignored; the z
/// coordinate is a hyperparameter), plus per-candidate records stratified
/// by range and stalk diameter.
inline PoseBenchReport pose_bench_run(const RunConfig& cfg, int n_scenes) {
  cfg.validate();
  if (n_scenes < 1) throw Error(Errc::Config, "pose-bench: need at least one scene");

  struct SceneOut {
    std::optional<double> consensus_error;
    bool repositioned = false;
    std::vector<PoseBenchRecord> candidates;
  };
  std::vector<SceneOut> outs(n_scenes);

  parallel_for(n_scenes, [&](int i) {
    SceneOut& out = outs[i];
    const std::uint64_t scene_seed = derive_seed(cfg.seed, i, 1);
    const SceneTruth scene = generate_scene(cfg.scene, scene_seed);
    const Pose3 scan_pose = cfg.camera.scan_pose();

    std::vector<FrameObservation> frames;
    for (int f = 0; f < cfg.camera.n_frames; ++f) {
      try {
        frames.push_back(render_frame(scene, scan_pose, cfg.camera.intrinsics,
                                      cfg.noise, derive_seed(cfg.seed, i, 100 + f)));
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyFrustum) throw;
      }
    }
    if (frames.empty()) {
      out.repositioned = true;
      return;
    }

    Rng rng(derive_seed(cfg.seed, i, 2));
    const DetectionRun run = run_detection(frames, cfg.detection, cfg.selection,
                                           cfg.workspace, cfg.camera.position, rng);

    for (const auto& frame_res : run.frames) {
      for (const auto& cand : frame_res.raw) {
        const auto [idx, dist] = match_nearest_stalk(scene, cand.insertion_point);
        if (idx < 0 || dist > cfg.trial.match_radius) continue;
        PoseBenchRecord rec;
        rec.error = dist;
        rec.range = scan_pose.inverse_apply(cand.insertion_point).z;
        rec.diameter = 2.0 * scene.stalks[idx].section.semi_major();
        out.candidates.push_back(rec);
      }
    }

    if (const auto* target = std::get_if<InsertionTarget>(&run.outcome)) {
      const auto [idx, dist] = match_nearest_stalk(scene, target->point);
      (void)idx;
      out.consensus_error = dist;
    } else {
      out.repositioned = true;
    }
  });

  PoseBenchReport report;
  report.n_scenes = n_scenes;
  for (auto& out : outs) {
    if (out.consensus_error) report.consensus_errors.push_back(*out.consensus_error);
    if (out.repositioned) ++report.repositioned;
    report.candidates.insert(report.candidates.end(), out.candidates.begin(),
                             out.candidates.end());
  }
  if (!report.consensus_errors.empty()) {
    report.mean_error = std::accumulate(report.consensus_errors.begin(),
                                        report.consensus_errors.end(), 0.0) /
                        report.consensus_errors.size();
    report.median_error = percentile(report.consensus_errors, 0.5);
    report.p95_error = percentile(report.consensus_errors, 0.95);
  }
  return report;
}

}  // namespace cornpoint
