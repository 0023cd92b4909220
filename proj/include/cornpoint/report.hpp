#pragma once

// JSON (de)serialization for run configurations and evaluation reports,
// plus the plain-text funnel table. Detect / grasp / insert rows carry the
// field-trial reference rates for side-by-side comparison; they are
// context, not assertions.

#include <cstdio>
#include <sstream>

#include "cornpoint/harness.hpp"
#include "cornpoint/io.hpp"

namespace cornpoint::io {

inline json to_json(const SceneConfig& c) {
  return {{"min_stalks", c.min_stalks},
          {"max_stalks", c.max_stalks},
          {"row_x", c.row_x},
          {"row_x_jitter", c.row_x_jitter},
          {"row_y_min", c.row_y_min},
          {"row_y_max", c.row_y_max},
          {"row_spacing", c.row_spacing},
          {"min_stalk_gap", c.min_stalk_gap},
          {"max_stalk_gap", c.max_stalk_gap},
          {"min_diameter", c.min_diameter},
          {"max_diameter", c.max_diameter},
          {"min_aspect", c.min_aspect},
          {"max_aspect", c.max_aspect},
          {"max_tilt_deg", c.max_tilt_deg},
          {"min_height", c.min_height},
          {"max_height", c.max_height},
          {"min_pith_height", c.min_pith_height},
          {"max_pith_height", c.max_pith_height},
          {"min_stiffness", c.min_stiffness},
          {"max_stiffness", c.max_stiffness},
          {"terrain_amplitude", c.terrain_amplitude},
          {"terrain_wavelength", c.terrain_wavelength},
          {"terrain_components", c.terrain_components},
          {"leaf_bands", c.leaf_bands},
          {"leaf_margin", c.leaf_margin},
          {"leaf_offset_min", c.leaf_offset_min},
          {"leaf_offset_max", c.leaf_offset_max},
          {"leaf_width_min", c.leaf_width_min},
          {"leaf_width_max", c.leaf_width_max}};
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  get_if_present(j, "min_stalks", c.min_stalks);
  get_if_present(j, "max_stalks", c.max_stalks);
  get_if_present(j, "row_x", c.row_x);
  get_if_present(j, "row_x_jitter", c.row_x_jitter);
  get_if_present(j, "row_y_min", c.row_y_min);
  get_if_present(j, "row_y_max", c.row_y_max);
  get_if_present(j, "row_spacing", c.row_spacing);
  get_if_present(j, "min_stalk_gap", c.min_stalk_gap);
  get_if_present(j, "max_stalk_gap", c.max_stalk_gap);
  get_if_present(j, "min_diameter", c.min_diameter);
  get_if_present(j, "max_diameter", c.max_diameter);
  get_if_present(j, "min_aspect", c.min_aspect);
  get_if_present(j, "max_aspect", c.max_aspect);
  get_if_present(j, "max_tilt_deg", c.max_tilt_deg);
  get_if_present(j, "min_height", c.min_height);
  get_if_present(j, "max_height", c.max_height);
  get_if_present(j, "min_pith_height", c.min_pith_height);
  get_if_present(j, "max_pith_height", c.max_pith_height);
  get_if_present(j, "min_stiffness", c.min_stiffness);
  get_if_present(j, "max_stiffness", c.max_stiffness);
  get_if_present(j, "terrain_amplitude", c.terrain_amplitude);
  get_if_present(j, "terrain_wavelength", c.terrain_wavelength);
  get_if_present(j, "terrain_components", c.terrain_components);
  get_if_present(j, "leaf_bands", c.leaf_bands);
  get_if_present(j, "leaf_margin", c.leaf_margin);
  get_if_present(j, "leaf_offset_min", c.leaf_offset_min);
  get_if_present(j, "leaf_offset_max", c.leaf_offset_max);
  get_if_present(j, "leaf_width_min", c.leaf_width_min);
  get_if_present(j, "leaf_width_max", c.leaf_width_max);
  return c;
}

inline json to_json(const NoiseConfig& c) {
  return {{"depth_sigma0", c.depth_sigma0},
          {"depth_bias_sigma0", c.depth_bias_sigma0},
          {"depth_dropout", c.depth_dropout},
          {"mask_boundary_jitter", c.mask_boundary_jitter},
          {"occlusion_fraction", c.occlusion_fraction},
          {"confidence_min", c.confidence_min},
          {"confidence_max", c.confidence_max},
          {"false_negative_rate", c.false_negative_rate}};
}

inline NoiseConfig noise_config_from_json(const json& j) {
  NoiseConfig c;
  get_if_present(j, "depth_sigma0", c.depth_sigma0);
  get_if_present(j, "depth_bias_sigma0", c.depth_bias_sigma0);
  get_if_present(j, "depth_dropout", c.depth_dropout);
  get_if_present(j, "mask_boundary_jitter", c.mask_boundary_jitter);
  get_if_present(j, "occlusion_fraction", c.occlusion_fraction);
  get_if_present(j, "confidence_min", c.confidence_min);
  get_if_present(j, "confidence_max", c.confidence_max);
  get_if_present(j, "false_negative_rate", c.false_negative_rate);
  return c;
}

inline json to_json(const CameraConfig& c) {
  return {{"intrinsics", to_json(c.intrinsics)},
          {"position", to_json(c.position)},
          {"n_frames", c.n_frames}};
}

inline CameraConfig camera_config_from_json(const json& j) {
  CameraConfig c;
  if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  if (j.contains("position")) c.position = vec3_from_json(j.at("position"));
  get_if_present(j, "n_frames", c.n_frames);
  return c;
}

inline json to_json(const DetectionConfig& c) {
  return {{"feature_stride", c.feature_stride},
          {"min_points", c.min_points},
          {"ransac_iterations", c.ransac_iterations},
          {"inlier_threshold", c.inlier_threshold},
          {"min_inliers", c.min_inliers},
          {"z_target", c.z_target}};
}

inline DetectionConfig detection_config_from_json(const json& j) {
  DetectionConfig c;
  get_if_present(j, "feature_stride", c.feature_stride);
  get_if_present(j, "min_points", c.min_points);
  get_if_present(j, "ransac_iterations", c.ransac_iterations);
  get_if_present(j, "inlier_threshold", c.inlier_threshold);
  get_if_present(j, "min_inliers", c.min_inliers);
  get_if_present(j, "z_target", c.z_target);
  return c;
}

inline json to_json(const SelectionConfig& c) {
  return {{"gripper_clearance", c.gripper_clearance},
          {"n_frames", c.n_frames},
          {"cluster_radius", c.cluster_radius},
          {"z_target", c.z_target}};
}

inline SelectionConfig selection_config_from_json(const json& j) {
  SelectionConfig c;
  get_if_present(j, "gripper_clearance", c.gripper_clearance);
  get_if_present(j, "n_frames", c.n_frames);
  get_if_present(j, "cluster_radius", c.cluster_radius);
  get_if_present(j, "z_target", c.z_target);
  return c;
}

inline json to_json(const WorkspaceBox& b) {
  return {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min},
          {"y_max", b.y_max}, {"z_min", b.z_min}, {"z_max", b.z_max}};
}

inline WorkspaceBox workspace_from_json(const json& j) {
  WorkspaceBox b;
  get_if_present(j, "x_min", b.x_min);
  get_if_present(j, "x_max", b.x_max);
  get_if_present(j, "y_min", b.y_min);
  get_if_present(j, "y_max", b.y_max);
  get_if_present(j, "z_min", b.z_min);
  get_if_present(j, "z_max", b.z_max);
  return b;
}

inline json to_json(const GripperSpec& g) {
  return {{"funnel_half_opening", g.funnel_half_opening},
          {"stroke", g.stroke},
          {"actuator_force", g.actuator_force},
          {"vblock_travel", g.vblock_travel},
          {"spring_rate", g.spring_rate},
          {"sensor",
           {{"probe_l", g.sensor.probe_l},
            {"probe_w", g.sensor.probe_w},
            {"probe_t", g.sensor.probe_t},
            {"pad_depth", g.sensor.pad_depth},
            {"retain_depth", g.sensor.retain_depth}}},
          {"body_l", g.body_l},
          {"body_w", g.body_w},
          {"body_h", g.body_h},
          {"glance_max_angle_deg", rad_to_deg(g.glance_max_angle)},
          {"centering_rho0", g.centering_rho0},
          {"centering_rho1", g.centering_rho1}};
}

inline GripperSpec gripper_from_json(const json& j) {
  GripperSpec g;
  get_if_present(j, "funnel_half_opening", g.funnel_half_opening);
  get_if_present(j, "stroke", g.stroke);
  get_if_present(j, "actuator_force", g.actuator_force);
  get_if_present(j, "vblock_travel", g.vblock_travel);
  get_if_present(j, "spring_rate", g.spring_rate);
  if (j.contains("sensor")) {
    const json& s = j.at("sensor");
    get_if_present(s, "probe_l", g.sensor.probe_l);
    get_if_present(s, "probe_w", g.sensor.probe_w);
    get_if_present(s, "probe_t", g.sensor.probe_t);
    get_if_present(s, "pad_depth", g.sensor.pad_depth);
    get_if_present(s, "retain_depth", g.sensor.retain_depth);
  }
  get_if_present(j, "body_l", g.body_l);
  get_if_present(j, "body_w", g.body_w);
  get_if_present(j, "body_h", g.body_h);
  if (j.contains("glance_max_angle_deg"))
    g.glance_max_angle = deg_to_rad(j.at("glance_max_angle_deg").get<double>());
  get_if_present(j, "centering_rho0", g.centering_rho0);
  get_if_present(j, "centering_rho1", g.centering_rho1);
  return g;
}

inline json to_json(const TrialConfig& t) {
  return {{"n_trials", t.n_trials},
          {"approach_sigma", t.approach_sigma},
          {"match_radius", t.match_radius},
          {"collision_margin", t.collision_margin},
          {"collision_prob", t.collision_prob}};
}

inline TrialConfig trial_config_from_json(const json& j) {
  TrialConfig t;
  get_if_present(j, "n_trials", t.n_trials);
  get_if_present(j, "approach_sigma", t.approach_sigma);
  get_if_present(j, "match_radius", t.match_radius);
  get_if_present(j, "collision_prob", t.collision_prob);
  get_if_present(j, "collision_margin", t.collision_margin);
  return t;
}

inline json to_json(const RunConfig& cfg) {
  return {{"schema_version", kSchemaVersion},
          {"seed", cfg.seed},
          {"scene", to_json(cfg.scene)},
          {"noise", to_json(cfg.noise)},
          {"camera", to_json(cfg.camera)},
          {"detection", to_json(cfg.detection)},
          {"selection", to_json(cfg.selection)},
          {"workspace", to_json(cfg.workspace)},
          {"gripper", to_json(cfg.gripper)},
          {"trial", to_json(cfg.trial)}};
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    get_if_present(j, "seed", cfg.seed);
    if (j.contains("scene")) cfg.scene = scene_config_from_json(j.at("scene"));
    if (j.contains("noise")) cfg.noise = noise_config_from_json(j.at("noise"));
    if (j.contains("camera")) cfg.camera = camera_config_from_json(j.at("camera"));
    if (j.contains("detection"))
      cfg.detection = detection_config_from_json(j.at("detection"));
    if (j.contains("selection"))
      cfg.selection = selection_config_from_json(j.at("selection"));
    if (j.contains("workspace")) cfg.workspace = workspace_from_json(j.at("workspace"));
    if (j.contains("gripper")) cfg.gripper = gripper_from_json(j.at("gripper"));
    if (j.contains("trial")) cfg.trial = trial_config_from_json(j.at("trial"));
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline json to_json(const TrialReport& r) {
  json j = {{"detected", r.detected},
            {"grasped", r.grasped},
            {"inserted", r.inserted},
            {"pads_covered", r.pads_covered},
            {"through_pith", r.through_pith},
            {"failure_stage",
             r.failure_stage ? json(to_string(*r.failure_stage)) : json(nullptr)},
            {"final_offset",
             std::isfinite(r.final_offset) ? json(r.final_offset) : json(nullptr)},
            {"penetration", r.penetration}};
  return j;
}

inline json to_json(const FunnelSummary& s) {
  return {{"n_trials", s.n_trials},
          {"counts",
           {{"detected", s.detected},
            {"grasped", s.grasped},
            {"inserted", s.inserted},
            {"pads_covered", s.pads_covered},
            {"through_pith", s.through_pith}}},
          {"rates",
           {{"detected", s.rate(s.detected)},
            {"grasped", s.rate(s.grasped)},
            {"inserted", s.rate(s.inserted)},
            {"pads_covered", s.rate(s.pads_covered)},
            {"through_pith", s.rate(s.through_pith)}}},
          {"pose_error",
           {{"mean", s.mean_error}, {"median", s.median_error}, {"p95", s.p95_error}}},
          {"failure_histogram",
           {{"detect", s.stage_histogram[0]},
            {"grasp", s.stage_histogram[1]},
            {"insert", s.stage_histogram[2]},
            {"pads_covered", s.stage_histogram[3]},
            {"through_pith", s.stage_histogram[4]},
            {"success", s.stage_histogram[5]}}}};
}

inline json to_json(const EvaluateReport& report) {
  json trials = json::array();
  for (const auto& t : report.trials) {
    json jt = to_json(t.report);
    jt["detect_error"] =
        std::isfinite(t.detect_error) ? json(t.detect_error) : json(nullptr);
    jt["matched_stalk"] = t.matched_stalk;
    jt["final_state"] = to_string(t.final_state);
    jt["scene_seed"] = t.scene_seed;
    trials.push_back(std::move(jt));
  }
  return {{"schema_version", kSchemaVersion},
          {"summary", to_json(report.summary)},
          {"trials", trials}};
}

inline json to_json(const PoseBenchReport& r) {
  // Non-finite stratum means (empty stratum) serialize as null.
  json strata = {
      {"range_below_0.3", r.mean_candidate_error(0.0, 0.3)},
      {"range_0.3_to_0.5", r.mean_candidate_error(0.3, 0.5)},
      {"range_above_0.5", r.mean_candidate_error(0.5, 1e9)},
      {"diameter_below_20mm", r.mean_candidate_error_by_diameter(0.0, 0.020)},
      {"diameter_above_20mm", r.mean_candidate_error_by_diameter(0.020, 1e9)}};
  return {{"schema_version", kSchemaVersion},
          {"n_scenes", r.n_scenes},
          {"repositioned", r.repositioned},
          {"mean_error", r.mean_error},
          {"median_error", r.median_error},
          {"p95_error", r.p95_error},
          {"n_estimations", r.consensus_errors.size()},
          {"n_candidate_records", r.candidates.size()},
          {"candidate_strata", strata}};
}

/// Aligned plain-text funnel in the staged-criteria layout. Reference
/// column: the field-trial rates the calibration targets, for comparison
/// only.
inline std::string funnel_table(const FunnelSummary& s) {
  const char* names[5] = {"detected", "grasped", "inserted", "pads covered",
                          "through pith"};
  const int counts[5] = {s.detected, s.grasped, s.inserted, s.pads_covered,
                         s.through_pith};
  const char* reference[5] = {"94%", "90%", "60%", "-", "-"};
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %9s %8s %10s\n", "criterion", "success",
                "rate", "reference");
  os << line;
  for (int i = 0; i < 5; ++i) {
    std::snprintf(line, sizeof line, "%-14s %5d/%-3d %7.1f%% %10s\n", names[i],
                  counts[i], s.n_trials, 100.0 * s.rate(counts[i]), reference[i]);
    os << line;
  }
  return os.str();
}

}  // namespace cornpoint::io
