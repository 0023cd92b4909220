#pragma once

// The insertion sequencer and gripper contact model: a total, table-driven
// finite state machine for the motion sequence, plus kinematic models of
// funnel capture, spring-loaded V-block centering, sensor penetration and
// retention, and the five-criterion trial grading.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cornpoint/geometry.hpp"
#include "cornpoint/scene.hpp"
#include "cornpoint/select.hpp"

namespace cornpoint {

// ---------------------------------------------------------------------------
// Finite state machine
// ---------------------------------------------------------------------------

enum class FsmState {
  Stow,
  Scan,
  Detect,
  AwaitOperator,
  Approach,
  AlignFunnel,
  AlignVBlock,
  Insert,
  Retract,
  DeployLogger,
  Done,
  Fault,
};

enum class FsmEvent {
  InsertCommand,
  DetectOk,
  Reposition,
  MotionDone,
  ContactMade,
  ActuatorExtended,
  ActuatorRetracted,
  LoggerReleased,
  CollisionStop,
  ActuatorFault,
};

enum class FsmAction {
  None,
  MoveToScanPose,
  RequestDetection,
  PlanApproach,
  HaltForOperator,
  LateralAlignMotion,
  ExtendActuator,
  RetractActuator,
  ReleaseLogger,
  ReportFault,
};

constexpr int kFsmStateCount = 12;
constexpr int kFsmEventCount = 10;

inline const char* to_string(FsmState s) {
  switch (s) {
    case FsmState::Stow: return "Stow";
    case FsmState::Scan: return "Scan";
    case FsmState::Detect: return "Detect";
    case FsmState::AwaitOperator: return "AwaitOperator";
    case FsmState::Approach: return "Approach";
    case FsmState::AlignFunnel: return "AlignFunnel";
    case FsmState::AlignVBlock: return "AlignVBlock";
    case FsmState::Insert: return "Insert";
    case FsmState::Retract: return "Retract";
    case FsmState::DeployLogger: return "DeployLogger";
    case FsmState::Done: return "Done";
    case FsmState::Fault: return "Fault";
  }
  return "?";
}

inline const char* to_string(FsmEvent e) {
  switch (e) {
    case FsmEvent::InsertCommand: return "InsertCommand";
    case FsmEvent::DetectOk: return "DetectOk";
    case FsmEvent::Reposition: return "Reposition";
    case FsmEvent::MotionDone: return "MotionDone";
    case FsmEvent::ContactMade: return "ContactMade";
    case FsmEvent::ActuatorExtended: return "ActuatorExtended";
    case FsmEvent::ActuatorRetracted: return "ActuatorRetracted";
    case FsmEvent::LoggerReleased: return "LoggerReleased";
    case FsmEvent::CollisionStop: return "CollisionStop";
    case FsmEvent::ActuatorFault: return "ActuatorFault";
  }
  return "?";
}

inline const char* to_string(FsmAction a) {
  switch (a) {
    case FsmAction::None: return "None";
    case FsmAction::MoveToScanPose: return "MoveToScanPose";
    case FsmAction::RequestDetection: return "RequestDetection";
    case FsmAction::PlanApproach: return "PlanApproach";
    case FsmAction::HaltForOperator: return "HaltForOperator";
    case FsmAction::LateralAlignMotion: return "LateralAlignMotion";
    case FsmAction::ExtendActuator: return "ExtendActuator";
    case FsmAction::RetractActuator: return "RetractActuator";
    case FsmAction::ReleaseLogger: return "ReleaseLogger";
    case FsmAction::ReportFault: return "ReportFault";
  }
  return "?";
}

struct FsmStep {
  FsmState next = FsmState::Fault;
  FsmAction action = FsmAction::None;
  std::string diagnostic;  // non-empty only on faults
};

/// Deterministic transition function, total over (state, event). Undefined
/// pairs land in Fault with a diagnostic; a collision stop faults from any
/// state; Done and Fault are absorbing apart from collision stops.
inline FsmStep fsm_step(FsmState state, FsmEvent event) {
  using S = FsmState;
  using E = FsmEvent;
  using A = FsmAction;

  if (event == E::CollisionStop)
    return {S::Fault, A::ReportFault, "collision stop: arm halted on current limit"};
  if (state == S::Fault) return {S::Fault, A::None, "already faulted"};
  if (state == S::Done) return {S::Done, A::None, ""};

  switch (state) {
    case S::Stow:
      if (event == E::InsertCommand) return {S::Scan, A::MoveToScanPose, ""};
      break;
    case S::Scan:
      if (event == E::MotionDone) return {S::Detect, A::RequestDetection, ""};
      if (event == E::DetectOk) return {S::Approach, A::PlanApproach, ""};
      if (event == E::Reposition) return {S::AwaitOperator, A::HaltForOperator, ""};
      break;
    case S::Detect:
      if (event == E::DetectOk) return {S::Approach, A::PlanApproach, ""};
      if (event == E::Reposition) return {S::AwaitOperator, A::HaltForOperator, ""};
      break;
    case S::AwaitOperator:
      if (event == E::InsertCommand) return {S::Scan, A::MoveToScanPose, ""};
      break;
    case S::Approach:
      if (event == E::MotionDone) return {S::AlignFunnel, A::LateralAlignMotion, ""};
      break;
    case S::AlignFunnel:
      // Lateral motion finishing and funnel contact both advance to the
      // actuator stage; the motion is open loop either way.
      if (event == E::MotionDone || event == E::ContactMade)
        return {S::AlignVBlock, A::ExtendActuator, ""};
      break;
    case S::AlignVBlock:
      if (event == E::ContactMade) return {S::Insert, A::None, ""};
      if (event == E::ActuatorExtended) return {S::Retract, A::RetractActuator, ""};
      if (event == E::ActuatorFault)
        return {S::Fault, A::ReportFault, "actuator fault while extending"};
      break;
    case S::Insert:
      if (event == E::ActuatorExtended) return {S::Retract, A::RetractActuator, ""};
      if (event == E::ActuatorFault)
        return {S::Fault, A::ReportFault, "actuator fault while inserting"};
      break;
    case S::Retract:
      if (event == E::ActuatorRetracted) return {S::DeployLogger, A::ReleaseLogger, ""};
      if (event == E::ActuatorFault)
        return {S::Fault, A::ReportFault, "actuator fault while retracting"};
      break;
    case S::DeployLogger:
      if (event == E::LoggerReleased) return {S::Done, A::None, ""};
      break;
    default:
      break;
  }
  return {S::Fault, A::ReportFault,
          std::string("undefined transition: ") + to_string(state) + " + " +
              to_string(event)};
}

struct FsmTableRow {
  FsmState state;
  FsmEvent event;
  FsmState next;
  FsmAction action;
};

/// The full (state x event) table, enumerable for verification and export.
inline std::vector<FsmTableRow> fsm_transition_table() {
  std::vector<FsmTableRow> rows;
  rows.reserve(kFsmStateCount * kFsmEventCount);
  for (int s = 0; s < kFsmStateCount; ++s)
    for (int e = 0; e < kFsmEventCount; ++e) {
      const auto state = static_cast<FsmState>(s);
      const auto event = static_cast<FsmEvent>(e);
      const FsmStep step = fsm_step(state, event);
      rows.push_back({state, event, step.next, step.action});
    }
  return rows;
}

/// Datalogger deployment box: five units per sortie, one released per
/// deployment.
struct LoggerMagazine {
  int remaining = 5;
  bool release() {
    if (remaining <= 0) return false;
    --remaining;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Gripper contact model
// ---------------------------------------------------------------------------

struct SensorSpec {
  double probe_l = 0.012;
  double probe_w = 0.003;
  double probe_t = 0.002;
  double pad_depth = 0.006;    // depth at which both electrode pads immerse
  double retain_depth = 0.004; // min depth for the arrow-hook to hold

  void validate() const {
    if (probe_l <= 0.0 || probe_w <= 0.0 || probe_t <= 0.0)
      throw Error(Errc::Config, "sensor: dimensions must be positive");
    if (!(pad_depth <= probe_l) || !(retain_depth <= pad_depth) || retain_depth <= 0.0)
      throw Error(Errc::Config, "sensor: need 0 < retain_depth <= pad_depth <= probe_l");
  }
};

struct GripperSpec {
  double funnel_half_opening = 0.025;
  double stroke = 0.050;          // fixed hardware constant
  double actuator_force = 90.0;   // N
  double vblock_travel = 0.038;   // spring compression before full exposure
  double spring_rate = 2000.0;    // N/m
  SensorSpec sensor;
  double body_l = 0.254, body_w = 0.076, body_h = 0.076;
  double glance_max_angle = deg_to_rad(35.0);
  double centering_rho0 = 0.05;  // residual fraction for fully compliant stalks
  double centering_rho1 = 0.6;   // added residual per unit stiffness

  void validate() const {
    sensor.validate();
    if (std::abs(stroke - 0.050) > 1e-12)
      throw Error(Errc::Config, "gripper: stroke is a 50 mm hardware constant");
    if (funnel_half_opening <= 0.0 || actuator_force <= 0.0 || spring_rate <= 0.0 ||
        vblock_travel <= 0.0 || body_l <= 0.0 || body_w <= 0.0 || body_h <= 0.0)
      throw Error(Errc::Config, "gripper: dimensions and forces must be positive");
    if (vblock_travel >= stroke)
      throw Error(Errc::Config, "gripper: vblock travel must leave usable stroke");
    if (spring_rate * vblock_travel > actuator_force)
      throw Error(Errc::Config, "gripper: actuator cannot fully compress the spring");
    if (glance_max_angle <= 0.0 || glance_max_angle >= kPi / 2)
      throw Error(Errc::Config, "gripper: glance threshold out of range");
    if (centering_rho0 < 0.0 || centering_rho1 < 0.0)
      throw Error(Errc::Config, "gripper: centering factors must be >= 0");
  }

  double available_insertion_depth() const { return stroke - vblock_travel; }
};

struct GraspOutcome {
  bool captured = false;
  double lateral_offset = 0.0;  // signed e, perpendicular to the approach
};

/// Funnel capture: the gripper lands at target + approach_error; capture
/// succeeds when the true axis sits within the funnel half-opening of the
/// funnel centerline (lateral only, the wedge guides the stalk in).
inline GraspOutcome simulate_grasp(const InsertionTarget& target,
                                   const StalkTruth& stalk, const Vec3& approach_error,
                                   const GripperSpec& gripper) {
  const Vec3 gripper_center = target.point + approach_error;
  const Vec3 axis_pt = line_point_at_height(stalk.axis, target.point.z);
  const Vec3 a = target.approach_direction;
  const Vec3 lateral{-a.y, a.x, 0.0};
  const double e = (axis_pt - gripper_center).dot(lateral);
  return {std::abs(e) <= gripper.funnel_half_opening, e};
}

/// V-block centering: the residual offset is the capture offset scaled by a
/// stiffness-dependent retention factor; compliant stalks center almost
/// fully, rigid stalks resist. Never worsens alignment.
inline double simulate_vblock_alignment(double e, const StalkTruth& stalk,
                                        const GripperSpec& gripper) {
  const double rho = std::clamp(
      gripper.centering_rho0 + gripper.centering_rho1 * stalk.stiffness, 0.0, 0.9);
  return e * rho;
}

/// Maps the horizontal approach direction onto the nearer ellipse axis: the
/// binary insert-along-major / insert-along-minor distinction the contact
/// model works with.
inline InsertAxis approach_axis(const EllipseSection& section, double approach_azimuth) {
  double diff = std::fmod(std::abs(approach_azimuth - section.orientation), kPi);
  if (diff > kPi / 2) diff = kPi - diff;
  const bool along_a = diff < kPi / 4;
  const double along = along_a ? section.a : section.b;
  return along >= std::max(section.a, section.b) ? InsertAxis::Major : InsertAxis::Minor;
}

struct InsertionOutcome {
  double penetration = 0.0;
  bool glanced = false;
  bool retained = false;      // sensor stays in on retract
  bool pads_covered = false;
  bool through_pith = false;
  double residual_offset = 0.0;
  InsertAxis axis = InsertAxis::Major;
};

/// Sensor penetration at residual offset `delta`: the insertion glances off
/// when the entry angle exceeds the glance threshold (or the offset misses
/// the section entirely); otherwise penetration is limited by the chord
/// through the ellipse and the stroke left after spring compression.
inline InsertionOutcome simulate_insertion(double delta, const StalkTruth& stalk,
                                           const GripperSpec& gripper,
                                           double approach_azimuth, double z_target) {
  InsertionOutcome out;
  out.residual_offset = delta;
  out.axis = approach_axis(stalk.section, approach_azimuth);
  out.through_pith = z_target <= stalk.pith_top_z;

  const double perp = perpendicular_semi_axis(stalk.section, out.axis);
  if (std::abs(delta) >= perp) {
    out.glanced = true;
    return out;
  }
  if (entry_glance_angle(stalk.section, delta, out.axis) > gripper.glance_max_angle) {
    out.glanced = true;
    return out;
  }
  out.penetration = std::min(ellipse_chord(stalk.section, delta, out.axis),
                             gripper.available_insertion_depth());
  out.pads_covered = out.penetration >= gripper.sensor.pad_depth;
  out.retained = out.penetration >= gripper.sensor.retain_depth;
  return out;
}

// ---------------------------------------------------------------------------
// Trial grading
// ---------------------------------------------------------------------------

enum class TrialStage { Detect, Grasp, Insert, Pads, Pith };

inline const char* to_string(TrialStage s) {
  switch (s) {
    case TrialStage::Detect: return "detect";
    case TrialStage::Grasp: return "grasp";
    case TrialStage::Insert: return "insert";
    case TrialStage::Pads: return "pads_covered";
    case TrialStage::Pith: return "through_pith";
  }
  return "?";
}

/// Graded outcome of one insertion attempt: five criteria of increasing
/// strictness, kept monotone (a later criterion can only hold if all
/// earlier ones do).
struct TrialReport {
  bool detected = false;
  bool grasped = false;
  bool inserted = false;
  bool pads_covered = false;
  bool through_pith = false;
  std::optional<TrialStage> failure_stage;
  double final_offset = std::numeric_limits<double>::quiet_NaN();
  double penetration = 0.0;
};

/// Everything a finished (or faulted) trial hands to the grader.
struct TrialEvidence {
  bool target_returned = false;
  double detect_error = std::numeric_limits<double>::quiet_NaN();
  bool faulted = false;  // collision stop / actuator fault before insertion
  std::optional<GraspOutcome> grasp;
  std::optional<InsertionOutcome> insertion;
};

inline TrialReport grade_trial(const TrialEvidence& ev, double match_radius) {
  TrialReport r;
  r.detected = ev.target_returned && std::isfinite(ev.detect_error) &&
               ev.detect_error <= match_radius;
  r.grasped = r.detected && !ev.faulted && ev.grasp && ev.grasp->captured;
  r.inserted = r.grasped && ev.insertion && ev.insertion->retained;
  r.pads_covered = r.inserted && ev.insertion->pads_covered;
  r.through_pith = r.pads_covered && ev.insertion->through_pith;

  if (!r.detected) r.failure_stage = TrialStage::Detect;
  else if (!r.grasped) r.failure_stage = TrialStage::Grasp;
  else if (!r.inserted) r.failure_stage = TrialStage::Insert;
  else if (!r.pads_covered) r.failure_stage = TrialStage::Pads;
  else if (!r.through_pith) r.failure_stage = TrialStage::Pith;

  if (ev.insertion) {
    r.final_offset = ev.insertion->residual_offset;
    r.penetration = ev.insertion->penetration;
  } else if (ev.grasp) {
    r.final_offset = ev.grasp->lateral_offset;
  }
  return r;
}

}  // namespace cornpoint
