#pragma once

// Candidate selection: reject stalks the arm cannot reach or that sit too
// close to a neighbor for the gripper, score the rest with the heuristic
// weighting function, and fuse the per-frame winners into one consensus
// insertion target (or a reposition signal).

#include <algorithm>
#include <cmath>
#include <optional>
#include <variant>
#include <vector>

#include "cornpoint/detect.hpp"
#include "cornpoint/geometry.hpp"

namespace cornpoint {

struct WorkspaceBox {
  double x_min = 0.25, x_max = 0.75;
  double y_min = -0.55, y_max = 0.55;
  double z_min = 0.02, z_max = 0.15;

  void validate() const {
    if (x_min >= x_max || y_min >= y_max || z_min >= z_max)
      throw Error(Errc::Config, "workspace: min must be < max on every axis");
  }
  bool contains(const Vec3& p) const {  // closed bounds
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max &&
           p.z >= z_min && p.z <= z_max;
  }
};

struct SelectionConfig {
  double gripper_clearance = 0.080;  // m, >= the 76 mm gripper width
  int n_frames = 5;
  double cluster_radius = 0.020;  // m, single-linkage threshold
  double z_target = 0.05;

  void validate() const {
    if (gripper_clearance < 0.076)
      throw Error(Errc::Config, "selection: clearance below gripper width");
    if (n_frames < 1) throw Error(Errc::Config, "selection: n_frames must be >= 1");
    if (cluster_radius <= 0.0)
      throw Error(Errc::Config, "selection: cluster_radius must be positive");
  }
};

struct InsertionTarget {
  Vec3 point;
  Vec3 approach_direction;  // horizontal unit vector
  int source_cluster_size = 0;
};

enum class RepositionReason { NoDetections, AllFiltered, NoCluster };

struct RepositionSignal {
  RepositionReason reason = RepositionReason::NoDetections;
};

inline const char* to_string(RepositionReason r) {
  switch (r) {
    case RepositionReason::NoDetections: return "NoDetections";
    case RepositionReason::AllFiltered: return "AllFiltered";
    case RepositionReason::NoCluster: return "NoCluster";
  }
  return "?";
}

/// Keeps exactly the candidates whose insertion point lies inside the box.
inline std::vector<StalkCandidate> filter_workspace(std::vector<StalkCandidate> cands,
                                                    const WorkspaceBox& box) {
  std::erase_if(cands, [&](const StalkCandidate& c) {
    return !box.contains(c.insertion_point);
  });
  return cands;
}

/// Removes every candidate that has another candidate within `clearance`
/// horizontal distance. Symmetric: the gripper cannot straddle either
/// member of a too-close pair, so both go.
inline std::vector<StalkCandidate> filter_spacing(std::vector<StalkCandidate> cands,
                                                  double clearance) {
  const std::size_t n = cands.size();
  std::vector<bool> blocked(n, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (horizontal_distance(cands[i].insertion_point, cands[j].insertion_point) <=
          clearance)
        blocked[i] = blocked[j] = true;
  std::vector<StalkCandidate> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!blocked[i]) kept.push_back(cands[i]);
  return kept;
}

/// Heuristic stalk score: c^2 * w * cbrt(h) * (1 - d). Prefers confident,
/// wide, centered stalks; height enters weakly.
inline double score(const MaskFeatures& f) {
  return f.c * f.c * f.w * std::cbrt(f.h) * (1.0 - f.d);
}

/// Deterministic tie-breaking: higher score, then smaller d, then lower
/// instance id.
inline bool candidate_ranks_higher(const StalkCandidate& a, const StalkCandidate& b) {
  const double sa = score(a.features), sb = score(b.features);
  if (sa != sb) return sa > sb;
  if (a.features.d != b.features.d) return a.features.d < b.features.d;
  return a.instance_id < b.instance_id;
}

inline std::optional<StalkCandidate> select_frame_best(
    const std::vector<StalkCandidate>& cands) {
  if (cands.empty()) return std::nullopt;
  const StalkCandidate* best = &cands.front();
  for (const auto& c : cands)
    if (candidate_ranks_higher(c, *best)) best = &c;
  return *best;
}

/// One frame's contribution to the consensus: how many raw candidates the
/// frame produced (pre-filter) and, if any survived, its best.
struct FrameResult {
  int raw_count = 0;
  std::optional<StalkCandidate> best;
};

/// Fuses the per-frame winners: single-linkage clustering of the insertion
/// points at cluster_radius, largest cluster wins (ties go to the cluster
/// holding the highest-ranked member), and the winner's highest-ranked
/// member becomes the target. Repositions when no frame yielded anything
/// (NoDetections / AllFiltered) or when n_frames >= 3 and the best cluster
/// is a singleton (NoCluster).
inline std::variant<InsertionTarget, RepositionSignal> consensus(
    const std::vector<FrameResult>& frames, const SelectionConfig& cfg,
    const Vec3& camera_position) {
  std::vector<const StalkCandidate*> bests;
  int raw_total = 0;
  for (const auto& f : frames) {
    raw_total += f.raw_count;
    if (f.best) bests.push_back(&*f.best);
  }
  if (bests.empty())
    return RepositionSignal{raw_total == 0 ? RepositionReason::NoDetections
                                           : RepositionReason::AllFiltered};

  // Single-linkage clustering via union-find on pairwise distance.
  const std::size_t n = bests.size();
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if ((bests[i]->insertion_point - bests[j]->insertion_point).norm() <=
          cfg.cluster_radius)
        parent[find(i)] = find(j);

  std::vector<int> cluster_size(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++cluster_size[find(i)];

  auto cluster_leader = [&](std::size_t root) {  // highest-ranked member
    const StalkCandidate* lead = nullptr;
    for (std::size_t i = 0; i < n; ++i)
      if (find(i) == root && (!lead || candidate_ranks_higher(*bests[i], *lead)))
        lead = bests[i];
    return lead;
  };

  std::size_t best_root = n;
  const StalkCandidate* best_lead = nullptr;
  for (std::size_t r = 0; r < n; ++r) {
    if (cluster_size[r] == 0) continue;
    if (best_root == n || cluster_size[r] > cluster_size[best_root]) {
      best_root = r;
      best_lead = cluster_leader(r);
    } else if (cluster_size[r] == cluster_size[best_root]) {
      const StalkCandidate* lead = cluster_leader(r);
      if (candidate_ranks_higher(*lead, *best_lead)) {
        best_root = r;
        best_lead = lead;
      }
    }
  }

  if (cluster_size[best_root] < 2 && cfg.n_frames >= 3)
    return RepositionSignal{RepositionReason::NoCluster};

  InsertionTarget target;
  target.point = best_lead->insertion_point;
  target.source_cluster_size = cluster_size[best_root];
  Vec3 toward = target.point - camera_position;
  toward.z = 0.0;
  target.approach_direction =
      toward.norm() > 1e-12 ? toward.normalized() : Vec3{1, 0, 0};
  return target;
}

}  // namespace cornpoint
