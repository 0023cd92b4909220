#pragma once

// Renders a SceneTruth into one FrameObservation: per-pixel instance masks
// and a depth map, by analytic ray intersection against elliptical stalk
// cylinders, leaf quads and the terrain height field (no mesh engine).
//
// Depth semantics: a stalk pixel stores the camera-z of the stalk AXIS at
// the height where the ray meets the stalk, the way an idealized stereo
// pipeline localizes a thin cylinder. This makes "row centroid + depth"
// backproject onto the true axis, which is the module's correctness oracle.
// Leaf and ground pixels store the actual surface depth.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cornpoint/geometry.hpp"
#include "cornpoint/rng.hpp"
#include "cornpoint/scene.hpp"

namespace cornpoint {

/// Sensor/segmentation noise. Default-constructed = noiseless, perfect
/// confidence. depth sigma and bias grow quadratically with range, the
/// stereo error law: sigma(z) = depth_sigma0 * z^2.
struct NoiseConfig {
  double depth_sigma0 = 0.0;       // m per m^2, iid per pixel
  double depth_bias_sigma0 = 0.0;  // m per m^2, one draw per instance per frame
  double depth_dropout = 0.0;      // fraction of valid pixels zeroed
  double mask_boundary_jitter = 0.0;  // px, per-row edge jitter
  double occlusion_fraction = 0.0;    // share of each stalk hidden by leaves
  double confidence_min = 1.0;
  double confidence_max = 1.0;
  double false_negative_rate = 0.0;   // whole-instance drop probability

  void validate() const {
    auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (depth_sigma0 < 0.0 || depth_bias_sigma0 < 0.0 || mask_boundary_jitter < 0.0)
      throw Error(Errc::Config, "noise: negative magnitude");
    if (!frac(depth_dropout) || !frac(occlusion_fraction) || !frac(false_negative_rate))
      throw Error(Errc::Config, "noise: fraction outside [0, 1]");
    if (!frac(confidence_min) || !frac(confidence_max) ||
        confidence_min > confidence_max)
      throw Error(Errc::Config, "noise: bad confidence range");
  }
};

/// One RGB-D view reduced to what the detection pipeline consumes.
/// truth_ids maps instance label k to scene.stalks index (simulation
/// metadata for grading; -1 / absent on ingested real recordings).
struct FrameObservation {
  std::vector<std::uint8_t> masks;  // row-major, 0 = background
  std::vector<double> depth;        // row-major camera-z meters, 0 = invalid
  CameraIntrinsics intrinsics;
  Pose3 cam_pose;  // camera in robot frame
  std::vector<double> confidences;  // per instance, index 0 = label 1
  std::vector<int> truth_ids;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  std::uint8_t mask_at(int u, int v) const {
    return masks[static_cast<std::size_t>(v) * intrinsics.width + u];
  }
  double depth_at(int u, int v) const {
    return depth[static_cast<std::size_t>(v) * intrinsics.width + u];
  }
  int instance_count() const { return static_cast<int>(confidences.size()); }
};

struct RenderParams {
  bool render_ground = true;
  double max_range = 4.0;  // meters of camera-z beyond which nothing returns
};

namespace detail {

struct StalkGeom {
  Vec3 base;     // axis point at base_z
  Vec3 u, v, w;  // section basis + axis direction
  double a = 0.0, b = 0.0;
  double s_lo = 0.0;    // axis parameter range [s_lo, length]
  double length = 0.0;  // axis parameter from base to top

  // `underground` extends the cylinder below its base so the silhouette
  // terminates at the ground contact line instead of showing a floating
  // base cap; the terrain hides the extension.
  static StalkGeom from(const StalkTruth& s, double underground = 0.0) {
    StalkGeom g;
    g.base = s.axis.point;
    g.w = s.axis.direction;
    section_basis(s, g.u, g.v);
    g.a = s.section.a;
    g.b = s.section.b;
    g.s_lo = -underground / s.axis.direction.z;
    g.length = (s.top_z - s.base_z) / s.axis.direction.z;
    return g;
  }
};

/// Ray/elliptical-cylinder intersection. Ray is origin + t * dir with dir
/// not normalized (t measures camera-z when dir has unit camera-z). Returns
/// the near hit t and the axis parameter s of the hit, or nothing.
struct CylinderHit {
  double t = 0.0;
  double s = 0.0;
};

inline std::optional<CylinderHit> intersect_stalk(const StalkGeom& g, const Vec3& origin,
                                                  const Vec3& dir) {
  const Vec3 rel = origin - g.base;
  const double ox = rel.dot(g.u) / g.a, oy = rel.dot(g.v) / g.b;
  const double dx = dir.dot(g.u) / g.a, dy = dir.dot(g.v) / g.b;
  const double qa = dx * dx + dy * dy;
  if (qa < 1e-18) return std::nullopt;  // ray parallel to the axis
  const double qb = 2.0 * (ox * dx + oy * dy);
  const double qc = ox * ox + oy * oy - 1.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t = (-qb - sq) / (2.0 * qa);
  if (t <= 1e-9) return std::nullopt;
  const double s = rel.dot(g.w) + t * dir.dot(g.w);
  if (s < g.s_lo || s > g.length) return std::nullopt;
  return CylinderHit{t, s};
}

/// Ray/vertical-planar-quad intersection (leaves). Returns t or nothing.
inline std::optional<double> intersect_quad(const LeafQuad& q, const Vec3& origin,
                                            const Vec3& dir) {
  const Vec3 e1 = q.corners[1] - q.corners[0];
  const Vec3 e2 = q.corners[3] - q.corners[0];
  const Vec3 n = e1.cross(e2);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = n.dot(q.corners[0] - origin) / denom;
  if (t <= 1e-9) return std::nullopt;
  const Vec3 p = origin + dir * t - q.corners[0];
  const double uu = e1.dot(e1), vv = e2.dot(e2);
  const double pu = p.dot(e1) / uu, pv = p.dot(e2) / vv;
  if (pu < 0.0 || pu > 1.0 || pv < 0.0 || pv > 1.0) return std::nullopt;
  return t;
}

/// First terrain crossing along the ray within t <= t_cap. The camera sits
/// above the terrain and the field is gentle, so inside the height band
/// f(t) = ray_z(t) - h(t) starts positive and ends at or below zero at the
/// band exit; bisection finds the crossing.
inline std::optional<double> intersect_terrain(const Terrain& terrain, double amplitude,
                                               const Vec3& origin, const Vec3& dir,
                                               double t_cap) {
  const double dz = dir.z;
  if (dz >= -1e-9) return std::nullopt;
  const double band = amplitude + 1e-6;
  double t0 = (band - origin.z) / dz;
  double t1 = (-band - origin.z) / dz;
  t0 = std::max(t0, 1e-6);
  t1 = std::min(t1, t_cap);
  if (t0 >= t1) return std::nullopt;

  auto above = [&](double t) {
    const Vec3 p = origin + dir * t;
    return p.z - terrain.height(p.x, p.y);
  };
  if (above(t0) <= 0.0) return t0;
  if (above(t1) > 0.0) return std::nullopt;  // crossing lies beyond the cap
  double lo = t0, hi = t1;
  for (int k = 0; k < 20; ++k) {
    const double mid = 0.5 * (lo + hi);
    (above(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Conservative pixel-space bounding box of a world-space point set with a
/// metric radius pad; falls back to the full image when any point comes too
/// close to the camera plane.
struct PixelBox {
  int u_lo = 0, u_hi = -1, v_lo = 0, v_hi = -1;
  bool empty() const { return u_hi < u_lo || v_hi < v_lo; }
};

template <std::size_t N>
PixelBox project_bounds(const std::array<Vec3, N>& points, double radius,
                        const Pose3& cam_pose, const CameraIntrinsics& k) {
  double u_min = 1e30, u_max = -1e30, v_min = 1e30, v_max = -1e30;
  double z_min = 1e30;
  bool any_in_front = false;
  for (const auto& p : points) {
    const Vec3 c = cam_pose.inverse_apply(p);
    if (c.z < 0.05) continue;  // behind or grazing: handled by the fallback
    any_in_front = true;
    z_min = std::min(z_min, c.z);
    u_min = std::min(u_min, k.fx * c.x / c.z + k.cx);
    u_max = std::max(u_max, k.fx * c.x / c.z + k.cx);
    v_min = std::min(v_min, k.fy * c.y / c.z + k.cy);
    v_max = std::max(v_max, k.fy * c.y / c.z + k.cy);
  }
  PixelBox box;
  if (!any_in_front) return box;  // empty: fully behind the camera
  bool all_in_front = true;
  for (const auto& p : points) all_in_front &= cam_pose.inverse_apply(p).z >= 0.05;
  if (!all_in_front) {  // straddles the camera plane: no tight bound
    box.u_lo = 0;
    box.u_hi = k.width - 1;
    box.v_lo = 0;
    box.v_hi = k.height - 1;
    return box;
  }
  const double pad_u = k.fx * radius / z_min + 2.0;
  const double pad_v = k.fy * radius / z_min + 2.0;
  box.u_lo = std::max(0, static_cast<int>(std::floor(u_min - pad_u)));
  box.u_hi = std::min(k.width - 1, static_cast<int>(std::ceil(u_max + pad_u)));
  box.v_lo = std::max(0, static_cast<int>(std::floor(v_min - pad_v)));
  box.v_hi = std::min(k.height - 1, static_cast<int>(std::ceil(v_max + pad_v)));
  return box;
}

/// Leaves that participate in a render at the given occlusion fraction:
/// per stalk, strips are consumed in stored order until their cumulative
/// cover reaches the fraction.
inline std::vector<const LeafQuad*> active_leaves(const SceneTruth& scene,
                                                  double occlusion_fraction) {
  std::vector<const LeafQuad*> active;
  if (occlusion_fraction <= 0.0) return active;
  std::vector<double> covered(scene.stalks.size(), 0.0);
  for (const auto& leaf : scene.leaves) {
    if (leaf.stalk_index < 0 || leaf.stalk_index >= static_cast<int>(covered.size()))
      continue;
    double& c = covered[leaf.stalk_index];
    if (c + 1e-12 < occlusion_fraction) {
      active.push_back(&leaf);
      c += leaf.cover_fraction;
    }
  }
  return active;
}

}  // namespace detail

inline FrameObservation render_frame(const SceneTruth& scene, const Pose3& cam_pose,
                                     const CameraIntrinsics& intrinsics,
                                     const NoiseConfig& noise, std::uint64_t seed,
                                     const RenderParams& params = {}) {
  intrinsics.validate();
  noise.validate();
  if (!cam_pose.is_valid(1e-6))
    throw Error(Errc::Config, "render: camera pose is not a rigid transform");
  const Vec3 cam_center = cam_pose.translation;
  if (cam_center.z <= scene.terrain.height(cam_center.x, cam_center.y))
    throw Error(Errc::Config, "render: camera below terrain");
  if (scene.stalks.size() > 254)
    throw Error(Errc::Config, "render: more stalk instances than mask labels");

  const int w = intrinsics.width, h = intrinsics.height;
  const std::size_t n_px = static_cast<std::size_t>(w) * h;

  FrameObservation obs;
  obs.intrinsics = intrinsics;
  obs.cam_pose = cam_pose;
  obs.masks.assign(n_px, 0);
  obs.depth.assign(n_px, 0.0);

  std::vector<detail::StalkGeom> geoms;
  geoms.reserve(scene.stalks.size());
  const double underground = params.render_ground ? 0.25 : 0.0;
  for (const auto& s : scene.stalks)
    geoms.push_back(detail::StalkGeom::from(s, underground));
  const auto leaves = detail::active_leaves(scene, noise.occlusion_fraction);

  double terrain_amp = 0.0;
  for (const auto& c : scene.terrain.components) terrain_amp += std::abs(c.amplitude);

  const Vec3 cam_z_axis = cam_pose.rotation.col(2);
  auto pixel_ray = [&](int u, int v) {
    const Vec3 dir_cam{(u - intrinsics.cx) / intrinsics.fx,
                       (v - intrinsics.cy) / intrinsics.fy, 1.0};
    return cam_pose.rotation * dir_cam;  // t along this ray equals camera-z
  };

  // Object-major z-buffer passes over per-object screen bounds.
  std::vector<double> zbuf(n_px, params.max_range);
  std::vector<double> sbuf(n_px, 0.0);
  // geom_owner: which stalk's surface a pixel's ray hit (-1 none, -2 leaf,
  // -3 ground), independent of the final jittered mask; stalk ownership
  // drives the per-instance depth bias.
  std::vector<std::int16_t> geom_owner(n_px, -1);

  for (std::size_t i = 0; i < geoms.size(); ++i) {
    const detail::StalkGeom& g = geoms[i];
    const detail::PixelBox box = detail::project_bounds(
        std::array<Vec3, 2>{g.base + g.w * g.s_lo, g.base + g.w * g.length},
        std::max(g.a, g.b), cam_pose, intrinsics);
    for (int v = box.v_lo; v <= box.v_hi; ++v) {
      for (int u = box.u_lo; u <= box.u_hi; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        const auto hit = detail::intersect_stalk(g, cam_center, pixel_ray(u, v));
        if (hit && hit->t < zbuf[idx]) {
          zbuf[idx] = hit->t;
          sbuf[idx] = hit->s;
          geom_owner[idx] = static_cast<std::int16_t>(i);
        }
      }
    }
  }
  for (const LeafQuad* leaf : leaves) {
    const detail::PixelBox box =
        detail::project_bounds(leaf->corners, 0.0, cam_pose, intrinsics);
    for (int v = box.v_lo; v <= box.v_hi; ++v) {
      for (int u = box.u_lo; u <= box.u_hi; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        const auto t = detail::intersect_quad(*leaf, cam_center, pixel_ray(u, v));
        if (t && *t < zbuf[idx]) {
          zbuf[idx] = *t;
          geom_owner[idx] = -2;
        }
      }
    }
  }
  if (params.render_ground) {
    // The ground hit distance varies smoothly across the image, so it is
    // sampled on a coarse grid and interpolated; pixels whose cell straddles
    // the terrain horizon fall back to the exact intersection. Ground depth
    // only fills the background, the pipeline never fits against it.
    constexpr int kGrid = 8;
    const double kMiss = std::numeric_limits<double>::infinity();
    const int nu = (w - 1) / kGrid + 2, nv = (h - 1) / kGrid + 2;
    auto sample_u = [&](int tu) { return std::min(tu * kGrid, w - 1); };
    auto sample_v = [&](int tv) { return std::min(tv * kGrid, h - 1); };
    std::vector<double> grid(static_cast<std::size_t>(nu) * nv, kMiss);
    for (int tv = 0; tv < nv; ++tv)
      for (int tu = 0; tu < nu; ++tu) {
        const auto t = detail::intersect_terrain(
            scene.terrain, terrain_amp, cam_center,
            pixel_ray(sample_u(tu), sample_v(tv)), params.max_range);
        if (t) grid[static_cast<std::size_t>(tv) * nu + tu] = *t;
      }
    for (int v = 0; v < h; ++v) {
      const int tv = v / kGrid;
      const int v0 = sample_v(tv), v1 = sample_v(tv + 1);
      const double fv = v1 > v0 ? static_cast<double>(v - v0) / (v1 - v0) : 0.0;
      for (int u = 0; u < w; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        const int tu = u / kGrid;
        const double g00 = grid[static_cast<std::size_t>(tv) * nu + tu];
        const double g01 = grid[static_cast<std::size_t>(tv) * nu + tu + 1];
        const double g10 = grid[static_cast<std::size_t>(tv + 1) * nu + tu];
        const double g11 = grid[static_cast<std::size_t>(tv + 1) * nu + tu + 1];
        double t_ground;
        if (std::isfinite(g00) && std::isfinite(g01) && std::isfinite(g10) &&
            std::isfinite(g11)) {
          const int u0 = sample_u(tu), u1 = sample_u(tu + 1);
          const double fu = u1 > u0 ? static_cast<double>(u - u0) / (u1 - u0) : 0.0;
          t_ground = (1 - fv) * ((1 - fu) * g00 + fu * g01) +
                     fv * ((1 - fu) * g10 + fu * g11);
        } else {
          const auto t = detail::intersect_terrain(scene.terrain, terrain_amp,
                                                   cam_center, pixel_ray(u, v),
                                                   params.max_range);
          t_ground = t ? *t : kMiss;
        }
        if (t_ground < zbuf[idx]) {
          zbuf[idx] = t_ground;
          geom_owner[idx] = -3;
        }
      }
    }
  }

  std::vector<std::size_t> pixel_count(scene.stalks.size(), 0);
  for (std::size_t idx = 0; idx < n_px; ++idx) {
    const int owner = geom_owner[idx];
    if (owner >= 0) {
      const detail::StalkGeom& g = geoms[owner];
      const Vec3 axis_point = g.base + g.w * sbuf[idx];
      obs.depth[idx] = (axis_point - cam_center).dot(cam_z_axis);
      obs.masks[idx] = static_cast<std::uint8_t>(owner + 1);
      ++pixel_count[owner];
    } else if (owner != -1) {
      obs.depth[idx] = zbuf[idx];  // leaf or ground surface depth
    }
  }

  std::size_t total_stalk_px = 0;
  for (auto c : pixel_count) total_stalk_px += c;
  if (total_stalk_px == 0)
    throw Error(Errc::EmptyFrustum, "render: no stalk visible in the frustum");

  // Segmentation boundary jitter: each instance row's left/right edges move
  // independently by up to +-jitter pixels (erode or dilate).
  if (noise.mask_boundary_jitter > 0.0) {
    Rng jitter_rng(derive_seed(seed, 11));
    const double J = noise.mask_boundary_jitter;
    std::vector<std::uint8_t> jittered = obs.masks;
    for (std::size_t inst = 0; inst < scene.stalks.size(); ++inst) {
      const std::uint8_t label = static_cast<std::uint8_t>(inst + 1);
      for (int v = 0; v < h; ++v) {
        int lo = -1, hi = -1;
        for (int u = 0; u < w; ++u) {
          if (obs.masks[static_cast<std::size_t>(v) * w + u] == label) {
            if (lo < 0) lo = u;
            hi = u;
          }
        }
        if (lo < 0) continue;
        const int jl = static_cast<int>(std::lround(jitter_rng.uniform(-J, J)));
        const int jr = static_cast<int>(std::lround(jitter_rng.uniform(-J, J)));
        const int new_lo = std::max(0, lo - jl);
        const int new_hi = std::min(w - 1, hi + jr);
        for (int u = lo; u <= hi; ++u)
          if (jittered[static_cast<std::size_t>(v) * w + u] == label)
            jittered[static_cast<std::size_t>(v) * w + u] = 0;
        for (int u = new_lo; u <= new_hi; ++u)
          jittered[static_cast<std::size_t>(v) * w + u] = label;
      }
    }
    obs.masks.swap(jittered);
  }

  // Whole-instance false negatives, then relabel contiguous from 1.
  Rng fn_rng(derive_seed(seed, 12));
  std::vector<bool> keep(scene.stalks.size());
  for (std::size_t i = 0; i < scene.stalks.size(); ++i)
    keep[i] = !fn_rng.bernoulli(noise.false_negative_rate);

  std::vector<std::size_t> final_count(scene.stalks.size(), 0);
  for (std::size_t idx = 0; idx < n_px; ++idx)
    if (obs.masks[idx] > 0) ++final_count[obs.masks[idx] - 1];

  std::vector<std::uint8_t> relabel(scene.stalks.size() + 1, 0);
  Rng conf_rng(derive_seed(seed, 13));
  for (std::size_t i = 0; i < scene.stalks.size(); ++i) {
    // Confidence stream advances for every rendered instance so that the
    // false-negative decision does not shift other instances' draws.
    const double c = conf_rng.uniform(noise.confidence_min, noise.confidence_max);
    if (keep[i] && final_count[i] > 0) {
      relabel[i + 1] = static_cast<std::uint8_t>(obs.confidences.size() + 1);
      obs.confidences.push_back(c);
      obs.truth_ids.push_back(static_cast<int>(i));
    }
  }
  for (auto& m : obs.masks) m = relabel[m];

  // Depth degradation: per-instance correlated bias (stereo systematic
  // error), iid pixel noise, then dropout.
  if (noise.depth_bias_sigma0 > 0.0) {
    Rng bias_rng(derive_seed(seed, 14));
    std::vector<double> bias_unit(scene.stalks.size());
    for (auto& b : bias_unit) b = bias_rng.normal();
    for (std::size_t idx = 0; idx < n_px; ++idx) {
      const int owner = geom_owner[idx];
      if (owner >= 0 && obs.depth[idx] > 0.0) {
        const double z = obs.depth[idx];
        obs.depth[idx] += bias_unit[owner] * noise.depth_bias_sigma0 * z * z;
      }
    }
  }
  if (noise.depth_sigma0 > 0.0) {
    Rng noise_rng(derive_seed(seed, 15));
    for (std::size_t idx = 0; idx < n_px; ++idx) {
      if (obs.depth[idx] > 0.0) {
        const double z = obs.depth[idx];
        obs.depth[idx] += noise_rng.normal() * noise.depth_sigma0 * z * z;
        if (obs.depth[idx] <= 0.0) obs.depth[idx] = 0.0;
      }
    }
  }
  if (noise.depth_dropout > 0.0) {
    Rng drop_rng(derive_seed(seed, 16));
    for (std::size_t idx = 0; idx < n_px; ++idx)
      if (obs.depth[idx] > 0.0 && drop_rng.bernoulli(noise.depth_dropout))
        obs.depth[idx] = 0.0;
  }
  return obs;
}

/// Scan pose used by the harness: camera at `position` looking along +x
/// (robot forward), image x right (-y world), image y down (-z world).
inline Pose3 make_scan_pose(const Vec3& position) {
  // Columns are the camera axes expressed in the robot frame.
  return {Mat3::from_columns({0, -1, 0}, {0, 0, -1}, {1, 0, 0}), position};
}

}  // namespace cornpoint
