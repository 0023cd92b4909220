#pragma once

// Procedural ground-truth cornfield scenes: stalks with elliptical cross
// sections placed along a row, leaf occluder strips, and a smooth uneven
// terrain height field. The generated SceneTruth is the grading oracle for
// the whole pipeline.

#include <cstdint>
#include <vector>

#include "cornpoint/geometry.hpp"
#include "cornpoint/rng.hpp"

namespace cornpoint {

struct TerrainComponent {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

/// Smooth random height field: a sum of low-frequency sinusoids, so |h| is
/// bounded by the sum of amplitudes and the surface stays gentle.
struct Terrain {
  std::vector<TerrainComponent> components;

  double height(double x, double y) const {
    double h = 0.0;
    for (const auto& c : components)
      h += c.amplitude * std::sin(c.kx * x + c.ky * y + c.phase);
    return h;
  }
};

struct StalkTruth {
  Line3 axis;              // oriented upward; axis.point at base height
  EllipseSection section;  // cross-section perpendicular to the axis
  double base_z = 0.0;     // local ground height at the stalk
  double top_z = 0.0;      // top of the rendered stalk
  double pith_top_z = 0.0; // top of the pith region
  double stiffness = 0.0;  // 0 = young/compliant, 1 = rigid/mature
};

/// One leaf occluder strip. The quad is planar and vertical, positioned on
/// the scan side of its stalk so it hides a band of the stalk from the
/// camera. cover_fraction is the share of the stalk's height it spans;
/// rendering consumes strips in order until the requested occlusion
/// fraction is reached.
struct LeafQuad {
  std::array<Vec3, 4> corners{};
  int stalk_index = -1;
  double cover_fraction = 0.0;
};

struct SceneTruth {
  std::vector<StalkTruth> stalks;
  std::vector<LeafQuad> leaves;
  Terrain terrain;
  double row_spacing = 0.75;
  std::uint64_t rng_seed = 0;
};

struct SceneConfig {
  int min_stalks = 4;
  int max_stalks = 7;

  // Row placement, robot frame (camera scans from x = 0 toward +x).
  double row_x = 0.45;
  double row_x_jitter = 0.03;
  double row_y_min = -0.45;
  double row_y_max = 0.45;
  double row_spacing = 0.75;
  double min_stalk_gap = 0.05;
  double max_stalk_gap = 0.40;

  // Cross-section: major-axis diameter and minor/major aspect ratio.
  double min_diameter = 0.012;
  double max_diameter = 0.040;
  double min_aspect = 0.5;
  double max_aspect = 1.0;

  double max_tilt_deg = 8.0;   // axis tilt from vertical
  double min_height = 0.30;    // stalk top above base
  double max_height = 0.60;
  double min_pith_height = 0.02;
  double max_pith_height = 0.10;
  double min_stiffness = 0.0;
  double max_stiffness = 1.0;

  double terrain_amplitude = 0.02;   // |h| bound, <= 0.08
  double terrain_wavelength = 1.5;   // shortest sinusoid wavelength
  int terrain_components = 4;

  // Leaf occluder strips: the stalk height is split into this many bands,
  // each of which may carry one strip in front of the stalk.
  int leaf_bands = 8;
  double leaf_margin = 0.005;        // strips overhang their band by this
  double leaf_offset_min = 0.03;     // strip standoff in front of the stalk
  double leaf_offset_max = 0.06;
  double leaf_width_min = 0.10;
  double leaf_width_max = 0.20;

  void validate() const {
    auto range_ok = [](double lo, double hi) { return lo <= hi; };
    if (min_stalks < 0 || min_stalks > max_stalks)
      throw Error(Errc::Config, "scene: inverted stalk count range");
    if (!range_ok(min_stalk_gap, max_stalk_gap) || min_stalk_gap < 0.05 ||
        max_stalk_gap > 0.40)
      throw Error(Errc::Config, "scene: stalk gap range outside [0.05, 0.40]");
    if (!range_ok(min_diameter, max_diameter) || min_diameter <= 0.0)
      throw Error(Errc::Config, "scene: inverted diameter range");
    if (!range_ok(min_aspect, max_aspect) || min_aspect <= 0.0 || max_aspect > 1.0)
      throw Error(Errc::Config, "scene: aspect ratio range must be in (0, 1]");
    if (min_diameter * min_aspect < 0.006)
      throw Error(Errc::Config, "scene: minor diameter can fall below 6 mm");
    if (max_diameter > 0.040)
      throw Error(Errc::Config, "scene: major diameter above 40 mm");
    if (max_tilt_deg < 0.0 || max_tilt_deg > 20.0)
      throw Error(Errc::Config, "scene: tilt must be within [0, 20] degrees");
    if (!range_ok(min_height, max_height) || min_height <= 0.0)
      throw Error(Errc::Config, "scene: inverted height range");
    if (!range_ok(min_pith_height, max_pith_height) || min_pith_height < 0.02 ||
        max_pith_height > 0.10)
      throw Error(Errc::Config, "scene: pith height range outside [0.02, 0.10]");
    if (!range_ok(min_stiffness, max_stiffness) || min_stiffness < 0.0 ||
        max_stiffness > 1.0)
      throw Error(Errc::Config, "scene: stiffness range outside [0, 1]");
    if (terrain_amplitude < 0.0 || terrain_amplitude > 0.08)
      throw Error(Errc::Config, "scene: terrain amplitude outside [0, 0.08]");
    if (terrain_wavelength <= 0.0 || terrain_components < 0)
      throw Error(Errc::Config, "scene: bad terrain parameters");
    if (leaf_bands < 1)
      throw Error(Errc::Config, "scene: leaf_bands must be >= 1");
    if (!range_ok(leaf_offset_min, leaf_offset_max) || leaf_offset_min <= 0.0)
      throw Error(Errc::Config, "scene: inverted leaf offset range");
    if (!range_ok(leaf_width_min, leaf_width_max) || leaf_width_min <= 0.0)
      throw Error(Errc::Config, "scene: inverted leaf width range");
  }
};

namespace detail {

inline Terrain make_terrain(const SceneConfig& cfg, Rng& rng) {
  Terrain t;
  if (cfg.terrain_components == 0 || cfg.terrain_amplitude == 0.0) return t;
  t.components.reserve(cfg.terrain_components);
  const double per = cfg.terrain_amplitude / cfg.terrain_components;
  for (int i = 0; i < cfg.terrain_components; ++i) {
    const double wavelength = cfg.terrain_wavelength * rng.uniform(1.0, 3.0);
    const double k = 2.0 * kPi / wavelength;
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    t.components.push_back({per, k * std::cos(dir), k * std::sin(dir),
                            rng.uniform(0.0, 2.0 * kPi)});
  }
  return t;
}

/// Cross-section basis of a stalk: u at the ellipse's orientation azimuth
/// (projected perpendicular to the axis), v completing the right-handed
/// frame with the axis direction.
inline void section_basis(const StalkTruth& stalk, Vec3& u, Vec3& v) {
  const Vec3 w = stalk.axis.direction;
  const Vec3 a0{std::cos(stalk.section.orientation),
                std::sin(stalk.section.orientation), 0.0};
  Vec3 pu = a0 - w * a0.dot(w);
  if (pu.norm() < 1e-9) pu = Vec3{1, 0, 0} - w * w.x;  // axis parallel to a0
  u = pu.normalized();
  v = w.cross(u);
}

inline void make_leaves(const SceneConfig& cfg, int stalk_index,
                        const StalkTruth& stalk, Rng& rng,
                        std::vector<LeafQuad>& out) {
  const int bands = cfg.leaf_bands;
  const double h = stalk.top_z - stalk.base_z;
  // Shuffled band order so rendering the first k strips occludes k random
  // bands of the stalk.
  std::vector<int> order(bands);
  for (int i = 0; i < bands; ++i) order[i] = i;
  for (int i = bands - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(i + 1));
    std::swap(order[i], order[j]);
  }
  for (int b : order) {
    const double z_lo = stalk.base_z + h * b / bands - cfg.leaf_margin;
    const double z_hi = stalk.base_z + h * (b + 1) / bands + cfg.leaf_margin;
    const double z_mid = 0.5 * (z_lo + z_hi);
    const Vec3 axis_pt = line_point_at_height(stalk.axis, z_mid);

    // Standoff direction: toward the scan side (-x) with some yaw jitter.
    const double yaw = rng.uniform(-0.35, 0.35);
    const Vec3 toward_camera{-std::cos(yaw), std::sin(yaw), 0.0};
    const Vec3 center_xy =
        axis_pt + toward_camera * rng.uniform(cfg.leaf_offset_min, cfg.leaf_offset_max);
    const Vec3 lateral = Vec3{0, 0, 1}.cross(toward_camera).normalized();
    const double half_w = 0.5 * rng.uniform(cfg.leaf_width_min, cfg.leaf_width_max);

    LeafQuad quad;
    quad.stalk_index = stalk_index;
    quad.cover_fraction = 1.0 / bands;
    quad.corners[0] = Vec3{center_xy.x, center_xy.y, z_lo} - lateral * half_w;
    quad.corners[1] = Vec3{center_xy.x, center_xy.y, z_lo} + lateral * half_w;
    quad.corners[2] = Vec3{center_xy.x, center_xy.y, z_hi} + lateral * half_w;
    quad.corners[3] = Vec3{center_xy.x, center_xy.y, z_hi} - lateral * half_w;
    out.push_back(quad);
  }
}

}  // namespace detail

/// Deterministic scene from a config and seed: terrain first, then stalks
/// spaced along the row, then leaf strips per stalk.
inline SceneTruth generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SceneTruth scene;
  scene.rng_seed = seed;
  scene.row_spacing = cfg.row_spacing;

  Rng terrain_rng(derive_seed(seed, 1));
  scene.terrain = detail::make_terrain(cfg, terrain_rng);

  Rng rng(derive_seed(seed, 2));
  const int n_target =
      cfg.min_stalks + static_cast<int>(rng.uniform_int(cfg.max_stalks - cfg.min_stalks + 1));

  double y = cfg.row_y_min + rng.uniform(0.0, 0.05);
  for (int i = 0; i < n_target && y <= cfg.row_y_max; ++i) {
    StalkTruth s;
    const double x = cfg.row_x + rng.uniform(-cfg.row_x_jitter, cfg.row_x_jitter);
    s.base_z = scene.terrain.height(x, y);

    const double tilt = deg_to_rad(rng.uniform(0.0, cfg.max_tilt_deg));
    const double tilt_az = rng.uniform(0.0, 2.0 * kPi);
    const Vec3 dir{std::sin(tilt) * std::cos(tilt_az), std::sin(tilt) * std::sin(tilt_az),
                   std::cos(tilt)};
    s.axis = make_line({x, y, s.base_z}, dir);

    const double major_d = rng.uniform(cfg.min_diameter, cfg.max_diameter);
    const double aspect = rng.uniform(cfg.min_aspect, cfg.max_aspect);
    // Growth orientation is stochastic; uniform over a half turn since an
    // ellipse has period pi.
    s.section = {0.5 * major_d, 0.5 * major_d * aspect, rng.uniform(0.0, kPi)};

    s.top_z = s.base_z + rng.uniform(cfg.min_height, cfg.max_height);
    s.pith_top_z = s.base_z + rng.uniform(cfg.min_pith_height, cfg.max_pith_height);
    s.stiffness = rng.uniform(cfg.min_stiffness, cfg.max_stiffness);
    scene.stalks.push_back(s);

    y += rng.uniform(cfg.min_stalk_gap, cfg.max_stalk_gap);
  }

  Rng leaf_rng(derive_seed(seed, 3));
  for (std::size_t i = 0; i < scene.stalks.size(); ++i)
    detail::make_leaves(cfg, static_cast<int>(i), scene.stalks[i], leaf_rng,
                        scene.leaves);
  return scene;
}

struct TruthInsertion {
  Vec3 point;
  EllipseSection section;
};

/// Exact axis point of a stalk at the requested height, plus its cross
/// section: the grading reference for estimated insertion points.
inline TruthInsertion truth_insertion_point(const SceneTruth& scene, int stalk_id,
                                            double z_target) {
  if (stalk_id < 0 || stalk_id >= static_cast<int>(scene.stalks.size()))
    throw Error(Errc::UnknownStalk, "stalk id out of range");
  const StalkTruth& s = scene.stalks[stalk_id];
  return {line_point_at_height(s.axis, z_target), s.section};
}

}  // namespace cornpoint
