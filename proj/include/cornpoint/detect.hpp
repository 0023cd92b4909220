#pragma once

// Per-frame stalk detection: mask center points lifted to 3D through the
// depth map, a RANSAC + least-squares line fit along each stalk, and the
// candidate insertion point where that line crosses the target height.

#include <optional>
#include <vector>

#include "cornpoint/geometry.hpp"
#include "cornpoint/render.hpp"
#include "cornpoint/rng.hpp"

namespace cornpoint {

struct FeaturePoint {
  PixelCoord pixel;   // (u = mean column of the row, v = row)
  double depth = 0.0;
  Vec3 p3d;           // robot frame
};

/// Mask attributes feeding the stalk scoring heuristic.
///   c: segmentation confidence, w: widest sampled row (px), h: mask height
///   (px), d: horizontal distance of the mask bbox center from the image
///   center, normalized to [0, 1].
struct MaskFeatures {
  double c = 0.0;
  double w = 0.0;
  double h = 0.0;
  double d = 0.0;
};

struct DetectionConfig {
  int feature_stride = 10;        // rows between feature points
  int min_points = 4;
  int ransac_iterations = 100;
  double inlier_threshold = 0.005;  // m point-to-line distance
  int min_inliers = 4;
  double z_target = 0.05;           // insertion height hyperparameter

  void validate() const {
    if (feature_stride < 1) throw Error(Errc::Config, "detect: stride must be >= 1");
    if (min_points < 2) throw Error(Errc::Config, "detect: min_points must be >= 2");
    if (ransac_iterations < 1 || inlier_threshold <= 0.0 || min_inliers < 2)
      throw Error(Errc::Config, "detect: bad RANSAC parameters");
  }
};

struct StalkCandidate {
  Line3 line;
  MaskFeatures features;
  int inlier_count = 0;
  Vec3 insertion_point;
  int instance_id = 0;  // mask label, used as the deterministic tie-breaker
};

/// Center points along a stalk mask, one sampled row every `stride` rows
/// starting from the instance's bottom-most row, lifted to the robot frame.
/// Rows without mask pixels, or whose center pixel (+-1 px column search)
/// has no valid depth, are skipped. Throws NoValidDepth when nothing
/// survives.
inline std::vector<FeaturePoint> extract_feature_points(const FrameObservation& frame,
                                                        int label,
                                                        int stride = 10) {
  const int w = frame.width(), h = frame.height();
  int top = -1, bottom = -1;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (frame.mask_at(u, v) == label) {
        if (top < 0) top = v;
        bottom = v;
        break;
      }
    }
  }
  if (top < 0) throw Error(Errc::NoValidDepth, "instance has no mask pixels");

  std::vector<FeaturePoint> points;
  for (int v = bottom; v >= top; v -= stride) {
    double col_sum = 0.0;
    int count = 0, lo = -1, hi = -1;
    for (int u = 0; u < w; ++u) {
      if (frame.mask_at(u, v) == label) {
        col_sum += u;
        ++count;
        if (lo < 0) lo = u;
        hi = u;
      }
    }
    if (count == 0) continue;
    // A run clipped by the image border has a centroid biased by up to the
    // stalk radius; such rows carry no usable center information.
    if (lo == 0 || hi == w - 1) continue;
    const double mean_col = col_sum / count;
    const int c = static_cast<int>(std::lround(mean_col));

    double depth = 0.0;
    for (int du : {0, -1, 1}) {
      const int uc = c + du;
      if (uc < 0 || uc >= w) continue;
      const double dval = frame.depth_at(uc, v);
      if (dval > 0.0 && std::isfinite(dval)) {
        depth = dval;
        break;
      }
    }
    if (depth <= 0.0) continue;

    FeaturePoint fp;
    fp.pixel = {mean_col, static_cast<double>(v)};
    fp.depth = depth;
    fp.p3d = frame.cam_pose.apply(backproject(frame.intrinsics, fp.pixel, depth));
    points.push_back(fp);
  }
  if (points.empty())
    throw Error(Errc::NoValidDepth, "no sampled row has valid depth");
  return points;
}

struct LineFit {
  Line3 line;
  std::vector<int> inliers;
};

namespace detail {

/// Orthogonal-distance least squares: centroid plus the principal axis of
/// the point covariance (power iteration; point sets here are tiny and
/// strongly elongated).
inline Line3 least_squares_line(const std::vector<Vec3>& pts) {
  const std::size_t n = pts.size();
  Vec3 mu;
  for (const auto& p : pts) mu = mu + p;
  mu = mu * (1.0 / static_cast<double>(n));

  double cxx = 0, cxy = 0, cxz = 0, cyy = 0, cyz = 0, czz = 0;
  for (const auto& p : pts) {
    const Vec3 r = p - mu;
    cxx += r.x * r.x;
    cxy += r.x * r.y;
    cxz += r.x * r.z;
    cyy += r.y * r.y;
    cyz += r.y * r.z;
    czz += r.z * r.z;
  }
  auto apply_cov = [&](const Vec3& v) {
    return Vec3{cxx * v.x + cxy * v.y + cxz * v.z, cxy * v.x + cyy * v.y + cyz * v.z,
                cxz * v.x + cyz * v.y + czz * v.z};
  };

  Vec3 v = pts.back() - pts.front();
  if (v.norm() < 1e-12) v = {0, 0, 1};
  v = v.normalized();
  for (int i = 0; i < 128; ++i) {
    const Vec3 next = apply_cov(v);
    const double n2 = next.norm();
    if (n2 < 1e-30) break;  // no spread; caller rejects as degenerate
    v = next * (1.0 / n2);
  }
  return make_line(mu, v);
}

}  // namespace detail

/// RANSAC over 2-point line hypotheses followed by least-squares refinement
/// over the best inlier set; the returned direction points upward. The RNG
/// is caller-owned so fits are reproducible per trial.
inline LineFit fit_stalk_line(const std::vector<FeaturePoint>& points,
                              const DetectionConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(points.size());
  if (n < cfg.min_points)
    throw Error(Errc::TooFewPoints, "fewer feature points than min_points");

  std::vector<int> best;
  for (int it = 0; it < cfg.ransac_iterations; ++it) {
    const int i = static_cast<int>(rng.uniform_int(n));
    int j = static_cast<int>(rng.uniform_int(n - 1));
    if (j >= i) ++j;
    const Vec3 d = points[j].p3d - points[i].p3d;
    if (d.norm() < 1e-9) continue;
    const Line3 hyp = make_line(points[i].p3d, d);
    std::vector<int> inliers;
    for (int k = 0; k < n; ++k)
      if (point_line_distance(points[k].p3d, hyp) < cfg.inlier_threshold)
        inliers.push_back(k);
    if (inliers.size() > best.size()) best = std::move(inliers);
  }
  if (static_cast<int>(best.size()) < cfg.min_inliers)
    throw Error(Errc::DegenerateFit, "no hypothesis reached min_inliers");

  std::vector<Vec3> pts;
  pts.reserve(best.size());
  for (int k : best) pts.push_back(points[k].p3d);
  Vec3 mu;
  for (const auto& p : pts) mu = mu + p;
  mu = mu * (1.0 / static_cast<double>(pts.size()));
  double spread = 0.0;
  for (const auto& p : pts) spread = std::max(spread, (p - mu).norm());
  if (spread < 1e-3)
    throw Error(Errc::DegenerateFit, "inliers collapse to a single point");

  return {detail::least_squares_line(pts), std::move(best)};
}

/// Mask attributes of one instance: confidence from the frame, w as the
/// widest sampled row, h as the mask's row extent, d from the bbox center
/// column relative to the image center.
inline MaskFeatures measure_mask_features(const FrameObservation& frame, int label,
                                          int stride = 10) {
  const int w = frame.width(), h = frame.height();
  int top = -1, bottom = -1, left = w, right = -1;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (frame.mask_at(u, v) == label) {
        if (top < 0) top = v;
        bottom = v;
        left = std::min(left, u);
        right = std::max(right, u);
      }
    }
  }
  if (top < 0) throw Error(Errc::NoValidDepth, "instance has no mask pixels");

  double max_width = 0.0;
  for (int v = bottom; v >= top; v -= stride) {
    int lo = -1, hi = -1;
    for (int u = 0; u < w; ++u) {
      if (frame.mask_at(u, v) == label) {
        if (lo < 0) lo = u;
        hi = u;
      }
    }
    if (lo >= 0) max_width = std::max(max_width, static_cast<double>(hi - lo + 1));
  }

  MaskFeatures f;
  f.c = (label >= 1 && label <= frame.instance_count())
            ? frame.confidences[label - 1]
            : 0.0;
  f.w = max_width;
  f.h = bottom - top + 1;
  const double center = 0.5 * (left + right);
  const double image_center = 0.5 * (w - 1);
  f.d = std::clamp(std::abs(center - image_center) / image_center, 0.0, 1.0);
  return f;
}

/// Full per-instance stage: features -> line fit -> insertion point at the
/// configured z height. Upstream errors (no depth, too few points,
/// degenerate fit, horizontal line) propagate.
inline StalkCandidate candidate_from_instance(const FrameObservation& frame, int label,
                                              const DetectionConfig& cfg, Rng& rng) {
  const auto points = extract_feature_points(frame, label, cfg.feature_stride);
  const LineFit fit = fit_stalk_line(points, cfg, rng);
  StalkCandidate cand;
  cand.line = fit.line;
  cand.inlier_count = static_cast<int>(fit.inliers.size());
  cand.features = measure_mask_features(frame, label, cfg.feature_stride);
  cand.insertion_point = line_point_at_height(fit.line, cfg.z_target);
  cand.instance_id = label;
  return cand;
}

}  // namespace cornpoint
