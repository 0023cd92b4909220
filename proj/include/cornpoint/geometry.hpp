#pragma once

// Shared 3D/2D geometry for the stalk insertion simulator: vectors, lines,
// rigid poses, pinhole projection and elliptical cross-section math.
//
// Conventions:
//   robot frame:  z up, ground nominally at z = 0
//   camera frame: z forward, x right, y down
// All lengths in meters, all angles in radians, double precision throughout.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cornpoint {

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

enum class Errc {
  BehindCamera,
  InvalidDepth,
  HorizontalLine,
  OffsetOutOfRange,
  Config,
  EmptyFrustum,
  UnknownStalk,
  NoValidDepth,
  TooFewPoints,
  DegenerateFit,
  Io,
  Data,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double norm_xy() const { return std::hypot(x, y); }
  Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  bool operator==(const Vec3& o) const = default;
};

using Point3 = Vec3;

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Horizontal (xy-plane) distance, the metric used by workspace/spacing
/// filters and pose-error reporting.
inline double horizontal_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Row-major 3x3 matrix; just enough linear algebra for poses and frames.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    return {{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
  }

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  Vec3 row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }

  Vec3 operator*(const Vec3& v) const {
    return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transpose() const {
    return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

/// Rigid transform: p_out = rotation * p_in + translation.
struct Pose3 {
  Mat3 rotation;
  Vec3 translation;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 inverse_apply(const Vec3& p) const {
    return rotation.transpose() * (p - translation);
  }
  Pose3 compose(const Pose3& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }

  bool is_valid(double tol = 1e-9) const {
    const Mat3 rtr = rotation.transpose() * rotation;
    const Mat3 id = Mat3::identity();
    for (int i = 0; i < 9; ++i)
      if (std::abs(rtr.m[i] - id.m[i]) > tol) return false;
    return std::abs(rotation.det() - 1.0) <= tol && translation.finite();
  }
};

/// 3D line as point + unit direction. Stalk lines are stored with
/// direction.z > 0 so "extend to the ground" is unambiguous.
struct Line3 {
  Vec3 point;
  Vec3 direction;
};

/// Normalized line with the direction flipped to point upward when it has
/// any vertical component.
inline Line3 make_line(const Vec3& point, const Vec3& direction) {
  Vec3 d = direction.normalized();
  if (d.z < 0.0) d = -d;
  return {point, d};
}

inline double point_line_distance(const Vec3& p, const Line3& line) {
  const Vec3 r = p - line.point;
  return (r - line.direction * r.dot(line.direction)).norm();
}

/// Point on the line at world height z_target.
/// Throws HorizontalLine when |direction.z| <= 1e-6.
inline Vec3 line_point_at_height(const Line3& line, double z_target) {
  if (std::abs(line.direction.z) <= 1e-6)
    throw Error(Errc::HorizontalLine, "line has no vertical component");
  const double t = (z_target - line.point.z) / line.direction.z;
  Vec3 p = line.point + line.direction * t;
  p.z = z_target;  // exact by contract
  return p;
}

struct PixelCoord {
  double u = 0.0;  // column
  double v = 0.0;  // row
  bool operator==(const PixelCoord& o) const = default;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw Error(Errc::Config, "intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw Error(Errc::Config, "intrinsics: image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
      throw Error(Errc::Config, "intrinsics: principal point outside image");
  }
};

/// Pinhole projection of a camera-frame point (z forward).
inline PixelCoord project(const CameraIntrinsics& k, const Vec3& p_cam) {
  if (!(p_cam.z > 0.0))
    throw Error(Errc::BehindCamera, "point is behind the camera");
  return {k.fx * p_cam.x / p_cam.z + k.cx, k.fy * p_cam.y / p_cam.z + k.cy};
}

/// Inverse of project: pixel + depth (camera z) to a camera-frame point.
inline Vec3 backproject(const CameraIntrinsics& k, const PixelCoord& px, double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw Error(Errc::InvalidDepth, "depth must be positive and finite");
  return {(px.u - k.cx) / k.fx * depth, (px.v - k.cy) / k.fy * depth, depth};
}

/// Elliptical stalk cross-section. a is the semi-axis along the section's
/// local x, b along local y; orientation is the azimuth of local x about
/// the stalk axis.
struct EllipseSection {
  double a = 0.0;
  double b = 0.0;
  double orientation = 0.0;

  double semi_major() const { return std::max(a, b); }
  double semi_minor() const { return std::min(a, b); }
};

/// Which ellipse axis the insertion direction runs along.
enum class InsertAxis { Major, Minor };

inline double insertion_semi_axis(const EllipseSection& s, InsertAxis axis) {
  return axis == InsertAxis::Major ? s.semi_major() : s.semi_minor();
}

inline double perpendicular_semi_axis(const EllipseSection& s, InsertAxis axis) {
  return axis == InsertAxis::Major ? s.semi_minor() : s.semi_major();
}

/// Angle between the insertion direction and the inward surface normal at
/// the entry point, for an insertion along the given ellipse axis at lateral
/// offset `offset`. Zero means a head-on hit; large values mean the sensor
/// glances off the surface.
inline double entry_glance_angle(const EllipseSection& section, double offset,
                                 InsertAxis axis) {
  const double along = insertion_semi_axis(section, axis);
  const double perp = perpendicular_semi_axis(section, axis);
  const double d = std::abs(offset);
  if (!(d < perp))
    throw Error(Errc::OffsetOutOfRange, "offset outside perpendicular semi-axis");
  // Entry point (x0, offset) on x^2/along^2 + y^2/perp^2 = 1; the surface
  // normal there is parallel to (x0/along^2, offset/perp^2).
  const double x0 = along * std::sqrt(1.0 - (d / perp) * (d / perp));
  return std::atan2(d / (perp * perp), x0 / (along * along));
}

/// Full chord length through the ellipse at lateral offset `offset` along
/// the chosen insertion axis (the maximum possible penetration depth).
inline double ellipse_chord(const EllipseSection& section, double offset,
                            InsertAxis axis) {
  const double along = insertion_semi_axis(section, axis);
  const double perp = perpendicular_semi_axis(section, axis);
  const double d = std::abs(offset);
  if (d >= perp) return 0.0;
  return 2.0 * along * std::sqrt(1.0 - (d / perp) * (d / perp));
}

}  // namespace cornpoint
