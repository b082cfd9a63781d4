#pragma once

// Pinhole camera algebra: projection, vanishing-point axes, gravity and
// two-view ray-midpoint triangulation. Everything here is a pure function.

#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "eco/error.hpp"

namespace eco {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Image coordinates in pixels; pixel (i, j) has its center at (i, j).
using Pixel = Eigen::Vector2d;

inline constexpr double kMinDepth = 1e-12;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Mat3 matrix() const {
    Mat3 K;
    K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
  }

  Mat3 inverse() const {
    Mat3 Kinv;
    Kinv << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return Kinv;
  }

  /// Full invariant check, used when intrinsics come from a file. Small
  /// hand-built cameras (unit focal, zero principal point) skip this.
  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      fail(ErrorCode::invalid_intrinsics, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
      fail(ErrorCode::invalid_intrinsics, "image size must be positive");
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
      fail(ErrorCode::invalid_intrinsics, "principal point outside image");
  }
};

/// World-to-camera rotation R and camera center C, so X_cam = R (X - C).
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 C = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 to_camera(const Vec3& X) const { return R * (X - C); }
  Vec3 direction_to_camera(const Vec3& d) const { return R * d; }
  Vec3 direction_to_world(const Vec3& d) const { return R.transpose() * d; }

  /// Optical axis in the world frame.
  Vec3 viewing_direction() const { return R.transpose().col(2); }

  void validate(double tol = 1e-9) const {
    const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol))
      fail(ErrorCode::invalid_rotation,
           "rotation not orthonormal (max |R^T R - I| = " + std::to_string(ortho) + ")");
    const double det = R.determinant();
    if (!(std::abs(det - 1.0) <= tol))
      fail(ErrorCode::invalid_rotation, "rotation determinant " + std::to_string(det));
    if (!C.allFinite()) fail(ErrorCode::invalid_rotation, "camera center not finite");
  }
};

/// Scene principal directions in the world frame. x_dir and y_dir are the
/// horizontal Manhattan axes, gravity points image-down in the frame where
/// the axes were selected, and (x_dir, y_dir, gravity) is right-handed.
struct SceneAxes {
  Vec3 x_dir = Vec3::UnitX();
  Vec3 y_dir = Vec3::UnitY();
  Vec3 gravity = Vec3::UnitZ();

  /// Rows are x_dir, y_dir, gravity.
  Mat3 as_rows() const {
    Mat3 M;
    M.row(0) = x_dir.transpose();
    M.row(1) = y_dir.transpose();
    M.row(2) = gravity.transpose();
    return M;
  }
};

inline Vec3 homogeneous(const Pixel& p) { return {p.x(), p.y(), 1.0}; }

inline Pixel project(const CameraIntrinsics& K, const Pose& pose, const Vec3& X) {
  const Vec3 cam = pose.to_camera(X);
  if (!(cam.z() > kMinDepth))
    fail(ErrorCode::behind_camera, "point has non-positive depth " + std::to_string(cam.z()));
  return {K.fx * cam.x() / cam.z() + K.cx, K.fy * cam.y() / cam.z() + K.cy};
}

/// Vanishing point of world direction d: the image of the point at infinity.
inline Pixel project_direction(const CameraIntrinsics& K, const Pose& pose, const Vec3& d) {
  const Vec3 cam = pose.direction_to_camera(d);
  if (std::abs(cam.z()) <= kMinDepth * cam.norm())
    fail(ErrorCode::behind_camera, "direction parallel to the image plane has no finite vanishing point");
  return {K.fx * cam.x() / cam.z() + K.cx, K.fy * cam.y() / cam.z() + K.cy};
}

/// World-frame direction (not normalized) of the ray through pixel p.
inline Vec3 back_project(const CameraIntrinsics& K, const Pose& pose, const Pixel& p) {
  return pose.direction_to_world(K.inverse() * homogeneous(p));
}

/// unit(R^T K^-1 [vp; 1]), oriented toward the camera's viewing direction.
///
/// For a finite vanishing point the camera-frame ray has z = 1, so its dot
/// product with the optical axis is already positive; the flip below only
/// matters for callers that build vp from a homogeneous point.
inline Vec3 axis_from_vanishing_point(const CameraIntrinsics& K, const Pose& pose, const Pixel& vp) {
  Vec3 d = back_project(K, pose, vp).normalized();
  if (d.dot(pose.viewing_direction()) < 0.0) d = -d;
  return d;
}

inline constexpr double kMinAxisAngle = 1e-3;

/// unit(x_dir x y_dir), signed to point image-down (+y) in the reference camera.
inline Vec3 gravity_from_axes(const Vec3& x_dir, const Vec3& y_dir, const Pose& reference) {
  const Vec3 cross = x_dir.normalized().cross(y_dir.normalized());
  if (!(cross.norm() > std::sin(kMinAxisAngle)))
    fail(ErrorCode::degenerate_axes, "axis directions are (nearly) parallel");
  Vec3 g = cross.normalized();
  if (reference.direction_to_camera(g).y() < 0.0) g = -g;
  return g;
}

/// Gravity from the horizontal pair, then y_dir := gravity x x_dir so the
/// triple is exactly orthonormal. Applying it twice is a no-op.
inline SceneAxes orthonormalize_axes(const Vec3& x_dir, const Vec3& y_dir, const Pose& reference) {
  SceneAxes axes;
  axes.x_dir = x_dir.normalized();
  axes.gravity = gravity_from_axes(axes.x_dir, y_dir, reference);
  axes.y_dir = axes.gravity.cross(axes.x_dir).normalized();
  return axes;
}

inline SceneAxes axes_from_vanishing_points(const CameraIntrinsics& K, const Pose& pose,
                                            const Pixel& vp_x, const Pixel& vp_y) {
  const Vec3 x = axis_from_vanishing_point(K, pose, vp_x);
  const Vec3 y = axis_from_vanishing_point(K, pose, vp_y);
  return orthonormalize_axes(x, y, pose);
}

/// Midpoint of the shortest segment between the two back-projected rays.
inline Vec3 triangulate(const Pixel& obs_a, const Pose& pose_a, const Pixel& obs_b,
                        const Pose& pose_b, const CameraIntrinsics& K) {
  const Vec3 baseline = pose_a.C - pose_b.C;
  const Vec3 da = back_project(K, pose_a, obs_a);
  const Vec3 db = back_project(K, pose_b, obs_b);

  const double a = da.dot(da);
  const double b = da.dot(db);
  const double c = db.dot(db);
  const double d = da.dot(baseline);
  const double e = db.dot(baseline);
  const double denom = a * c - b * b;

  // denom / (a c) = sin^2 of the angle between the rays
  if (baseline.norm() <= 1e-12 || !(denom > 1e-14 * a * c))
    fail(ErrorCode::degenerate_baseline, "rays are parallel or the baseline is zero");

  const double t = (b * e - c * d) / denom;
  const double s = (a * e - b * d) / denom;
  const Vec3 on_a = pose_a.C + t * da;
  const Vec3 on_b = pose_b.C + s * db;
  return 0.5 * (on_a + on_b);
}

/// Angle between two directions, in radians.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Angle between two undirected lines.
inline double line_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

}  // namespace eco
