#pragma once

// Object-centric rectification of a planar cuboid face.
//
// The frontalizing rotation turns the camera about its own center until the
// optical axis is along the face normal and gravity is image-down. The
// resulting homography is K R K^-1. A uniform scale then brings the face to
// a canonical height of f_y pixels, and a translation moves the face's
// bounding box to the canvas origin:
//
//   W = T * diag(s, s, 1) * K R K^-1,   s = f_y / dv
//
// where dv is the pixel height of a vertical face edge after K R K^-1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <json.hpp>

#include "eco/geometry.hpp"
#include "eco/image.hpp"

namespace eco {

/// Planar face of a cuboid. Corners run top-left, top-right, bottom-right,
/// bottom-left as seen from outside the box with gravity pointing down, so
/// corners[0] -> corners[3] is a vertical edge of length `height`.
struct CuboidFace {
  Vec3 normal = Vec3::UnitZ();  // outward, unit
  double offset = 0.0;          // normal . X = offset on the plane
  std::array<Vec3, 4> corners{};
  double height = 0.0;

  static CuboidFace from_corners(const std::array<Vec3, 4>& corners, const Vec3& outward) {
    CuboidFace f;
    f.corners = corners;
    f.normal = outward.normalized();
    f.offset = f.normal.dot(centroid_of(corners));
    f.height = (corners[3] - corners[0]).norm();
    return f;
  }

  Vec3 centroid() const { return centroid_of(corners); }

  double max_plane_residual() const {
    double r = 0.0;
    for (const auto& c : corners) r = std::max(r, std::abs(normal.dot(c) - offset));
    return r;
  }

 private:
  static Vec3 centroid_of(const std::array<Vec3, 4>& c) {
    return 0.25 * (c[0] + c[1] + c[2] + c[3]);
  }
};

inline constexpr int kMaxCanvas = 8192;

struct WarpSpec {
  Mat3 frontalize = Mat3::Identity();  // K R K^-1
  Mat3 scale = Mat3::Identity();       // diag(s, s, 1)
  Mat3 translate = Mat3::Identity();   // bounding box to canvas origin
  int canvas_width = 0;
  int canvas_height = 0;
  double s = 1.0;
  double dv = 0.0;  // pixel span before scaling

  Mat3 full() const { return translate * scale * frontalize; }
};

inline constexpr double kMinNormalGravityAngle = 5.0 * std::numbers::pi / 180.0;

/// Rows r_x, r_y, r_z of the frontalizing rotation, all in camera frame.
/// r_z is the face normal signed toward the object, r_x = unit(g x r_z) and
/// r_y = r_z x r_x, which is the unit vector closest to g orthogonal to r_z.
inline Mat3 frontalizing_rotation(const Vec3& normal, const Vec3& gravity, const Vec3& object_dir) {
  const Vec3 n = normal.normalized();
  const Vec3 g = gravity.normalized();
  if (angle_between(n, g) <= kMinNormalGravityAngle ||
      angle_between(n, -g) <= kMinNormalGravityAngle)
    fail(ErrorCode::degenerate_orientation, "face normal is (nearly) parallel to gravity");
  const double toward = n.dot(object_dir);
  if (std::abs(toward) <= 1e-12 * object_dir.norm())
    fail(ErrorCode::degenerate_orientation, "face is seen edge-on");

  const Vec3 rz = toward > 0.0 ? n : Vec3(-n);
  const Vec3 rx = g.cross(rz).normalized();
  const Vec3 ry = rz.cross(rx);
  Mat3 R;
  R.row(0) = rx.transpose();
  R.row(1) = ry.transpose();
  R.row(2) = rz.transpose();
  return R;
}

inline Mat3 frontalization_homography(const CameraIntrinsics& K, const Vec3& normal,
                                      const Vec3& gravity, const Vec3& object_dir) {
  return K.matrix() * frontalizing_rotation(normal, gravity, object_dir) * K.inverse();
}

inline Pixel apply_homography(const Mat3& H, const Pixel& p) {
  const Vec3 q = H * homogeneous(p);
  return {q.x() / q.z(), q.y() / q.z()};
}

/// Pixel height, after frontalization, of the face's vertical edge.
inline double measure_dv(const Mat3& frontalize, const CuboidFace& face,
                         const CameraIntrinsics& K, const Pose& pose) {
  for (const auto& c : face.corners)
    if (!(pose.to_camera(c).z() > kMinDepth))
      fail(ErrorCode::behind_camera, "face corner behind camera");
  const Pixel top = apply_homography(frontalize, project(K, pose, face.corners[0]));
  const Pixel bottom = apply_homography(frontalize, project(K, pose, face.corners[3]));
  return std::abs(bottom.y() - top.y());
}

inline double scale_factor(double fy, double dv) {
  if (!(dv > 0.0)) fail(ErrorCode::invalid_span, "pixel span must be positive");
  return fy / dv;
}

/// `region` holds the face outline in frontalized (pre-scale) coordinates.
inline WarpSpec compose_warp(const Mat3& frontalize, double s, std::span<const Pixel> region,
                             double dv = 0.0) {
  if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::invalid_span, "scale must be positive");
  if (!(std::abs(frontalize.determinant()) > 1e-12))
    fail(ErrorCode::singular_warp, "frontalizing homography is singular");
  if (region.empty()) fail(ErrorCode::empty_input, "empty warp region");

  WarpSpec spec;
  spec.frontalize = frontalize;
  spec.scale = Eigen::Vector3d(s, s, 1.0).asDiagonal();
  spec.s = s;
  spec.dv = dv;

  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& p : region) {
    min_x = std::min(min_x, s * p.x());
    min_y = std::min(min_y, s * p.y());
    max_x = std::max(max_x, s * p.x());
    max_y = std::max(max_y, s * p.y());
  }
  const double w = max_x - min_x;
  const double h = max_y - min_y;
  if (!std::isfinite(w) || !std::isfinite(h) || w + 1.0 > kMaxCanvas || h + 1.0 > kMaxCanvas)
    fail(ErrorCode::oversized_warp, "warped face exceeds the 8192x8192 canvas cap");

  spec.translate(0, 2) = -min_x;
  spec.translate(1, 2) = -min_y;
  // one pixel per integer center inside [0, w] x [0, h]
  spec.canvas_width = static_cast<int>(std::floor(w + 1e-9)) + 1;
  spec.canvas_height = static_cast<int>(std::floor(h + 1e-9)) + 1;
  return spec;
}

/// Inverse-mapped bilinear resampling. Samples falling outside the source
/// (or behind the source camera) are black.
inline Image warp_image(const Image& src, const Mat3& W, int width, int height) {
  const double norm = W.cwiseAbs().maxCoeff();
  if (!(norm > 0.0) || !(std::abs((W / norm).determinant()) > 1e-12))
    fail(ErrorCode::singular_warp, "warp matrix is singular");
  const Mat3 inv = W.inverse();
  Image out(width, height);
  const int sw = src.width(), sh = src.height();
  if (sw == 0 || sh == 0) return out;

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 q = inv * Vec3(x, y, 1.0);
      if (!(q.z() > 0.0)) continue;
      const double sx = q.x() / q.z();
      const double sy = q.y() / q.z();
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= sw - 1 && sy <= sh - 1)) continue;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      const int x1 = std::min(x0 + 1, sw - 1);
      const int y1 = std::min(y0 + 1, sh - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
        const double bot = (1.0 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
        const double v = (1.0 - fy) * top + fy * bot;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

inline Image warp_image(const Image& src, const WarpSpec& spec) {
  return warp_image(src, spec.full(), spec.canvas_width, spec.canvas_height);
}

/// Everything needed to rectify one face seen from one camera.
struct FaceWarp {
  WarpSpec spec;
  Mat3 rotation;                      // frontalizing rotation (camera frame)
  std::array<Pixel, 4> warped_corners;  // corners in the final canvas
};

/// Frontalize and canonically scale `face` as seen by (K, pose). Gravity is a
/// world-frame direction.
inline FaceWarp plan_face_warp(const CameraIntrinsics& K, const Pose& pose,
                               const CuboidFace& face, const Vec3& gravity) {
  const Vec3 n_cam = pose.direction_to_camera(face.normal);
  const Vec3 g_cam = pose.direction_to_camera(gravity);
  const Vec3 obj = pose.to_camera(face.centroid()).normalized();

  FaceWarp fw;
  fw.rotation = frontalizing_rotation(n_cam, g_cam, obj);
  const Mat3 H = K.matrix() * fw.rotation * K.inverse();
  const double dv = measure_dv(H, face, K, pose);
  const double s = scale_factor(K.fy, dv);

  std::array<Pixel, 4> frontal;
  for (int i = 0; i < 4; ++i) frontal[i] = apply_homography(H, project(K, pose, face.corners[i]));
  fw.spec = compose_warp(H, s, frontal, dv);
  const Mat3 W = fw.spec.full();
  for (int i = 0; i < 4; ++i) fw.warped_corners[i] = apply_homography(W, project(K, pose, face.corners[i]));
  return fw;
}

namespace detail {

inline nlohmann::json mat3_json(const Mat3& M) {
  nlohmann::json a = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(M(r, c));
  return a;
}

inline Mat3 mat3_from_json(const nlohmann::json& a) {
  if (!a.is_array() || a.size() != 9) fail(ErrorCode::bad_format, "expected 9 matrix entries");
  Mat3 M;
  for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = a.at(i).get<double>();
  return M;
}

}  // namespace detail

inline nlohmann::json to_json(const WarpSpec& w) {
  return {{"H_O", detail::mat3_json(w.frontalize)},
          {"H_s", detail::mat3_json(w.scale)},
          {"T", detail::mat3_json(w.translate)},
          {"W", detail::mat3_json(w.full())},
          {"canvas", {w.canvas_width, w.canvas_height}},
          {"s", w.s},
          {"dv", w.dv}};
}

inline WarpSpec warp_spec_from_json(const nlohmann::json& j) {
  WarpSpec w;
  w.frontalize = detail::mat3_from_json(j.at("H_O"));
  w.scale = detail::mat3_from_json(j.at("H_s"));
  w.translate = detail::mat3_from_json(j.at("T"));
  w.canvas_width = j.at("canvas").at(0).get<int>();
  w.canvas_height = j.at("canvas").at(1).get<int>();
  w.s = j.at("s").get<double>();
  w.dv = j.at("dv").get<double>();
  return w;
}

}  // namespace eco
