#pragma once

// Geometry backend of the 3D-box labeling loop. A session owns one
// reconstruction bundle, the scene axes recovered from two clicked vanishing
// points, an origin triangulated from a two-view correspondence, and the
// boxes built on them. Every mutation is appended to an edit log; replaying
// the log on a fresh session reproduces the state bit-exactly.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eco/bundle.hpp"
#include "eco/geometry.hpp"
#include "eco/rectification.hpp"

namespace eco {

/// Faces of a scene-aligned box. z is the gravity axis.
enum class Face { minus_x = 0, plus_x = 1, minus_y = 2, plus_y = 3, minus_z = 4, plus_z = 5 };

inline constexpr std::array<Face, 6> kAllFaces{Face::minus_x, Face::plus_x, Face::minus_y,
                                               Face::plus_y,  Face::minus_z, Face::plus_z};

inline std::string_view to_string(Face f) {
  static constexpr std::array<std::string_view, 6> names{"-x", "+x", "-y", "+y", "-z", "+z"};
  return names[static_cast<int>(f)];
}

inline Face face_from_string(std::string_view s) {
  for (Face f : kAllFaces)
    if (to_string(f) == s) return f;
  fail(ErrorCode::invalid_argument, "unknown face '" + std::string(s) + "'");
}

inline int face_axis(Face f) { return static_cast<int>(f) / 2; }
inline bool face_is_max(Face f) { return static_cast<int>(f) % 2 == 1; }
inline bool face_is_vertical(Face f) { return face_axis(f) < 2; }

struct Cuboid {
  Vec3 origin = Vec3::Zero();
  SceneAxes axes;
  /// Signed offsets along (x_dir, y_dir, gravity): min_x, max_x, min_y,
  /// max_y, min_z, max_z. Indexed by Face.
  std::array<double, 6> extents{-0.5, 0.5, -0.5, 0.5, -0.5, 0.5};
  std::string category;

  Vec3 axis(int a) const { return a == 0 ? axes.x_dir : a == 1 ? axes.y_dir : axes.gravity; }

  double lo(int a) const { return extents[2 * a]; }
  double hi(int a) const { return extents[2 * a + 1]; }

  Vec3 point(double ox, double oy, double oz) const {
    return origin + ox * axes.x_dir + oy * axes.y_dir + oz * axes.gravity;
  }

  /// Corner i has bit 0 = max x, bit 1 = max y, bit 2 = max z.
  Vec3 corner(int i) const {
    return point(extents[(i & 1) ? 1 : 0], extents[(i & 2) ? 3 : 2], extents[(i & 4) ? 5 : 4]);
  }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) c[i] = corner(i);
    return c;
  }

  Vec3 outward_normal(Face f) const {
    const Vec3 a = axis(face_axis(f));
    return face_is_max(f) ? a : Vec3(-a);
  }

  /// Corner indices of a face in cyclic order. Vertical faces run top-left,
  /// top-right, bottom-right, bottom-left as seen from outside with gravity
  /// down (top = min z).
  static std::array<int, 4> face_corner_indices(Face f) {
    switch (f) {
      // right (seen from outside) = normal x gravity
      case Face::plus_x: return {1 | 2, 1, 1 | 4, 1 | 2 | 4};  // right is -y
      case Face::minus_x: return {0, 2, 2 | 4, 4};             // right is +y
      case Face::plus_y: return {2, 1 | 2, 1 | 2 | 4, 2 | 4};  // right is +x
      case Face::minus_y: return {1, 0, 4, 1 | 4};             // right is -x
      case Face::minus_z: return {0, 1, 1 | 2, 2};
      case Face::plus_z: return {4, 1 | 4, 1 | 2 | 4, 2 | 4};
    }
    return {0, 0, 0, 0};
  }

  std::array<Vec3, 4> face_corners(Face f) const {
    const auto idx = face_corner_indices(f);
    return {corner(idx[0]), corner(idx[1]), corner(idx[2]), corner(idx[3])};
  }

  CuboidFace face(Face f) const { return CuboidFace::from_corners(face_corners(f), outward_normal(f)); }

  bool contains(const Vec3& p) const {
    const Vec3 d = p - origin;
    for (int a = 0; a < 3; ++a) {
      const double t = d.dot(axis(a));
      if (!(t > lo(a) && t < hi(a))) return false;
    }
    return true;
  }
};

struct FacePolygon {
  Face face = Face::plus_x;
  std::array<Pixel, 4> corners{};
  bool visible = false;
};

struct BoxProjection {
  std::string frame;
  std::array<std::optional<Pixel>, 8> corners{};
  std::vector<FacePolygon> faces;  // faces whose four corners are in front of the camera
  bool camera_inside = false;

  bool visible() const {
    for (const auto& f : faces)
      if (f.visible) return true;
    return false;
  }
};

/// Projects all corners; a face is visible when its outward normal faces the
/// camera and all four of its corners have positive depth.
inline BoxProjection project_cuboid(const Cuboid& box, const CameraIntrinsics& K, const Pose& pose,
                                    const std::string& frame_id = {}) {
  BoxProjection out;
  out.frame = frame_id;
  out.camera_inside = box.contains(pose.C);
  std::array<bool, 8> in_front{};
  for (int i = 0; i < 8; ++i) {
    const Vec3 X = box.corner(i);
    in_front[i] = pose.to_camera(X).z() > kMinDepth;
    if (in_front[i]) out.corners[i] = project(K, pose, X);
  }
  for (Face f : kAllFaces) {
    const auto idx = Cuboid::face_corner_indices(f);
    if (!(in_front[idx[0]] && in_front[idx[1]] && in_front[idx[2]] && in_front[idx[3]])) continue;
    FacePolygon poly;
    poly.face = f;
    for (int k = 0; k < 4; ++k) poly.corners[k] = *out.corners[idx[k]];
    const Vec3 center = 0.25 * (box.corner(idx[0]) + box.corner(idx[1]) + box.corner(idx[2]) + box.corner(idx[3]));
    poly.visible = !out.camera_inside && (pose.C - center).dot(box.outward_normal(f)) > 0.0;
    out.faces.push_back(poly);
  }
  return out;
}

struct Propagation {
  std::vector<BoxProjection> labeled;  // frames where the box is visible
  std::vector<std::string> skipped;
};

class AnnotationSession {
 public:
  explicit AnnotationSession(Bundle bundle) : bundle_(std::move(bundle)) {}

  const Bundle& bundle() const noexcept { return bundle_; }
  const std::optional<SceneAxes>& axes() const noexcept { return axes_; }
  const std::optional<Vec3>& origin_seed() const noexcept { return origin_; }
  const std::map<int, Cuboid>& boxes() const noexcept { return boxes_; }
  const std::vector<nlohmann::json>& edit_log() const noexcept { return log_; }

  const Cuboid& box(int id) const {
    auto it = boxes_.find(id);
    if (it == boxes_.end()) fail(ErrorCode::not_found, "unknown box " + std::to_string(id));
    return it->second;
  }

  SceneAxes set_vanishing_points(const std::string& frame_id, const Pixel& vp_x, const Pixel& vp_y) {
    const Frame& f = bundle_.at(frame_id);
    const SceneAxes axes = axes_from_vanishing_points(bundle_.intrinsics, f.pose, vp_x, vp_y);
    axes_ = axes;
    // boxes share the session axes
    for (auto& [id, b] : boxes_) b.axes = axes;
    log_.push_back({{"op", "vps"}, {"frame", frame_id}, {"vp_x", {vp_x.x(), vp_x.y()}}, {"vp_y", {vp_y.x(), vp_y.y()}}});
    return axes;
  }

  Vec3 triangulate_origin(const std::string& frame_a, const Pixel& px_a, const std::string& frame_b,
                          const Pixel& px_b) {
    const Frame& a = bundle_.at(frame_a);
    const Frame& b = bundle_.at(frame_b);
    const Vec3 X = triangulate(px_a, a.pose, px_b, b.pose, bundle_.intrinsics);
    origin_ = X;
    log_.push_back({{"op", "origin"},
                    {"frame_a", frame_a},
                    {"px_a", {px_a.x(), px_a.y()}},
                    {"frame_b", frame_b},
                    {"px_b", {px_b.x(), px_b.y()}}});
    return X;
  }

  /// New box at the triangulated origin (or `origin` if given) on the
  /// session axes.
  int create_box(const std::string& category, const std::optional<std::array<double, 6>>& extents = std::nullopt,
                 const std::optional<Vec3>& origin = std::nullopt) {
    if (!axes_) fail(ErrorCode::invalid_edit, "set vanishing points before creating a box");
    if (!origin && !origin_) fail(ErrorCode::invalid_edit, "triangulate an origin before creating a box");
    Cuboid b;
    b.origin = origin ? *origin : *origin_;
    b.axes = *axes_;
    b.category = category;
    if (extents) b.extents = *extents;
    for (int a = 0; a < 3; ++a)
      if (!(b.hi(a) > b.lo(a))) fail(ErrorCode::invalid_edit, "box extents must have positive volume");
    const int id = next_id_++;
    boxes_.emplace(id, b);
    nlohmann::json entry = {{"op", "box"}, {"id", id}, {"category", category}};
    if (extents) entry["extents"] = *extents;
    if (origin) entry["origin"] = {origin->x(), origin->y(), origin->z()};
    log_.push_back(std::move(entry));
    return id;
  }

  /// Shifts one face by `delta` along its axis; rejected (state unchanged)
  /// if the box would lose positive volume.
  const Cuboid& move_face(int id, Face face, double delta) {
    auto it = boxes_.find(id);
    if (it == boxes_.end()) fail(ErrorCode::not_found, "unknown box " + std::to_string(id));
    if (!std::isfinite(delta)) fail(ErrorCode::invalid_edit, "non-finite face move");
    Cuboid moved = it->second;
    moved.extents[static_cast<int>(face)] += delta;
    const int a = face_axis(face);
    if (!(moved.hi(a) > moved.lo(a)))
      fail(ErrorCode::invalid_edit, "move would invert the box along axis " + std::to_string(a));
    it->second = moved;
    log_.push_back({{"op", "move"}, {"id", id}, {"face", std::string(to_string(face))}, {"delta", delta}});
    return it->second;
  }

  BoxProjection project_box(int id, const std::string& frame_id) const {
    const Frame& f = bundle_.at(frame_id);
    return project_cuboid(box(id), bundle_.intrinsics, f.pose, f.id);
  }

  Propagation propagate(int id) const {
    Propagation out;
    for (const auto& f : bundle_.frames) {
      auto p = project_cuboid(box(id), bundle_.intrinsics, f.pose, f.id);
      if (p.visible())
        out.labeled.push_back(std::move(p));
      else
        out.skipped.push_back(f.id);
    }
    return out;
  }

  /// Applies one logged edit.
  void apply(const nlohmann::json& e) {
    const auto op = e.at("op").get<std::string>();
    auto px = [](const nlohmann::json& a) { return Pixel(a.at(0).get<double>(), a.at(1).get<double>()); };
    if (op == "vps") {
      set_vanishing_points(e.at("frame").get<std::string>(), px(e.at("vp_x")), px(e.at("vp_y")));
    } else if (op == "origin") {
      triangulate_origin(e.at("frame_a").get<std::string>(), px(e.at("px_a")), e.at("frame_b").get<std::string>(),
                         px(e.at("px_b")));
    } else if (op == "box") {
      std::optional<std::array<double, 6>> ext;
      if (e.contains("extents")) ext = e.at("extents").get<std::array<double, 6>>();
      std::optional<Vec3> origin;
      if (e.contains("origin"))
        origin = Vec3(e.at("origin").at(0).get<double>(), e.at("origin").at(1).get<double>(),
                      e.at("origin").at(2).get<double>());
      const int id = create_box(e.at("category").get<std::string>(), ext, origin);
      if (e.contains("id") && e.at("id").get<int>() != id) fail(ErrorCode::bad_format, "edit log box ids out of order");
    } else if (op == "move") {
      move_face(e.at("id").get<int>(), face_from_string(e.at("face").get<std::string>()), e.at("delta").get<double>());
    } else {
      fail(ErrorCode::bad_format, "unknown edit '" + op + "'");
    }
  }

  static AnnotationSession replay(Bundle bundle, const std::vector<nlohmann::json>& log) {
    AnnotationSession s(std::move(bundle));
    for (const auto& e : log) s.apply(e);
    return s;
  }

 private:
  Bundle bundle_;
  std::optional<SceneAxes> axes_;
  std::optional<Vec3> origin_;
  std::map<int, Cuboid> boxes_;
  int next_id_ = 0;
  std::vector<nlohmann::json> log_;
};

// -------------------------------------------------------------------- JSON

inline nlohmann::json to_json(const SceneAxes& a) {
  return {a.x_dir.x(), a.x_dir.y(), a.x_dir.z(), a.y_dir.x(),   a.y_dir.y(),
          a.y_dir.z(), a.gravity.x(), a.gravity.y(), a.gravity.z()};
}

inline SceneAxes scene_axes_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 9) fail(ErrorCode::bad_format, "axes need 9 numbers");
  SceneAxes a;
  for (int i = 0; i < 3; ++i) {
    a.x_dir(i) = j.at(i).get<double>();
    a.y_dir(i) = j.at(3 + i).get<double>();
    a.gravity(i) = j.at(6 + i).get<double>();
  }
  return a;
}

inline nlohmann::json to_json(const Cuboid& b) {
  return {{"category", b.category},
          {"origin", {b.origin.x(), b.origin.y(), b.origin.z()}},
          {"axes", to_json(b.axes)},
          {"extents", b.extents}};
}

inline Cuboid cuboid_from_json(const nlohmann::json& j) {
  Cuboid b;
  try {
    b.category = j.value("category", std::string{});
    for (int i = 0; i < 3; ++i) b.origin(i) = j.at("origin").at(i).get<double>();
    b.axes = scene_axes_from_json(j.at("axes"));
    b.extents = j.at("extents").get<std::array<double, 6>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, std::string("box: ") + e.what());
  }
  for (int a = 0; a < 3; ++a)
    if (!(b.hi(a) > b.lo(a))) fail(ErrorCode::bad_format, "box with non-positive extent");
  return b;
}

inline nlohmann::json to_json(const BoxProjection& p) {
  nlohmann::json corners = nlohmann::json::array();
  for (const auto& c : p.corners) corners.push_back(c ? nlohmann::json{c->x(), c->y()} : nlohmann::json(nullptr));
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : p.faces) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& c : f.corners) poly.push_back({c.x(), c.y()});
    faces.push_back({{"face", std::string(to_string(f.face))}, {"polygon", poly}, {"visible", f.visible}});
  }
  return {{"frame", p.frame},
          {"corners", corners},
          {"faces", faces},
          {"visible", p.visible()},
          {"camera_inside", p.camera_inside}};
}

/// Boxes plus the visible-face polygons of every frame each box is seen in.
inline nlohmann::json export_labels(const AnnotationSession& s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& [id, b] : s.boxes()) {
    nlohmann::json jb = to_json(b);
    jb["id"] = id;
    nlohmann::json frames = nlohmann::json::object();
    for (const auto& p : s.propagate(id).labeled) {
      nlohmann::json polys = nlohmann::json::array();
      for (const auto& f : p.faces) {
        if (!f.visible) continue;
        nlohmann::json poly = nlohmann::json::array();
        for (const auto& c : f.corners) poly.push_back({c.x(), c.y()});
        polys.push_back({{"face", std::string(to_string(f.face))}, {"polygon", poly}});
      }
      frames[p.frame] = polys;
    }
    jb["frames"] = frames;
    boxes.push_back(std::move(jb));
  }
  return {{"boxes", boxes}};
}

/// Reads the "boxes" list of a label export.
inline std::vector<Cuboid> load_labels(const nlohmann::json& j) {
  if (!j.contains("boxes") || !j.at("boxes").is_array()) fail(ErrorCode::bad_format, "labels need a 'boxes' list");
  std::vector<Cuboid> out;
  for (const auto& jb : j.at("boxes")) out.push_back(cuboid_from_json(jb));
  return out;
}

}  // namespace eco
