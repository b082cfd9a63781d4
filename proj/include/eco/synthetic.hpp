#pragma once

// Procedural Manhattan scenes for geometric ground truth: textured cuboids,
// camera trajectories, a nearest-sample painter's-algorithm renderer and an
// independent scalar projector for oracle values.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "eco/annotation.hpp"
#include "eco/bundle.hpp"
#include "eco/evaluation.hpp"
#include "eco/image.hpp"

namespace eco::synth {

enum class Preset { single_face, aisle, orbit };

inline Preset preset_from_string(const std::string& s) {
  if (s == "single-face") return Preset::single_face;
  if (s == "aisle") return Preset::aisle;
  if (s == "orbit") return Preset::orbit;
  fail(ErrorCode::invalid_argument, "unknown preset '" + s + "' (single-face|aisle|orbit)");
}

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::single_face: return "single-face";
    case Preset::aisle: return "aisle";
    case Preset::orbit: return "orbit";
  }
  return "?";
}

/// Checkerboard in face-local coordinates (right, down), cell size in world units.
struct FaceTexture {
  Rgb a{200, 200, 200};
  Rgb b{60, 60, 60};
  double cell = 0.25;
};

struct SceneBox {
  Cuboid box;
  std::array<FaceTexture, 6> textures{};
};

struct SyntheticScene {
  Preset preset = Preset::single_face;
  std::uint64_t seed = 0;
  CameraIntrinsics intrinsics;
  SceneAxes axes;
  std::vector<SceneBox> boxes;
  std::vector<Pose> trajectory;
  std::string store = "synthetic";
};

struct PresetOptions {
  int width = 640;
  int height = 480;
  double focal = 500.0;
  int frames = 0;  // 0 = preset default
  double max_tilt_deg = 60.0;
};

/// Palette per category so faces of different categories are separable.
inline FaceTexture category_texture(const std::string& category, std::mt19937_64& rng) {
  static const std::array<std::pair<Rgb, Rgb>, 6> palette{{
      {{210, 160, 80}, {120, 70, 30}},    // bread
      {{230, 200, 40}, {40, 90, 200}},    // cereal
      {{250, 220, 120}, {200, 120, 20}},  // cheese
      {{240, 240, 250}, {80, 150, 230}},  // dairy
      {{150, 210, 240}, {20, 60, 140}},   // frozen-food
      {{200, 40, 50}, {240, 180, 180}},   // meat
  }};
  const auto& cats = default_categories();
  std::size_t k = static_cast<std::size_t>(std::find(cats.begin(), cats.end(), category) - cats.begin());
  if (k >= palette.size()) k = std::hash<std::string>{}(category) % palette.size();
  std::uniform_real_distribution<double> cell(0.15, 0.3);
  return {palette[k].first, palette[k].second, cell(rng)};
}

/// World-to-camera pose at `center` looking along `forward`, with the image
/// down axis as close to `down` as possible.
inline Pose look_along(const Vec3& center, const Vec3& forward, const Vec3& down) {
  const Vec3 z = forward.normalized();
  const Vec3 x = down.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Pose p;
  p.R.row(0) = x.transpose();
  p.R.row(1) = y.transpose();
  p.R.row(2) = z.transpose();
  p.C = center;
  return p;
}

namespace detail {

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Right-handed scene axes (x, y, gravity) from a rotation's columns.
inline SceneAxes axes_from(const Mat3& Q) {
  SceneAxes a;
  a.x_dir = Q.col(0);
  a.gravity = Q.col(1);
  a.y_dir = a.gravity.cross(a.x_dir);
  return a;
}

inline void tag_textures(SceneBox& sb, std::mt19937_64& rng) {
  for (auto& t : sb.textures) t = category_texture(sb.box.category, rng);
}

/// Slight random roll/pitch so cameras are not perfectly level.
inline Vec3 jittered_down(const SceneAxes& axes, std::mt19937_64& rng, double max_deg) {
  std::uniform_real_distribution<double> u(-max_deg, max_deg);
  const double a = u(rng) * std::numbers::pi / 180.0;
  const double b = u(rng) * std::numbers::pi / 180.0;
  return (axes.gravity + std::tan(a) * axes.x_dir + std::tan(b) * axes.y_dir).normalized();
}

}  // namespace detail

/// Deterministic per (preset, seed). Scene axes are randomly rotated with
/// respect to the world frame.
inline SyntheticScene generate(Preset preset, std::uint64_t seed, const PresetOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  SyntheticScene s;
  s.preset = preset;
  s.seed = seed;
  s.intrinsics = {opt.focal, opt.focal, (opt.width - 1) / 2.0, (opt.height - 1) / 2.0, opt.width, opt.height};
  s.axes = detail::axes_from(detail::random_rotation(rng));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const Vec3 origin(uniform(-5, 5), uniform(-5, 5), uniform(-5, 5));
  const double deg = std::numbers::pi / 180.0;

  auto scene_point = [&](double x, double y, double z) {
    return Vec3(origin + x * s.axes.x_dir + y * s.axes.y_dir + z * s.axes.gravity);
  };
  auto make_box = [&](const Vec3& o, std::array<double, 6> ext, const std::string& cat) {
    SceneBox sb;
    sb.box.origin = o;
    sb.box.axes = s.axes;
    sb.box.extents = ext;
    sb.box.category = cat;
    detail::tag_textures(sb, rng);
    return sb;
  };

  switch (preset) {
    case Preset::single_face: {
      // shelf whose -y face looks at the camera; cameras stand off at a
      // random yaw of up to max_tilt_deg from the face normal
      const double w = uniform(1.5, 3.0), h = uniform(1.0, 2.0);
      const auto& cats = default_categories();
      const std::string cat = cats[static_cast<std::size_t>(uniform(0, cats.size())) % cats.size()];
      s.boxes.push_back(make_box(scene_point(0, 0, 0), {-w / 2, w / 2, 0.0, 0.6, -h / 2, h / 2}, cat));
      const int n = opt.frames > 0 ? opt.frames : 4;
      const Vec3 target = scene_point(0, 0, 0);
      for (int i = 0; i < n; ++i) {
        const double yaw = uniform(-opt.max_tilt_deg, opt.max_tilt_deg) * deg;
        const double dist = uniform(2.2, 3.5) * std::max(w, h) / 2.0 + 1.0;
        const Vec3 dir = std::cos(yaw) * Vec3(-s.axes.y_dir) + std::sin(yaw) * s.axes.x_dir;
        const Vec3 eye = target + dist * dir + uniform(-0.1, 0.1) * h * s.axes.gravity;
        s.trajectory.push_back(look_along(eye, target - eye, detail::jittered_down(s.axes, rng, 3.0)));
      }
      break;
    }
    case Preset::aisle: {
      // two shelf rows facing each other across an aisle of half-width a;
      // the floor is at z = 0 and gravity is +z
      const double a = uniform(1.2, 1.8);
      const int per_row = 6;
      const double seg = 2.0;
      const auto& cats = default_categories();
      for (int side = 0; side < 2; ++side) {
        for (int k = 0; k < per_row; ++k) {
          const std::string& cat = cats[(k + 3 * side) % cats.size()];
          const double x0 = k * seg;
          const double hgt = uniform(1.6, 2.0);
          if (side == 0)  // left row, beyond +a, front face -y
            s.boxes.push_back(make_box(scene_point(x0, a, 0), {0.0, seg, 0.0, 0.8, -hgt, 0.0}, cat));
          else  // right row, beyond -a, front face +y
            s.boxes.push_back(make_box(scene_point(x0, -a, 0), {0.0, seg, -0.8, 0.0, -hgt, 0.0}, cat));
        }
      }
      const int n = opt.frames > 0 ? opt.frames : 24;
      const double length = per_row * seg;
      for (int i = 0; i < n; ++i) {
        const double x = 0.5 + (length - 1.0) * (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1));
        const double side = (i % 2 == 0) ? 1.0 : -1.0;
        const double yaw = uniform(35.0, 65.0) * deg;
        const Vec3 eye = scene_point(x, uniform(-0.2, 0.2), -uniform(1.4, 1.7));
        const Vec3 fwd = std::cos(yaw) * s.axes.x_dir + side * std::sin(yaw) * s.axes.y_dir +
                         std::tan(uniform(2.0, 10.0) * deg) * s.axes.gravity;
        s.trajectory.push_back(look_along(eye, fwd, detail::jittered_down(s.axes, rng, 2.0)));
      }
      s.store = "aisle-" + std::to_string(seed);
      break;
    }
    case Preset::orbit: {
      const double w = uniform(1.5, 2.5), h = uniform(1.2, 2.0), d = uniform(0.5, 1.0);
      s.boxes.push_back(make_box(scene_point(0, 0, 0), {-w / 2, w / 2, 0.0, d, -h / 2, h / 2}, "dairy"));
      const int n = opt.frames > 0 ? opt.frames : 200;
      const Vec3 target = scene_point(0, 0, 0);
      const double radius = uniform(3.5, 5.0);
      for (int i = 0; i < n; ++i) {
        // arc in front of the -y face
        const double t = n == 1 ? 0.0 : -1.0 + 2.0 * i / (n - 1);
        const double yaw = t * 70.0 * deg;
        const Vec3 eye = target + radius * (std::cos(yaw) * Vec3(-s.axes.y_dir) + std::sin(yaw) * s.axes.x_dir) -
                         0.3 * s.axes.gravity;
        s.trajectory.push_back(look_along(eye, target - eye, detail::jittered_down(s.axes, rng, 2.0)));
      }
      s.store = "orbit";
      break;
    }
  }
  return s;
}

// ----------------------------------------------------------- scalar oracle

/// Pinhole projection in plain scalar arithmetic, sharing no code with
/// eco::project. R is row-major world-to-camera. Returns false when the
/// point is not in front of the camera.
inline bool scalar_project(double fx, double fy, double cx, double cy, const double R[9], const double C[3],
                           const double X[3], double& u, double& v) {
  const double dx = X[0] - C[0], dy = X[1] - C[1], dz = X[2] - C[2];
  const double xc = R[0] * dx + R[1] * dy + R[2] * dz;
  const double yc = R[3] * dx + R[4] * dy + R[5] * dz;
  const double zc = R[6] * dx + R[7] * dy + R[8] * dz;
  if (!(zc > 0.0)) return false;
  u = fx * (xc / zc) + cx;
  v = fy * (yc / zc) + cy;
  return true;
}

inline bool scalar_project(const CameraIntrinsics& K, const Pose& pose, const Vec3& X, Pixel& out) {
  double R[9], C[3], P[3];
  for (int i = 0; i < 9; ++i) R[i] = pose.R(i / 3, i % 3);
  for (int i = 0; i < 3; ++i) {
    C[i] = pose.C(i);
    P[i] = X(i);
  }
  double u = 0, v = 0;
  if (!scalar_project(K.fx, K.fy, K.cx, K.cy, R, C, P, u, v)) return false;
  out = {u, v};
  return true;
}

// --------------------------------------------------------------- rendering

struct Render {
  Image image;
  /// Per pixel: box * 6 + face, or -1 for background.
  std::vector<int> face_id;

  int id_at(int x, int y) const { return face_id[static_cast<std::size_t>(y) * image.width() + x]; }
};

inline Rgb texture_color(const FaceTexture& t, double right, double down) {
  const long i = static_cast<long>(std::floor(right / t.cell));
  const long j = static_cast<long>(std::floor(down / t.cell));
  return ((i + j) % 2 == 0) ? t.a : t.b;
}

/// Nearest-sample render: each face is ray-cast over the pixels of its
/// projected bounding box, far faces first, back faces skipped.
inline Render render(const SyntheticScene& scene, const CameraIntrinsics& K, const Pose& pose) {
  Render out{Image(K.width, K.height), std::vector<int>(static_cast<std::size_t>(K.width) * K.height, -1)};

  struct Item {
    int box, face;
    double dist;
  };
  std::vector<Item> items;
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const Cuboid& box = scene.boxes[b].box;
    for (Face f : kAllFaces) {
      const auto corners = box.face_corners(f);
      const Vec3 center = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
      if ((pose.C - center).dot(box.outward_normal(f)) <= 0.0) continue;
      items.push_back({static_cast<int>(b), static_cast<int>(f), (center - pose.C).norm()});
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.dist > b.dist; });

  const Mat3 Kinv = K.inverse();
  const Mat3 Rt = pose.R.transpose();
  for (const auto& it : items) {
    const Cuboid& box = scene.boxes[it.box].box;
    const Face face = static_cast<Face>(it.face);
    const auto c = box.face_corners(face);
    const Vec3 n = box.outward_normal(face);
    const Vec3 right = c[1] - c[0];
    const Vec3 down = c[3] - c[0];
    const double rlen2 = right.squaredNorm(), dlen2 = down.squaredNorm();
    const double rlen = std::sqrt(rlen2), dlen = std::sqrt(dlen2);

    int x0 = 0, y0 = 0, x1 = K.width - 1, y1 = K.height - 1;
    bool all_front = true;
    double minu = 1e300, minv = 1e300, maxu = -1e300, maxv = -1e300;
    for (const auto& X : c) {
      const Vec3 pc = pose.to_camera(X);
      if (!(pc.z() > kMinDepth)) {
        all_front = false;
        break;
      }
      const double u = K.fx * pc.x() / pc.z() + K.cx, v = K.fy * pc.y() / pc.z() + K.cy;
      minu = std::min(minu, u), maxu = std::max(maxu, u);
      minv = std::min(minv, v), maxv = std::max(maxv, v);
    }
    if (all_front) {
      x0 = std::max(x0, static_cast<int>(std::floor(minu)) - 1);
      y0 = std::max(y0, static_cast<int>(std::floor(minv)) - 1);
      x1 = std::min(x1, static_cast<int>(std::ceil(maxu)) + 1);
      y1 = std::min(y1, static_cast<int>(std::ceil(maxv)) + 1);
    }
    const auto& tex = scene.boxes[it.box].textures[it.face];
    const int id = it.box * 6 + it.face;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec3 d = Rt * (Kinv * Vec3(x, y, 1.0));
        const double denom = n.dot(d);
        if (std::abs(denom) < 1e-15) continue;
        const double t = n.dot(c[0] - pose.C) / denom;
        if (!(t > 0.0)) continue;
        const Vec3 P = pose.C + t * d - c[0];
        const double a = P.dot(right) / rlen2;
        const double b = P.dot(down) / dlen2;
        if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) continue;
        out.image.set(x, y, texture_color(tex, a * rlen, b * dlen));
        out.face_id[static_cast<std::size_t>(y) * K.width + x] = id;
      }
    }
  }
  return out;
}

inline Render render(const SyntheticScene& scene, std::size_t frame) {
  return render(scene, scene.intrinsics, scene.trajectory.at(frame));
}

inline std::string frame_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "f%04zu", i);
  return buf;
}

inline Bundle to_bundle(const SyntheticScene& scene) {
  Bundle b;
  b.intrinsics = scene.intrinsics;
  b.store = scene.store;
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i)
    b.frames.push_back({frame_id(i), "frames/" + frame_id(i) + ".png", scene.trajectory[i]});
  return b;
}

/// Same shape as an annotation export (without per-frame polygons).
inline nlohmann::json labels_json(const SyntheticScene& scene) {
  nlohmann::json boxes = nlohmann::json::array();
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    nlohmann::json jb = to_json(scene.boxes[i].box);
    jb["id"] = i;
    boxes.push_back(std::move(jb));
  }
  return {{"boxes", boxes}};
}

/// Per frame: gravity and every face normal in the camera frame, and each
/// face's plane depth (distance from the camera center to the face plane).
inline nlohmann::json ground_truth_json(const SyntheticScene& scene) {
  auto v3 = [](const Vec3& v) { return nlohmann::json{v.x(), v.y(), v.z()}; };
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) {
    const Pose& p = scene.trajectory[i];
    nlohmann::json faces = nlohmann::json::array();
    for (std::size_t b = 0; b < scene.boxes.size(); ++b)
      for (Face f : kAllFaces) {
        const auto face = scene.boxes[b].box.face(f);
        faces.push_back({{"box", b},
                         {"face", std::string(to_string(f))},
                         {"normal_cam", v3(p.direction_to_camera(face.normal))},
                         {"plane_depth", std::abs(face.normal.dot(p.C) - face.offset)},
                         {"centroid_distance", (face.centroid() - p.C).norm()}});
      }
    frames.push_back({{"id", frame_id(i)}, {"gravity_cam", v3(p.direction_to_camera(scene.axes.gravity))},
                      {"faces", faces}});
  }
  return {{"preset", to_string(scene.preset)},
          {"seed", scene.seed},
          {"axes", to_json(scene.axes)},
          {"frames", frames}};
}

/// Writes frames/*.png, bundle.json, labels.json and ground_truth.json.
inline void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  const Bundle b = to_bundle(scene);
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) write_png(dir / b.frames[i].image_path, render(scene, i).image);
  save_bundle(dir / "bundle.json", b);
  write_json_file(dir / "labels.json", labels_json(scene));
  write_json_file(dir / "ground_truth.json", ground_truth_json(scene));
}

}  // namespace eco::synth
