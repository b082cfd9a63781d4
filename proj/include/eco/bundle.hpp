#pragma once

// Reconstruction bundle: calibrated intrinsics plus one world pose per frame.
//
//   { "intrinsics": {fx, fy, cx, cy, width, height},
//     "frames": [{ "id", "image_path", "R": [9 row-major], "C": [3] }] }
//
// An optional top-level "store" string tags the capture site.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eco/geometry.hpp"

namespace eco {

struct Frame {
  std::string id;
  std::string image_path;
  Pose pose;
};

struct Bundle {
  CameraIntrinsics intrinsics;
  std::vector<Frame> frames;
  std::string store;
  /// Directory the bundle was loaded from; image paths resolve against it.
  std::filesystem::path base_dir;

  const Frame* find(const std::string& id) const {
    for (const auto& f : frames)
      if (f.id == id) return &f;
    return nullptr;
  }

  const Frame& at(const std::string& id) const {
    if (const Frame* f = find(id)) return *f;
    fail(ErrorCode::not_found, "unknown frame '" + id + "'");
  }

  std::filesystem::path image_file(const Frame& f) const {
    std::filesystem::path p(f.image_path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

namespace detail {

inline double json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    fail(ErrorCode::bad_format, std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

inline std::string json_id(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  fail(ErrorCode::bad_format, "frame id must be a string or integer");
}

}  // namespace detail

inline nlohmann::json to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
          {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  CameraIntrinsics K;
  K.fx = detail::json_number(j, "fx");
  K.fy = detail::json_number(j, "fy");
  K.cx = detail::json_number(j, "cx");
  K.cy = detail::json_number(j, "cy");
  K.width = static_cast<int>(detail::json_number(j, "width"));
  K.height = static_cast<int>(detail::json_number(j, "height"));
  return K;
}

inline nlohmann::json to_json(const Pose& pose) {
  nlohmann::json R = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R.push_back(pose.R(r, c));
  return {{"R", R}, {"C", {pose.C.x(), pose.C.y(), pose.C.z()}}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
  if (!j.contains("R") || !j.at("R").is_array() || j.at("R").size() != 9)
    fail(ErrorCode::bad_format, "pose needs 'R' with 9 numbers");
  if (!j.contains("C") || !j.at("C").is_array() || j.at("C").size() != 3)
    fail(ErrorCode::bad_format, "pose needs 'C' with 3 numbers");
  Pose pose;
  for (int i = 0; i < 9; ++i) pose.R(i / 3, i % 3) = j.at("R").at(i).get<double>();
  for (int i = 0; i < 3; ++i) pose.C(i) = j.at("C").at(i).get<double>();
  return pose;
}

inline nlohmann::json to_json(const Bundle& b) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : b.frames) {
    nlohmann::json jf = to_json(f.pose);
    jf["id"] = f.id;
    jf["image_path"] = f.image_path;
    frames.push_back(std::move(jf));
  }
  nlohmann::json j = {{"intrinsics", to_json(b.intrinsics)}, {"frames", frames}};
  if (!b.store.empty()) j["store"] = b.store;
  return j;
}

/// Parses and validates: intrinsics invariants, orthonormal rotations with
/// unit determinant, unique frame ids.
inline Bundle bundle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("intrinsics") || !j.contains("frames"))
    fail(ErrorCode::bad_format, "bundle needs 'intrinsics' and 'frames'");
  Bundle b;
  b.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  b.intrinsics.validate();
  if (j.contains("store")) b.store = j.at("store").get<std::string>();
  for (const auto& jf : j.at("frames")) {
    Frame f;
    if (!jf.contains("id")) fail(ErrorCode::bad_format, "frame without id");
    f.id = detail::json_id(jf.at("id"));
    f.image_path = jf.value("image_path", std::string{});
    f.pose = pose_from_json(jf);
    try {
      f.pose.validate();
    } catch (const Error& e) {
      fail(e.code(), "frame '" + f.id + "': " + e.what());
    }
    if (b.find(f.id)) fail(ErrorCode::bad_format, "duplicate frame id '" + f.id + "'");
    b.frames.push_back(std::move(f));
  }
  return b;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Bundle load_bundle(const std::filesystem::path& path) {
  Bundle b;
  try {
    b = bundle_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, path.string() + ": " + e.what());
  }
  b.base_dir = path.parent_path();
  return b;
}

inline void save_bundle(const std::filesystem::path& path, const Bundle& b) {
  write_json_file(path, to_json(b));
}

}  // namespace eco
