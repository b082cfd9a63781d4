#pragma once

// HTTP/JSON front of the annotation sessions.
//
//   POST /session                         {"bundle": path}            -> {"id"}
//   POST /session/{id}/vps                {"frame", "vp_x", "vp_y"}   -> axes
//   POST /session/{id}/origin             {"frame_a", "px_a", "frame_b", "px_b"} -> origin
//   POST /session/{id}/box                {"category", "extents"?, "origin"?} -> box
//   POST /session/{id}/box/{b}/move       {"face", "delta"}           -> box
//   GET  /session/{id}/box/{b}/project/{frame}                        -> projection
//   POST /session/{id}/box/{b}/propagate                              -> per-frame projections
//   GET  /session/{id}/export                                         -> labels
//
// Mutations on a session take its lock exclusively; reads share it.

#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <string>

#include <json.hpp>

// Eigen before httplib: <resolv.h> defines a _res macro that collides with
// Eigen parameter names.
#include "eco/annotation.hpp"

#include <httplib.h>

namespace eco {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class AnnotationService {
 public:
  /// Registers an already-loaded bundle; returns the session id.
  std::string open(Bundle bundle) {
    std::unique_lock lock(registry_mutex_);
    const std::string id = std::to_string(next_id_++);
    sessions_.emplace(id, std::make_shared<Entry>(std::move(bundle)));
    return id;
  }

  std::string open(const std::filesystem::path& bundle_path) { return open(load_bundle(bundle_path)); }

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
      return route(method, path, body);
    } catch (const Error& e) {
      return {status_for(e.code()), {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}};
    } catch (const nlohmann::json::exception& e) {
      return {400, {{"error", "bad_format"}, {"message", e.what()}}};
    }
  }

 private:
  struct Entry {
    explicit Entry(Bundle b) : session(std::move(b)) {}
    std::shared_mutex mutex;
    AnnotationSession session;
  };

  static int status_for(ErrorCode code) {
    switch (code) {
      case ErrorCode::not_found: return 404;
      case ErrorCode::invalid_edit: return 409;
      case ErrorCode::bad_format:
      case ErrorCode::invalid_argument:
      case ErrorCode::io:
      case ErrorCode::invalid_rotation:
      case ErrorCode::invalid_intrinsics: return 400;
      default: return 422;
    }
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::shared_lock lock(registry_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorCode::not_found, "unknown session '" + id + "'");
    return it->second;
  }

  static Pixel pixel(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

  static nlohmann::json box_json(int id, const Cuboid& b) {
    nlohmann::json j = to_json(b);
    j["id"] = id;
    return j;
  }

  static nlohmann::json parse(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    return nlohmann::json::parse(body);
  }

  ApiResponse route(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex session_re(R"(^/session/([^/]+)/(vps|origin|box|export)$)");
    static const std::regex move_re(R"(^/session/([^/]+)/box/(\d+)/move$)");
    static const std::regex project_re(R"(^/session/([^/]+)/box/(\d+)/project/([^/]+)$)");
    static const std::regex propagate_re(R"(^/session/([^/]+)/box/(\d+)/propagate$)");
    std::smatch m;

    if (path == "/session" && method == "POST") {
      const auto j = parse(body);
      return {200, {{"id", open(std::filesystem::path(j.at("bundle").get<std::string>()))}}};
    }
    if (std::regex_match(path, m, session_re)) {
      auto entry = find(m[1]);
      const std::string what = m[2];
      if (what == "export" && method == "GET") {
        std::shared_lock lock(entry->mutex);
        return {200, export_labels(entry->session)};
      }
      if (method != "POST") return not_allowed();
      const auto j = parse(body);
      std::unique_lock lock(entry->mutex);
      auto& s = entry->session;
      if (what == "vps")
        return {200, {{"axes", to_json(s.set_vanishing_points(j.at("frame").get<std::string>(), pixel(j.at("vp_x")),
                                                              pixel(j.at("vp_y"))))}}};
      if (what == "origin") {
        const Vec3 X = s.triangulate_origin(j.at("frame_a").get<std::string>(), pixel(j.at("px_a")),
                                            j.at("frame_b").get<std::string>(), pixel(j.at("px_b")));
        return {200, {{"origin", {X.x(), X.y(), X.z()}}}};
      }
      std::optional<std::array<double, 6>> extents;
      if (j.contains("extents")) extents = j.at("extents").get<std::array<double, 6>>();
      std::optional<Vec3> origin;
      if (j.contains("origin"))
        origin = Vec3(j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>(),
                      j.at("origin").at(2).get<double>());
      const int id = s.create_box(j.value("category", std::string{}), extents, origin);
      return {200, box_json(id, s.box(id))};
    }
    if (std::regex_match(path, m, move_re)) {
      if (method != "POST") return not_allowed();
      auto entry = find(m[1]);
      const int box = std::stoi(m[2]);
      const auto j = parse(body);
      std::unique_lock lock(entry->mutex);
      const Cuboid& b = entry->session.move_face(box, face_from_string(j.at("face").get<std::string>()),
                                                 j.at("delta").get<double>());
      return {200, box_json(box, b)};
    }
    if (std::regex_match(path, m, project_re)) {
      if (method != "GET") return not_allowed();
      auto entry = find(m[1]);
      std::shared_lock lock(entry->mutex);
      return {200, to_json(entry->session.project_box(std::stoi(m[2]), m[3]))};
    }
    if (std::regex_match(path, m, propagate_re)) {
      if (method != "POST") return not_allowed();
      auto entry = find(m[1]);
      std::shared_lock lock(entry->mutex);
      const auto prop = entry->session.propagate(std::stoi(m[2]));
      nlohmann::json labeled = nlohmann::json::array();
      for (const auto& p : prop.labeled) labeled.push_back(to_json(p));
      return {200, {{"labeled", labeled}, {"skipped", prop.skipped}}};
    }
    return {404, {{"error", "not_found"}, {"message", "no route " + method + " " + path}}};
  }

  static ApiResponse not_allowed() { return {405, {{"error", "method_not_allowed"}}}; }

  std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  long next_id_ = 0;
};

/// Binds the service to an httplib server. Static files under `static_dir`
/// (if non-empty) are served at "/".
inline void mount(httplib::Server& server, AnnotationService& service, const std::string& static_dir = {}) {
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(R"(/session/.*)", dispatch);
  server.Post(R"(/session(/.*)?)", dispatch);
  server.Put(R"(/session(/.*)?)", dispatch);
  server.Patch(R"(/session(/.*)?)", dispatch);
  server.Delete(R"(/session(/.*)?)", dispatch);
  if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

}  // namespace eco
