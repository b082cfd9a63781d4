#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "eco/annotation_server.hpp"
#include "eco/synthetic.hpp"
#include "support.hpp"

using namespace eco;
using nlohmann::json;

namespace {

struct Fixture {
  synth::SyntheticScene scene;
  std::filesystem::path bundle_path;
};

Fixture write_orbit(const std::string& name, int frames = 8) {
  synth::PresetOptions opt;
  opt.frames = frames;
  Fixture f{synth::generate(synth::Preset::orbit, 21, opt), {}};
  const auto dir = eco::test::scratch_dir(name);
  save_bundle(dir / "bundle.json", synth::to_bundle(f.scene));
  f.bundle_path = dir / "bundle.json";
  return f;
}

json px(const Pixel& p) { return {p.x(), p.y()}; }

// The labeling workflow: vps, origin, box. Returns the session id.
std::string label(AnnotationService& svc, const Fixture& f) {
  const auto& s = f.scene;
  auto r = svc.handle("POST", "/session", json{{"bundle", f.bundle_path.string()}}.dump());
  EXPECT_EQ(r.status, 200);
  const std::string id = r.body["id"];
  const Pose& p0 = s.trajectory[0];
  r = svc.handle("POST", "/session/" + id + "/vps",
                 json{{"frame", "f0000"},
                      {"vp_x", px(project_direction(s.intrinsics, p0, s.axes.x_dir))},
                      {"vp_y", px(project_direction(s.intrinsics, p0, s.axes.y_dir))}}
                     .dump());
  EXPECT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["axes"].size(), 9u);
  const Vec3 o = s.boxes[0].box.origin;
  const std::string last = synth::frame_id(s.trajectory.size() - 1);
  r = svc.handle("POST", "/session/" + id + "/origin",
                 json{{"frame_a", "f0000"},
                      {"px_a", px(project(s.intrinsics, p0, o))},
                      {"frame_b", last},
                      {"px_b", px(project(s.intrinsics, s.trajectory.back(), o))}}
                     .dump());
  EXPECT_EQ(r.status, 200) << r.body.dump();
  EXPECT_LT((Vec3(r.body["origin"][0], r.body["origin"][1], r.body["origin"][2]) - o).norm(), 1e-6);
  r = svc.handle("POST", "/session/" + id + "/box", json{{"category", "dairy"}}.dump());
  EXPECT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["id"], 0);
  return id;
}

}  // namespace

TEST(Service, FullWorkflow) {
  const auto f = write_orbit("svc_flow");
  AnnotationService svc;
  const std::string id = label(svc, f);

  const double step = 0.05;
  for (int i = 0; i < 3; ++i)
    EXPECT_EQ(svc.handle("POST", "/session/" + id + "/box/0/move", json{{"face", "+x"}, {"delta", step}}.dump()).status,
              200);
  auto r = svc.handle("POST", "/session/" + id + "/box/0/move", json{{"face", "+x"}, {"delta", -step}}.dump());
  EXPECT_EQ(r.status, 200);
  EXPECT_DOUBLE_EQ(r.body["extents"][1].get<double>(), 0.5 + step + step + step - step);

  r = svc.handle("GET", "/session/" + id + "/box/0/project/f0003", "");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["frame"], "f0003");

  r = svc.handle("POST", "/session/" + id + "/box/0/propagate", "");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["labeled"].size() + r.body["skipped"].size(), 8u);

  r = svc.handle("GET", "/session/" + id + "/export", "");
  ASSERT_EQ(r.status, 200);
  const auto boxes = load_labels(r.body);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].category, "dairy");
  // shortest round-trip: re-parsing the dump gives identical doubles
  EXPECT_EQ(json::parse(r.body.dump()).dump(), r.body.dump());
}

TEST(Service, ErrorStatuses) {
  const auto f = write_orbit("svc_err", 3);
  AnnotationService svc;
  EXPECT_EQ(svc.handle("GET", "/session/nope/export", "").status, 404);
  EXPECT_EQ(svc.handle("POST", "/session", "{not json").status, 400);
  EXPECT_EQ(svc.handle("POST", "/session", json{{"bundle", "/does/not/exist.json"}}.dump()).status, 400);
  const std::string id = svc.handle("POST", "/session", json{{"bundle", f.bundle_path.string()}}.dump()).body["id"];
  // box before axes
  EXPECT_EQ(svc.handle("POST", "/session/" + id + "/box", json{{"category", "x"}}.dump()).status, 409);
  EXPECT_EQ(svc.handle("GET", "/session/" + id + "/box/0/project/f0000", "").status, 404);
  // degenerate triangulation: same click from the same frame
  auto r = svc.handle("POST", "/session/" + id + "/origin",
                      json{{"frame_a", "f0000"}, {"px_a", {10, 10}}, {"frame_b", "f0000"}, {"px_b", {10, 10}}}.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"], "degenerate_baseline");
  EXPECT_EQ(svc.handle("POST", "/session/" + id + "/vps", json{{"frame", "zzz"}}.dump()).status, 400);
  EXPECT_EQ(svc.handle("DELETE", "/session/" + id + "/export", "").status, 405);
  EXPECT_EQ(svc.handle("GET", "/elsewhere", "").status, 404);
}

TEST(Service, ConcurrentReadsWithSerializedWrites) {
  const auto f = write_orbit("svc_conc", 4);
  AnnotationService svc;
  const std::string id = label(svc, f);
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t)
    readers.emplace_back([&] {
      while (!stop) {
        const auto r = svc.handle("GET", "/session/" + id + "/export", "");
        const double hi = r.body["boxes"][0]["extents"][1];
        // every observed state is one of the writer's committed states
        const double k = (hi - 0.5) / 0.01;
        if (r.status != 200 || std::abs(k - std::round(k)) > 1e-6) ++bad;
      }
    });
  for (int i = 0; i < 100; ++i)
    ASSERT_EQ(svc.handle("POST", "/session/" + id + "/box/0/move", json{{"face", "+x"}, {"delta", 0.01}}.dump()).status,
              200);
  stop = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0);
  const auto r = svc.handle("GET", "/session/" + id + "/export", "");
  EXPECT_NEAR(r.body["boxes"][0]["extents"][1].get<double>(), 1.5, 1e-9);
}

TEST(Service, HttpRoundTrip) {
  const auto f = write_orbit("svc_http", 4);
  AnnotationService svc;
  httplib::Server server;
  mount(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/session", json{{"bundle", f.bundle_path.string()}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const std::string id = json::parse(res->body)["id"];
  res = client.Get(("/session/" + id + "/export").c_str());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["boxes"].size(), 0u);
  res = client.Get("/session/99/export");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  server.stop();
  th.join();
}
