// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Optional arguments select criteria by number.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "eco/adaptation.hpp"
#include "eco/annotation_server.hpp"
#include "eco/descriptor.hpp"
#include "eco/evaluation.hpp"
#include "eco/manifest.hpp"
#include "eco/rectification.hpp"
#include "eco/synthetic.hpp"
#include "cli_support.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace eco;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// ------------------------------------------------------------------ 1

Outcome frontalization_oracle() {
  synth::PresetOptions opt;
  opt.width = 1280;
  opt.height = 800;  // ~1 MP
  opt.focal = 1000;
  opt.frames = 1;
  opt.max_tilt_deg = 60;
  double worst_mae = 0, worst_time = 0, max_tilt = 0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto scene = synth::generate(synth::Preset::single_face, 1000 + seed, opt);
    const auto face = scene.boxes[0].box.face(Face::minus_y);
    // yaw the camera about the face centroid to 3, 6, ..., 60 degrees
    const double yaw = (3.0 * static_cast<double>(seed + 1)) * std::numbers::pi / 180.0;
    const Vec3 side = scene.axes.gravity.cross(face.normal);
    const Vec3 dir = std::cos(yaw) * face.normal + std::sin(yaw) * side;
    const Vec3 eye = face.centroid() + (scene.trajectory[0].C - face.centroid()).norm() * dir;
    scene.trajectory[0] = synth::look_along(eye, -dir, scene.axes.gravity);
    const Pose& pose = scene.trajectory[0];
    max_tilt = std::max(max_tilt, deg(angle_between(face.normal, pose.C - face.centroid())));
    const auto src = synth::render(scene, 0);

    const auto t0 = Clock::now();
    const auto fw = plan_face_warp(scene.intrinsics, pose, face, scene.axes.gravity);
    const Image warped = warp_image(src.image, fw.spec);
    worst_time = std::max(worst_time, seconds_since(t0));

    // direct render through the frontal virtual camera
    const double s = fw.spec.s;
    const CameraIntrinsics Kv{s * scene.intrinsics.fx,
                              s * scene.intrinsics.fy,
                              s * scene.intrinsics.cx + fw.spec.translate(0, 2),
                              s * scene.intrinsics.cy + fw.spec.translate(1, 2),
                              fw.spec.canvas_width,
                              fw.spec.canvas_height};
    const auto direct = synth::render(scene, Kv, Pose{fw.rotation * pose.R, pose.C});

    // valid: the four bilinear taps and the direct pixel see the same face
    const Mat3 inv = fw.spec.full().inverse();
    double err = 0;
    long n = 0;
    for (int y = 0; y < warped.height(); ++y)
      for (int x = 0; x < warped.width(); ++x) {
        const int id = direct.id_at(x, y);
        if (id < 0) continue;
        const Vec3 q = inv * Vec3(x, y, 1);
        const int x0 = static_cast<int>(std::floor(q.x() / q.z())), y0 = static_cast<int>(std::floor(q.y() / q.z()));
        if (x0 < 0 || y0 < 0 || x0 + 1 >= src.image.width() || y0 + 1 >= src.image.height()) continue;
        if (src.id_at(x0, y0) != id || src.id_at(x0 + 1, y0) != id || src.id_at(x0, y0 + 1) != id ||
            src.id_at(x0 + 1, y0 + 1) != id)
          continue;
        for (int c = 0; c < 3; ++c, ++n) err += std::abs(warped.at(x, y, c) - direct.image.at(x, y, c));
      }
    if (n < 30000) ok = false;
    worst_mae = std::max(worst_mae, n ? err / n : 1e9);
  }
  ok = ok && worst_mae < 5.0 && worst_time < 1.0;
  return {ok, fmt("20 seeds, tilt 3..%.1f deg, worst MAE %.3f/255 (< 5), worst warp %.3f s per 1-MP frame (< 1)",
                  max_tilt, worst_mae, worst_time)};
}

// ------------------------------------------------------------------ 2

Outcome homography_identities() {
  std::mt19937_64 rng(2);
  using eco::test::uniform;
  double worst_n = 0, worst_g = 0;
  int configs = 0, wrong_sign = 0;
  while (configs < 1000) {
    const int w = static_cast<int>(uniform(rng, 320, 4000)), h = static_cast<int>(uniform(rng, 240, 3000));
    const double fx = uniform(rng, 200, 3000);
    const CameraIntrinsics K{fx, fx * uniform(rng, 0.8, 1.25), uniform(rng, 0.3, 0.7) * w, uniform(rng, 0.3, 0.7) * h,
                             w, h};
    const Vec3 g = eco::test::random_unit(rng);
    Vec3 n = eco::test::random_unit(rng);
    n = n - n.dot(g) * g;
    if (n.norm() < 1e-3) continue;
    n.normalize();
    const Vec3 obj = (n * uniform(rng, -1, 1) + eco::test::random_unit(rng)).normalized();
    if (std::abs(n.dot(obj)) < 0.05) continue;  // face seen edge-on
    const Mat3 H = frontalization_homography(K, n, g, obj);
    const Vec3 c(K.cx, K.cy, 1.0);
    const Vec3 pn = H * (K.matrix() * n);
    worst_n = std::max(worst_n, (pn / pn.z() - c).norm() / c.norm());
    const Vec3 pg = H * (K.matrix() * g);
    worst_g = std::max(worst_g, std::hypot(pg.x(), pg.z()) / pg.norm());
    wrong_sign += pg.y() <= 0;
    ++configs;
  }
  return {worst_n <= 1e-9 && worst_g <= 1e-9 && wrong_sign == 0,
          fmt("%d configs, normal->principal point rel err %.2e, gravity off-vertical %.2e (<= 1e-9), %d point up",
              configs, worst_n, worst_g, wrong_sign)};
}

// ------------------------------------------------------------------ 3

Outcome scale_contract() {
  double worst = 0;
  long faces = 0, skipped = 0;
  std::set<std::string> presets;
  auto check = [&](const synth::SyntheticScene& s) {
    presets.insert(synth::to_string(s.preset));
    for (std::size_t f = 0; f < s.trajectory.size(); ++f)
      for (const auto& sb : s.boxes) {
        const auto proj = project_cuboid(sb.box, s.intrinsics, s.trajectory[f]);
        for (const auto& poly : proj.faces) {
          if (!poly.visible || !face_is_vertical(poly.face)) continue;
          FaceWarp fw;
          try {
            fw = plan_face_warp(s.intrinsics, s.trajectory[f], sb.box.face(poly.face), s.axes.gravity);
          } catch (const Error& e) {
            ++skipped;
            continue;
          }
          const auto& c = fw.warped_corners;
          worst = std::max({worst, std::abs(c[3].y() - c[0].y() - s.intrinsics.fy),
                            std::abs(c[2].y() - c[1].y() - s.intrinsics.fy)});
          ++faces;
        }
      }
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) check(synth::generate(synth::Preset::single_face, seed));
  for (std::uint64_t seed = 0; seed < 3; ++seed) check(synth::generate(synth::Preset::aisle, seed));
  check(synth::generate(synth::Preset::orbit, 0));
  return {worst <= 0.5 && faces > 1000 && presets.size() == 3,
          fmt("%ld warped faces over %zu presets (%ld numerically rejected), worst |span - f_y| %.2e px (<= 0.5)", faces,
              presets.size(), skipped, worst)};
}

// ------------------------------------------------------------------ 4

Outcome geometry_recovery() {
  double axis_err = 0, grav_err = 0, tri_err = 0;
  int scenes = 0, points = 0;
  for (auto preset : {synth::Preset::single_face, synth::Preset::aisle, synth::Preset::orbit})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = synth::generate(preset, 40 + seed);
      const auto& K = s.intrinsics;
      bool done = false;
      for (const auto& pose : s.trajectory) {
        Pixel vx, vy;
        const Pose rot{pose.R, Vec3::Zero()};
        if (!synth::scalar_project(K, rot, s.axes.x_dir, vx) && !synth::scalar_project(K, rot, -s.axes.x_dir, vx))
          continue;
        if (!synth::scalar_project(K, rot, s.axes.y_dir, vy) && !synth::scalar_project(K, rot, -s.axes.y_dir, vy))
          continue;
        const auto axes = axes_from_vanishing_points(K, pose, vx, vy);
        axis_err = std::max({axis_err, line_angle(axes.x_dir, s.axes.x_dir), line_angle(axes.y_dir, s.axes.y_dir)});
        grav_err = std::max(grav_err, angle_between(axes.gravity, s.axes.gravity));
        done = true;
        break;
      }
      if (!done) return {false, "no frame with finite vanishing points"};
      // each box origin from the first and the farthest frame that see it
      for (const auto& sb : s.boxes) {
        const Vec3 X = sb.box.origin;
        std::vector<std::pair<std::size_t, Pixel>> obs;
        for (std::size_t f = 0; f < s.trajectory.size(); ++f) {
          Pixel p;
          if (synth::scalar_project(K, s.trajectory[f], X, p)) obs.push_back({f, p});
        }
        if (obs.size() < 2) continue;
        const auto& [fa, pa] = obs.front();
        const auto& [fb, pb] = obs.back();
        if ((s.trajectory[fa].C - s.trajectory[fb].C).norm() < 0.05) continue;
        tri_err = std::max(tri_err, (triangulate(pa, s.trajectory[fa], pb, s.trajectory[fb], K) - X).norm());
        ++points;
      }
      ++scenes;
    }
  return {axis_err <= 1e-6 && grav_err <= 1e-6 && tri_err <= 1e-6 && points >= 30,
          fmt("%d bundles: axis err %.2e rad, gravity err %.2e rad, triangulation err %.2e over %d points", scenes,
              axis_err, grav_err, tri_err, points)};
}

// ------------------------------------------------------------------ 5

Outcome descriptor_laws() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  double perm = 0, idem = 0, scale = 0;
  const int cases = 2000;
  for (int c = 0; c < cases; ++c) {
    const int n = 1 + static_cast<int>(rng() % 20), dim = 1 + static_cast<int>(rng() % 64);
    std::vector<Eigen::VectorXd> f(n);
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
      f[i] = Eigen::VectorXd::NullaryExpr(dim, [&] { return g(rng); });
      w[i] = std::exp(2.0 * g(rng));
    }
    const Eigen::VectorXd base = weighted_mean(f, w);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::VectorXd> fp;
    std::vector<double> wp;
    for (int i : order) {
      fp.push_back(f[i]);
      wp.push_back(w[i]);
    }
    perm = std::max(perm, (weighted_mean(fp, wp) - base).cwiseAbs().maxCoeff());

    const std::vector<Eigen::VectorXd> same(n, f[0]);
    idem = std::max(idem, (weighted_mean(same, w) - f[0]).cwiseAbs().maxCoeff());

    const double k = std::exp(3.0 * g(rng));
    std::vector<double> ws = w;
    for (auto& v : ws) v *= k;
    scale = std::max(scale, (weighted_mean(f, ws) - base).cwiseAbs().maxCoeff());
  }
  const bool ok = perm <= 1e-12 && idem <= 1e-12 && scale <= 1e-12;
  return {ok, fmt("%d random cases: permutation %.1e, idempotence %.1e, weight scale %.1e (<= 1e-12)", cases, perm,
                  idem, scale)};
}

// ------------------------------------------------------------------ 6

Matrix gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Matrix::NullaryExpr(rows, cols, [&] { return n(rng); });
}

Outcome gradient_check() {
  std::mt19937_64 rng(6);
  auto model = AdaptationModel::create(8, 12, 1, 60);
  oracle::perturb_residual(model, rng);
  const Matrix train = gaussian(8, 6, rng), test = gaussian(8, 6, rng);
  const auto d = oracle::check_gradients(model, train, test, oracle::Loss::discriminator, 1.0, 1.0, 100, rng);
  const auto gf = oracle::check_gradients(model, train, test, oracle::Loss::generator, 1.0, 1.0, 100, rng);
  return {d.max_relative_error < 1e-4 && gf.max_relative_error < 1e-4,
          fmt("100 probes each (alpha 1, weight decay 1): L(D) max rel err %.2e, L(F,G) %.2e (< 1e-4)",
              d.max_relative_error, gf.max_relative_error)};
}

// ------------------------------------------------------------------ 7

Outcome loss_hand_values() {
  std::mt19937_64 rng(7);
  const int dim = 5;
  auto m = AdaptationModel::create(dim, 2 * dim, 1, 70);
  auto& dl = m.discriminator.layers().back();
  dl.weight.setZero();
  dl.bias.setZero();  // D == 0.5
  auto& g = m.reconstructor.layers();
  g[0].weight << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  g[0].bias.setZero();
  g[1].weight << Matrix::Identity(dim, dim), -Matrix::Identity(dim, dim);
  g[1].bias.setZero();  // G(y) = relu(y) - relu(-y) = y

  const double ld = discriminator_loss(m, gaussian(dim, 1, rng), gaussian(dim, 1, rng));
  const double lg = generator_loss(m, gaussian(dim, 1, rng), 1.0);
  const double ed = std::abs(ld - 2.0 * std::log(2.0)), eg = std::abs(lg - std::log(2.0));
  return {ed <= 1e-9 && eg <= 1e-9,
          fmt("L(D) = %.12f (2 ln 2 err %.1e), L(F,G) = %.12f (ln 2 err %.1e)", ld, ed, lg, eg)};
}

// ------------------------------------------------------------------ 8

TrainingConfig toy_config(std::uint64_t seed) {
  TrainingConfig c;
  c.hidden = 64;
  c.learning_rate = 3e-4;
  c.weight_decay = 0.1;
  c.d_steps = 5;
  c.iterations = 6000;
  c.seed = seed;
  return c;
}

Outcome adaptation_efficacy() {
  const auto t0 = Clock::now();
  double gain = 0, base = 0, adapted = 0, control = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto toy = oracle::toy_domains(100 + s, 32, 6, 500, 20.0, 14.0, 0.6, 1.0);
    const auto m = train_adapter(toy.train, toy.test, toy_config(s));
    const double a0 = oracle::nn_accuracy(toy.test, toy.test_labels, toy.train, toy.train_labels);
    const double a1 = oracle::nn_accuracy(m.adapt(toy.test), toy.test_labels, toy.train, toy.train_labels);
    base += a0 / 5;
    adapted += a1 / 5;
    gain += (a1 - a0) / 5;

    const auto same = oracle::toy_domains(200 + s, 32, 6, 500, 0.0, 0.0, 0.6, 1.0);
    const auto mc = train_adapter(same.train, same.test, toy_config(s));
    control = std::max(control, mean_relative_residual(mc, same.test));
  }
  const double elapsed = seconds_since(t0);
  return {gain >= 0.10 && control < 0.1 && elapsed < 120.0,
          fmt("1-NN accuracy %.1f%% -> %.1f%% (+%.1f pp, need >= 10), identity control residual %.3f (< 0.1), %.0f s",
              100 * base, 100 * adapted, 100 * gain, control, elapsed)};
}

// ------------------------------------------------------------------ 9

Outcome retrieval_correctness() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const auto& cats = default_categories();
  auto corpus_of = [&](int n, std::uint64_t first_id) {
    std::vector<LabeledItem> out;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v(6);
      for (int k = 0; k < 6; ++k) v[k] = std::round(1.5 * g(rng));  // quantized: forces ties
      out.push_back({first_id + static_cast<std::uint64_t>(rng() % 1000000), v, cats[rng() % cats.size()], ""});
    }
    return out;
  };
  int mismatches = 0, queries = 0;
  bool monotone = true;
  for (Metric metric : {Metric::euclidean, Metric::cosine}) {
    const auto corpus = corpus_of(100, 0);
    const auto qs = corpus_of(40, 2000000);
    for (const auto& q : qs) {
      const auto expect = oracle::brute_force_ranking(q.values, corpus, metric);
      const auto got = nn_retrieve(q.values, corpus, 100, metric);
      for (std::size_t r = 0; r < expect.size(); ++r) mismatches += got[r].index != expect[r];
      ++queries;
    }
    const auto curve = recall_curve(qs, corpus, 100, metric);
    const auto ref = oracle::brute_force_recall(qs, corpus, 100, metric);
    for (const auto& [cat, r] : ref) mismatches += curve.recall.at(cat) != r;
    for (const auto& [cat, r] : curve.recall)
      for (std::size_t k = 1; k < r.size(); ++k) monotone = monotone && r[k - 1] <= r[k];
  }
  return {mismatches == 0 && monotone,
          fmt("100-item corpus, %d queries x 2 metrics: %d ranking/recall mismatches, recall monotone in k: %s", queries,
              mismatches, monotone ? "yes" : "no")};
}

// ----------------------------------------------------------------- 10

Outcome classifier_sanity() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 0.4);
  const int classes = 6, per = 50, dim = 8;
  Eigen::MatrixXd x(dim, classes * per);
  std::vector<int> y;
  std::vector<std::string> labels;
  for (int c = 0; c < classes; ++c) {
    labels.push_back(default_categories()[c]);
    for (int i = 0; i < per; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(dim, [&] { return g(rng); });
      v[c] += 3.0;
      x.col(c * per + i) = v;
      y.push_back(c);
    }
  }
  const auto clf = train_classifier(x, y, labels, {1e-4, 5000, 0.1, 1});
  int correct = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) correct += clf.predict_index(x.col(i)) == y[i];
  const double acc = static_cast<double>(correct) / x.cols();
  const double wn = train_classifier(x, y, labels, {1e9, 200, 0.1, 1}).weight.norm();
  return {acc >= 0.99 && wn < 1e-3,
          fmt("train accuracy %.4f after 5000 steps (>= 0.99), weight norm at l2 = 1e9: %.2e (< 1e-3)", acc, wn)};
}

// ----------------------------------------------------------------- 11

json px(const Pixel& p) { return {p.x(), p.y()}; }

/// Scripted labeling session against `eco annotate`; returns the export.
std::string scripted_annotation(const fs::path& scene_dir) {
  const auto scene = synth::generate(synth::Preset::orbit, 3, {640, 480, 500, 6, 60});
  eco::test::AnnotateProcess server({"--bundle", (scene_dir / "bundle.json").string()});
  if (server.port() <= 0) fail(ErrorCode::io, "annotate server did not start");
  httplib::Client cli("127.0.0.1", server.port());
  const std::string base = "/session/" + server.session();
  auto post = [&](const std::string& path, const json& body) {
    auto r = cli.Post((base + path).c_str(), body.dump(), "application/json");
    if (!r || r->status != 200) fail(ErrorCode::io, "annotate request failed: " + path);
  };
  const Pose& p0 = scene.trajectory.front();
  post("/vps", {{"frame", synth::frame_id(0)},
                {"vp_x", px(project_direction(scene.intrinsics, p0, scene.axes.x_dir))},
                {"vp_y", px(project_direction(scene.intrinsics, p0, scene.axes.y_dir))}});
  const Vec3 o = scene.boxes[0].box.origin;
  post("/origin", {{"frame_a", synth::frame_id(0)},
                   {"px_a", px(project(scene.intrinsics, p0, o))},
                   {"frame_b", synth::frame_id(5)},
                   {"px_b", px(project(scene.intrinsics, scene.trajectory.back(), o))}});
  post("/box", {{"category", "dairy"}});
  for (double d : {0.05, 0.05, 0.05, -0.05}) post("/box/0/move", {{"face", "+x"}, {"delta", d}});
  auto r = cli.Get((base + "/export").c_str());
  if (!r || r->status != 200) fail(ErrorCode::io, "export failed");
  return r->body;
}

/// One full CLI pass over two synthetic stores.
void cli_pipeline(const fs::path& work) {
  using eco::test::run_cli;
  auto must = [](const std::vector<std::string>& args) {
    const auto r = run_cli(args);
    if (r.status != 0) fail(ErrorCode::io, "eco " + args.front() + " failed: " + r.err);
  };
  auto p = [&](const std::string& rel) { return (work / rel).string(); };
  for (const std::string store : {"a", "b"}) {
    must({"synth", "--preset", "aisle", "--seed", store == "a" ? "11" : "12", "--frames", "8", "--out",
          p(store + "/scene")});
    must({"warp", "--bundle", p(store + "/scene/bundle.json"), "--labels", p(store + "/scene/labels.json"), "--out",
          p(store + "/warped")});
    must({"strips", "--in", p(store + "/warped"), "--out", p(store + "/strips"), "--domain",
          store == "a" ? "train" : "test"});
    must({"features", "--in", p(store + "/strips"), "--out", p(store + "/f.ecof")});
  }
  must({"features", "--extractor", "import", "--in", p("a/f.ecof"), "--manifest", p("a/strips/strips.json"), "--out",
        p("imported.ecof")});
  must({"adapt-train", "--train", p("a/f.ecof"), "--test", p("b/f.ecof"), "--out", p("adapter.ecoa"), "--hidden",
        "32", "--steps", "40", "--seed", "4"});
  must({"eval", "recall", "--query", p("b/f.ecof"), "--db", p("a/f.ecof"), "--adapter", p("adapter.ecoa"), "--out",
        p("recall.csv")});
  must({"eval", "recall", "--query", p("b/f.ecof"), "--db", p("a/f.ecof"), "--mode", "scene", "--weights",
        "inverse-distance", "--out", p("recall_scene.csv")});
  must({"eval", "classify", "--train", p("a/f.ecof"), "--test", p("b/f.ecof"), "--steps", "300", "--out",
        p("accuracy.csv")});
  must({"synth", "--preset", "orbit", "--seed", "3", "--frames", "6", "--out", p("orbit")});
  std::ofstream(work / "annotation_export.json", std::ios::binary) << scripted_annotation(work / "orbit");
}

Outcome determinism() {
  const fs::path work = fs::temp_directory_path() / "eco_acceptance_determinism";
  std::vector<json> trees;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    fs::create_directories(work);
    cli_pipeline(work);
    trees.push_back(sha256_tree(work));
  }
  int differing = 0;
  std::string first;
  for (const auto& [rel, h] : trees[0].items())
    if (!trees[1].contains(rel) || trees[1][rel] != h) {
      if (first.empty()) first = rel;
      ++differing;
    }
  const bool ok = differing == 0 && trees[0].size() == trees[1].size() && trees[0].size() > 100;
  return {ok, fmt("synth/warp/strips/features/adapt-train/eval/annotate run twice: %zu files, %d differ%s%s",
                  trees[0].size(), differing, first.empty() ? "" : ", first: ", first.c_str())};
}

// ----------------------------------------------------------------- 12

Outcome propagation_consistency() {
  const auto scene = synth::generate(synth::Preset::orbit, 12);
  const auto& K = scene.intrinsics;
  const std::size_t frames = scene.trajectory.size();
  AnnotationSession session(synth::to_bundle(scene));
  const Pose& p0 = scene.trajectory.front();
  session.set_vanishing_points(synth::frame_id(0), project_direction(K, p0, scene.axes.x_dir),
                               project_direction(K, p0, scene.axes.y_dir));
  const Cuboid& gt = scene.boxes[0].box;
  session.triangulate_origin(synth::frame_id(0), project(K, p0, gt.origin), synth::frame_id(frames - 1),
                             project(K, scene.trajectory.back(), gt.origin));

  // label once in frame 0, then a single edit
  const int id = session.create_box(gt.category, gt.extents);
  session.move_face(id, Face::plus_z, 0.1);
  const auto prop = session.propagate(id);

  // oracle: edited ground-truth box, scalar projection, rendered visibility
  Cuboid edited = gt;
  edited.extents[5] += 0.1;
  std::set<std::string> labeled;
  double worst = 0;
  for (const auto& p : prop.labeled) {
    labeled.insert(p.frame);
    const std::size_t f = std::stoul(p.frame.substr(1));
    for (int c = 0; c < 8; ++c) {
      Pixel expect;
      if (!p.corners[c] || !synth::scalar_project(K, scene.trajectory[f], edited.corner(c), expect)) continue;
      worst = std::max(worst, (*p.corners[c] - expect).norm());
    }
  }
  std::size_t visible = 0, missed = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    const auto r = synth::render(scene, f);
    if (std::none_of(r.face_id.begin(), r.face_id.end(), [](int v) { return v >= 0; })) continue;
    ++visible;
    missed += !labeled.count(synth::frame_id(f));
  }
  return {frames == 200 && missed == 0 && visible > 0 && worst <= 1e-6,
          fmt("%zu frames, box visible in %zu, propagated to %zu, missed %zu; worst corner reprojection %.2e px "
              "(<= 1e-6)",
              frames, visible, prop.labeled.size(), missed, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"frontalization oracle", frontalization_oracle},
      {"homography identities", homography_identities},
      {"scale contract", scale_contract},
      {"axis/gravity/triangulation recovery", geometry_recovery},
      {"descriptor laws", descriptor_laws},
      {"gradient correctness", gradient_check},
      {"loss hand values", loss_hand_values},
      {"adaptation efficacy", adaptation_efficacy},
      {"retrieval correctness", retrieval_correctness},
      {"classifier sanity", classifier_sanity},
      {"determinism", determinism},
      {"annotation propagation", propagation_consistency},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << number << " " << criteria[i].first << ": " << o.detail
              << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
