// eco: pipeline driver.
//
//   eco synth        generate an oracle scene (bundle, frames, labels, ground truth)
//   eco warp         frontalize and scale every labeled vertical face
//   eco strips       cut rectified faces into normalized strips
//   eco features     baseline extraction or ECOF import
//   eco adapt-train  train the residual adapter
//   eco eval recall|classify
//   eco annotate     serve the annotation API
//
// Exit codes: 0 ok, 2 usage, 3 input format, 4 numeric failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eco/adaptation.hpp"
#include "eco/annotation.hpp"
#include "eco/annotation_server.hpp"
#include "eco/descriptor.hpp"
#include "eco/evaluation.hpp"
#include "eco/features.hpp"
#include "eco/manifest.hpp"
#include "eco/rectification.hpp"
#include "eco/strips.hpp"
#include "eco/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace eco;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string face_tag(Face f) {
  const std::string_view n = to_string(f);
  return std::string(n[0] == '+' ? "p" : "m") + n[1];
}

json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

fs::path sidecar_path(const fs::path& ecof) { return fs::path(ecof.string() + ".json"); }
fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

// ------------------------------------------------------------------ synth

struct SynthOptions {
  std::string preset = "single-face";
  std::uint64_t seed = 0;
  std::string out;
  int frames = 0;
  int width = 640;
  int height = 480;
  double focal = 500.0;
};

void run_synth(const SynthOptions& o) {
  synth::PresetOptions po;
  po.frames = o.frames;
  po.width = o.width;
  po.height = o.height;
  po.focal = o.focal;
  const auto scene = synth::generate(synth::preset_from_string(o.preset), o.seed, po);
  const fs::path out(o.out);
  synth::write_scene(scene, out);

  RunManifest m;
  m.command = "synth";
  m.seed = o.seed;
  m.config = {{"preset", o.preset}, {"frames", o.frames}, {"width", o.width}, {"height", o.height}, {"focal", o.focal}};
  m.outputs = {"bundle.json", "labels.json", "ground_truth.json", "frames/"};
  write_manifest(out / "manifest.json", m);
}

// ------------------------------------------------------------------- warp

struct WarpOptions {
  std::string bundle;
  std::string labels;
  std::string out;
};

void run_warp(const WarpOptions& o) {
  const Bundle bundle = load_bundle(o.bundle);
  const auto boxes = load_labels(read_json_file(o.labels));
  const fs::path out(o.out);
  const auto& K = bundle.intrinsics;

  RunManifest m;
  m.command = "warp";
  m.config = {{"bundle", o.bundle}, {"labels", o.labels}};
  m.add_input(o.bundle);
  m.add_input(o.labels);

  json warps = json::array(), skipped = json::array();
  for (const auto& frame : bundle.frames) {
    std::optional<Image> source;
    for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
      const Cuboid& box = boxes[bi];
      const auto proj = project_cuboid(box, K, frame.pose, frame.id);
      for (const auto& poly : proj.faces) {
        if (!poly.visible || !face_is_vertical(poly.face)) continue;
        const CuboidFace face = box.face(poly.face);
        FaceWarp fw;
        try {
          fw = plan_face_warp(K, frame.pose, face, box.axes.gravity);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::numeric) throw;
          skipped.push_back({{"frame", frame.id}, {"box", bi}, {"face", std::string(to_string(poly.face))},
                             {"reason", std::string(to_string(e.code()))}});
          continue;
        }
        if (!source) {
          const fs::path img = bundle.image_file(frame);
          source = read_png(img);
          m.add_input(img);
        }
        const std::string name = frame.id + "_b" + std::to_string(bi) + "_" + face_tag(poly.face);
        const std::string rel = "warped/" + name + ".png";
        write_png(out / rel, warp_image(*source, fw.spec));

        json corners = json::array(), world = json::array();
        for (const auto& c : fw.warped_corners) corners.push_back({c.x(), c.y()});
        for (const auto& c : face.corners) world.push_back(vec3_json(c));
        json rec{{"image", rel},
                 {"frame", frame.id},
                 {"box", bi},
                 {"face", std::string(to_string(poly.face))},
                 {"category", box.category},
                 {"store", bundle.store},
                 {"warp", to_json(fw.spec)},
                 {"corners", corners},
                 {"world_corners", world},
                 {"camera_center", vec3_json(frame.pose.C)},
                 {"source_size", {source->width(), source->height()}}};
        write_json_file(out / ("warped/" + name + ".json"), rec);
        warps.push_back(rec);
        m.outputs.push_back(rel);
      }
    }
  }
  write_json_file(out / "warps.json", {{"store", bundle.store}, {"warps", warps}, {"skipped", skipped}});
  m.outputs.push_back("warps.json");
  m.extra = {{"warped", warps.size()}, {"skipped", skipped.size()}};
  write_manifest(out / "manifest.json", m);
}

// ----------------------------------------------------------------- strips

struct StripOptions {
  std::string in;
  std::string out;
  int width = kDefaultStripWidth;
  std::string domain = "train";
  std::string store;
  double min_coverage = 0.95;
};

// Fraction of canvas pixels in the column range whose source sample lies
// inside the source image.
double coverage(const Mat3& W, int src_w, int src_h, const PixelRect& r) {
  const Mat3 inv = W.inverse();
  long inside = 0, total = 0;
  for (int y = r.y; y < r.y + r.height; ++y)
    for (int x = r.x; x < r.x + r.width; ++x, ++total) {
      const Vec3 q = inv * Vec3(x, y, 1.0);
      if (!(q.z() > 0.0)) continue;
      const double sx = q.x() / q.z(), sy = q.y() / q.z();
      inside += sx >= 0.0 && sy >= 0.0 && sx <= src_w - 1 && sy <= src_h - 1;
    }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

void run_strips(const StripOptions& o) {
  if (o.width < 1) fail(ErrorCode::invalid_argument, "--width must be at least 1");
  const Domain domain = domain_from_string(o.domain);
  const fs::path in(o.in), out(o.out);
  const json index = read_json_file(in / "warps.json");

  RunManifest m;
  m.command = "strips";
  m.config = {{"in", o.in}, {"width", o.width}, {"domain", o.domain}, {"store", o.store},
              {"min_coverage", o.min_coverage}};
  m.add_input(in / "warps.json");

  StripManifest manifest;
  std::map<std::pair<std::string, std::string>, int> theta;  // (frame, category) -> next index
  long dropped = 0;
  for (const auto& rec : index.at("warps")) {
    const fs::path img_path = in / rec.at("image").get<std::string>();
    m.add_input(img_path);
    const Image img = read_png(img_path);
    const WarpSpec spec = warp_spec_from_json(rec.at("warp"));
    const auto& corners = rec.at("corners");
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& c : corners) {
      min_x = std::min(min_x, c.at(0).get<double>());
      max_x = std::max(max_x, c.at(0).get<double>());
      min_y = std::min(min_y, c.at(1).get<double>());
      max_y = std::max(max_y, c.at(1).get<double>());
    }
    PixelRect rect;
    rect.x = std::max(0, static_cast<int>(std::ceil(min_x - 1e-9)));
    rect.y = std::max(0, static_cast<int>(std::ceil(min_y - 1e-9)));
    rect.width = std::min(img.width() - 1, static_cast<int>(std::floor(max_x + 1e-9))) - rect.x + 1;
    rect.height = std::min(img.height() - 1, static_cast<int>(std::floor(max_y + 1e-9))) - rect.y + 1;
    if (rect.width < 1 || rect.height < 1) continue;

    std::array<Vec3, 4> world;
    for (int i = 0; i < 4; ++i) world[i] = vec3_from(rec.at("world_corners").at(i));
    const Vec3 C = vec3_from(rec.at("camera_center"));
    const int src_w = rec.at("source_size").at(0), src_h = rec.at("source_size").at(1);
    const std::string frame = rec.at("frame");
    std::string category = rec.value("category", std::string{});
    if (category.empty()) category = "unlabeled";
    const std::string store = !o.store.empty() ? o.store : rec.value("store", std::string("default"));

    const auto raws = extract_strips(img, rect, o.width);
    for (std::size_t i = 0; i < raws.size(); ++i) {
      const int t = theta[{frame, category}]++;
      const PixelRect cols{rect.x + static_cast<int>(i) * o.width, rect.y, o.width, rect.height};
      if (coverage(spec.full(), src_w, src_h, cols) < o.min_coverage) {
        ++dropped;
        continue;
      }
      const Image strip = normalize_strip(raws[i]);
      const auto g = slab_geometry(world, corners.at(0).at(0).get<double>(), corners.at(1).at(0).get<double>(),
                                   cols.x, cols.x + cols.width, C);
      const std::string rel = "strips/" + store + "/" + category + "/" + frame + "_" + std::to_string(t) + ".png";
      write_png(out / rel, strip);
      const std::uint64_t id = fnv1a64(rel);
      if (!manifest.emplace(id, StripMetadata{store, frame, category, t, g.distance, domain, rel}).second)
        fail(ErrorCode::bad_format, "strip id collision for " + rel);
      m.outputs.push_back(rel);
    }
  }
  write_json_file(out / "strips.json", to_json(manifest));
  m.outputs.push_back("strips.json");
  m.extra = {{"strips", manifest.size()}, {"dropped_low_coverage", dropped}};
  write_manifest(out / "manifest.json", m);
}

// --------------------------------------------------------------- features

struct FeatureOptions {
  std::string extractor = "baseline";
  std::string in;
  std::string out;
  int dim = kDefaultFeatureDim;
  std::string manifest;  // strips.json for --extractor import
};

void run_features(const FeatureOptions& o) {
  if (o.dim < 1) fail(ErrorCode::invalid_argument, "--dim must be positive");
  const fs::path out(o.out);
  RunManifest m;
  m.command = "features";
  m.config = {{"extractor", o.extractor}, {"in", o.in}, {"dim", o.dim}, {"manifest", o.manifest}};

  std::vector<FeatureRecord> records;
  StripManifest sidecar;
  if (o.extractor == "baseline") {
    const fs::path dir(o.in);
    m.add_input(dir / "strips.json");
    const StripManifest strips = strip_manifest_from_json(read_json_file(dir / "strips.json"));
    std::vector<Image> images;
    images.reserve(strips.size());
    for (const auto& [id, md] : strips) {
      m.add_input(dir / md.path);
      images.push_back(read_png(dir / md.path));
      FeatureVector f{id, extract_baseline(images.back(), o.dim), md.domain, md.category};
      records.push_back(to_record(f));
    }
    sidecar = strips;
    const auto means = channel_means(images);
    m.extra = {{"channel_means", {means[0], means[1], means[2]}}, {"count", records.size()}};
  } else if (o.extractor == "import") {
    m.add_input(o.in);
    std::optional<StripManifest> strips;
    if (!o.manifest.empty()) {
      m.add_input(o.manifest);
      strips = strip_manifest_from_json(read_json_file(o.manifest));
    }
    const auto res = import_features(o.in, strips ? &*strips : nullptr);
    if (static_cast<int>(res.dim) != o.dim)
      fail(ErrorCode::dimension_mismatch,
           "file dimension " + std::to_string(res.dim) + " differs from --dim " + std::to_string(o.dim));
    for (const auto& f : res.features) {
      records.push_back(to_record(f));
      if (strips)
        if (auto it = strips->find(f.id); it != strips->end()) sidecar.emplace(f.id, it->second);
    }
    m.extra = {{"count", records.size()}, {"unmatched", res.unmatched}};
  } else {
    fail(ErrorCode::invalid_argument, "unknown extractor '" + o.extractor + "' (baseline|import)");
  }
  write_ecof(out, records, static_cast<std::uint32_t>(o.dim));
  write_json_file(sidecar_path(out), to_json(sidecar));
  m.outputs = {out.generic_string(), sidecar_path(out).generic_string()};
  write_manifest(manifest_path(out), m);
}

// ------------------------------------------------------------ adapt-train

struct AdaptOptions {
  std::string train;
  std::string test;
  std::string out;
  TrainingConfig config;
  std::string norm = "mse";
};

Matrix load_matrix(const fs::path& path) {
  const auto records = read_ecof(path);
  if (records.empty()) fail(ErrorCode::empty_input, path.string() + " holds no features");
  Matrix x(static_cast<Eigen::Index>(records.front().values.size()), static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t k = 0; k < records[i].values.size(); ++k)
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = records[i].values[k];
  return x;
}

void run_adapt_train(AdaptOptions o) {
  if (o.norm == "mse")
    o.config.norm = ReconstructionNorm::mse;
  else if (o.norm == "l2")
    o.config.norm = ReconstructionNorm::l2;
  else
    fail(ErrorCode::invalid_argument, "unknown --norm '" + o.norm + "' (mse|l2)");
  o.config.validate();

  const Matrix train = load_matrix(o.train);
  const Matrix test = load_matrix(o.test);
  TrainingReport report;
  const auto model = train_adapter(train, test, o.config, &report);
  save_checkpoint(o.out, model);

  RunManifest m;
  m.command = "adapt-train";
  m.seed = o.config.seed;
  m.config = to_json(o.config);
  m.add_input(o.train);
  m.add_input(o.test);
  m.outputs = {fs::path(o.out).generic_string()};
  m.extra = {{"dim", model.dim()},
             {"loss_curve", {{"discriminator", report.discriminator_loss}, {"generator", report.generator_loss}}},
             {"final_relative_residual", mean_relative_residual(model, test)}};
  write_json_file(fs::path(o.out + ".json"), to_json(m));
}

// ------------------------------------------------------------------- eval

struct LabeledSet {
  std::vector<LabeledItem> items;
  std::vector<StripMetadata> meta;
};

LabeledSet load_labeled(const fs::path& ecof) {
  const fs::path side = sidecar_path(ecof);
  if (!fs::exists(side)) fail(ErrorCode::bad_format, "missing metadata sidecar " + side.string());
  const StripManifest manifest = strip_manifest_from_json(read_json_file(side));
  LabeledSet out;
  for (const auto& r : read_ecof(ecof)) {
    auto it = manifest.find(r.id);
    if (it == manifest.end() || it->second.category.empty())
      fail(ErrorCode::bad_format, "no category for feature " + std::to_string(r.id));
    LabeledItem item;
    item.id = r.id;
    item.values = Eigen::Map<const Eigen::VectorXf>(r.values.data(), static_cast<Eigen::Index>(r.values.size()))
                      .cast<double>();
    item.category = it->second.category;
    item.store = it->second.store;
    out.items.push_back(std::move(item));
    out.meta.push_back(it->second);
  }
  if (out.items.empty()) fail(ErrorCode::empty_input, ecof.string() + " holds no features");
  return out;
}

void adapt_items(std::vector<LabeledItem>& items, const AdaptationModel& model) {
  for (auto& it : items) it.values = model.adapt(it.values);
}

/// One descriptor per (store, frame, category) section.
std::vector<LabeledItem> compose_sections(const LabeledSet& set, WeightScheme scheme) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < set.items.size(); ++i)
    groups[{set.meta[i].store, set.meta[i].frame, set.meta[i].category}].push_back(i);
  std::vector<LabeledItem> out;
  for (const auto& [key, idx] : groups) {
    std::vector<Eigen::VectorXd> f;
    std::vector<double> r;
    std::vector<std::uint64_t> ids;
    for (auto i : idx) {
      f.push_back(set.items[i].values);
      r.push_back(set.meta[i].distance);
      ids.push_back(set.items[i].id);
    }
    const auto w = scheme == WeightScheme::uniform ? uniform_weights(f.size()) : proximity_weights(r);
    const auto d = compose(f, w, ids, scheme);
    const auto& [store, frame, category] = key;
    out.push_back({fnv1a64(store + "/" + frame + "/" + category), d.values, category, store});
  }
  return out;
}

struct RecallOptions {
  std::string query;
  std::string db;
  std::string adapter;
  int kmax = 10;
  std::string out;
  std::string metric = "euclidean";
  std::string mode = "strip";
  std::string weights = "uniform";
};

void run_recall(const RecallOptions& o) {
  const Metric metric = o.metric == "euclidean" ? Metric::euclidean
                        : o.metric == "cosine"  ? Metric::cosine
                                                : (fail(ErrorCode::invalid_argument, "unknown --metric"), Metric{});
  if (o.mode != "strip" && o.mode != "scene") fail(ErrorCode::invalid_argument, "unknown --mode (strip|scene)");
  if (o.weights != "uniform" && o.weights != "inverse-distance")
    fail(ErrorCode::invalid_argument, "unknown --weights (uniform|inverse-distance)");
  const WeightScheme scheme = o.weights == "uniform" ? WeightScheme::uniform : WeightScheme::inverse_distance;

  RunManifest m;
  m.command = "eval recall";
  m.config = {{"query", o.query}, {"db", o.db}, {"adapter", o.adapter}, {"kmax", o.kmax},
              {"metric", o.metric}, {"mode", o.mode}, {"weights", o.weights}};
  m.add_input(o.query);
  m.add_input(o.db);

  LabeledSet queries = load_labeled(o.query);
  LabeledSet db = load_labeled(o.db);
  if (!o.adapter.empty()) {
    m.add_input(o.adapter);
    adapt_items(queries.items, load_checkpoint(o.adapter));
  }
  std::vector<LabeledItem> q = queries.items, d = db.items;
  if (o.mode == "scene") {
    q = compose_sections(queries, scheme);
    d = compose_sections(db, scheme);
  }
  const auto curve = recall_curve(q, d, o.kmax, metric);
  std::ofstream csv(o.out, std::ios::binary);
  if (!csv) fail(ErrorCode::io, "cannot write " + o.out);
  write_recall_csv(csv, curve);
  csv.close();
  m.outputs = {o.out};
  write_manifest(manifest_path(o.out), m);
}

struct ClassifyOptions {
  std::string train;
  std::string test;
  std::string adapter;
  std::string out;
  ClassifierOptions classifier;
};

void run_classify(const ClassifyOptions& o) {
  RunManifest m;
  m.command = "eval classify";
  m.seed = o.classifier.seed;
  m.config = {{"train", o.train}, {"test", o.test}, {"adapter", o.adapter}, {"l2", o.classifier.l2},
              {"steps", o.classifier.steps}, {"lr", o.classifier.learning_rate}};
  m.add_input(o.train);
  m.add_input(o.test);

  LabeledSet train = load_labeled(o.train);
  LabeledSet test = load_labeled(o.test);
  if (!o.adapter.empty()) {
    m.add_input(o.adapter);
    adapt_items(test.items, load_checkpoint(o.adapter));
  }
  std::vector<std::string> labels;
  for (const auto& it : train.items) labels.push_back(it.category);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  auto to_xy = [&](const std::vector<LabeledItem>& items, Eigen::MatrixXd& x, std::vector<int>& y, bool strict) {
    std::vector<const LabeledItem*> kept;
    for (const auto& it : items) {
      const auto pos = std::lower_bound(labels.begin(), labels.end(), it.category);
      if (pos == labels.end() || *pos != it.category) {
        if (strict) fail(ErrorCode::bad_format, "unknown category " + it.category);
        continue;  // test categories absent from training cannot be predicted
      }
      kept.push_back(&it);
      y.push_back(static_cast<int>(pos - labels.begin()));
    }
    x.resize(items.front().values.size(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = kept[i]->values;
  };
  Eigen::MatrixXd xtr, xte;
  std::vector<int> ytr, yte;
  to_xy(train.items, xtr, ytr, true);
  to_xy(test.items, xte, yte, false);
  if (xte.rows() != xtr.rows()) fail(ErrorCode::dimension_mismatch, "train and test dimensions differ");
  const auto clf = train_classifier(xtr, ytr, labels, o.classifier);
  std::ofstream csv(o.out, std::ios::binary);
  if (!csv) fail(ErrorCode::io, "cannot write " + o.out);
  write_accuracy_csv(csv, per_category_accuracy(clf, xte, yte));
  csv.close();
  m.outputs = {o.out};
  m.extra = {{"train_accuracy", per_category_accuracy(clf, xtr, ytr)}};
  write_manifest(manifest_path(o.out), m);
}

// --------------------------------------------------------------- annotate

struct AnnotateOptions {
  std::string bundle;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

void run_annotate(const AnnotateOptions& o) {
  AnnotationService service;
  const std::string id = service.open(fs::path(o.bundle));
  httplib::Server server;
  mount(server, service, o.static_dir);
  int port = o.port;
  if (port == 0)
    port = server.bind_to_any_port(o.host);
  else if (!server.bind_to_port(o.host, port))
    port = -1;
  if (port <= 0) fail(ErrorCode::io, "cannot bind " + o.host + ":" + std::to_string(o.port));
  std::cout << "listening on http://" << o.host << ":" << port << " session " << id << std::endl;
  server.listen_after_bind();
}

// ------------------------------------------------------------------ errors

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 2;
    case ErrorKind::input_format: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 2;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

int report(const std::string& kind, const std::string& code, const std::string& message, int status) {
  std::cerr << "eco: error kind=" << kind << " code=" << code << " message=" << json(one_line(message)).dump()
            << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eco: shelf-face rectification, strip features, domain adaptation and box annotation"};
  app.set_config("--config", "", "TOML config file; flags take precedence");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  SynthOptions so;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic oracle scene");
  synth_cmd->add_option("--preset", so.preset, "single-face | aisle | orbit")
      ->check(CLI::IsMember({"single-face", "aisle", "orbit"}))
      ->capture_default_str();
  synth_cmd->add_option("--seed", so.seed)->capture_default_str();
  synth_cmd->add_option("--out", so.out, "Output directory")->required();
  synth_cmd->add_option("--frames", so.frames, "Frame count (0 = preset default)")->capture_default_str();
  synth_cmd->add_option("--width", so.width)->capture_default_str();
  synth_cmd->add_option("--height", so.height)->capture_default_str();
  synth_cmd->add_option("--focal", so.focal)->capture_default_str();

  WarpOptions wo;
  auto* warp_cmd = app.add_subcommand("warp", "Frontalize and scale all labeled faces");
  warp_cmd->add_option("--bundle", wo.bundle)->required();
  warp_cmd->add_option("--labels", wo.labels)->required();
  warp_cmd->add_option("--out", wo.out)->required();

  StripOptions sto;
  auto* strips_cmd = app.add_subcommand("strips", "Extract and normalize strips from rectified faces");
  strips_cmd->add_option("--in", sto.in, "Output directory of 'eco warp'")->required();
  strips_cmd->add_option("--out", sto.out)->required();
  strips_cmd->add_option("--width", sto.width, "Strip width in pixels")->capture_default_str();
  strips_cmd->add_option("--domain", sto.domain, "train | test")->capture_default_str();
  strips_cmd->add_option("--store", sto.store, "Override the store id");
  strips_cmd->add_option("--min-coverage", sto.min_coverage, "Minimum in-source fraction per strip")
      ->capture_default_str();

  FeatureOptions fo;
  auto* features_cmd = app.add_subcommand("features", "Compute or import strip features (ECOF)");
  features_cmd->add_option("--extractor", fo.extractor, "baseline | import")->capture_default_str();
  features_cmd->add_option("--in", fo.in, "Strip directory (baseline) or ECOF file (import)")->required();
  features_cmd->add_option("--out", fo.out)->required();
  features_cmd->add_option("--dim", fo.dim)->capture_default_str();
  features_cmd->add_option("--manifest", fo.manifest, "strips.json to join imported ids against");

  AdaptOptions ao;
  auto* adapt_cmd = app.add_subcommand("adapt-train", "Train the residual domain adapter");
  adapt_cmd->add_option("--train", ao.train)->required();
  adapt_cmd->add_option("--test", ao.test)->required();
  adapt_cmd->add_option("--out", ao.out)->required();
  adapt_cmd->add_option("--alpha", ao.config.alpha)->capture_default_str();
  adapt_cmd->add_option("--weight-decay", ao.config.weight_decay)->capture_default_str();
  adapt_cmd->add_option("--batch", ao.config.batch)->capture_default_str();
  adapt_cmd->add_option("--lr", ao.config.learning_rate)->capture_default_str();
  adapt_cmd->add_option("--momentum", ao.config.momentum)->capture_default_str();
  adapt_cmd->add_option("--steps", ao.config.iterations)->capture_default_str();
  adapt_cmd->add_option("--seed", ao.config.seed)->capture_default_str();
  adapt_cmd->add_option("--d-steps", ao.config.d_steps)->capture_default_str();
  adapt_cmd->add_option("--hidden", ao.config.hidden)->capture_default_str();
  adapt_cmd->add_option("--depth", ao.config.depth)->capture_default_str();
  adapt_cmd->add_option("--norm", ao.norm, "mse | l2")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate features");
  eval_cmd->require_subcommand(1);
  RecallOptions ro;
  auto* recall_cmd = eval_cmd->add_subcommand("recall", "Nearest-neighbor recall@k per category");
  recall_cmd->add_option("--query", ro.query)->required();
  recall_cmd->add_option("--db", ro.db)->required();
  recall_cmd->add_option("--adapter", ro.adapter, "Checkpoint applied to the queries");
  recall_cmd->add_option("--kmax", ro.kmax)->capture_default_str();
  recall_cmd->add_option("--out", ro.out)->required();
  recall_cmd->add_option("--metric", ro.metric, "euclidean | cosine")->capture_default_str();
  recall_cmd->add_option("--mode", ro.mode, "strip | scene")->capture_default_str();
  recall_cmd->add_option("--weights", ro.weights, "uniform | inverse-distance (scene mode)")->capture_default_str();
  ClassifyOptions co;
  auto* classify_cmd = eval_cmd->add_subcommand("classify", "Softmax classifier accuracy per category");
  classify_cmd->add_option("--train", co.train)->required();
  classify_cmd->add_option("--test", co.test)->required();
  classify_cmd->add_option("--adapter", co.adapter, "Checkpoint applied to the test features");
  classify_cmd->add_option("--out", co.out)->required();
  classify_cmd->add_option("--l2", co.classifier.l2)->capture_default_str();
  classify_cmd->add_option("--steps", co.classifier.steps)->capture_default_str();
  classify_cmd->add_option("--lr", co.classifier.learning_rate)->capture_default_str();
  classify_cmd->add_option("--seed", co.classifier.seed)->capture_default_str();

  AnnotateOptions ano;
  auto* annotate_cmd = app.add_subcommand("annotate", "Serve the annotation API for a bundle");
  annotate_cmd->add_option("--bundle", ano.bundle)->required();
  annotate_cmd->add_option("--port", ano.port, "0 picks a free port")->capture_default_str();
  annotate_cmd->add_option("--host", ano.host)->capture_default_str();
  annotate_cmd->add_option("--static", ano.static_dir, "Directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", "invalid_argument", e.what(), 2);
  }

  try {
    if (*synth_cmd) run_synth(so);
    else if (*warp_cmd) run_warp(wo);
    else if (*strips_cmd) run_strips(sto);
    else if (*features_cmd) run_features(fo);
    else if (*adapt_cmd) run_adapt_train(ao);
    else if (*recall_cmd) run_recall(ro);
    else if (*classify_cmd) run_classify(co);
    else if (*annotate_cmd) run_annotate(ano);
  } catch (const Error& e) {
    return report(std::string(to_string(e.kind())), std::string(to_string(e.code())), e.what(), exit_code(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    return report("input_format", "bad_format", e.what(), 3);
  } catch (const fs::filesystem_error& e) {
    return report("input_format", "io", e.what(), 3);
  } catch (const std::exception& e) {
    return report("numeric", "internal", e.what(), 4);
  }
  return 0;
}
