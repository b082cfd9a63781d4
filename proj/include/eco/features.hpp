#pragma once

// Strip descriptors: a deterministic hand-crafted baseline extractor and the
// ECOF container used to import externally computed (e.g. CNN) features.
//
// ECOF, all little-endian:
//   "ECOF" | u32 version = 1 | u32 count N | u32 dim D
//   N x ( u64 strip id | D x float32 )

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "eco/error.hpp"
#include "eco/image.hpp"

namespace eco {

inline constexpr int kDefaultFeatureDim = 2048;

enum class Domain { train, test };

inline std::string to_string(Domain d) { return d == Domain::train ? "train" : "test"; }

inline Domain domain_from_string(const std::string& s) {
  if (s == "train") return Domain::train;
  if (s == "test") return Domain::test;
  fail(ErrorCode::bad_format, "unknown domain '" + s + "'");
}

struct FeatureVector {
  std::uint64_t id = 0;
  Eigen::VectorXd values;
  Domain domain = Domain::train;
  std::optional<std::string> category;
};

// ---------------------------------------------------------------- baseline

inline constexpr int kGridCells = 8;
inline constexpr int kHueBins = 16;
inline constexpr int kOrientationBins = 16;
inline constexpr int kCellLength = kHueBins + kOrientationBins;

/// Hue in degrees [0, 360); achromatic pixels report 0.
inline double hue_degrees(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8, g = g8, b = b8;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  if (delta <= 0.0) return 0.0;
  double h;
  if (mx == r)
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  else if (mx == g)
    h = 60.0 * ((b - r) / delta + 2.0);
  else
    h = 60.0 * ((r - g) / delta + 4.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

/// Nearest orientation bin; bin k is centered on k * 2pi / 16.
inline int orientation_bin(double gx, double gy) {
  const double theta = std::atan2(gy, gx);
  const double step = 2.0 * std::numbers::pi / kOrientationBins;
  int b = static_cast<int>(std::lround(theta / step));
  b %= kOrientationBins;
  if (b < 0) b += kOrientationBins;
  return b;
}

namespace detail {

/// Fractional overlap of pixel [i, i + 1) with each of `cells` equal
/// intervals spanning [0, n). Soft assignment keeps the grid mirror
/// symmetric when n is not a multiple of the cell count.
inline std::vector<std::array<std::pair<int, double>, 2>> cell_overlaps(int n, int cells) {
  std::vector<std::array<std::pair<int, double>, 2>> out(n);
  const double size = static_cast<double>(n) / cells;
  for (int i = 0; i < n; ++i) {
    const int c0 = std::min(cells - 1, static_cast<int>(std::floor(i / size)));
    const double boundary = (c0 + 1) * size;
    if (c0 + 1 < cells && boundary < i + 1) {
      out[i] = {{{c0, boundary - i}, {c0 + 1, i + 1 - boundary}}};
    } else {
      out[i] = {{{c0, 1.0}, {c0, 0.0}}};
    }
  }
  return out;
}

}  // namespace detail

/// 8x8 grid of (16-bin hue histogram, 16-bin magnitude-weighted gradient
/// orientation histogram), each cell L2-normalized, concatenated row-major
/// by cell and then zero-padded or truncated to `dim`.
inline Eigen::VectorXd extract_baseline(const Image& strip, int dim = kDefaultFeatureDim) {
  const int w = strip.width(), h = strip.height();
  Eigen::VectorXd cells = Eigen::VectorXd::Zero(kGridCells * kGridCells * kCellLength);
  if (w > 0 && h > 0) {
    std::vector<double> gray(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        gray[static_cast<std::size_t>(y) * w + x] =
            (strip.at(x, y, 0) + strip.at(x, y, 1) + strip.at(x, y, 2)) / 3.0;
    auto g = [&](int x, int y) {
      x = std::clamp(x, 0, w - 1);
      y = std::clamp(y, 0, h - 1);
      return gray[static_cast<std::size_t>(y) * w + x];
    };

    const auto cx = detail::cell_overlaps(w, kGridCells);
    const auto cy = detail::cell_overlaps(h, kGridCells);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double hue = hue_degrees(strip.at(x, y, 0), strip.at(x, y, 1), strip.at(x, y, 2));
        const int hue_bin = std::min(kHueBins - 1, static_cast<int>(hue / (360.0 / kHueBins)));
        const double gx = 0.5 * (g(x + 1, y) - g(x - 1, y));
        const double gy = 0.5 * (g(x, y + 1) - g(x, y - 1));
        const double mag = std::hypot(gx, gy);
        const int ori_bin = mag > 0.0 ? orientation_bin(gx, gy) : 0;
        for (const auto& [row, wy] : cy[y]) {
          if (wy == 0.0) continue;
          for (const auto& [col, wx] : cx[x]) {
            if (wx == 0.0) continue;
            const double weight = wx * wy;
            const int base = (row * kGridCells + col) * kCellLength;
            cells[base + hue_bin] += weight;
            if (mag > 0.0) cells[base + kHueBins + ori_bin] += weight * mag;
          }
        }
      }
    }
    for (int c = 0; c < kGridCells * kGridCells; ++c) {
      auto seg = cells.segment(c * kCellLength, kCellLength);
      const double n = seg.norm();
      if (n > 0.0) seg /= n;
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  const int n = std::min<int>(dim, static_cast<int>(cells.size()));
  out.head(n) = cells.head(n);
  return out;
}

// ---------------------------------------------------------------- ECOF I/O

inline constexpr std::uint32_t kEcofVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<char>& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.insert(buf.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(const char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

inline std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, const std::vector<char>& buf) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace detail

struct FeatureRecord {
  std::uint64_t id = 0;
  std::vector<float> values;
};

inline std::vector<char> encode_ecof(const std::vector<FeatureRecord>& records, std::uint32_t dim) {
  std::vector<char> buf{'E', 'C', 'O', 'F'};
  detail::put_le<std::uint32_t>(buf, kEcofVersion);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(records.size()));
  detail::put_le<std::uint32_t>(buf, dim);
  buf.reserve(buf.size() + records.size() * (8 + 4 * static_cast<std::size_t>(dim)));
  for (const auto& r : records) {
    if (r.values.size() != dim)
      fail(ErrorCode::dimension_mismatch, "record " + std::to_string(r.id) + " has " +
                                              std::to_string(r.values.size()) + " values, expected " +
                                              std::to_string(dim));
    detail::put_le<std::uint64_t>(buf, r.id);
    for (float v : r.values) detail::put_le<float>(buf, v);
  }
  return buf;
}

/// Rejects bad magic/version, truncated or oversized payloads (dimension
/// mismatch) and duplicate ids.
inline std::vector<FeatureRecord> decode_ecof(const std::vector<char>& buf) {
  if (buf.size() < 16 || std::memcmp(buf.data(), "ECOF", 4) != 0)
    fail(ErrorCode::bad_format, "missing ECOF magic");
  const auto version = detail::get_le<std::uint32_t>(buf.data() + 4);
  if (version != kEcofVersion)
    fail(ErrorCode::bad_format, "unsupported ECOF version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(buf.data() + 8);
  const auto dim = detail::get_le<std::uint32_t>(buf.data() + 12);
  const std::size_t record_bytes = 8 + 4 * static_cast<std::size_t>(dim);
  if (buf.size() - 16 != record_bytes * count)
    fail(ErrorCode::dimension_mismatch,
         "payload of " + std::to_string(buf.size() - 16) + " bytes does not hold " +
             std::to_string(count) + " records of dimension " + std::to_string(dim));

  std::vector<FeatureRecord> records(count);
  std::set<std::uint64_t> seen;
  const char* p = buf.data() + 16;
  for (auto& r : records) {
    r.id = detail::get_le<std::uint64_t>(p);
    p += 8;
    if (!seen.insert(r.id).second) fail(ErrorCode::bad_format, "duplicate strip id " + std::to_string(r.id));
    r.values.resize(dim);
    for (auto& v : r.values) {
      v = detail::get_le<float>(p);
      p += 4;
    }
  }
  return records;
}

inline void write_ecof(const std::filesystem::path& path, const std::vector<FeatureRecord>& records,
                       std::uint32_t dim) {
  detail::write_all(path, encode_ecof(records, dim));
}

inline std::vector<FeatureRecord> read_ecof(const std::filesystem::path& path) {
  return decode_ecof(detail::read_all(path));
}

inline FeatureRecord to_record(const FeatureVector& f) {
  FeatureRecord r{f.id, std::vector<float>(f.values.size())};
  for (Eigen::Index i = 0; i < f.values.size(); ++i) r.values[i] = static_cast<float>(f.values[i]);
  return r;
}

inline void write_features(const std::filesystem::path& path, const std::vector<FeatureVector>& features,
                           std::uint32_t dim) {
  std::vector<FeatureRecord> records;
  records.reserve(features.size());
  for (const auto& f : features) records.push_back(to_record(f));
  write_ecof(path, records, dim);
}

// ------------------------------------------------------------- manifest join

/// Per-strip metadata keyed by id. JSON form:
///   { "strips": [ {"id", "store", "frame", "category", "theta", "r", "domain", ...} ] }
struct StripMetadata {
  std::string store;
  std::string frame;
  std::string category;
  int theta = 0;
  double distance = 0.0;
  Domain domain = Domain::train;
  std::string path;
};

using StripManifest = std::map<std::uint64_t, StripMetadata>;

inline nlohmann::json to_json(const StripManifest& m) {
  nlohmann::json strips = nlohmann::json::array();
  for (const auto& [id, s] : m)
    strips.push_back({{"id", id}, {"store", s.store}, {"frame", s.frame}, {"category", s.category},
                      {"theta", s.theta}, {"r", s.distance}, {"domain", to_string(s.domain)},
                      {"path", s.path}});
  return {{"strips", strips}};
}

inline StripManifest strip_manifest_from_json(const nlohmann::json& j) {
  StripManifest m;
  try {
    for (const auto& s : j.at("strips")) {
      StripMetadata md;
      md.store = s.value("store", std::string{});
      md.frame = s.value("frame", std::string{});
      md.category = s.value("category", std::string{});
      md.theta = s.value("theta", 0);
      md.distance = s.value("r", 0.0);
      md.domain = domain_from_string(s.value("domain", std::string("train")));
      md.path = s.value("path", std::string{});
      const auto id = s.at("id").get<std::uint64_t>();
      if (!m.emplace(id, md).second) fail(ErrorCode::bad_format, "duplicate manifest id " + std::to_string(id));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, std::string("strip manifest: ") + e.what());
  }
  return m;
}

struct ImportResult {
  std::vector<FeatureVector> features;
  std::vector<std::uint64_t> unmatched;  // ids absent from the manifest
  std::uint32_t dim = 0;
};

/// Reads an ECOF file and joins record ids to the manifest. Records without
/// metadata are still returned (domain train, no category) and listed in
/// `unmatched`.
inline ImportResult import_features(const std::filesystem::path& path, const StripManifest* manifest = nullptr) {
  const auto buf = detail::read_all(path);
  const auto records = decode_ecof(buf);
  ImportResult out;
  out.dim = detail::get_le<std::uint32_t>(buf.data() + 12);
  out.features.reserve(records.size());
  for (const auto& r : records) {
    FeatureVector f;
    f.id = r.id;
    f.values = Eigen::Map<const Eigen::VectorXf>(r.values.data(), static_cast<Eigen::Index>(r.values.size()))
                   .cast<double>();
    if (!f.values.allFinite()) fail(ErrorCode::bad_format, "non-finite feature in record " + std::to_string(r.id));
    if (manifest) {
      if (auto it = manifest->find(r.id); it != manifest->end()) {
        f.domain = it->second.domain;
        if (!it->second.category.empty()) f.category = it->second.category;
      } else {
        out.unmatched.push_back(r.id);
      }
    }
    out.features.push_back(std::move(f));
  }
  return out;
}

}  // namespace eco
