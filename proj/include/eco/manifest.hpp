#pragma once

// Run manifests: one JSON record per command invocation with its config,
// input hashes, seed and outputs. No timestamps, so identical runs produce
// identical manifests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <openssl/sha.h>

#include <json.hpp>

#include "eco/bundle.hpp"
#include "eco/error.hpp"

namespace eco {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

/// Hash of every regular file below `dir`, keyed by relative path.
inline nlohmann::json sha256_tree(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::json out = nlohmann::json::object();
  for (const auto& f : files) out[std::filesystem::relative(f, dir).generic_string()] = sha256_file(f);
  return out;
}

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();  // path -> sha256
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::vector<std::string> outputs;
  nlohmann::json extra = nlohmann::json::object();

  void add_input(const std::filesystem::path& p) {
    if (std::filesystem::is_directory(p)) {
      for (const auto& [rel, h] : sha256_tree(p).items()) inputs[(p / rel).generic_string()] = h;
    } else {
      inputs[p.generic_string()] = sha256_file(p);
    }
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j{{"command", m.command}, {"config", m.config}, {"inputs", m.inputs},
                   {"seed", m.seed},       {"version", m.version}, {"outputs", m.outputs}};
  if (!m.extra.empty()) j["extra"] = m.extra;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.value("config", nlohmann::json::object());
  m.inputs = j.value("inputs", nlohmann::json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  m.version = j.value("version", std::string(kToolVersion));
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.extra = j.value("extra", nlohmann::json::object());
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_json_file(path, to_json(m));
}

}  // namespace eco
