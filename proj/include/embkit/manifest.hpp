#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "embkit/checkpoint.hpp"
#include "embkit/error.hpp"

namespace embkit {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

// Key order in nlohmann::json objects is sorted, so dump() is canonical.
inline std::string config_hash(const nlohmann::json& config) { return sha256_hex(config.dump()).substr(0, 16); }

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string config_hash;
  std::string command;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;

  void add_input(const std::filesystem::path& p) { inputs.push_back({p.string(), file_digest(p)}); }
  void add_output(const std::filesystem::path& p) { outputs.push_back({p.string(), file_digest(p)}); }
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  auto files = [](const std::vector<FileDigest>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : v) {
      a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    }
    return a;
  };
  return {{"config_hash", m.config_hash}, {"command", m.command},   {"inputs", files(m.inputs)},
          {"outputs", files(m.outputs)},  {"wall_time_seconds", m.wall_time_seconds}, {"seed", m.seed}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.command = j.at("command").get<std::string>();
  for (const auto& f : j.at("inputs")) {
    m.inputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  }
  for (const auto& f : j.at("outputs")) {
    m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  }
  m.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  write_file_bytes(path, manifest_to_json(m).dump(2) + "\n");
}

// Reads a manifest and recomputes every recorded digest; a mismatch or a
// missing file is an error.
inline RunManifest read_and_verify_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  RunManifest m = manifest_from_json(j);
  for (const auto* list : {&m.inputs, &m.outputs}) {
    for (const auto& f : *list) {
      if (file_digest(f.path) != f.sha256) {
        throw Error(ErrorCode::IoError, "digest mismatch for " + f.path);
      }
    }
  }
  return m;
}

}  // namespace embkit
