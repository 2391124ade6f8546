#pragma once

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "mii/error.hpp"

namespace miitool {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mii::IoError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw mii::IoError("sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

// What a command read and wrote. Outputs are names relative to the out-dir.
struct RunRecord {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, double> derived;  // values computed by the run, e.g. a calibrated kappa

  void output(const std::string& name) { outputs.push_back(name); }
};

struct RunManifest {
  std::string command;
  nlohmann::json params;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // name -> sha256
  std::map<std::string, double> derived;
  std::string tool_version = kToolVersion;
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["params"] = nlohmann::ordered_json::parse(m.params.dump());
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  if (!m.derived.empty()) j["derived"] = m.derived;
  j["tool_version"] = m.tool_version;
  return j;
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mii::IoError("cannot read manifest " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.params = j.at("params");
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    if (j.contains("derived")) m.derived = j.at("derived").get<std::map<std::string, double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw mii::IoError("malformed manifest " + path + ": " + e.what());
  }
}

inline RunManifest finish_manifest(const std::string& command, nlohmann::json params,
                                   const RunRecord& rec, const std::string& out_dir) {
  RunManifest m;
  m.command = command;
  m.params = std::move(params);
  m.seeds = rec.seeds;
  m.derived = rec.derived;
  for (const auto& path : rec.inputs) m.inputs[path] = sha256_file(path);
  for (const auto& name : rec.outputs) m.outputs[name] = sha256_file(out_dir + "/" + name);
  std::ofstream out(out_dir + "/" + kManifestName);
  if (!out) throw mii::IoError("cannot write manifest in " + out_dir);
  out << to_json(m).dump(2) << '\n';
  return m;
}

}  // namespace miitool
