#pragma once

// World directories: latent captures and identity means as MIIE files plus a
// JSON sidecar holding the config, the calibrated kappa and per-identity
// concentrations.

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mii/embedding_io.hpp"
#include "mii/error.hpp"
#include "mii/synth_world.hpp"

namespace mii {

inline constexpr const char* kWorldSidecar = "world.json";
inline constexpr const char* kWorldCaptures = "world.miie";
inline constexpr const char* kWorldIdentities = "identities.miie";

inline nlohmann::ordered_json world_sidecar(const World& w) {
  nlohmann::ordered_json j;
  j["d"] = w.cfg.d;
  j["n_identities"] = w.cfg.n_identities;
  j["images_per_identity"] = w.cfg.images_per_identity;
  j["regime"] = std::string(to_string(w.cfg.regime));
  j["kappa"] = w.cfg.kappa;
  j["kappa_spread"] = w.cfg.kappa_spread;
  j["seed"] = w.cfg.seed;
  j["kappa_scale"] = w.kappa_scale;
  auto kappas = nlohmann::ordered_json::array();
  for (const auto& id : w.identities) kappas.push_back(id.concentration);
  j["identity_kappas"] = std::move(kappas);
  j["captures_file"] = kWorldCaptures;
  j["identities_file"] = kWorldIdentities;
  return j;
}

inline void save_world(const std::string& dir, const World& w) {
  std::vector<Embedding> caps;
  caps.reserve(w.cfg.n_identities * w.cfg.images_per_identity);
  for (const auto& per_id : w.captures) caps.insert(caps.end(), per_id.begin(), per_id.end());
  write_embeddings_binary(dir + "/" + kWorldCaptures, caps, w.cfg.d);

  std::vector<Embedding> means;
  means.reserve(w.identities.size());
  for (const auto& id : w.identities) means.push_back(id.mean_direction);
  write_embeddings_binary(dir + "/" + kWorldIdentities, means, w.cfg.d);

  std::ofstream out(dir + "/" + kWorldSidecar);
  if (!out) throw IoError("cannot write world sidecar in " + dir);
  out << world_sidecar(w).dump(2) << '\n';
}

inline World load_world(const std::string& dir) {
  std::ifstream in(dir + "/" + kWorldSidecar);
  if (!in) throw IoError("no world sidecar in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed world sidecar: ") + e.what());
  }

  World w;
  try {
    w.cfg.d = j.at("d").get<std::size_t>();
    w.cfg.n_identities = j.at("n_identities").get<std::size_t>();
    w.cfg.images_per_identity = j.at("images_per_identity").get<std::size_t>();
    w.cfg.regime = parse_regime(j.at("regime").get<std::string>());
    w.cfg.kappa = j.at("kappa").get<double>();
    w.cfg.kappa_spread = j.at("kappa_spread").get<double>();
    w.cfg.seed = j.at("seed").get<std::uint64_t>();
    w.kappa_scale = j.at("kappa_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("incomplete world sidecar: ") + e.what());
  }
  w.cfg.validate();
  const auto kappas = j.at("identity_kappas").get<std::vector<double>>();

  const auto caps = read_embeddings_binary(dir + "/" + kWorldCaptures);
  const auto means = read_embeddings_binary(dir + "/" + kWorldIdentities);
  if (caps.d != w.cfg.d || means.d != w.cfg.d) throw IoError("world files disagree on dimension");
  if (means.embeddings.size() != w.cfg.n_identities || kappas.size() != w.cfg.n_identities ||
      caps.embeddings.size() != w.cfg.n_identities * w.cfg.images_per_identity) {
    throw IoError("world files disagree on identity or capture counts");
  }
  for (std::size_t i = 0; i < w.cfg.n_identities; ++i) {
    w.identities.push_back({i, means.embeddings[i], kappas[i]});
    const auto first = caps.embeddings.begin() +
                       static_cast<std::ptrdiff_t>(i * w.cfg.images_per_identity);
    w.captures.emplace_back(first, first + static_cast<std::ptrdiff_t>(w.cfg.images_per_identity));
  }
  return w;
}

}  // namespace mii
