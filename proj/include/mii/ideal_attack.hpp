#pragma once

// The ideal MII generator: an image whose embedding sits exactly at the
// spherical midpoint of the two reference embeddings, scored against the
// live captures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "mii/error.hpp"
#include "mii/rng.hpp"
#include "mii/sphere.hpp"
#include "mii/synth_world.hpp"
#include "mii/verify_eval.hpp"

namespace mii {

inline constexpr std::uint32_t kRefCapture = 0;
inline constexpr std::uint32_t kLiveCapture = 1;

struct AttackQuad {
  Embedding p_ref, p_live, q_ref, q_live;
  std::uint64_t p_identity = 0;
  std::uint64_t q_identity = 0;
};

// Adversary/accomplice identities of one attack.
struct IdentityPair {
  std::uint32_t p;
  std::uint32_t q;
};

// `n` distinct unordered pairs of distinct identities, seeded. Order within a
// pair is randomised.
inline std::vector<IdentityPair> sample_identity_pairs(std::size_t n_identities, std::size_t n,
                                                       std::uint64_t seed) {
  require(n_identities >= 2, "need at least two identities to pair");
  require(n >= 1, "need at least one pair");
  const double possible = 0.5 * static_cast<double>(n_identities) *
                          static_cast<double>(n_identities - 1);
  require(static_cast<double>(n) <= possible, "more pairs requested than unique pairings exist");
  Rng rng(derive_seed(seed, stream::kQuads));
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n_identities - 1));
  std::unordered_set<std::uint64_t> seen;
  std::vector<IdentityPair> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto a = pick(rng);
    const auto b = pick(rng);
    if (a == b) continue;
    const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
    if (!seen.insert(key).second) continue;
    out.push_back({a, b});
  }
  return out;
}

inline AttackQuad make_quad(const EmbeddedWorld& world, IdentityPair pair) {
  require(pair.p != pair.q, "quad identities must differ");
  require(pair.p < world.size() && pair.q < world.size(), "quad identity out of range");
  require(world[pair.p].size() > kLiveCapture && world[pair.q].size() > kLiveCapture,
          "quads need a reference and a live capture per identity");
  return {world[pair.p][kRefCapture], world[pair.p][kLiveCapture], world[pair.q][kRefCapture],
          world[pair.q][kLiveCapture], pair.p, pair.q};
}

inline std::vector<AttackQuad> make_quads(const EmbeddedWorld& world,
                                          std::span<const IdentityPair> pairs) {
  std::vector<AttackQuad> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) out.push_back(make_quad(world, pair));
  return out;
}

inline Embedding ideal_mii(const AttackQuad& quad) {
  return spherical_midpoint(quad.p_ref, quad.q_ref);
}

inline std::vector<double> ideal_attack_distances(std::span<const AttackQuad> quads) {
  require(!quads.empty(), "quad list must be nonempty");
  std::vector<double> out;
  out.reserve(quads.size());
  for (const auto& quad : quads) {
    out.push_back(mii_distance(quad.p_live, quad.q_live, ideal_mii(quad)).radians());
  }
  return out;
}

inline std::vector<AttackOutcome> ideal_attack_outcomes(std::span<const AttackQuad> quads,
                                                        const ThresholdTable& table) {
  std::vector<AttackOutcome> out;
  out.reserve(quads.size());
  for (const auto& quad : quads) {
    out.push_back(score_attack(quad.p_live, quad.q_live, ideal_mii(quad), table));
  }
  return out;
}

// The MII distances an ideal attack would reach if live captures equalled
// the references.
inline std::vector<double> halved_negative_distribution(std::span<const double> negative_dists) {
  std::vector<double> out(negative_dists.begin(), negative_dists.end());
  for (double& d : out) d *= 0.5;
  return out;
}

struct HistogramBin {
  double left;
  double right;
  double density;
};

// Density histogram of angles over [0, pi]; densities integrate to one.
inline std::vector<HistogramBin> angle_histogram(std::span<const double> values, std::size_t bins) {
  require(bins >= 1, "histogram needs at least one bin");
  require(!values.empty(), "histogram input must be nonempty");
  const double width = kPi / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::clamp(v, 0.0, kPi) / width);
    counts[std::min(b, bins - 1)]++;
  }
  std::vector<HistogramBin> out;
  out.reserve(bins);
  const double norm = 1.0 / (static_cast<double>(values.size()) * width);
  for (std::size_t b = 0; b < bins; ++b) {
    out.push_back({static_cast<double>(b) * width, static_cast<double>(b + 1) * width,
                   static_cast<double>(counts[b]) * norm});
  }
  return out;
}

}  // namespace mii
