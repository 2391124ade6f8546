#pragma once

// Verification evaluation: FAR/TAR, thresholds at FAR targets, exact AUROC,
// Pearson correlation, pair sampling and MII attack scoring.
//
// Counting conventions: FAR and TAR count distances strictly below epsilon;
// an attack succeeds when its MII distance is <= epsilon.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "mii/error.hpp"
#include "mii/rng.hpp"
#include "mii/sphere.hpp"
#include "mii/synth_world.hpp"

namespace mii {

inline constexpr std::array<double, 5> kFarTargets = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
// epsilon_2, FAR 0.1%: the border-control operating point.
inline constexpr std::size_t kHeadlineEpsIndex = 2;
inline constexpr std::size_t kDefaultNegativeCap = 10'000'000;

enum class PairLabel { kMatching, kNonMatching };

struct PairSet {
  std::vector<std::pair<Embedding, Embedding>> pairs;
  PairLabel label = PairLabel::kMatching;

  std::vector<double> distances() const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) out.push_back(angular_distance(a, b).radians());
    return out;
  }
};

// Fraction of distances strictly below eps.
inline double fraction_below(std::span<const double> dists, AngularDistance eps) {
  require(!dists.empty(), "distance list must be nonempty");
  std::size_t count = 0;
  for (double d : dists) count += d < eps.radians();
  return static_cast<double>(count) / static_cast<double>(dists.size());
}

inline double far(std::span<const double> negative_dists, AngularDistance eps) {
  return fraction_below(negative_dists, eps);
}

inline double tar(std::span<const double> positive_dists, AngularDistance eps) {
  return fraction_below(positive_dists, eps);
}

// Largest negative distance eps with far(eps) <= target. Sorted position k is
// the largest with k/n <= target, so exactly k negatives sit strictly below
// (fewer with ties) and the next distinct value would admit more than target.
inline AngularDistance threshold_at_far_sorted(std::span<const double> sorted_negatives,
                                               double far_target) {
  require(far_target > 0.0 && far_target < 1.0, "FAR target must lie in (0, 1)");
  require(!sorted_negatives.empty(), "negative distance list must be nonempty");
  const std::size_t n = sorted_negatives.size();
  const auto nd = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::floor(far_target * nd));
  while (k + 1 < n && static_cast<double>(k + 1) / nd <= far_target) ++k;
  while (k > 0 && static_cast<double>(k) / nd > far_target) --k;
  return AngularDistance(std::clamp(sorted_negatives[std::min(k, n - 1)], 0.0, kPi));
}

inline AngularDistance threshold_at_far(std::span<const double> negative_dists, double far_target) {
  require(!negative_dists.empty(), "negative distance list must be nonempty");
  std::vector<double> sorted(negative_dists.begin(), negative_dists.end());
  std::sort(sorted.begin(), sorted.end());
  return threshold_at_far_sorted(sorted, far_target);
}

struct ThresholdEntry {
  double far_target = 0.0;
  AngularDistance epsilon;
  std::optional<double> tar;
};

struct ThresholdTable {
  std::vector<ThresholdEntry> entries;

  std::size_t size() const { return entries.size(); }
  AngularDistance epsilon(std::size_t i) const {
    require(i < entries.size(), "epsilon index out of range");
    return entries[i].epsilon;
  }
};

// Thresholds at the five standard FAR targets; TAR filled in when positives
// are supplied.
inline ThresholdTable build_threshold_table(std::span<const double> negative_dists,
                                            std::span<const double> positive_dists = {}) {
  std::vector<double> sorted(negative_dists.begin(), negative_dists.end());
  std::sort(sorted.begin(), sorted.end());
  ThresholdTable table;
  for (double target : kFarTargets) {
    ThresholdEntry entry{target, threshold_at_far_sorted(sorted, target), std::nullopt};
    if (!positive_dists.empty()) entry.tar = tar(positive_dists, entry.epsilon);
    table.entries.push_back(entry);
  }
  return table;
}

// Probability that a random positive distance is below a random negative one,
// ties counted one half. Exact, via a merge over sorted lists.
inline double auroc(std::span<const double> positive_dists, std::span<const double> negative_dists) {
  require(!positive_dists.empty() && !negative_dists.empty(),
          "AUROC needs nonempty positive and negative lists");
  std::vector<double> neg(negative_dists.begin(), negative_dists.end());
  std::sort(neg.begin(), neg.end());
  // twice the win count plus the tie count, so everything stays integral
  std::uint64_t doubled = 0;
  for (double p : positive_dists) {
    const auto first_tie = std::lower_bound(neg.begin(), neg.end(), p);
    const auto first_win = std::upper_bound(first_tie, neg.end(), p);
    doubled += 2 * static_cast<std::uint64_t>(neg.end() - first_win) +
               static_cast<std::uint64_t>(first_win - first_tie);
  }
  return static_cast<double>(doubled) /
         (2.0 * static_cast<double>(positive_dists.size()) * static_cast<double>(neg.size()));
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "pearson inputs must have equal length");
  require(x.size() >= 2, "pearson needs at least two samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw UndefinedCorrelationError("pearson input has zero variance");
  if (sxy == sxx && sxy == syy) return 1.0;  // rounding in the square root could miss exactly 1
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct AttackOutcome {
  AngularDistance p_live_dist;
  AngularDistance q_live_dist;
  AngularDistance mii_dist;
  std::vector<bool> success_at;
};

inline AttackOutcome score_attack(const Embedding& p_live, const Embedding& q_live,
                                  const Embedding& mii, const ThresholdTable& table) {
  require(p_live.dim() == q_live.dim() && p_live.dim() == mii.dim(),
          "attack embeddings must share one dimension");
  AttackOutcome out;
  out.p_live_dist = angular_distance(p_live, mii);
  out.q_live_dist = angular_distance(q_live, mii);
  out.mii_dist = std::max(out.p_live_dist, out.q_live_dist);
  out.success_at.reserve(table.size());
  for (const auto& e : table.entries) out.success_at.push_back(out.mii_dist <= e.epsilon);
  return out;
}

inline double success_rate(std::span<const AttackOutcome> outcomes, std::size_t eps_index) {
  require(!outcomes.empty(), "outcome list must be nonempty");
  std::size_t hits = 0;
  for (const auto& o : outcomes) {
    require(eps_index < o.success_at.size(), "epsilon index out of range");
    hits += o.success_at[eps_index];
  }
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

// Indices into an EmbeddedWorld: (identity, capture).
struct CaptureRef {
  std::uint32_t identity;
  std::uint32_t capture;
};

// Evaluation pairs shared by every comparator of a study so their distance
// vectors line up element by element.
struct PairPlan {
  std::vector<std::pair<CaptureRef, CaptureRef>> positives;
  std::vector<std::pair<CaptureRef, CaptureRef>> negatives;
};

// All matching pairs; all non-matching pairs, or a seeded sample of `cap`
// of them (with replacement) when the full cross product exceeds the cap.
inline PairPlan make_pair_plan(std::size_t n_identities, std::size_t images_per_identity,
                               std::uint64_t seed, std::size_t negative_cap = kDefaultNegativeCap) {
  require(n_identities >= 2 && images_per_identity >= 1, "pair plan needs >= 2 identities");
  require(negative_cap >= 1, "negative cap must be >= 1");
  PairPlan plan;
  const auto ni = static_cast<std::uint32_t>(n_identities);
  const auto nc = static_cast<std::uint32_t>(images_per_identity);
  for (std::uint32_t i = 0; i < ni; ++i)
    for (std::uint32_t a = 0; a < nc; ++a)
      for (std::uint32_t b = a + 1; b < nc; ++b) plan.positives.push_back({{i, a}, {i, b}});

  const std::size_t total_captures = n_identities * images_per_identity;
  const std::size_t full = (total_captures * (total_captures - images_per_identity)) / 2;
  if (full <= negative_cap) {
    plan.negatives.reserve(full);
    for (std::uint32_t i = 0; i < ni; ++i)
      for (std::uint32_t a = 0; a < nc; ++a)
        for (std::uint32_t j = i + 1; j < ni; ++j)
          for (std::uint32_t b = 0; b < nc; ++b) plan.negatives.push_back({{i, a}, {j, b}});
  } else {
    Rng rng(derive_seed(seed, stream::kPairs));
    std::uniform_int_distribution<std::uint32_t> pick_id(0, ni - 1);
    std::uniform_int_distribution<std::uint32_t> pick_cap(0, nc - 1);
    plan.negatives.reserve(negative_cap);
    while (plan.negatives.size() < negative_cap) {
      const auto i = pick_id(rng);
      const auto j = pick_id(rng);
      if (i == j) continue;
      plan.negatives.push_back({{i, pick_cap(rng)}, {j, pick_cap(rng)}});
    }
  }
  return plan;
}

inline std::vector<double> plan_distances(const EmbeddedWorld& world,
                                          std::span<const std::pair<CaptureRef, CaptureRef>> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    const auto& ea = world[a.identity][a.capture];
    const auto& eb = world[b.identity][b.capture];
    out.push_back(clamped_acos(dot(ea.coords(), eb.coords())));
  }
  return out;
}

struct DistanceSets {
  std::vector<double> positives;
  std::vector<double> negatives;
};

inline DistanceSets evaluate_distances(const EmbeddedWorld& world, const PairPlan& plan) {
  return {plan_distances(world, plan.positives), plan_distances(world, plan.negatives)};
}

}  // namespace mii
