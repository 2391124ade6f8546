#pragma once

// Runs one MII construction method against a set of comparators. The attacker
// comparator builds the MII; each attacked comparator then embeds it and is
// scored against its own view of the live captures.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mii/error.hpp"
#include "mii/gallery.hpp"
#include "mii/ideal_attack.hpp"
#include "mii/morph.hpp"
#include "mii/render.hpp"
#include "mii/rs_losses.hpp"
#include "mii/synth_world.hpp"
#include "mii/verify_eval.hpp"

namespace mii {

enum class AttackMethod { kIdeal, kGallerySearch, kImageSpace, kRsStub };

inline std::string_view to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::kIdeal: return "ideal";
    case AttackMethod::kGallerySearch: return "gs";
    case AttackMethod::kImageSpace: return "is";
    case AttackMethod::kRsStub: return "rs-stub";
  }
  return "?";
}

inline AttackMethod parse_method(std::string_view s) {
  if (s == "ideal") return AttackMethod::kIdeal;
  if (s == "gs") return AttackMethod::kGallerySearch;
  if (s == "is") return AttackMethod::kImageSpace;
  if (s == "rs-stub") return AttackMethod::kRsStub;
  throw ContractError("unknown attack method: " + std::string(s));
}

// Noise key for the i-th generated MII.
inline std::uint64_t mii_key(std::uint64_t attack_index) {
  return derive_seed(0, stream::kMii, attack_index);
}

// A reference face for image-space morphing.
struct FaceSample {
  RasterImage image;
  LandmarkSet landmarks;
};
using FaceSource = std::function<FaceSample(std::size_t identity)>;

struct AttackContext {
  const World* world = nullptr;
  std::vector<IdentityPair> pairs;

  // gs: latent gallery, searched in the attacker's embedding space.
  const Gallery* latent_gallery = nullptr;
  bool use_index = true;
  std::size_t n_probe = 0;  // 0 probes every list
  std::uint64_t index_seed = 0;

  // is / rs-stub
  const SyntheticFaceRenderer* renderer = nullptr;
  FaceSource faces;  // defaults to rendering the reference latents
  double alpha = 0.5;
};

// The per-quad view of one comparator: refs, lives and the reference distance.
inline AttackQuad quad_for(const EmbeddedWorld& world, IdentityPair pair) {
  return make_quad(world, pair);
}

struct LossSummary {
  double pixel_l1 = 0.0;
  double feature = 0.0;
  double total = 0.0;  // with the adversarial term absent
  std::size_t batch = 0;
};

struct AttackRun {
  // miis[a][i]: MII of pair i as embedded by attacked comparator a.
  std::vector<std::vector<Embedding>> miis;
  std::vector<std::size_t> gallery_winners;  // gs only
  std::optional<LossSummary> losses;         // rs-stub only
};

inline FaceSample rendered_face(const SyntheticFaceRenderer& renderer, const World& world,
                                std::size_t identity) {
  const auto& latent = world.captures[identity][kRefCapture];
  return {renderer.render(latent), renderer.morph_landmarks(latent)};
}

inline AttackRun run_attack(AttackMethod method, const SyntheticComparator& attacker,
                            const EmbeddedWorld& attacker_world,
                            std::span<const SyntheticComparator> attacked,
                            std::span<const EmbeddedWorld> attacked_worlds,
                            const AttackContext& ctx) {
  require(ctx.world != nullptr, "attack needs a world");
  require(!ctx.pairs.empty(), "attack needs at least one identity pair");
  require(attacked.size() == attacked_worlds.size() && !attacked.empty(),
          "attacked comparators and their worlds must line up");
  require(attacker.dim() == ctx.world->cfg.d, "attacker dimension does not match the world");
  for (const auto& c : attacked) {
    require(c.dim() == ctx.world->cfg.d, "comparator dimension does not match the world");
  }

  AttackRun run;
  run.miis.assign(attacked.size(), {});
  for (auto& v : run.miis) v.reserve(ctx.pairs.size());

  switch (method) {
    case AttackMethod::kIdeal: {
      for (std::size_t i = 0; i < ctx.pairs.size(); ++i) {
        const auto quad = quad_for(attacker_world, ctx.pairs[i]);
        const Embedding mid = ideal_mii(quad);
        const Embedding latent = attacker.unapply(mid);
        for (std::size_t a = 0; a < attacked.size(); ++a) {
          if (attacked[a].id() == attacker.id()) {
            run.miis[a].push_back(ideal_mii(quad_for(attacked_worlds[a], ctx.pairs[i])));
          } else {
            run.miis[a].push_back(attacked[a].apply(latent, mii_key(i)));
          }
        }
      }
      break;
    }

    case AttackMethod::kGallerySearch: {
      require(ctx.latent_gallery != nullptr && !ctx.latent_gallery->empty(),
              "gs attack needs a nonempty gallery");
      const Gallery& latent = *ctx.latent_gallery;
      require(latent.dim() == ctx.world->cfg.d, "gallery dimension does not match the world");
      Gallery seen(latent.dim());
      for (std::size_t k = 0; k < latent.size(); ++k) {
        seen.add(attacker.apply(latent.embedding(k), gallery_key(k)), latent.id(k));
      }
      std::optional<GalleryIndex> index;
      if (ctx.use_index) index.emplace(seen, GalleryIndex::Options{.seed = ctx.index_seed});
      run.gallery_winners.reserve(ctx.pairs.size());
      for (std::size_t i = 0; i < ctx.pairs.size(); ++i) {
        const auto quad = quad_for(attacker_world, ctx.pairs[i]);
        const auto hit =
            index ? gs_search_indexed(*index, quad.p_ref, quad.q_ref,
                                      ctx.n_probe ? ctx.n_probe : index->n_lists())
                  : gs_search_exact(seen, quad.p_ref, quad.q_ref);
        run.gallery_winners.push_back(hit.index);
        const Embedding member = latent.embedding(hit.index);
        for (std::size_t a = 0; a < attacked.size(); ++a) {
          run.miis[a].push_back(attacked[a].apply(member, gallery_key(hit.index)));
        }
      }
      break;
    }

    case AttackMethod::kImageSpace: {
      require(ctx.renderer != nullptr, "is attack needs a renderer");
      const auto& renderer = *ctx.renderer;
      std::vector<RenderedImageEncoder> encoders;
      for (const auto& c : attacked) encoders.emplace_back(renderer, c);
      for (std::size_t i = 0; i < ctx.pairs.size(); ++i) {
        const auto [p, q] = ctx.pairs[i];
        const FaceSample fp = ctx.faces ? ctx.faces(p) : rendered_face(renderer, *ctx.world, p);
        const FaceSample fq = ctx.faces ? ctx.faces(q) : rendered_face(renderer, *ctx.world, q);
        const RasterImage img = morph(fp.image, fp.landmarks, fq.image, fq.landmarks, ctx.alpha);
        for (std::size_t a = 0; a < attacked.size(); ++a) {
          run.miis[a].push_back(encoders[a].encode(img));
        }
      }
      break;
    }

    case AttackMethod::kRsStub: {
      require(ctx.renderer != nullptr, "rs-stub attack needs a renderer");
      const auto& renderer = *ctx.renderer;
      const RenderedDecoder decoder(renderer, attacker);
      const RenderedImageEncoder own_encoder(renderer, attacker);
      std::vector<RenderedImageEncoder> encoders;
      for (const auto& c : attacked) encoders.emplace_back(renderer, c);
      LossSummary loss;
      for (std::size_t i = 0; i < ctx.pairs.size(); ++i) {
        const auto quad = quad_for(attacker_world, ctx.pairs[i]);
        const auto rs = rs_attack(quad.p_ref, quad.q_ref, decoder, own_encoder);
        for (std::size_t a = 0; a < attacked.size(); ++a) {
          run.miis[a].push_back(encoders[a].encode(rs.image));
        }
        // Reconstruction of the p reference face and the feature gap of the MII.
        const RasterImage recon = decoder.decode(quad.p_ref);
        const RasterImage truth = renderer.render(ctx.world->captures[quad.p_identity][kRefCapture]);
        loss.pixel_l1 += loss_pixel_l1(std::span(&recon, 1), std::span(&truth, 1));
        loss.feature += loss_feature(std::span(&rs.reembedded, 1), std::span(&rs.target, 1));
      }
      loss.batch = ctx.pairs.size();
      loss.pixel_l1 /= static_cast<double>(loss.batch);
      loss.feature /= static_cast<double>(loss.batch);
      loss.total = loss_total(kReferenceLossWeights, loss.pixel_l1, 0.0, loss.feature);
      run.losses = loss;
      break;
    }
  }
  return run;
}

// Scores MIIs from one attacked comparator against its live captures.
inline std::vector<AttackOutcome> score_run(const EmbeddedWorld& attacked_world,
                                            std::span<const IdentityPair> pairs,
                                            std::span<const Embedding> miis,
                                            const ThresholdTable& table) {
  require(pairs.size() == miis.size(), "one MII per pair is required");
  std::vector<AttackOutcome> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto quad = quad_for(attacked_world, pairs[i]);
    out.push_back(score_attack(quad.p_live, quad.q_live, miis[i], table));
  }
  return out;
}

// Thresholds (with TARs) of one comparator over a shared pair plan.
inline ThresholdTable comparator_thresholds(const EmbeddedWorld& world, const PairPlan& plan) {
  const auto sets = evaluate_distances(world, plan);
  return build_threshold_table(sets.negatives, sets.positives);
}

struct AccompliceSummary {
  double median_ref_dist = 0.0;
  double overall_success = 0.0;
  double below_median_success = 0.0;
  std::size_t below_median_count = 0;
};

// Success overall and restricted to attacks whose reference pair is closer
// than the median reference distance (ties at the median count as below).
inline AccompliceSummary accomplice_summary(std::span<const double> ref_dists,
                                            std::span<const double> mii_dists,
                                            AngularDistance epsilon) {
  require(!ref_dists.empty() && ref_dists.size() == mii_dists.size(),
          "accomplice analysis needs matching nonempty vectors");
  std::vector<double> sorted(ref_dists.begin(), ref_dists.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  AccompliceSummary s;
  s.median_ref_dist = median;
  std::size_t hits = 0, below = 0, below_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = mii_dists[i] <= epsilon.radians();
    hits += ok;
    if (ref_dists[i] <= median) {
      ++below;
      below_hits += ok;
    }
  }
  s.overall_success = static_cast<double>(hits) / static_cast<double>(n);
  s.below_median_count = below;
  s.below_median_success = static_cast<double>(below_hits) / static_cast<double>(below);
  return s;
}

}  // namespace mii
