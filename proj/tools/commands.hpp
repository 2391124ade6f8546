#pragma once

// miitool subcommands. Each takes a parameter struct (serialized verbatim into
// the run manifest) and an output directory, and records what it read and wrote.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "mii/attack_suite.hpp"
#include "mii/embedding_io.hpp"
#include "mii/gallery.hpp"
#include "mii/ideal_attack.hpp"
#include "mii/image_io.hpp"
#include "mii/morph.hpp"
#include "mii/render.hpp"
#include "mii/report.hpp"
#include "mii/synth_world.hpp"
#include "mii/verify_eval.hpp"
#include "mii/world_io.hpp"

#include "manifest.hpp"

namespace miitool {

struct WorldParams {
  std::size_t d = 128;
  std::size_t n_identities = 2000;
  std::size_t images_per_identity = 2;
  std::string regime = "low-intra-class-var";
  double kappa = 0.0;
  double kappa_spread = 0.5;
  std::uint64_t seed = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(WorldParams, d, n_identities, images_per_identity,
                                                regime, kappa, kappa_spread, seed)

// Comparator family shared by the analysis commands.
struct FamilyParams {
  std::vector<std::string> comparators = {"cmp-a", "cmp-b", "cmp-c"};
  double noise = 0.3;
  std::uint64_t family_seed = 7;
};

struct EvalParams {
  std::string world;
  std::vector<std::string> comparators = FamilyParams{}.comparators;
  double noise = FamilyParams{}.noise;
  std::uint64_t family_seed = FamilyParams{}.family_seed;
  std::uint64_t seed = 1;
  std::size_t negative_cap = mii::kDefaultNegativeCap;
  std::size_t hist_bins = 100;
  std::string format = "csv";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalParams, world, comparators, noise, family_seed,
                                                seed, negative_cap, hist_bins, format)

struct AttackParams {
  std::string world;
  std::string method = "ideal";
  std::string attacker;  // empty: every comparator attacks itself
  std::vector<std::string> comparators = FamilyParams{}.comparators;
  double noise = FamilyParams{}.noise;
  std::uint64_t family_seed = FamilyParams{}.family_seed;
  std::size_t n_attacks = 10'000;
  std::uint64_t seed = 1;
  std::size_t negative_cap = mii::kDefaultNegativeCap;
  std::size_t hist_bins = 100;
  std::string format = "csv";
  std::string gallery;
  bool use_index = true;
  std::size_t n_probe = 0;
  std::string images_dir;
  int image_size = 128;
  double alpha = 0.5;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AttackParams, world, method, attacker, comparators,
                                                noise, family_seed, n_attacks, seed, negative_cap,
                                                hist_bins, format, gallery, use_index, n_probe,
                                                images_dir, image_size, alpha)

struct GalleryParams {
  std::size_t d = 128;
  std::size_t size = 100'000;
  std::uint64_t seed = 1;
  // When set, the gallery holds the latent midpoints of the reference pairs an
  // attack with the same world, n_attacks and seed would target.
  std::string midpoints_of;
  std::size_t n_attacks = 10'000;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GalleryParams, d, size, seed, midpoints_of, n_attacks)

struct CurveParams {
  std::string world;
  std::string comparator = "cmp-a";
  double noise = FamilyParams{}.noise;
  std::uint64_t family_seed = FamilyParams{}.family_seed;
  std::vector<std::size_t> sizes = {100, 1'000, 10'000, 100'000, 1'000'000};
  std::size_t n_attacks = 1'000;
  std::uint64_t seed = 1;
  std::size_t negative_cap = mii::kDefaultNegativeCap;
  std::string format = "csv";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CurveParams, world, comparator, noise, family_seed,
                                                sizes, n_attacks, seed, negative_cap, format)

struct MorphParams {
  std::string p_image;
  std::string p_landmarks;
  std::string q_image;
  std::string q_landmarks;
  double alpha = 0.5;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MorphParams, p_image, p_landmarks, q_image,
                                                q_landmarks, alpha)

struct RenderParams {
  std::string world;
  std::size_t n_identities = 20;  // first n identities, every capture
  int image_size = 128;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RenderParams, world, n_identities, image_size)

struct AccompliceParams {
  std::string world;
  std::string method = "ideal";
  std::string attacker = "cmp-a";
  std::string attacked = "cmp-a";
  double noise = FamilyParams{}.noise;
  std::uint64_t family_seed = FamilyParams{}.family_seed;
  std::size_t n_attacks = 10'000;
  std::uint64_t seed = 1;
  std::size_t negative_cap = mii::kDefaultNegativeCap;
  std::string format = "csv";
  std::string gallery;
  bool use_index = true;
  std::size_t n_probe = 0;
  int image_size = 128;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AccompliceParams, world, method, attacker, attacked,
                                                noise, family_seed, n_attacks, seed, negative_cap,
                                                format, gallery, use_index, n_probe, image_size)

struct QuadsParams {
  std::string world;
  std::size_t n_attacks = 10'000;
  std::uint64_t seed = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QuadsParams, world, n_attacks, seed)

struct GsAttackParams {
  std::string world;
  std::string gallery;
  std::string quads;
  std::string comparator = "cmp-a";
  double noise = FamilyParams{}.noise;
  std::uint64_t family_seed = FamilyParams{}.family_seed;
  std::uint64_t seed = 1;
  std::size_t negative_cap = mii::kDefaultNegativeCap;
  bool use_index = true;
  std::size_t n_probe = 0;
  std::string format = "csv";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GsAttackParams, world, gallery, quads, comparator, noise,
                                                family_seed, seed, negative_cap, use_index, n_probe, format)

namespace detail {

inline std::string join(const std::string& dir, const std::string& name) { return dir + "/" + name; }

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw mii::IoError("cannot create output directory " + dir);
}

inline mii::World open_world(const std::string& dir, RunRecord& rec) {
  if (dir.empty()) throw mii::ContractError("--world is required");
  for (const char* f : {mii::kWorldSidecar, mii::kWorldCaptures, mii::kWorldIdentities}) {
    rec.inputs.push_back(join(dir, f));
  }
  auto w = mii::load_world(dir);
  rec.seeds["world_seed"] = w.cfg.seed;
  return w;
}

// File-name-safe form of a comparator label.
inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

inline std::vector<mii::SyntheticComparator> make_family(const std::vector<std::string>& labels,
                                                         std::size_t d, double noise,
                                                         std::uint64_t family_seed) {
  if (labels.empty()) throw mii::ContractError("at least one comparator is required");
  std::vector<mii::SyntheticComparator> out;
  for (const auto& l : labels) {
    if (l.empty()) throw mii::ContractError("comparator labels must be nonempty");
    out.push_back(mii::make_comparator(l, d, noise, family_seed));
  }
  return out;
}

inline mii::SyntheticFaceRenderer make_renderer(const mii::World& w, int size) {
  return mii::SyntheticFaceRenderer(w.cfg.d, {.width = size, .height = size, .seed = w.cfg.seed});
}

inline std::vector<mii::IdentityPair> attack_pairs(const mii::World& w, std::size_t n,
                                                   std::uint64_t seed) {
  if (n == 0) throw mii::ContractError("n_attacks must be >= 1");
  return mii::sample_identity_pairs(w.cfg.n_identities, n, mii::derive_seed(seed, mii::stream::kQuads));
}

inline mii::Gallery read_gallery(const std::string& path, std::size_t d, RunRecord& rec) {
  rec.inputs.push_back(path);
  auto file = mii::read_embeddings_binary(path);
  if (file.d != d) throw mii::ContractError("gallery dimension does not match the world");
  return mii::Gallery(file.embeddings);
}

}  // namespace detail

inline void cmd_world(const WorldParams& p, const std::string& out_dir, RunRecord& rec) {
  mii::WorldConfig cfg;
  cfg.d = p.d;
  cfg.n_identities = p.n_identities;
  cfg.images_per_identity = p.images_per_identity;
  cfg.regime = mii::parse_regime(p.regime);
  cfg.kappa = p.kappa;
  cfg.kappa_spread = p.kappa_spread;
  cfg.seed = p.seed;
  cfg.validate();
  const auto world = mii::generate_world(cfg);
  detail::ensure_dir(out_dir);
  mii::save_world(out_dir, world);
  rec.seeds["seed"] = p.seed;
  rec.derived["kappa_scale"] = world.kappa_scale;
  for (const char* f : {mii::kWorldSidecar, mii::kWorldCaptures, mii::kWorldIdentities}) rec.output(f);
}

inline void cmd_eval(const EvalParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto fmt = mii::parse_format(p.format);
  if (p.hist_bins == 0) throw mii::ContractError("hist_bins must be >= 1");
  const auto world = detail::open_world(p.world, rec);
  const auto family = detail::make_family(p.comparators, world.cfg.d, p.noise, p.family_seed);
  rec.seeds["seed"] = p.seed;
  rec.seeds["family_seed"] = p.family_seed;
  detail::ensure_dir(out_dir);

  const auto plan = mii::make_pair_plan(world.cfg.n_identities, world.cfg.images_per_identity,
                                        p.seed, p.negative_cap);
  std::vector<mii::DistanceSets> sets;
  mii::Table summary{{"comparator", "auroc", "n_positive", "n_negative", "eps2_rad", "eps2_deg",
                      "tar_eps2"},
                     {}};
  std::set<std::string> written;
  for (const auto& c : family) {
    sets.push_back(mii::evaluate_distances(mii::embed_world(c, world), plan));
    const auto& s = sets.back();
    const auto table = mii::build_threshold_table(s.negatives, s.positives);
    const auto eps2 = table.epsilon(mii::kHeadlineEpsIndex);
    summary.add({c.id(), mii::auroc(s.positives, s.negatives),
                 static_cast<long long>(s.positives.size()), static_cast<long long>(s.negatives.size()),
                 eps2.radians(), eps2.degrees(), *table.entries[mii::kHeadlineEpsIndex].tar});
    if (!written.insert(c.id()).second) continue;
    const auto tag = detail::slug(c.id());
    rec.output(mii::write_table(out_dir, "thresholds_" + tag, mii::threshold_report(table), fmt));
    rec.output(mii::write_table(out_dir, "hist_positive_" + tag,
                                mii::histogram_report(mii::angle_histogram(s.positives, p.hist_bins)), fmt));
    rec.output(mii::write_table(out_dir, "hist_negative_" + tag,
                                mii::histogram_report(mii::angle_histogram(s.negatives, p.hist_bins)), fmt));
    rec.output(mii::write_table(
        out_dir, "hist_negative_half_" + tag,
        mii::histogram_report(mii::angle_histogram(mii::halved_negative_distribution(s.negatives), p.hist_bins)),
        fmt));
  }
  rec.output(mii::write_table(out_dir, "verification", summary, fmt));

  mii::Table pos{{"comparator_a", "comparator_b", "pearson"}, {}};
  mii::Table neg = pos;
  for (std::size_t a = 0; a < family.size(); ++a) {
    for (std::size_t b = a + 1; b < family.size(); ++b) {
      pos.add({family[a].id(), family[b].id(), mii::pearson(sets[a].positives, sets[b].positives)});
      neg.add({family[a].id(), family[b].id(), mii::pearson(sets[a].negatives, sets[b].negatives)});
    }
  }
  rec.output(mii::write_table(out_dir, "correlation_positive", pos, fmt));
  rec.output(mii::write_table(out_dir, "correlation_negative", neg, fmt));
}

// Everything an attack-style command needs once the world is loaded.
struct AttackSetup {
  mii::World world;
  std::vector<mii::SyntheticComparator> family;
  std::vector<mii::EmbeddedWorld> embedded;
  std::vector<mii::ThresholdTable> tables;
  std::vector<mii::IdentityPair> pairs;
};

inline AttackSetup prepare_attack(const std::string& world_dir, const std::vector<std::string>& labels,
                                  double noise, std::uint64_t family_seed, std::size_t n_attacks,
                                  std::uint64_t seed, std::size_t negative_cap, RunRecord& rec,
                                  const std::vector<mii::IdentityPair>* pairs = nullptr) {
  AttackSetup s;
  s.world = detail::open_world(world_dir, rec);
  s.family = detail::make_family(labels, s.world.cfg.d, noise, family_seed);
  rec.seeds["seed"] = seed;
  rec.seeds["family_seed"] = family_seed;
  const auto plan = mii::make_pair_plan(s.world.cfg.n_identities, s.world.cfg.images_per_identity,
                                        seed, negative_cap);
  for (const auto& c : s.family) {
    s.embedded.push_back(mii::embed_world(c, s.world));
    s.tables.push_back(mii::comparator_thresholds(s.embedded.back(), plan));
  }
  if (pairs) {
    for (const auto& pr : *pairs) {
      if (pr.p == pr.q || pr.p >= s.world.cfg.n_identities || pr.q >= s.world.cfg.n_identities) {
        throw mii::ContractError("quad identities must be distinct identities of the world");
      }
    }
    s.pairs = *pairs;
  } else {
    s.pairs = detail::attack_pairs(s.world, n_attacks, seed);
  }
  return s;
}

// Fills the method-specific parts of an attack context; the returned objects
// must outlive the context.
struct MethodInputs {
  std::optional<mii::Gallery> gallery;
  std::optional<mii::SyntheticFaceRenderer> renderer;
};

inline mii::AttackContext make_context(const AttackSetup& s, mii::AttackMethod method,
                                       const std::string& gallery_path, bool use_index,
                                       std::size_t n_probe, int image_size, double alpha,
                                       const std::string& images_dir, MethodInputs& in,
                                       RunRecord& rec) {
  mii::AttackContext ctx;
  ctx.world = &s.world;
  ctx.pairs = s.pairs;
  ctx.alpha = alpha;
  switch (method) {
    case mii::AttackMethod::kIdeal:
      break;
    case mii::AttackMethod::kGallerySearch:
      if (gallery_path.empty()) throw mii::ContractError("gs attack requires --gallery");
      in.gallery = detail::read_gallery(gallery_path, s.world.cfg.d, rec);
      ctx.latent_gallery = &*in.gallery;
      ctx.use_index = use_index;
      ctx.n_probe = n_probe;
      ctx.index_seed = rec.seeds.at("seed");
      break;
    case mii::AttackMethod::kImageSpace:
    case mii::AttackMethod::kRsStub:
      in.renderer.emplace(detail::make_renderer(s.world, image_size));
      ctx.renderer = &*in.renderer;
      if (method == mii::AttackMethod::kImageSpace && !images_dir.empty()) {
        // Reference faces come from disk: <identity>_0.png with <identity>_0.json.
        std::set<std::size_t> ids;
        for (const auto& pr : s.pairs) ids.insert({pr.p, pr.q});
        for (std::size_t id : ids) {
          const auto stem = detail::join(images_dir, std::to_string(id) + "_0");
          rec.inputs.push_back(stem + ".png");
          rec.inputs.push_back(stem + ".json");
          if (!std::filesystem::exists(stem + ".png") || !std::filesystem::exists(stem + ".json")) {
            throw mii::IoError("missing reference image or landmarks for identity " + std::to_string(id));
          }
        }
        ctx.faces = [images_dir](std::size_t id) {
          const auto stem = detail::join(images_dir, std::to_string(id) + "_0");
          auto img = mii::read_png(stem + ".png");
          auto lms = mii::read_landmarks(stem + ".json", img.width(), img.height());
          return mii::FaceSample{img, mii::add_boundary_landmarks(lms, img.width(), img.height())};
        };
      }
      break;
  }
  return ctx;
}

inline std::size_t find_comparator(const std::vector<mii::SyntheticComparator>& family,
                                   const std::string& id) {
  for (std::size_t i = 0; i < family.size(); ++i)
    if (family[i].id() == id) return i;
  throw mii::ContractError("unknown comparator: " + id);
}

inline void cmd_attack(const AttackParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto fmt = mii::parse_format(p.format);
  const auto method = mii::parse_method(p.method);
  if (p.hist_bins == 0) throw mii::ContractError("hist_bins must be >= 1");
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw mii::ContractError("alpha must lie in [0, 1]");

  // The attacker joins the comparator list when it is not one of the attacked.
  auto labels = p.comparators;
  if (!p.attacker.empty() && std::find(labels.begin(), labels.end(), p.attacker) == labels.end()) {
    labels.push_back(p.attacker);
  }
  const auto s = prepare_attack(p.world, labels, p.noise, p.family_seed, p.n_attacks, p.seed,
                                p.negative_cap, rec);
  MethodInputs inputs;
  const auto ctx = make_context(s, method, p.gallery, p.use_index, p.n_probe, p.image_size, p.alpha,
                                p.images_dir, inputs, rec);
  detail::ensure_dir(out_dir);

  const std::size_t n_attacked = p.comparators.size();
  mii::Table table{mii::success_columns(), {}};
  mii::Table losses{{"attacker", "batch", "loss_pixel_l1", "loss_feature", "loss_total_no_adv"}, {}};
  std::set<std::string> hist_written;

  auto emit = [&](const std::string& attacker_label, const mii::AttackRun& run,
                  std::span<const std::size_t> attacked_idx) {
    for (std::size_t k = 0; k < attacked_idx.size(); ++k) {
      const std::size_t a = attacked_idx[k];
      const auto outcomes = mii::score_run(s.embedded[a], s.pairs, run.miis[k], s.tables[a]);
      table.add(mii::success_row(attacker_label, s.family[a].id(), outcomes));
      const auto stem = "hist_mii_" + detail::slug(attacker_label) + "_" + detail::slug(s.family[a].id());
      if (!hist_written.insert(stem).second) continue;
      std::vector<double> dists;
      for (const auto& o : outcomes) dists.push_back(o.mii_dist.radians());
      rec.output(mii::write_table(out_dir, stem,
                                  mii::histogram_report(mii::angle_histogram(dists, p.hist_bins)), fmt));
    }
    if (run.losses) {
      losses.add({attacker_label, static_cast<long long>(run.losses->batch), run.losses->pixel_l1,
                  run.losses->feature, run.losses->total});
    }
  };

  if (method == mii::AttackMethod::kImageSpace) {
    // No attacker comparator is involved in a landmark morph.
    std::vector<std::size_t> idx(n_attacked);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<mii::SyntheticComparator> attacked(s.family.begin(), s.family.begin() + static_cast<std::ptrdiff_t>(n_attacked));
    std::vector<mii::EmbeddedWorld> worlds(s.embedded.begin(), s.embedded.begin() + static_cast<std::ptrdiff_t>(n_attacked));
    emit("-", mii::run_attack(method, s.family[0], s.embedded[0], attacked, worlds, ctx), idx);
  } else if (p.attacker.empty()) {
    for (std::size_t a = 0; a < n_attacked; ++a) {
      const std::size_t idx[] = {a};
      emit(s.family[a].id(),
           mii::run_attack(method, s.family[a], s.embedded[a], std::span(&s.family[a], 1),
                           std::span(&s.embedded[a], 1), ctx),
           idx);
    }
  } else {
    const std::size_t att = find_comparator(s.family, p.attacker);
    std::vector<std::size_t> idx(n_attacked);
    std::iota(idx.begin(), idx.end(), 0);
    const std::span<const mii::SyntheticComparator> attacked(s.family.data(), n_attacked);
    const std::span<const mii::EmbeddedWorld> worlds(s.embedded.data(), n_attacked);
    emit(s.family[att].id(), mii::run_attack(method, s.family[att], s.embedded[att], attacked, worlds, ctx),
         idx);
  }

  rec.output(mii::write_table(out_dir, "success", table, fmt));
  if (!losses.rows.empty()) rec.output(mii::write_table(out_dir, "losses", losses, fmt));
  for (std::size_t a = 0; a < n_attacked; ++a) {
    const auto stem = "thresholds_" + detail::slug(s.family[a].id());
    if (hist_written.insert(stem).second) {
      rec.output(mii::write_table(out_dir, stem, mii::threshold_report(s.tables[a]), fmt));
    }
  }
}

inline void cmd_accomplice(const AccompliceParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto fmt = mii::parse_format(p.format);
  const auto method = mii::parse_method(p.method);
  if (method == mii::AttackMethod::kImageSpace) {
    throw mii::ContractError("accomplice analysis needs an attacker comparator; use ideal, gs or rs-stub");
  }
  std::vector<std::string> labels{p.attacked};
  if (p.attacker != p.attacked) labels.push_back(p.attacker);
  const auto s = prepare_attack(p.world, labels, p.noise, p.family_seed, p.n_attacks, p.seed,
                                p.negative_cap, rec);
  MethodInputs inputs;
  const auto ctx = make_context(s, method, p.gallery, p.use_index, p.n_probe, p.image_size, 0.5, "",
                                inputs, rec);
  detail::ensure_dir(out_dir);

  const std::size_t att = labels.size() - 1;
  const auto run = mii::run_attack(method, s.family[att], s.embedded[att], std::span(&s.family[0], 1),
                                   std::span(&s.embedded[0], 1), ctx);
  const auto outcomes = mii::score_run(s.embedded[0], s.pairs, run.miis[0], s.tables[0]);
  const auto eps2 = s.tables[0].epsilon(mii::kHeadlineEpsIndex);

  std::vector<double> ref_dists, mii_dists;
  mii::Table per{{"p_identity", "q_identity", "ref_dist_rad", "ref_dist_deg", "mii_dist_rad",
                  "mii_dist_deg", "success_eps2"},
                 {}};
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    const auto quad = mii::quad_for(s.embedded[att], s.pairs[i]);
    const auto ref = mii::angular_distance(quad.p_ref, quad.q_ref);
    ref_dists.push_back(ref.radians());
    mii_dists.push_back(outcomes[i].mii_dist.radians());
    per.add({static_cast<long long>(s.pairs[i].p), static_cast<long long>(s.pairs[i].q), ref.radians(),
             ref.degrees(), outcomes[i].mii_dist.radians(), outcomes[i].mii_dist.degrees(),
             static_cast<long long>(outcomes[i].mii_dist <= eps2)});
  }
  const auto sum = mii::accomplice_summary(ref_dists, mii_dists, eps2);
  mii::Table summary{{"attacker", "attacked", "method", "n_attacks", "eps2_rad", "eps2_deg",
                      "median_ref_dist_rad", "success_rate", "below_median_count",
                      "below_median_success_rate"},
                     {}};
  summary.add({p.attacker, p.attacked, std::string(mii::to_string(method)),
               static_cast<long long>(s.pairs.size()), eps2.radians(), eps2.degrees(), sum.median_ref_dist,
               sum.overall_success, static_cast<long long>(sum.below_median_count),
               sum.below_median_success});
  rec.output(mii::write_table(out_dir, "accomplice_attacks", per, fmt));
  rec.output(mii::write_table(out_dir, "accomplice_summary", summary, fmt));
}

// Identity pairs of an attack, one per row: index,p_identity,q_identity.
inline void write_quads(const std::string& path, const std::vector<mii::IdentityPair>& pairs) {
  std::string text = "index,p_identity,q_identity\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    text += std::to_string(i) + "," + std::to_string(pairs[i].p) + "," + std::to_string(pairs[i].q) + "\n";
  }
  mii::write_text(path, text);
}

inline std::vector<mii::IdentityPair> read_quads(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mii::IoError("cannot read quads file " + path);
  std::vector<mii::IdentityPair> pairs;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    unsigned long long idx = 0, p = 0, q = 0;
    if (std::sscanf(line.c_str(), "%llu,%llu,%llu", &idx, &p, &q) != 3) {
      throw mii::IoError("malformed quads row: " + line);
    }
    pairs.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q)});
  }
  if (pairs.empty()) throw mii::IoError("quads file has no rows: " + path);
  return pairs;
}

inline void cmd_quads(const QuadsParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto world = detail::open_world(p.world, rec);
  rec.seeds["seed"] = p.seed;
  const auto pairs = detail::attack_pairs(world, p.n_attacks, p.seed);
  detail::ensure_dir(out_dir);
  write_quads(detail::join(out_dir, "quads.csv"), pairs);
  rec.output("quads.csv");
}

// GS attack on explicit quads, attacker and attacked being one comparator.
inline void cmd_gs_attack(const GsAttackParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto fmt = mii::parse_format(p.format);
  if (p.quads.empty()) throw mii::ContractError("gs-attack requires --quads");
  rec.inputs.push_back(p.quads);
  const auto pairs = read_quads(p.quads);
  const auto s = prepare_attack(p.world, {p.comparator}, p.noise, p.family_seed, pairs.size(), p.seed,
                                p.negative_cap, rec, &pairs);
  MethodInputs inputs;
  const auto ctx = make_context(s, mii::AttackMethod::kGallerySearch, p.gallery, p.use_index, p.n_probe,
                                128, 0.5, "", inputs, rec);
  detail::ensure_dir(out_dir);
  const auto run = mii::run_attack(mii::AttackMethod::kGallerySearch, s.family[0], s.embedded[0],
                                   std::span(&s.family[0], 1), std::span(&s.embedded[0], 1), ctx);
  const auto outcomes = mii::score_run(s.embedded[0], s.pairs, run.miis[0], s.tables[0]);
  const auto eps2 = s.tables[0].epsilon(mii::kHeadlineEpsIndex);

  mii::Table per{{"p_identity", "q_identity", "gallery_index", "gallery_id", "ref_objective_rad",
                  "mii_dist_rad", "mii_dist_deg", "success_eps2"},
                 {}};
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    const auto quad = mii::quad_for(s.embedded[0], s.pairs[i]);
    const std::size_t w = run.gallery_winners[i];
    const auto ref_obj = mii::mii_distance(quad.p_ref, quad.q_ref, run.miis[0][i]);
    per.add({static_cast<long long>(s.pairs[i].p), static_cast<long long>(s.pairs[i].q),
             static_cast<long long>(w), static_cast<long long>(inputs.gallery->id(w)), ref_obj.radians(),
             outcomes[i].mii_dist.radians(), outcomes[i].mii_dist.degrees(),
             static_cast<long long>(outcomes[i].mii_dist <= eps2)});
  }
  rec.output(mii::write_table(out_dir, "gs_results", per, fmt));
  mii::Table table{mii::success_columns(), {}};
  table.add(mii::success_row(s.family[0].id(), s.family[0].id(), outcomes));
  rec.output(mii::write_table(out_dir, "success", table, fmt));
}

inline void cmd_gallery(const GalleryParams& p, const std::string& out_dir, RunRecord& rec) {
  rec.seeds["seed"] = p.seed;
  std::vector<mii::Embedding> members;
  std::size_t d = p.d;
  if (p.midpoints_of.empty()) {
    if (p.size == 0) throw mii::ContractError("gallery size must be >= 1");
    if (p.d < 2) throw mii::ContractError("d must be >= 2");
    const mii::UniformGalleryStream src{p.d, p.seed};
    members.reserve(p.size);
    std::vector<double> buf(p.d);
    for (std::size_t i = 0; i < p.size; ++i) {
      src.fill(i, buf);
      members.push_back(mii::Embedding::normalized(buf));
    }
  } else {
    const auto world = detail::open_world(p.midpoints_of, rec);
    d = world.cfg.d;
    for (const auto& pr : detail::attack_pairs(world, p.n_attacks, p.seed)) {
      members.push_back(mii::spherical_midpoint(world.captures[pr.p][mii::kRefCapture],
                                                world.captures[pr.q][mii::kRefCapture]));
    }
  }
  detail::ensure_dir(out_dir);
  mii::write_embeddings_binary(detail::join(out_dir, "gallery.miie"), members, d);
  rec.output("gallery.miie");
}

inline void cmd_gallery_curve(const CurveParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto fmt = mii::parse_format(p.format);
  if (p.sizes.size() < 2) throw mii::ContractError("gallery curve needs at least two sizes");
  auto sizes = p.sizes;
  std::sort(sizes.begin(), sizes.end());
  if (sizes.front() == 0) throw mii::ContractError("gallery sizes must be >= 1");
  const auto s = prepare_attack(p.world, {p.comparator}, p.noise, p.family_seed, p.n_attacks, p.seed,
                                p.negative_cap, rec);
  detail::ensure_dir(out_dir);
  const auto quads = mii::make_quads(s.embedded[0], s.pairs);
  // A rotated, noised uniform gallery is still uniform, so members are drawn
  // directly in the comparator's space.
  const mii::UniformGalleryStream src{s.world.cfg.d, mii::derive_seed(p.seed, mii::stream::kGallery)};
  const auto curve = mii::gallery_size_curve(src, s.world.cfg.d, sizes, quads,
                                             s.tables[0].epsilon(mii::kHeadlineEpsIndex));
  rec.output(mii::write_table(out_dir, "gallery_curve", mii::curve_report(curve), fmt));
  const auto fit = mii::extrapolate_half_success(curve);
  mii::Table t{{"intercept", "slope_per_decade", "size_at_half_success"}, {}};
  t.add({fit.intercept, fit.slope, fit.size_at_half});
  rec.output(mii::write_table(out_dir, "gallery_extrapolation", t, fmt));
}

inline void cmd_morph(const MorphParams& p, const std::string& out_dir, RunRecord& rec) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw mii::ContractError("alpha must lie in [0, 1]");
  for (const auto* f : {&p.p_image, &p.p_landmarks, &p.q_image, &p.q_landmarks}) {
    if (f->empty()) throw mii::ContractError("morph needs both images and both landmark files");
    rec.inputs.push_back(*f);
  }
  const auto pi = mii::read_png(p.p_image);
  const auto qi = mii::read_png(p.q_image);
  if (!pi.same_shape(qi)) throw mii::ContractError("morph images must share one size");
  const auto pl = mii::add_boundary_landmarks(mii::read_landmarks(p.p_landmarks, pi.width(), pi.height()),
                                              pi.width(), pi.height());
  const auto ql = mii::add_boundary_landmarks(mii::read_landmarks(p.q_landmarks, qi.width(), qi.height()),
                                              qi.width(), qi.height());
  const auto result = mii::morph_detailed(pi, pl, qi, ql, p.alpha);
  detail::ensure_dir(out_dir);
  mii::write_png(detail::join(out_dir, "morph.png"), result.image);
  rec.output("morph.png");
  mii::write_landmarks(detail::join(out_dir, "morph_landmarks.json"), result.landmarks.points);
  rec.output("morph_landmarks.json");
  nlohmann::json tris = nlohmann::json::array();
  for (const auto& t : result.mesh.triangles) tris.push_back({t[0], t[1], t[2]});
  mii::write_text(detail::join(out_dir, "mesh.json"), tris.dump() + "\n");
  rec.output("mesh.json");
}

inline void cmd_render(const RenderParams& p, const std::string& out_dir, RunRecord& rec) {
  const auto world = detail::open_world(p.world, rec);
  if (p.n_identities == 0 || p.n_identities > world.cfg.n_identities) {
    throw mii::ContractError("n_identities must lie in [1, world identities]");
  }
  const auto renderer = detail::make_renderer(world, p.image_size);
  detail::ensure_dir(out_dir);
  for (std::size_t i = 0; i < p.n_identities; ++i) {
    for (std::size_t c = 0; c < world.captures[i].size(); ++c) {
      const auto stem = std::to_string(i) + "_" + std::to_string(c);
      const auto& latent = world.captures[i][c];
      mii::write_png(detail::join(out_dir, stem + ".png"), renderer.render(latent));
      mii::write_landmarks(detail::join(out_dir, stem + ".json"), renderer.landmarks(latent));
      rec.output(stem + ".png");
      rec.output(stem + ".json");
    }
  }
}

// Runs a command by name from its JSON parameters and writes the manifest.
inline RunManifest run_command(const std::string& command, const nlohmann::json& params,
                               const std::string& out_dir) {
  if (out_dir.empty()) throw mii::ContractError("--out-dir is required");
  RunRecord rec;
  nlohmann::json resolved;
  auto dispatch = [&]<typename P>(void (*fn)(const P&, const std::string&, RunRecord&)) {
    P p;
    try {
      p = params.get<P>();
    } catch (const nlohmann::json::exception& e) {
      throw mii::ContractError(std::string("bad parameters: ") + e.what());
    }
    fn(p, out_dir, rec);
    resolved = p;
  };
  if (command == "world") dispatch(&cmd_world);
  else if (command == "eval") dispatch(&cmd_eval);
  else if (command == "attack") dispatch(&cmd_attack);
  else if (command == "accomplice") dispatch(&cmd_accomplice);
  else if (command == "quads") dispatch(&cmd_quads);
  else if (command == "gs-attack") dispatch(&cmd_gs_attack);
  else if (command == "gallery") dispatch(&cmd_gallery);
  else if (command == "gallery-curve") dispatch(&cmd_gallery_curve);
  else if (command == "morph") dispatch(&cmd_morph);
  else if (command == "render") dispatch(&cmd_render);
  else throw mii::ContractError("unknown command: " + command);
  return finish_manifest(command, resolved, rec, out_dir);
}

struct ReplayResult {
  std::vector<std::string> mismatched;
  std::vector<std::string> missing;
  bool ok() const { return mismatched.empty() && missing.empty(); }
};

// Re-runs a manifest into a fresh directory and compares output digests.
inline ReplayResult replay(const std::string& manifest_path, const std::string& out_dir) {
  const auto m = read_manifest(manifest_path);
  for (const auto& [path, digest] : m.inputs) {
    if (sha256_file(path) != digest) throw mii::IoError("input changed since the run: " + path);
  }
  const auto again = run_command(m.command, m.params, out_dir);
  ReplayResult r;
  for (const auto& [name, digest] : m.outputs) {
    const auto it = again.outputs.find(name);
    if (it == again.outputs.end()) r.missing.push_back(name);
    else if (it->second != digest) r.mismatched.push_back(name);
  }
  return r;
}

}  // namespace miitool
