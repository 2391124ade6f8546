// Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "commands.hpp"
#include "mii/attack_suite.hpp"
#include "mii/gallery.hpp"
#include "mii/ideal_attack.hpp"
#include "mii/morph.hpp"
#include "mii/rs_losses.hpp"
#include "mii/synth_world.hpp"
#include "mii/verify_eval.hpp"
#include "oracles.hpp"

using namespace mii;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// One calibrated world seen through the pass-through comparator, with its
// thresholds and a fixed set of attack quads.
struct Study {
  EmbeddedWorld world;
  ThresholdTable table;
  DistanceSets sets;
  std::vector<AttackQuad> quads;
  double build_seconds = 0.0;
};

Study make_study(ConcentrationRegime regime, std::uint64_t seed, std::size_t n_quads) {
  Stopwatch sw;
  WorldConfig cfg;
  cfg.regime = regime;
  cfg.n_identities = 2000;
  cfg.seed = seed;
  Study s;
  s.world = embed_world(identity_comparator(cfg.d), generate_world(cfg));
  s.sets = evaluate_distances(s.world, make_pair_plan(cfg.n_identities, 2, seed));
  s.table = build_threshold_table(s.sets.negatives, s.sets.positives);
  s.quads = make_quads(s.world, sample_identity_pairs(cfg.n_identities, n_quads, seed));
  s.build_seconds = sw.seconds();
  return s;
}

Study& low_study() {
  static Study s = make_study(ConcentrationRegime::kLowIntraClassVar, 101, 10000);
  return s;
}
Study& high_study() {
  static Study s = make_study(ConcentrationRegime::kHighIntraClassVar, 202, 10000);
  return s;
}

double ideal_success(const Study& s) {
  return success_rate(ideal_attack_outcomes(s.quads, s.table), kHeadlineEpsIndex);
}

Outcome c1_half_angle() {
  Stopwatch sw;
  double worst = 0.0;
  for (std::size_t d : {16u, 128u, 256u}) {
    Rng rng(d);
    for (int i = 0; i < 100000; ++i) {
      const auto p = sample_uniform(d, rng);
      const auto q = sample_uniform(d, rng);
      const auto m = spherical_midpoint(p, q);
      worst = std::max(worst, std::abs(angular_distance(p, m).radians() - angular_distance(p, q).radians() / 2));
    }
  }
  const double t = sw.seconds();
  return {worst < 1e-9 && t < 10.0, fmt("max |theta(p,m) - theta(p,q)/2| = %.3g over 3x1e5 pairs, %.1f s", worst, t)};
}

Outcome c2_uniform_stats() {
  Stopwatch sw;
  const std::size_t d = 128;
  const auto pts = sample_uniform_sphere(d, 200000, 7);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double a = angular_distance(pts[2 * i], pts[2 * i + 1]).radians();
    s += a;
    s2 += a * a;
  }
  const double mean = s / n;
  const double sd = std::sqrt((s2 - n * mean * mean) / (n - 1));
  const double lo = 0.85 / d, hi = 1.15 / d;
  const bool ok = std::abs(mean - kPi / 2) <= 0.01 && sd >= lo && sd <= hi && sw.seconds() < 30.0;
  return {ok, fmt("mean %.5f (target pi/2 +- 0.01), std %.5f vs window [%.5f, %.5f]; std*sqrt(d-1) = %.3f",
                  mean, sd, lo, hi, sd * std::sqrt(d - 1.0))};
}

Outcome c3_regime_separation() {
  Stopwatch sw;
  const double lo = ideal_success(low_study());
  const double hi = ideal_success(high_study());
  const double t = sw.seconds() + 0.0;
  const double build = low_study().build_seconds + high_study().build_seconds;
  const bool ok = lo >= 0.90 && hi >= 0.25 && hi <= 0.55 && lo > hi && build + t < 120.0;
  return {ok, fmt("ideal success at eps2: low %.1f%%, high %.1f%% (1e4 quads each), %.1f s", 100 * lo, 100 * hi,
                  build + t)};
}

Outcome c4_half_negatives() {
  double worst = 1.0;
  std::string parts;
  for (Study* s : {&low_study(), &high_study()}) {
    const auto half = halved_negative_distribution(s->sets.negatives);
    const double f = tar(half, s->table.epsilon(kHeadlineEpsIndex));
    worst = std::min(worst, f);
    parts += fmt("%.4f ", f);
  }
  return {worst >= 0.99, "fraction of P-/2 below eps2 (low, high): " + parts};
}

Outcome c5_threshold_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 1000), grid(0, 400);
  int checks = 0, bad = 0;
  for (int l = 0; l < 100; ++l) {
    std::vector<double> neg(len(rng));
    for (auto& x : neg) x = grid(rng) * (kPi / 400);  // coarse grid gives ties
    for (double t : kFarTargets) {
      ++checks;
      bad += threshold_at_far(neg, t).radians() != oracle::threshold_scan(neg, t);
    }
    for (double t : {0.003, 0.25, 0.5, 0.9}) {
      ++checks;
      bad += threshold_at_far(neg, t).radians() != oracle::threshold_scan(neg, t);
    }
  }
  return {bad == 0, fmt("%d mismatches in %d (list, target) checks over 100 lists", bad, checks)};
}

Outcome c6_auroc_oracle() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 200), grid(0, 50);
  int bad = 0;
  for (int l = 0; l < 200; ++l) {
    std::vector<double> pos(len(rng)), neg(len(rng));
    for (auto& x : pos) x = grid(rng) * 0.02;
    for (auto& x : neg) x = grid(rng) * 0.03;
    bad += auroc(pos, neg) != oracle::auroc_pairs(pos, neg);
  }
  return {bad == 0, fmt("%d mismatches over 200 list pairs", bad)};
}

Outcome c7_gallery_search() {
  Stopwatch sw;
  int bad_index = 0, queries = 0;
  for (int gi = 0; gi < 50; ++gi) {
    const Gallery g(sample_uniform_sphere(64, 10000, 1000 + gi));
    const GalleryIndex idx(g, {.seed = static_cast<std::uint64_t>(gi)});
    Rng rng(gi);
    for (int k = 0; k < 20; ++k) {
      const auto p = sample_uniform(64, rng);
      const auto q = sample_uniform(64, rng);
      const auto e = gs_search_exact(g, p, q);
      const auto x = gs_search_indexed(idx, p, q, idx.n_lists());
      ++queries;
      bad_index += x.index != e.index || x.value.radians() != e.value.radians();
    }
  }
  int bad_oracle = 0;
  for (int gi = 0; gi < 200; ++gi) {
    const auto members = sample_uniform_sphere(64, 1 + gi % 100, 5000 + gi);
    Rng rng(gi + 77);
    const auto p = sample_uniform(64, rng);
    const auto q = sample_uniform(64, rng);
    bad_oracle += gs_search_exact(Gallery(members), p, q).index != oracle::gallery_scan(members, p, q).index;
  }
  return {bad_index == 0 && bad_oracle == 0,
          fmt("indexed(full probe) vs exact: %d/%d differ on 50 galleries of 1e4; exact vs scan oracle: %d/200 differ; "
              "%.1f s",
              bad_index, queries, bad_oracle, sw.seconds())};
}

Outcome c8_gallery_curve() {
  Stopwatch sw;
  const Study& s = high_study();
  const std::vector<AttackQuad> quads(s.quads.begin(), s.quads.begin() + 1000);
  const std::vector<std::size_t> sizes{1000, 10000, 100000, 1000000};
  const UniformGalleryStream src{128, 808};
  const auto curve = gallery_size_curve(src, 128, sizes, quads, s.table.epsilon(kHeadlineEpsIndex));
  bool mono = true;
  for (std::size_t i = 1; i < curve.size(); ++i) mono = mono && curve[i].success_rate >= curve[i - 1].success_rate;
  const auto fit = extrapolate_half_success(curve);
  std::string pts;
  for (const auto& c : curve) pts += fmt("%zu:%.3f ", c.gallery_size, c.success_rate);
  const double t = sw.seconds();
  return {mono && fit.size_at_half > 1e7 && t < 600.0,
          fmt("curve %s; nondecreasing %s; size at 50%% = %.3g; %.0f s", pts.c_str(), mono ? "yes" : "no",
              fit.size_at_half, t)};
}

Outcome c9_morph() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(10.0, 54.0);
  auto landmarks = [&] {
    std::vector<Point2> f(kFacialLandmarks);
    for (auto& p : f) p = {ux(rng), ux(rng)};
    return add_boundary_landmarks(f, 64, 64);
  };
  double self = 0.0, sym = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto p = oracle::random_image(64, 64, rng);
    const auto q = oracle::random_image(64, 64, rng);
    const auto lp = landmarks();
    const auto lq = landmarks();
    self = std::max(self, oracle::max_abs_diff(morph(p, lp, p, lp, 0.5), p));
    sym = std::max(sym, oracle::max_abs_diff(morph(p, lp, q, lq, 0.5), morph(q, lq, p, lp, 0.5)));
  }
  const auto img = oracle::random_image(8, 8, rng);
  LandmarkSet from, to;
  from.points = {{0, 0}, {7, 0}, {7, 7}, {0, 7}};
  to.points = {{1.5, 0.5}, {7, 0.5}, {7, 7}, {1.5, 7}};
  const auto mesh = delaunay(to.points);
  const double warp = oracle::max_abs_diff(warp_to_mean(img, from, to, mesh),
                                           oracle::warp(img, from.points, to.points, mesh.triangles));
  return {self <= 1e-6 && sym <= 1e-6 && warp <= 1e-6,
          fmt("self-morph max diff %.2g, swap symmetry %.2g, two-triangle warp vs oracle %.2g", self, sym, warp)};
}

Outcome c10_delaunay() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(5.0, 122.0);
  double worst = -1e300;
  int fails = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<Point2> f(kFacialLandmarks);
    for (auto& p : f) p = {u(rng), u(rng)};
    const auto l = add_boundary_landmarks(f, 128, 128);
    const auto m = delaunay(l.points);
    for (const auto& t : m.triangles) {
      for (const auto& p : l.points) {
        const double margin = oracle::circumcircle_margin(l.points[t[0]], l.points[t[1]], l.points[t[2]], p);
        worst = std::max(worst, margin);
        fails += margin > 1e-7;
      }
    }
  }
  return {fails == 0, fmt("largest point-inside-circumcircle margin %.3g over 100 sets (%d violations)", worst, fails)};
}

Outcome c11_losses() {
  std::vector<std::string> failed;
  auto check = [&](const char* name, double got, double want) {
    if (std::abs(got - want) > 1e-9) failed.push_back(name);
  };
  RasterImage r(1, 1), t(1, 1);
  r.set(0, 0, 0, 0.5), r.set(0, 0, 1, 0.3), r.set(0, 0, 2, 0.8);
  t.set(0, 0, 0, 0.4), t.set(0, 0, 1, 0.5), t.set(0, 0, 2, 0.5);
  check("pix-same", loss_pixel_l1(std::vector{r}, std::vector{r}), 0.0);
  check("pix-one", loss_pixel_l1(std::vector{r}, std::vector{t}), 0.6);
  check("pix-batch", loss_pixel_l1(std::vector{r, r}, std::vector{t, t}), 0.6);
  check("disc-perfect", loss_discriminator(std::vector{1.0, 1.0}, std::vector{0.0, 0.0}), 0.0);
  check("disc-worst", loss_discriminator(std::vector{0.0}, std::vector{1.0}), 2.0);
  check("disc-half", loss_discriminator(std::vector{0.5}, std::vector{0.5}), 0.5);
  check("adv-fooled", loss_adversarial(std::vector{1.0}), 0.0);
  check("adv-zero", loss_adversarial(std::vector{0.0, 0.0}), 1.0);
  check("adv-mixed", loss_adversarial(std::vector{0.0, 1.0}), 0.5);
  const auto a = Embedding::normalized({1, 0, 0}), b = Embedding::normalized({0, 1, 0});
  const auto na = Embedding::normalized({-1, 0, 0});
  check("feat-same", loss_feature(std::vector{a}, std::vector{a}), 0.0);
  check("feat-orth", loss_feature(std::vector{a}, std::vector{b}), 2.0);
  check("feat-anti", loss_feature(std::vector{a}, std::vector{na}), 4.0);
  check("total-zero", loss_total(kReferenceLossWeights, 0, 0, 0), 0.0);
  check("total-paper", loss_total(kReferenceLossWeights, 0.1, 0.2, 0.01), 4.2);
  check("total-double", loss_total({20, 2, 600}, 0.1, 0.2, 0.01), 8.4);

  Rng rng(11);
  double worst = 0.0;
  for (int batch = 0; batch < 1000; ++batch) {
    std::vector<Embedding> x, y;
    double dots = 0.0;
    for (int i = 0; i < 8; ++i) {
      x.push_back(sample_uniform(32, rng));
      y.push_back(sample_uniform(32, rng));
      dots += dot(x.back(), y.back());
    }
    worst = std::max(worst, std::abs(loss_feature(x, y) - (2.0 - 2.0 * dots / 8.0)));
  }
  std::string names;
  for (const auto& f : failed) names += f + " ";
  return {failed.empty() && worst <= 1e-9,
          fmt("%zu closed-form examples failed %s; feature identity max error %.2g over 1e3 batches", failed.size(),
              names.c_str(), worst)};
}

Outcome c12_transfer() {
  WorldConfig cfg;
  cfg.n_identities = 2000;
  cfg.seed = 12;
  const auto world = generate_world(cfg);
  const auto plan = make_pair_plan(cfg.n_identities, 2, 12, 1'000'000);
  std::vector<DistanceSets> sets;
  const std::vector<std::string> labels{"cmp-a", "cmp-b", "cmp-c"};
  for (const auto& l : labels) sets.push_back(evaluate_distances(embed_world(make_comparator(l, cfg.d, 0.3, 7), world), plan));
  bool ok = sets[0].positives.size() >= 2000;
  std::string parts;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      const double pp = pearson(sets[i].positives, sets[j].positives);
      const double pn = pearson(sets[i].negatives, sets[j].negatives);
      ok = ok && pp > pn;
      parts += fmt("%s/%s P+ %.3f vs P- %.3f; ", labels[i].c_str(), labels[j].c_str(), pp, pn);
    }
  return {ok, parts + fmt("%zu P+ pairs", sets[0].positives.size())};
}

Outcome c13_accomplice() {
  bool ok = true;
  std::string parts;
  for (auto [name, s] : {std::pair{"low", &low_study()}, {"high", &high_study()}}) {
    std::vector<double> refs, miis;
    for (const auto& q : s->quads) {
      refs.push_back(angular_distance(q.p_ref, q.q_ref).radians());
      miis.push_back(mii_distance(q.p_live, q.q_live, ideal_mii(q)).radians());
    }
    const auto sum = accomplice_summary(refs, miis, s->table.epsilon(kHeadlineEpsIndex));
    ok = ok && sum.below_median_success >= sum.overall_success;
    parts += fmt("%s: below-median %.1f%% vs overall %.1f%%; ", name, 100 * sum.below_median_success,
                 100 * sum.overall_success);
  }
  return {ok, parts};
}

Outcome c14_replay() {
  const fs::path root = fs::temp_directory_path() / ("miitool_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  auto dir = [&](const std::string& n) { return (root / n).string(); };
  int commands = 0;
  std::vector<std::string> bad;
  auto go = [&](const std::string& command, const nlohmann::json& params, const std::string& name) {
    ++commands;
    try {
      miitool::run_command(command, params, dir(name));
      const auto r = miitool::replay(dir(name) + "/manifest.json", dir(name + "_again"));
      if (!r.ok()) bad.push_back(name);
    } catch (const std::exception& e) {
      bad.push_back(name + " (" + e.what() + ")");
    }
  };
  const auto world = dir("world");
  go("world", {{"d", 64}, {"n_identities", 200}, {"seed", 14}}, "world");
  go("eval", {{"world", world}}, "eval");
  go("attack", {{"world", world}, {"n_attacks", 1000}}, "attack_ideal");
  go("attack", {{"world", world}, {"n_attacks", 1000}, {"attacker", "cmp-a"}}, "attack_transfer");
  go("gallery", {{"d", 64}, {"size", 5000}}, "gallery");
  go("attack", {{"world", world}, {"method", "gs"}, {"gallery", dir("gallery") + "/gallery.miie"}, {"n_attacks", 200}},
     "attack_gs");
  go("attack", {{"world", world}, {"method", "is"}, {"n_attacks", 30}, {"image_size", 64}}, "attack_is");
  go("attack", {{"world", world}, {"method", "rs-stub"}, {"n_attacks", 30}, {"image_size", 64}}, "attack_rs");
  go("accomplice", {{"world", world}, {"n_attacks", 1000}, {"attacker", "cmp-b"}}, "accomplice");
  go("quads", {{"world", world}, {"n_attacks", 100}}, "quads");
  go("gs-attack",
     {{"world", world}, {"gallery", dir("gallery") + "/gallery.miie"}, {"quads", dir("quads") + "/quads.csv"}},
     "gs_attack");
  go("gallery-curve", {{"world", world}, {"sizes", {100, 1000, 10000}}, {"n_attacks", 200}}, "curve");
  go("render", {{"world", world}, {"n_identities", 2}, {"image_size", 64}}, "render");
  go("morph",
     {{"p_image", dir("render") + "/0_0.png"}, {"p_landmarks", dir("render") + "/0_0.json"},
      {"q_image", dir("render") + "/1_0.png"}, {"q_landmarks", dir("render") + "/1_0.json"}},
     "morph");
  fs::remove_all(root);
  std::string names;
  for (const auto& b : bad) names += b + " ";
  return {bad.empty(), fmt("%d command runs replayed, %zu not byte-identical %s", commands, bad.size(), names.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"half-angle theorem", c1_half_angle},
      {"uniform-sphere pair statistics", c2_uniform_stats},
      {"ideal-attack regime separation", c3_regime_separation},
      {"P-/2 below eps2", c4_half_negatives},
      {"threshold oracle equivalence", c5_threshold_oracle},
      {"AUROC oracle equivalence", c6_auroc_oracle},
      {"gallery search correctness", c7_gallery_search},
      {"gallery-size curve and extrapolation", c8_gallery_curve},
      {"morph identity and symmetry", c9_morph},
      {"Delaunay validity", c10_delaunay},
      {"loss algebra", c11_losses},
      {"transfer correlation pattern", c12_transfer},
      {"accomplice conditioning", c13_accomplice},
      {"manifest replay determinism", c14_replay},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
