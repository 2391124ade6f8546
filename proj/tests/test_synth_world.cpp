#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mii/synth_world.hpp"
#include "mii/verify_eval.hpp"
#include "mii/vmf.hpp"

using namespace mii;

namespace {

WorldConfig small_cfg(double kappa, std::size_t d = 32, std::size_t n = 200) {
  WorldConfig cfg;
  cfg.d = d;
  cfg.n_identities = n;
  cfg.images_per_identity = 2;
  cfg.regime = ConcentrationRegime::kExplicit;
  cfg.kappa = kappa;
  cfg.kappa_spread = 0.0;
  cfg.seed = 21;
  return cfg;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(WorldConfig, Validation) {
  auto cfg = small_cfg(10.0);
  cfg.n_identities = 1;
  try {
    cfg.validate();
    FAIL() << "expected rejection";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find(">= 2"), std::string::npos);
  }
  cfg = small_cfg(10.0);
  cfg.images_per_identity = 1;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = small_cfg(-1.0);
  EXPECT_THROW(cfg.validate(), ContractError);
}

TEST(Regime, ParseAndPrint) {
  for (auto r : {ConcentrationRegime::kLowIntraClassVar, ConcentrationRegime::kHighIntraClassVar,
                 ConcentrationRegime::kExplicit}) {
    EXPECT_EQ(parse_regime(to_string(r)), r);
  }
  EXPECT_THROW(parse_regime("medium"), ContractError);
}

TEST(Vmf, CosineMeanMatchesTheory) {
  // E[w] = A_d(kappa); for d = 3, A = coth(k) - 1/k.
  Rng rng(4);
  const double k = 5.0;
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += sample_vmf_cosine(3, k, rng);
  EXPECT_NEAR(s / n, 1.0 / std::tanh(k) - 1.0 / k, 0.003);
}

TEST(Vmf, ZeroKappaIsUniform) {
  Rng rng(8);
  double s = 0.0;
  for (int i = 0; i < 50000; ++i) s += sample_vmf_cosine(16, 0.0, rng);
  EXPECT_NEAR(s / 50000, 0.0, 0.005);
}

TEST(GenerateWorld, HugeKappaCollapsesOntoMean) {
  const auto w = generate_world(small_cfg(1e6, 16, 50));
  for (std::size_t i = 0; i < w.identities.size(); ++i) {
    for (const auto& e : w.captures[i]) {
      EXPECT_LT(angular_distance(e, w.identities[i].mean_direction).radians(), 1e-2);
    }
  }
}

TEST(GenerateWorld, ZeroKappaHasNoIdentitySignal) {
  const auto w = generate_world(small_cfg(0.0, 32, 600));
  const auto plan = make_pair_plan(600, 2, 1, 20000);
  const auto sets = evaluate_distances(embed_world(identity_comparator(32), w), plan);
  const double se = std::sqrt(var(sets.positives) / sets.positives.size() +
                              var(sets.negatives) / sets.negatives.size());
  EXPECT_LT(std::abs(mean(sets.positives) - mean(sets.negatives)), 3.0 * se);
}

TEST(GenerateWorld, DeterministicUnderSeed) {
  const auto a = generate_world(small_cfg(50.0));
  const auto b = generate_world(small_cfg(50.0));
  for (std::size_t i = 0; i < a.captures.size(); ++i) {
    EXPECT_EQ(a.identities[i].mean_direction, b.identities[i].mean_direction);
    for (std::size_t c = 0; c < a.captures[i].size(); ++c) EXPECT_EQ(a.captures[i][c], b.captures[i][c]);
  }
  auto cfg = small_cfg(50.0);
  cfg.seed = 22;
  EXPECT_NE(generate_world(cfg).captures[0][0], a.captures[0][0]);
}

TEST(GenerateWorld, CalibratedLowRegimeWindows) {
  WorldConfig cfg;
  cfg.n_identities = 600;
  cfg.seed = 3;
  const auto w = generate_world(cfg);
  const auto plan = make_pair_plan(600, 2, 1, 100000);
  const auto sets = evaluate_distances(embed_world(identity_comparator(128), w), plan);
  const double pos = median(sets.positives);
  const double neg = median(sets.negatives);
  EXPECT_GE(pos, 0.55);
  EXPECT_LE(pos, 0.95);
  EXPECT_NEAR(neg, kPi / 2, 0.1);
  EXPECT_LT(pos, kPi / 2);
}

TEST(Calibration, MedianDecreasesWithKappa) {
  double prev = 10.0;
  for (double k : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
    const double m = median_matching_distance(64, k, 0.5, 9, 2000);
    EXPECT_LT(m, prev) << "kappa=" << k;
    prev = m;
  }
}

TEST(Comparator, IdentityComparatorIsPassThrough) {
  const auto w = generate_world(small_cfg(30.0, 16, 5));
  const auto c = identity_comparator(16);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto e = embed(c, w.identities[i], 1, w.cfg.seed);
    for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(e[k], w.captures[i][1][k], 1e-15);
  }
}

TEST(Comparator, RotationIsOrthogonalAndRejectsBadMatrices) {
  const auto r = random_rotation(24, 5);
  const Eigen::MatrixXd g = r * r.transpose();
  EXPECT_LT((g - Eigen::MatrixXd::Identity(24, 24)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(0, 1) = 0.1;
  EXPECT_THROW(SyntheticComparator("x", bad, 0.0, 0), ContractError);
  EXPECT_THROW(SyntheticComparator("x", Eigen::MatrixXd::Identity(4, 4), -1.0, 0), ContractError);
}

TEST(Comparator, NoiselessRotationsPreserveAllDistances) {
  const auto w = generate_world(small_cfg(30.0, 16, 40));
  const auto a = embed_world(make_comparator("a", 16, 0.0, 1), w);
  const auto b = embed_world(make_comparator("b", 16, 0.0, 1), w);
  const auto plan = make_pair_plan(40, 2, 1);
  const auto da = evaluate_distances(a, plan);
  const auto db = evaluate_distances(b, plan);
  for (std::size_t i = 0; i < da.negatives.size(); ++i) EXPECT_NEAR(da.negatives[i], db.negatives[i], 1e-12);
  for (std::size_t i = 0; i < da.positives.size(); ++i) EXPECT_NEAR(da.positives[i], db.positives[i], 1e-12);
}

TEST(Comparator, SmallNoiseKeepsPositiveDistancesCorrelated) {
  WorldConfig cfg;
  cfg.n_identities = 2000;
  cfg.seed = 8;
  const auto w = generate_world(cfg);
  const auto plan = make_pair_plan(2000, 2, 1, 1000);
  const auto a = evaluate_distances(embed_world(make_comparator("a", 128, 0.1, 3), w), plan);
  const auto b = evaluate_distances(embed_world(make_comparator("b", 128, 0.1, 3), w), plan);
  ASSERT_GE(a.positives.size(), 2000u);
  EXPECT_GT(pearson(a.positives, b.positives), 0.8);
}

TEST(Comparator, SameLabelSameComparator) {
  const auto a = make_comparator("x", 8, 0.2, 5);
  const auto b = make_comparator("x", 8, 0.2, 5);
  const auto e = Embedding::normalized({1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(a.apply(e, 3), b.apply(e, 3));
  EXPECT_NE(a.apply(e, 3), a.apply(e, 4));
  const auto back = a.unapply(make_comparator("x", 8, 0.0, 5).apply(e, 0));
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(back[k], e[k], 1e-12);
}

TEST(Comparator, IsometryLeavesThresholdsAndVerdictsUnchanged) {
  const auto w = generate_world(small_cfg(40.0, 16, 100));
  const auto plan = make_pair_plan(100, 2, 1);
  const auto base = embed_world(identity_comparator(16), w);
  const auto rot = embed_world(make_comparator("r", 16, 0.0, 2), w);
  const auto t1 = build_threshold_table(evaluate_distances(base, plan).negatives);
  const auto t2 = build_threshold_table(evaluate_distances(rot, plan).negatives);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    EXPECT_NEAR(t1.epsilon(i).radians(), t2.epsilon(i).radians(), 1e-12);
  }
}
