#include <gtest/gtest.h>

#include <random>

#include "mii/rs_losses.hpp"
#include "oracles.hpp"

using namespace mii;

namespace {

RasterImage pixel(double r, double g, double b) {
  RasterImage img(1, 1);
  img.set(0, 0, 0, r);
  img.set(0, 0, 1, g);
  img.set(0, 0, 2, b);
  return img;
}

}  // namespace

TEST(PixelL1, Examples) {
  std::mt19937_64 rng(1);
  const auto a = oracle::random_image(5, 4, rng);
  EXPECT_EQ(loss_pixel_l1(std::vector{a}, std::vector{a}), 0.0);

  const auto recon = pixel(0.5, 0.3, 0.8);
  const auto target = pixel(0.4, 0.5, 0.5);  // deviations (0.1, -0.2, 0.3)
  EXPECT_NEAR(loss_pixel_l1(std::vector{recon}, std::vector{target}), 0.6, 1e-12);
  EXPECT_NEAR(loss_pixel_l1(std::vector{recon, recon}, std::vector{target, target}), 0.6, 1e-12);

  EXPECT_THROW(loss_pixel_l1(std::vector<RasterImage>{}, std::vector<RasterImage>{}), ContractError);
  EXPECT_THROW(loss_pixel_l1(std::vector{recon}, std::vector{recon, recon}), ContractError);
  EXPECT_THROW(loss_pixel_l1(std::vector{recon}, std::vector{a}), ContractError);
}

TEST(Discriminator, Examples) {
  EXPECT_EQ(loss_discriminator(std::vector{1.0, 1.0}, std::vector{0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(loss_discriminator(std::vector{0.0, 0.0}, std::vector{1.0, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(loss_discriminator(std::vector{0.5}, std::vector{0.5}), 0.5);
  EXPECT_THROW(loss_discriminator(std::vector{0.5}, std::vector{0.5, 0.1}), ContractError);
  EXPECT_THROW(loss_discriminator(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST(Adversarial, Examples) {
  EXPECT_EQ(loss_adversarial(std::vector{1.0, 1.0, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(loss_adversarial(std::vector{0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(loss_adversarial(std::vector{0.0, 1.0}), 0.5);
  EXPECT_THROW(loss_adversarial(std::vector<double>{}), ContractError);
}

TEST(Feature, Examples) {
  const auto a = Embedding::normalized({1, 0, 0});
  const auto b = Embedding::normalized({0, 1, 0});
  const auto na = Embedding::normalized({-1, 0, 0});
  EXPECT_EQ(loss_feature(std::vector{a, b}, std::vector{a, b}), 0.0);
  EXPECT_DOUBLE_EQ(loss_feature(std::vector{a, b}, std::vector{b, a}), 2.0);
  EXPECT_DOUBLE_EQ(loss_feature(std::vector{a}, std::vector{na}), 4.0);
  EXPECT_THROW(loss_feature(std::vector{a}, std::vector{Embedding::normalized({1, 0})}), ContractError);
  EXPECT_THROW(loss_feature(std::vector<Embedding>{}, std::vector<Embedding>{}), ContractError);
}

TEST(Feature, ClosedFormOnUnitVectors) {
  Rng rng(2);
  std::vector<Embedding> x, y;
  double dots = 0.0;
  for (int i = 0; i < 64; ++i) {
    x.push_back(sample_uniform(32, rng));
    y.push_back(sample_uniform(32, rng));
    dots += dot(x.back(), y.back());
  }
  EXPECT_NEAR(loss_feature(x, y), 2.0 - 2.0 * dots / 64.0, 1e-9);
}

TEST(Total, ExamplesAndLinearity) {
  const LossWeights w = kReferenceLossWeights;
  EXPECT_EQ(loss_total(w, 0, 0, 0), 0.0);
  EXPECT_NEAR(loss_total(w, 0.1, 0.2, 0.01), 4.2, 1e-12);
  const LossWeights w2{20.0, 2.0, 600.0};
  EXPECT_NEAR(loss_total(w2, 0.1, 0.2, 0.01), 8.4, 1e-12);
  // linear in each component
  EXPECT_NEAR(loss_total(w, 0.3, 0.2, 0.01) - loss_total(w, 0.1, 0.2, 0.01), 10.0 * 0.2, 1e-12);
  EXPECT_NEAR(loss_total(w, 0.1, 0.2, 0.03) - loss_total(w, 0.1, 0.2, 0.01), 300.0 * 0.02, 1e-12);
  EXPECT_THROW(loss_total(w, -0.1, 0, 0), ContractError);
  EXPECT_THROW(loss_total({-1.0, 1.0, 1.0}, 0, 0, 0), ContractError);
}

TEST(RsTarget, Examples) {
  Rng rng(3);
  const auto p = sample_uniform(48, rng);
  const auto same = rs_target(p, p);
  for (std::size_t k = 0; k < 48; ++k) EXPECT_NEAR(same[k], p[k], 1e-15);
  for (int i = 0; i < 50; ++i) {
    const auto a = sample_uniform(48, rng);
    const auto b = sample_uniform(48, rng);
    const auto t = rs_target(a, b);
    EXPECT_NEAR(angular_distance(a, t).radians(), angular_distance(b, t).radians(), 1e-12);
  }
  EXPECT_THROW(rs_target(Embedding::normalized({1, 0}), Embedding::normalized({-1, 0})), UndefinedMidpointError);
}

TEST(RsTarget, PassThroughOracleReachesHalfAngle) {
  Rng rng(4);
  const PackingOracle dec(48);
  const PackingEncoder enc(48);
  for (int i = 0; i < 50; ++i) {
    const auto a = sample_uniform(48, rng);
    const auto b = sample_uniform(48, rng);
    const auto r = rs_attack(a, b, dec, enc);
    EXPECT_EQ(r.image.width(), dec.width());
    EXPECT_EQ(r.image.height(), 1);
    EXPECT_NEAR(mii_distance(a, b, r.reembedded).radians(), angular_distance(a, b).radians() / 2, 1e-9);
    EXPECT_NEAR(loss_feature(std::vector{r.reembedded}, std::vector{r.target}), 0.0, 1e-18);
  }
}

TEST(TableOracle, ReturnsNearestKeyImage) {
  const std::vector<Embedding> keys{Embedding::normalized({1, 0}), Embedding::normalized({0, 1})};
  const std::vector<RasterImage> imgs{RasterImage(2, 2, 0.1), RasterImage(2, 2, 0.9)};
  const TableOracle t(keys, imgs);
  EXPECT_EQ(t.decode(Embedding::normalized({0.9, 0.2})), imgs[0]);
  EXPECT_EQ(t.decode(Embedding::normalized({0.2, 0.9})), imgs[1]);
  EXPECT_THROW(TableOracle(keys, std::vector<RasterImage>{imgs[0]}), ContractError);
}
