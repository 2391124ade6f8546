#pragma once

// Representation-space MIIs: midpoint target construction, a decoder
// interface, and the decoder-training losses (L1 pixel, least-squares
// adversarial pair, squared feature distance, and their weighted total).

#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "mii/error.hpp"
#include "mii/morph.hpp"
#include "mii/sphere.hpp"

namespace mii {

struct LossWeights {
  double lambda_pix = 10.0;
  double lambda_adv = 1.0;
  double lambda_feat = 300.0;

  void validate() const {
    require(lambda_pix >= 0.0 && lambda_adv >= 0.0 && lambda_feat >= 0.0,
            "loss weights must be >= 0");
  }
};

// Weights used to train the published decoder.
inline constexpr LossWeights kReferenceLossWeights{10.0, 1.0, 300.0};

// g: embedding -> image. Output size is fixed per instance.
class DecoderOracle {
 public:
  virtual ~DecoderOracle() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual RasterImage decode(const Embedding& e) const = 0;
};

// f: image -> embedding.
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;
  virtual Embedding encode(const RasterImage& img) const = 0;
};

inline Embedding rs_target(const Embedding& p_ref, const Embedding& q_ref) {
  return spherical_midpoint(p_ref, q_ref);
}

struct RsAttack {
  Embedding target;
  RasterImage image;
  Embedding reembedded;
};

// Midpoint target, decoded to an image, re-embedded by the attacked encoder.
inline RsAttack rs_attack(const Embedding& p_ref, const Embedding& q_ref,
                          const DecoderOracle& decoder, const ImageEncoder& encoder) {
  RsAttack a;
  a.target = rs_target(p_ref, q_ref);
  a.image = decoder.decode(a.target);
  a.reembedded = encoder.encode(a.image);
  return a;
}

inline double loss_pixel_l1(std::span<const RasterImage> recon, std::span<const RasterImage> target) {
  require(!recon.empty(), "pixel loss needs a nonempty batch");
  require(recon.size() == target.size(), "pixel loss batch sizes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    require(recon[i].same_shape(target[i]), "pixel loss image shapes differ");
    const auto a = recon[i].samples();
    const auto b = target[i].samples();
    for (std::size_t k = 0; k < a.size(); ++k) total += std::abs(a[k] - b[k]);
  }
  return total / static_cast<double>(recon.size());
}

// Least-squares discriminator loss: real scores pushed to 1, fake to 0.
inline double loss_discriminator(std::span<const double> d_real, std::span<const double> d_fake) {
  require(!d_real.empty(), "discriminator loss needs a nonempty batch");
  require(d_real.size() == d_fake.size(), "discriminator loss batch sizes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    total += (d_real[i] - 1.0) * (d_real[i] - 1.0) + d_fake[i] * d_fake[i];
  }
  return total / static_cast<double>(d_real.size());
}

// Least-squares generator loss: fake scores pushed to 1.
inline double loss_adversarial(std::span<const double> d_fake) {
  require(!d_fake.empty(), "adversarial loss needs a nonempty batch");
  double total = 0.0;
  for (double s : d_fake) total += (s - 1.0) * (s - 1.0);
  return total / static_cast<double>(d_fake.size());
}

// Mean squared Euclidean distance between re-embedded decodes and targets.
inline double loss_feature(std::span<const Embedding> recon_emb,
                           std::span<const Embedding> target_emb) {
  require(!recon_emb.empty(), "feature loss needs a nonempty batch");
  require(recon_emb.size() == target_emb.size(), "feature loss batch sizes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < recon_emb.size(); ++i) {
    require(recon_emb[i].dim() == target_emb[i].dim(), "feature loss dimensions differ");
    for (std::size_t k = 0; k < recon_emb[i].dim(); ++k) {
      const double diff = recon_emb[i][k] - target_emb[i][k];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(recon_emb.size());
}

inline double loss_total(const LossWeights& w, double l_pix, double l_adv, double l_feat) {
  w.validate();
  require(l_pix >= 0.0 && l_adv >= 0.0 && l_feat >= 0.0, "loss components must be >= 0");
  return w.lambda_pix * l_pix + w.lambda_adv * l_adv + w.lambda_feat * l_feat;
}

// Stub decoder: packs (x + 1) / 2 of each coordinate into successive samples
// of a one-row image.
class PackingOracle final : public DecoderOracle {
 public:
  explicit PackingOracle(std::size_t d)
      : d_(d), width_(static_cast<int>((d + RasterImage::kChannels - 1) / RasterImage::kChannels)) {}

  int width() const override { return width_; }
  int height() const override { return 1; }

  RasterImage decode(const Embedding& e) const override {
    require(e.dim() == d_, "packing oracle dimension mismatch");
    RasterImage img(width_, 1, 0.5);
    for (std::size_t k = 0; k < d_; ++k) img.set_sample(k, 0.5 * (e[k] + 1.0));
    return img;
  }

 private:
  std::size_t d_;
  int width_;
};

// Inverse of PackingOracle.
class PackingEncoder final : public ImageEncoder {
 public:
  explicit PackingEncoder(std::size_t d) : d_(d) {}

  Embedding encode(const RasterImage& img) const override {
    require(img.sample_count() >= d_, "image too small for packing encoder");
    std::vector<double> v(d_);
    for (std::size_t k = 0; k < d_; ++k) v[k] = 2.0 * img.samples()[k] - 1.0;
    return Embedding::normalized(std::move(v));
  }

 private:
  std::size_t d_;
};

// Stub decoder that returns the stored image of the nearest table key.
class TableOracle final : public DecoderOracle {
 public:
  TableOracle(std::vector<Embedding> keys, std::vector<RasterImage> images)
      : keys_(std::move(keys)), images_(std::move(images)) {
    require(!keys_.empty() && keys_.size() == images_.size(), "table oracle needs matching entries");
    for (const auto& img : images_) {
      require(img.same_shape(images_.front()), "table oracle images must share one size");
    }
  }

  int width() const override { return images_.front().width(); }
  int height() const override { return images_.front().height(); }

  RasterImage decode(const Embedding& e) const override {
    std::size_t best = 0;
    double best_dot = -2.0;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const double s = dot(keys_[i], e);
      if (s > best_dot) {
        best_dot = s;
        best = i;
      }
    }
    return images_[best];
  }

 private:
  std::vector<Embedding> keys_;
  std::vector<RasterImage> images_;
};

}  // namespace mii
