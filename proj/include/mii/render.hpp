#pragma once

// Synthetic "face" images for exercising image-space and representation-space
// attacks without a neural comparator. A latent embedding maps linearly onto a
// smooth image (random orthonormal combinations of low-frequency DCT modes)
// and onto 68 landmark positions. Encoding projects an image back onto the
// basis, so small geometric warps perturb the recovered embedding only mildly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mii/error.hpp"
#include "mii/morph.hpp"
#include "mii/rng.hpp"
#include "mii/rs_losses.hpp"
#include "mii/sphere.hpp"
#include "mii/synth_world.hpp"

namespace mii {

namespace detail {

// A loose frontal face layout in unit coordinates, 68 points in the usual
// jaw / brows / nose / eyes / mouth order.
inline std::vector<Point2> face_template() {
  std::vector<Point2> t;
  constexpr double pi = std::numbers::pi;
  for (int i = 0; i < 17; ++i) {  // jaw
    const double a = pi * (1.0 - i / 16.0);
    t.push_back({0.5 + 0.34 * std::cos(a), 0.45 + 0.38 * std::sin(a)});
  }
  for (int side = 0; side < 2; ++side) {  // brows
    for (int i = 0; i < 5; ++i) {
      const double x = (side ? 0.56 : 0.26) + 0.045 * i;
      t.push_back({x, 0.34 - 0.02 * std::sin(pi * i / 4.0)});
    }
  }
  for (int i = 0; i < 4; ++i) t.push_back({0.5, 0.40 + 0.05 * i});  // nose bridge
  for (int i = 0; i < 5; ++i) t.push_back({0.42 + 0.04 * i, 0.61 - 0.01 * std::sin(pi * i / 4.0)});
  for (int side = 0; side < 2; ++side) {  // eyes
    const double cx = side ? 0.645 : 0.355;
    for (int i = 0; i < 6; ++i) {
      const double a = pi * i / 3.0;
      t.push_back({cx + 0.055 * std::cos(a + pi), 0.42 + 0.022 * std::sin(a + pi)});
    }
  }
  for (int i = 0; i < 12; ++i) {  // outer lip
    const double a = 2.0 * pi * i / 12.0;
    t.push_back({0.5 + 0.11 * std::cos(a + pi), 0.74 + 0.045 * std::sin(a + pi)});
  }
  for (int i = 0; i < 8; ++i) {  // inner lip
    const double a = 2.0 * pi * i / 8.0;
    t.push_back({0.5 + 0.07 * std::cos(a + pi), 0.74 + 0.02 * std::sin(a + pi)});
  }
  return t;
}

}  // namespace detail

class SyntheticFaceRenderer {
 public:
  struct Options {
    int width = 128;
    int height = 128;
    double pixel_std = 0.12;    // per-sample std of the rendered signal
    double landmark_std = 1.5;  // pixels, per coordinate, at 128 px
    std::uint64_t seed = 0;
  };

  SyntheticFaceRenderer(std::size_t d, Options opts) : d_(d), opts_(opts) {
    require(d >= 2, "renderer dimension must be >= 2");
    require(opts.width >= 8 && opts.height >= 8, "renderer images must be at least 8x8");
    const auto w = opts.width;
    const auto h = opts.height;
    const auto pixels = static_cast<Eigen::Index>(w) * h * RasterImage::kChannels;

    // Enough DCT modes per channel to span d dimensions with some slack.
    int k = 1;
    while (static_cast<std::size_t>(k * k * RasterImage::kChannels) < d + d / 2 + 3) ++k;
    require(k <= std::min(w, h), "image too small for the renderer dimension");
    const Eigen::Index n_modes = static_cast<Eigen::Index>(k) * k * RasterImage::kChannels;

    Rng rng(derive_seed(opts.seed, stream::kRender));
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(n_modes, static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    // Orthonormal mixing of the modes; columns of the basis stay orthonormal
    // because the DCT modes are.
    const Eigen::MatrixXd mix =
        qr.householderQ() * Eigen::MatrixXd::Identity(n_modes, static_cast<Eigen::Index>(d));

    auto dct = [](int freq, int pos, int n) {
      const double scale = std::sqrt((freq == 0 ? 1.0 : 2.0) / n);
      return scale * std::cos(std::numbers::pi * freq * (pos + 0.5) / n);
    };
    const Eigen::Index per_channel = static_cast<Eigen::Index>(k) * k;
    basis_.resize(pixels, static_cast<Eigen::Index>(d));
    Eigen::RowVectorXd mode_values(per_channel);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) mode_values[ky * k + kx] = dct(ky, y, h) * dct(kx, x, w);
        for (int c = 0; c < RasterImage::kChannels; ++c) {
          const Eigen::Index row = (static_cast<Eigen::Index>(y) * w + x) * RasterImage::kChannels + c;
          basis_.row(row) = mode_values * mix.middleRows(c * per_channel, per_channel);
        }
      }
    }
    gain_ = opts.pixel_std * std::sqrt(static_cast<double>(pixels));

    landmark_map_.resize(2 * static_cast<Eigen::Index>(kFacialLandmarks),
                         static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < landmark_map_.cols(); ++j)
      for (Eigen::Index i = 0; i < landmark_map_.rows(); ++i) landmark_map_(i, j) = normal(rng);
    template_ = detail::face_template();
  }

  std::size_t dim() const { return d_; }
  int width() const { return opts_.width; }
  int height() const { return opts_.height; }

  RasterImage render(const Embedding& latent) const {
    require(latent.dim() == d_, "renderer dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> x(latent.coords().data(), static_cast<Eigen::Index>(d_));
    const Eigen::VectorXd signal = basis_ * x;
    RasterImage img(opts_.width, opts_.height);
    for (Eigen::Index i = 0; i < signal.size(); ++i) {
      img.set_sample(static_cast<std::size_t>(i), 0.5 + gain_ * signal[i]);
    }
    return img;
  }

  // Least-squares latent of an image, normalized.
  Embedding encode_latent(const RasterImage& img) const {
    require(img.width() == opts_.width && img.height() == opts_.height,
            "image size does not match renderer");
    Eigen::VectorXd centred(static_cast<Eigen::Index>(img.sample_count()));
    for (std::size_t i = 0; i < img.sample_count(); ++i) {
      centred[static_cast<Eigen::Index>(i)] = img.samples()[i] - 0.5;
    }
    const Eigen::VectorXd x = basis_.transpose() * centred;
    return Embedding::normalized(std::vector<double>(x.data(), x.data() + x.size()));
  }

  // The 68 facial landmarks of the face rendered from `latent`.
  std::vector<Point2> landmarks(const Embedding& latent) const {
    require(latent.dim() == d_, "renderer dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> x(latent.coords().data(), static_cast<Eigen::Index>(d_));
    const Eigen::VectorXd shift = landmark_map_ * x;
    const double sx = opts_.width - 1.0;
    const double sy = opts_.height - 1.0;
    const double px = opts_.landmark_std * opts_.width / 128.0;
    const double py = opts_.landmark_std * opts_.height / 128.0;
    std::vector<Point2> out;
    out.reserve(kFacialLandmarks);
    for (std::size_t i = 0; i < kFacialLandmarks; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out.push_back({std::clamp(template_[i].x * sx + px * shift[2 * ii], 1.0, sx - 1.0),
                     std::clamp(template_[i].y * sy + py * shift[2 * ii + 1], 1.0, sy - 1.0)});
    }
    return out;
  }

  LandmarkSet morph_landmarks(const Embedding& latent) const {
    return add_boundary_landmarks(landmarks(latent), opts_.width, opts_.height);
  }

 private:
  std::size_t d_;
  Options opts_;
  Eigen::MatrixXd basis_;
  double gain_ = 1.0;
  Eigen::MatrixXd landmark_map_;
  std::vector<Point2> template_;
};

// A comparator acting on rendered images: recover the latent, then apply the
// comparator with noise keyed by the image content.
class RenderedImageEncoder final : public ImageEncoder {
 public:
  RenderedImageEncoder(const SyntheticFaceRenderer& renderer, const SyntheticComparator& comparator)
      : renderer_(&renderer), comparator_(&comparator) {}

  Embedding encode(const RasterImage& img) const override {
    std::uint64_t key = 0x1a;
    for (double s : img.samples()) {
      key = mix64(key ^ static_cast<std::uint64_t>(std::llround(s * 65535.0)));
    }
    return comparator_->apply(renderer_->encode_latent(img), key);
  }

 private:
  const SyntheticFaceRenderer* renderer_;
  const SyntheticComparator* comparator_;
};

// Decoder trained against one comparator: undo its rotation, then render.
class RenderedDecoder final : public DecoderOracle {
 public:
  RenderedDecoder(const SyntheticFaceRenderer& renderer, const SyntheticComparator& comparator)
      : renderer_(&renderer), comparator_(&comparator) {}

  int width() const override { return renderer_->width(); }
  int height() const override { return renderer_->height(); }
  RasterImage decode(const Embedding& e) const override {
    return renderer_->render(comparator_->unapply(e));
  }

 private:
  const SyntheticFaceRenderer* renderer_;
  const SyntheticComparator* comparator_;
};

}  // namespace mii
