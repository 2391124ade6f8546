#pragma once

// Synthetic representation spaces. Identities are von Mises-Fisher clouds on
// S^{d-1}; comparators are rotations plus per-capture tangent noise applied to
// shared latent samples, so that sibling comparators see correlated distances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mii/error.hpp"
#include "mii/rng.hpp"
#include "mii/sphere.hpp"
#include "mii/vmf.hpp"

namespace mii {

struct IdentityModel {
  std::uint64_t id = 0;
  Embedding mean_direction;
  double concentration = 0.0;  // vMF kappa; 0 is uniform
};

enum class ConcentrationRegime { kLowIntraClassVar, kHighIntraClassVar, kExplicit };

inline std::string_view to_string(ConcentrationRegime r) {
  switch (r) {
    case ConcentrationRegime::kLowIntraClassVar: return "low-intra-class-var";
    case ConcentrationRegime::kHighIntraClassVar: return "high-intra-class-var";
    case ConcentrationRegime::kExplicit: return "explicit";
  }
  return "explicit";
}

inline ConcentrationRegime parse_regime(std::string_view s) {
  if (s == "low-intra-class-var") return ConcentrationRegime::kLowIntraClassVar;
  if (s == "high-intra-class-var") return ConcentrationRegime::kHighIntraClassVar;
  if (s == "explicit") return ConcentrationRegime::kExplicit;
  throw ContractError("unknown concentration regime: " + std::string(s));
}

// Target window on the median matching-pair distance, radians.
struct RegimeWindow {
  double target;
  double low;
  double high;
};

// Low variance: matching pairs centred around 43 degrees, like frontal
// constrained captures. High variance: around 63 degrees, like in-the-wild
// captures.
inline constexpr RegimeWindow kLowVarianceWindow{0.75, 0.55, 0.95};
inline constexpr RegimeWindow kHighVarianceWindow{1.10, 1.00, 1.20};

struct WorldConfig {
  std::size_t d = 128;
  std::size_t n_identities = 2000;
  std::size_t images_per_identity = 2;
  ConcentrationRegime regime = ConcentrationRegime::kLowIntraClassVar;
  double kappa = 0.0;         // used when regime == kExplicit
  double kappa_spread = 0.5;  // log-normal sigma of per-identity kappa around the regime value
  std::uint64_t seed = 0;

  void validate() const {
    require(d >= 2, "d must be >= 2");
    require(n_identities >= 2, "n_identities must be >= 2");
    require(images_per_identity >= 2, "images_per_identity must be >= 2");
    require(kappa >= 0.0 && std::isfinite(kappa), "kappa must be finite and >= 0");
    require(kappa_spread >= 0.0 && std::isfinite(kappa_spread), "kappa_spread must be >= 0");
  }
};

struct World {
  WorldConfig cfg;
  double kappa_scale = 0.0;  // regime kappa before per-identity spread
  std::vector<IdentityModel> identities;
  // captures[i][c]: latent embedding of capture c of identity i.
  std::vector<std::vector<Embedding>> captures;
};

inline IdentityModel make_identity(const WorldConfig& cfg, double kappa_scale, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, stream::kIdentity, index));
  IdentityModel model;
  model.id = index;
  model.mean_direction = sample_uniform(cfg.d, rng);
  std::normal_distribution<double> normal;
  model.concentration = kappa_scale * std::exp(cfg.kappa_spread * normal(rng));
  return model;
}

// The latent sample of one capture, before any comparator is applied.
inline Embedding sample_capture(const IdentityModel& identity, std::size_t capture_index,
                                std::uint64_t world_seed) {
  Rng rng(derive_seed(world_seed, stream::kCapture, identity.id, capture_index));
  return sample_vmf(identity.mean_direction, identity.concentration, rng);
}

// Monte Carlo median of matching-pair distances for a kappa scale. Every pair
// has its own random stream, so changing kappa perturbs pairs independently
// and the estimate moves smoothly with kappa.
inline double median_matching_distance(std::size_t d, double kappa_scale, double kappa_spread,
                                       std::uint64_t seed, std::size_t n_pairs = 4000) {
  std::vector<double> dists(n_pairs);
  std::vector<double> axis(d, 0.0);
  axis[0] = 1.0;
  const Embedding mean(axis);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    Rng rng(derive_seed(seed, stream::kCalibration, i));
    std::normal_distribution<double> normal;
    const double kappa = kappa_scale * std::exp(kappa_spread * normal(rng));
    const Embedding a = sample_vmf(mean, kappa, rng);
    const Embedding b = sample_vmf(mean, kappa, rng);
    dists[i] = angular_distance(a, b).radians();
  }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(n_pairs / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

// Bisection on log(kappa) for the scale whose median matching distance hits
// the window target. Throws if the result falls outside the window.
inline double calibrate_kappa(std::size_t d, double kappa_spread, const RegimeWindow& window,
                              std::uint64_t seed) {
  double lo = std::log(1e-3);
  double hi = std::log(1e7);
  require(median_matching_distance(d, std::exp(hi), kappa_spread, seed) < window.target,
          "calibration target unreachable at this dimension");
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (median_matching_distance(d, std::exp(mid), kappa_spread, seed) > window.target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double kappa = std::exp(0.5 * (lo + hi));
  const double achieved = median_matching_distance(d, kappa, kappa_spread, seed);
  require(achieved >= window.low && achieved <= window.high,
          "calibrated kappa misses the regime window");
  return kappa;
}

inline double resolve_kappa_scale(const WorldConfig& cfg) {
  switch (cfg.regime) {
    case ConcentrationRegime::kLowIntraClassVar:
      return calibrate_kappa(cfg.d, cfg.kappa_spread, kLowVarianceWindow, cfg.seed);
    case ConcentrationRegime::kHighIntraClassVar:
      return calibrate_kappa(cfg.d, cfg.kappa_spread, kHighVarianceWindow, cfg.seed);
    case ConcentrationRegime::kExplicit:
      return cfg.kappa;
  }
  return cfg.kappa;
}

// Rebuilds a world from its config and a known kappa scale (no calibration).
inline World build_world(const WorldConfig& cfg, double kappa_scale) {
  cfg.validate();
  World world;
  world.cfg = cfg;
  world.kappa_scale = kappa_scale;
  world.identities.reserve(cfg.n_identities);
  world.captures.reserve(cfg.n_identities);
  for (std::size_t i = 0; i < cfg.n_identities; ++i) {
    world.identities.push_back(make_identity(cfg, kappa_scale, i));
    std::vector<Embedding> caps;
    caps.reserve(cfg.images_per_identity);
    for (std::size_t c = 0; c < cfg.images_per_identity; ++c) {
      caps.push_back(sample_capture(world.identities.back(), c, cfg.seed));
    }
    world.captures.push_back(std::move(caps));
  }
  return world;
}

inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  return build_world(cfg, resolve_kappa_scale(cfg));
}

// Key under which a comparator draws its noise for one capture. Captures of
// world identities, gallery members and generated MIIs use disjoint streams.
inline std::uint64_t capture_key(std::uint64_t identity_id, std::uint64_t capture_index) {
  return derive_seed(0, stream::kCapture, identity_id, capture_index);
}
inline std::uint64_t gallery_key(std::uint64_t member_index) {
  return derive_seed(0, stream::kGallery, member_index);
}

class SyntheticComparator {
 public:
  SyntheticComparator(std::string id, Eigen::MatrixXd rotation, double noise_scale,
                      std::uint64_t seed)
      : id_(std::move(id)), rotation_(std::move(rotation)), noise_scale_(noise_scale), seed_(seed) {
    require(rotation_.rows() == rotation_.cols() && rotation_.rows() >= 2,
            "comparator rotation must be square with d >= 2");
    require(noise_scale_ >= 0.0 && std::isfinite(noise_scale_), "noise_scale must be >= 0");
    const Eigen::MatrixXd gram = rotation_ * rotation_.transpose();
    const auto d = rotation_.rows();
    require((gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-6,
            "comparator rotation is not orthogonal");
  }

  const std::string& id() const { return id_; }
  std::size_t dim() const { return static_cast<std::size_t>(rotation_.rows()); }
  const Eigen::MatrixXd& rotation() const { return rotation_; }
  double noise_scale() const { return noise_scale_; }
  std::uint64_t seed() const { return seed_; }

  // Rotates a latent sample, adds tangent noise of norm noise_scale drawn from
  // the stream for `key`, and renormalizes.
  Embedding apply(const Embedding& latent, std::uint64_t key) const {
    require(latent.dim() == dim(), "comparator and embedding dimensions differ");
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::Map<const Eigen::VectorXd> x(latent.coords().data(), d);
    Eigen::VectorXd y = rotation_ * x;
    y.normalize();
    if (noise_scale_ > 0.0) {
      Rng rng(derive_seed(seed_, stream::kComparatorNoise, key));
      std::normal_distribution<double> normal;
      Eigen::VectorXd t(d);
      double tn = 0.0;
      do {
        for (Eigen::Index i = 0; i < d; ++i) t[i] = normal(rng);
        t -= t.dot(y) * y;
        tn = t.norm();
      } while (tn <= 1e-12);
      y += (noise_scale_ / tn) * t;
    }
    return Embedding::normalized(std::vector<double>(y.data(), y.data() + d));
  }

  // Maps a comparator-space embedding back to the latent space, ignoring noise.
  Embedding unapply(const Embedding& embedded) const {
    require(embedded.dim() == dim(), "comparator and embedding dimensions differ");
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::Map<const Eigen::VectorXd> y(embedded.coords().data(), d);
    Eigen::VectorXd x = rotation_.transpose() * y;
    return Embedding::normalized(std::vector<double>(x.data(), x.data() + d));
  }

 private:
  std::string id_;
  Eigen::MatrixXd rotation_;
  double noise_scale_;
  std::uint64_t seed_;
};

// Haar-distributed rotation from the QR decomposition of a Gaussian matrix.
inline Eigen::MatrixXd random_rotation(std::size_t d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, stream::kRotation));
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

// A comparator whose rotation and noise stream derive from its label and the
// family seed. Equal labels in one family give identical comparators.
inline SyntheticComparator make_comparator(const std::string& label, std::size_t d,
                                           double noise_scale, std::uint64_t family_seed) {
  const std::uint64_t seed = derive_seed(family_seed, hash_label(label));
  return SyntheticComparator(label, random_rotation(d, seed), noise_scale, seed);
}

inline SyntheticComparator identity_comparator(std::size_t d, std::string label = "latent") {
  const auto n = static_cast<Eigen::Index>(d);
  return SyntheticComparator(std::move(label), Eigen::MatrixXd::Identity(n, n), 0.0, 0);
}

inline Embedding embed(const SyntheticComparator& c, const IdentityModel& identity,
                       std::size_t capture_index, std::uint64_t world_seed) {
  return c.apply(sample_capture(identity, capture_index, world_seed),
                 capture_key(identity.id, capture_index));
}

// Every capture of a world as seen by one comparator.
using EmbeddedWorld = std::vector<std::vector<Embedding>>;

inline EmbeddedWorld embed_world(const SyntheticComparator& c, const World& world) {
  EmbeddedWorld out(world.captures.size());
  for (std::size_t i = 0; i < world.captures.size(); ++i) {
    out[i].reserve(world.captures[i].size());
    for (std::size_t k = 0; k < world.captures[i].size(); ++k) {
      out[i].push_back(c.apply(world.captures[i][k], capture_key(world.identities[i].id, k)));
    }
  }
  return out;
}

}  // namespace mii
