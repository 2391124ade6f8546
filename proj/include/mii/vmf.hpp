#pragma once

// von Mises-Fisher sampling on S^{d-1} using Wood's (1994) rejection scheme:
// draw the cosine w to the mean direction, then a uniform tangent direction.

#include <cmath>
#include <random>
#include <vector>

#include "mii/error.hpp"
#include "mii/rng.hpp"
#include "mii/sphere.hpp"

namespace mii {

// Cosine to the mean direction of one vMF draw.
inline double sample_vmf_cosine(std::size_t d, double kappa, Rng& rng) {
  require(kappa >= 0.0 && std::isfinite(kappa), "vMF concentration must be finite and >= 0");
  const double m = static_cast<double>(d) - 1.0;
  // (-2k + sqrt(4k^2 + m^2)) / m, rearranged to avoid cancellation at large k.
  const double b = m / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m * m));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m * std::log(1.0 - x0 * x0);

  std::gamma_distribution<double> gamma(m / 2.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = uniform(rng);
    if (kappa * w + m * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

inline Embedding sample_vmf(const Embedding& mean, double kappa, Rng& rng) {
  const std::size_t d = mean.dim();
  const double w = sample_vmf_cosine(d, kappa, rng);

  // Uniform direction in the tangent space at `mean`.
  std::normal_distribution<double> normal;
  std::vector<double> v(d);
  double norm2 = 0.0;
  do {
    for (double& c : v) c = normal(rng);
    const double along = dot(std::span<const double>(v), mean.coords());
    norm2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      v[i] -= along * mean[i];
      norm2 += v[i] * v[i];
    }
  } while (norm2 <= 1e-24);

  const double tangent_scale = std::sqrt(std::max(0.0, 1.0 - w * w)) / std::sqrt(norm2);
  for (std::size_t i = 0; i < d; ++i) v[i] = w * mean[i] + tangent_scale * v[i];
  return Embedding::normalized(std::move(v));
}

}  // namespace mii
