#pragma once

// Geometry on the unit hypersphere S^{d-1}: angular distance, the MII
// (max-of-two) distance, spherical midpoints and uniform sampling.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mii/error.hpp"
#include "mii/rng.hpp"

namespace mii {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kUnitNormTolerance = 1e-9;
// Pairs closer than this to pi radians have no usable midpoint.
inline constexpr double kAntipodalTolerance = 1e-6;

constexpr double to_degrees(double radians) { return radians * 180.0 / kPi; }
constexpr double to_radians(double degrees) { return degrees * kPi / 180.0; }

// An angle in [0, pi] radians.
class AngularDistance {
 public:
  constexpr AngularDistance() = default;
  explicit AngularDistance(double radians) : radians_(radians) {
    require(radians >= 0.0 && radians <= kPi,
            "angular distance must lie in [0, pi], got " + std::to_string(radians));
  }

  constexpr double radians() const { return radians_; }
  constexpr double degrees() const { return to_degrees(radians_); }

  friend constexpr auto operator<=>(AngularDistance, AngularDistance) = default;

 private:
  double radians_ = 0.0;
};

// A point on S^{d-1}. Construction checks the unit-norm invariant.
class Embedding {
 public:
  Embedding() = default;

  explicit Embedding(std::vector<double> coords) : coords_(std::move(coords)) {
    require(coords_.size() >= 2, "embedding dimension must be >= 2");
    double norm2 = 0.0;
    for (double c : coords_) norm2 += c * c;
    require(std::abs(std::sqrt(norm2) - 1.0) <= kUnitNormTolerance,
            "embedding must be unit-norm within 1e-9");
  }

  // Scales `v` to unit length. Throws on a zero vector.
  static Embedding normalized(std::vector<double> v) {
    double norm2 = 0.0;
    for (double c : v) norm2 += c * c;
    require(norm2 > 0.0 && std::isfinite(norm2), "cannot normalize a zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : v) c *= inv;
    return Embedding(std::move(v));
  }

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> coords_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const Embedding& a, const Embedding& b) {
  require(a.dim() == b.dim(), "dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                                  std::to_string(b.dim()));
  return dot(a.coords(), b.coords());
}

// arccos of a dot product clamped to [-1, 1].
inline double clamped_acos(double cosine) { return std::acos(std::clamp(cosine, -1.0, 1.0)); }

// Same angle as clamped_acos(dot(p, q)), evaluated as 2 atan2(|p - q|, |p + q|)
// so identical and opposite vectors give exactly 0 and pi.
inline AngularDistance angular_distance(const Embedding& p, const Embedding& q) {
  require(p.dim() == q.dim(), "dimension mismatch: " + std::to_string(p.dim()) + " vs " +
                                  std::to_string(q.dim()));
  double diff2 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double a = p[i], b = q[i];
    diff2 += (a - b) * (a - b);
    sum2 += (a + b) * (a + b);
  }
  return AngularDistance(std::min(kPi, 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2))));
}

// max(theta(a, c), theta(b, c)): how far c is from the farther of a and b.
inline AngularDistance mii_distance(const Embedding& a, const Embedding& b, const Embedding& c) {
  require(a.dim() == b.dim(), "dimension mismatch between the two targets");
  return std::max(angular_distance(a, c), angular_distance(b, c));
}

inline Embedding spherical_midpoint(const Embedding& p, const Embedding& q) {
  require(p.dim() == q.dim(), "dimension mismatch");
  if (angular_distance(p, q).radians() >= kPi - kAntipodalTolerance) {
    throw UndefinedMidpointError("spherical midpoint undefined for antipodal inputs");
  }
  std::vector<double> sum(p.dim());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = p[i] + q[i];
  return Embedding::normalized(std::move(sum));
}

// One draw from the uniform distribution on S^{d-1} (normalized Gaussian).
inline Embedding sample_uniform(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(d);
  for (;;) {
    double norm2 = 0.0;
    for (double& c : v) {
      c = normal(rng);
      norm2 += c * c;
    }
    if (norm2 > 1e-300) return Embedding::normalized(std::move(v));
  }
}

inline std::vector<Embedding> sample_uniform_sphere(std::size_t d, std::size_t n,
                                                    std::uint64_t seed) {
  require(d >= 2, "sphere dimension must be >= 2");
  require(n >= 1, "sample count must be >= 1");
  Rng rng(seed);
  std::vector<Embedding> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_uniform(d, rng));
  return out;
}

}  // namespace mii
