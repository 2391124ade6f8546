#pragma once

// Gallery-search MIIs: pick the gallery member closest to both references in
// the max-of-two-angles sense. Provides an exhaustive scan, a coarse
// (inverted-file) index with a triangle-inequality pruned scan, and the
// gallery-size vs. success curve.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mii/error.hpp"
#include "mii/ideal_attack.hpp"
#include "mii/rng.hpp"
#include "mii/sphere.hpp"
#include "mii/verify_eval.hpp"

namespace mii {

class Gallery {
 public:
  Gallery() = default;
  explicit Gallery(std::size_t d) : d_(d) { require(d >= 2, "gallery dimension must be >= 2"); }

  explicit Gallery(const std::vector<Embedding>& members) {
    require(!members.empty(), "gallery must be nonempty");
    d_ = members.front().dim();
    data_.reserve(members.size() * d_);
    for (const auto& m : members) add(m);
  }

  void add(const Embedding& e, std::uint64_t id) {
    require(d_ == 0 || e.dim() == d_, "gallery members must share one dimension");
    if (d_ == 0) d_ = e.dim();
    data_.insert(data_.end(), e.coords().begin(), e.coords().end());
    ids_.push_back(id);
  }
  void add(const Embedding& e) { add(e, ids_.size()); }

  std::size_t dim() const { return d_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  std::uint64_t id(std::size_t i) const { return ids_[i]; }
  Embedding embedding(std::size_t i) const {
    return Embedding(std::vector<double>(row(i).begin(), row(i).end()));
  }

 private:
  std::size_t d_ = 0;
  std::vector<double> data_;
  std::vector<std::uint64_t> ids_;
};

struct SearchResult {
  std::size_t index = 0;
  AngularDistance value;
};

namespace detail {

// max(theta(m, p), theta(m, q)) from a raw gallery row.
inline double gs_objective(std::span<const double> member, std::span<const double> p,
                           std::span<const double> q) {
  return clamped_acos(std::min(dot(member, p), dot(member, q)));
}

// Running argmin with ties resolved to the lowest gallery index.
struct BestSoFar {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double value = std::numeric_limits<double>::infinity();

  void offer(std::size_t i, double v) {
    if (v < value || (v == value && i < index)) {
      index = i;
      value = v;
    }
  }
};

inline void check_query(const Gallery& g, const Embedding& p, const Embedding& q) {
  require(!g.empty(), "gallery must be nonempty");
  require(p.dim() == g.dim() && q.dim() == g.dim(), "query and gallery dimensions differ");
}

}  // namespace detail

inline SearchResult gs_search_exact(const Gallery& g, const Embedding& p_ref,
                                    const Embedding& q_ref) {
  detail::check_query(g, p_ref, q_ref);
  detail::BestSoFar best;
  for (std::size_t i = 0; i < g.size(); ++i) {
    best.offer(i, detail::gs_objective(g.row(i), p_ref.coords(), q_ref.coords()));
  }
  return {best.index, AngularDistance(best.value)};
}

// Coarse quantizer over a gallery: spherical k-means centroids, members
// listed under their nearest centroid with the cached member-centroid angle.
class GalleryIndex {
 public:
  struct List {
    std::vector<std::size_t> members;    // ascending gallery indices
    std::vector<double> centroid_angle;  // parallel to members
    double radius = 0.0;                 // max centroid_angle
  };

  struct Options {
    std::size_t k = 0;              // 0: ceil(sqrt(n))
    std::size_t iterations = 8;
    std::size_t train_per_centroid = 64;  // training subsample size per centroid
    std::uint64_t seed = 0;
  };

  GalleryIndex(const Gallery& gallery, Options opts) : gallery_(&gallery) {
    require(!gallery.empty(), "cannot index an empty gallery");
    const std::size_t n = gallery.size();
    const std::size_t d = gallery.dim();
    std::size_t k = opts.k ? opts.k
                           : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    k = std::clamp<std::size_t>(k, 1, n);

    Rng rng(derive_seed(opts.seed, stream::kIndex));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t n_train = std::min(n, std::max(k, k * opts.train_per_centroid));
    // partial Fisher-Yates: first n_train entries become a uniform subsample
    for (std::size_t i = 0; i < n_train; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(train.begin(), train.end());

    centroids_.assign(k * d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      const auto r = gallery.row(order[c]);
      std::copy(r.begin(), r.end(), centroids_.begin() + static_cast<std::ptrdiff_t>(c * d));
    }
    k_ = k;
    d_ = d;

    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < opts.iterations; ++it) {
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t m : train) {
        const std::size_t c = nearest_centroid(gallery.row(m));
        const auto r = gallery.row(m);
        for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += r[j];
        counts[c]++;
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm2 += sums[c * d + j] * sums[c * d + j];
        if (norm2 <= 1e-24) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t j = 0; j < d; ++j) centroids_[c * d + j] = sums[c * d + j] * inv;
      }
    }

    lists_.assign(k, List{});
    for (std::size_t m = 0; m < n; ++m) {
      const auto r = gallery.row(m);
      const std::size_t c = nearest_centroid(r);
      auto& list = lists_[c];
      list.members.push_back(m);
      const double angle = clamped_acos(dot(r, centroid(c)));
      list.centroid_angle.push_back(angle);
      list.radius = std::max(list.radius, angle);
    }
  }

  std::size_t n_lists() const { return k_; }
  const Gallery& gallery() const { return *gallery_; }
  const List& list(std::size_t c) const { return lists_[c]; }
  std::span<const double> centroid(std::size_t c) const { return {centroids_.data() + c * d_, d_}; }

  // Nearest centroid by angle; ties go to the lower centroid index.
  std::size_t nearest_centroid(std::span<const double> x) const {
    std::size_t best = 0;
    double best_dot = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k_; ++c) {
      const double s = dot(x, centroid(c));
      if (s > best_dot) {
        best_dot = s;
        best = c;
      }
    }
    return best;
  }

 private:
  const Gallery* gallery_;
  std::size_t k_ = 0;
  std::size_t d_ = 0;
  std::vector<double> centroids_;
  std::vector<List> lists_;
};

// Probes the n_probe lists whose centroids have the smallest max-angle to
// the two references and scans their members. Members are skipped only when
// the triangle-inequality bound proves they cannot beat the current best, so
// probing every list reproduces gs_search_exact exactly.
inline SearchResult gs_search_indexed(const GalleryIndex& idx, const Embedding& p_ref,
                                      const Embedding& q_ref, std::size_t n_probe) {
  const Gallery& g = idx.gallery();
  detail::check_query(g, p_ref, q_ref);
  require(n_probe >= 1, "n_probe must be >= 1");
  constexpr double kBoundMargin = 1e-9;

  const std::size_t k = idx.n_lists();
  std::vector<std::pair<double, std::size_t>> order(k);
  for (std::size_t c = 0; c < k; ++c) {
    order[c] = {detail::gs_objective(idx.centroid(c), p_ref.coords(), q_ref.coords()), c};
  }
  std::sort(order.begin(), order.end());
  const std::size_t probes = std::min(n_probe, k);

  detail::BestSoFar best;
  for (std::size_t o = 0; o < probes; ++o) {
    const auto [centroid_value, c] = order[o];
    const auto& list = idx.list(c);
    if (centroid_value - list.radius > best.value + kBoundMargin) continue;
    for (std::size_t t = 0; t < list.members.size(); ++t) {
      if (centroid_value - list.centroid_angle[t] > best.value + kBoundMargin) continue;
      const std::size_t m = list.members[t];
      best.offer(m, detail::gs_objective(g.row(m), p_ref.coords(), q_ref.coords()));
    }
  }
  if (best.index == std::numeric_limits<std::size_t>::max()) {
    throw ContractError("probed lists are empty");
  }
  return {best.index, AngularDistance(best.value)};
}

struct CurvePoint {
  std::size_t gallery_size = 0;
  double success_rate = 0.0;  // at the curve's epsilon
  double mean_mii_dist = 0.0;  // radians, against the live captures
};

// Gallery member i as a uniform draw on S^{d-1}; prefixes of the stream form
// nested galleries.
struct UniformGalleryStream {
  std::size_t d;
  std::uint64_t seed;

  void fill(std::size_t i, std::span<double> out) const {
    Rng rng(derive_seed(seed, stream::kGallery, i));
    std::normal_distribution<double> normal;
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& c : out) {
        c = normal(rng);
        norm2 += c * c;
      }
    } while (norm2 <= 1e-300);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : out) c *= inv;
  }
};

// Members of an explicit gallery, in order.
struct GalleryPrefixStream {
  const Gallery* gallery;

  void fill(std::size_t i, std::span<double> out) const {
    const auto r = gallery->row(i);
    std::copy(r.begin(), r.end(), out.begin());
  }
};

// Success-vs-size curve over nested galleries drawn from `source`. One pass
// over the largest gallery; the running best member of each quad is scored
// against its live captures whenever the scan reaches one of `sizes`.
template <typename Source>
std::vector<CurvePoint> gallery_size_curve(const Source& source, std::size_t d,
                                           std::span<const std::size_t> sizes,
                                           std::span<const AttackQuad> quads,
                                           AngularDistance epsilon) {
  require(!sizes.empty() && !quads.empty(), "curve needs sizes and quads");
  require(std::is_sorted(sizes.begin(), sizes.end()) && sizes.front() >= 1,
          "gallery sizes must be ascending and >= 1");
  for (const auto& quad : quads) require(quad.p_ref.dim() == d, "quad dimension mismatch");

  const auto nq = static_cast<Eigen::Index>(quads.size());
  const auto dd = static_cast<Eigen::Index>(d);
  // Column 2j is quad j's p_ref, column 2j+1 its q_ref.
  Eigen::MatrixXd refs(dd, 2 * nq);
  for (Eigen::Index j = 0; j < nq; ++j) {
    const auto& quad = quads[static_cast<std::size_t>(j)];
    for (Eigen::Index r = 0; r < dd; ++r) {
      refs(r, 2 * j) = quad.p_ref[static_cast<std::size_t>(r)];
      refs(r, 2 * j + 1) = quad.q_ref[static_cast<std::size_t>(r)];
    }
  }

  std::vector<double> best_value(quads.size(), std::numeric_limits<double>::infinity());
  std::vector<double> best_cos(quads.size(), -2.0);
  std::vector<std::vector<double>> best_member(quads.size(), std::vector<double>(d, 0.0));

  constexpr std::size_t kChunk = 2048;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> chunk(kChunk, dd);
  Eigen::MatrixXd dots;

  std::vector<CurvePoint> curve;
  std::size_t scanned = 0;
  for (std::size_t target : sizes) {
    while (scanned < target) {
      const std::size_t b = std::min(kChunk, target - scanned);
      for (std::size_t i = 0; i < b; ++i) {
        source.fill(scanned + i, std::span<double>(chunk.row(static_cast<Eigen::Index>(i)).data(), d));
      }
      dots.noalias() = chunk.topRows(static_cast<Eigen::Index>(b)) * refs;
      for (Eigen::Index j = 0; j < nq; ++j) {
        auto& bv = best_value[static_cast<std::size_t>(j)];
        auto& bc = best_cos[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < b; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          const double c = std::min(dots(ii, 2 * j), dots(ii, 2 * j + 1));
          if (c < bc - 1e-12) continue;  // cannot reach the current best angle
          const double v = clamped_acos(c);
          if (v < bv) {
            bv = v;
            bc = c;
            auto& member = best_member[static_cast<std::size_t>(j)];
            std::copy(chunk.row(ii).data(), chunk.row(ii).data() + d, member.begin());
          }
        }
      }
      scanned += b;
    }

    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t j = 0; j < quads.size(); ++j) {
      const auto& m = best_member[j];
      const double dist = clamped_acos(
          std::min(dot(m, quads[j].p_live.coords()), dot(m, quads[j].q_live.coords())));
      hits += dist <= epsilon.radians();
      sum += dist;
    }
    curve.push_back({target, static_cast<double>(hits) / static_cast<double>(quads.size()),
                     sum / static_cast<double>(quads.size())});
  }
  return curve;
}

struct SizeExtrapolation {
  double intercept = 0.0;  // success rate at size 1 (log10 size = 0)
  double slope = 0.0;      // success rate per decade of gallery size
  double size_at_half = std::numeric_limits<double>::infinity();
};

// Least-squares fit of success = intercept + slope * log10(size); the size
// at which the line reaches 50% success, or +inf if it never rises.
inline SizeExtrapolation extrapolate_half_success(std::span<const CurvePoint> curve) {
  require(curve.size() >= 2, "extrapolation needs at least two curve points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : curve) {
    mx += std::log10(static_cast<double>(p.gallery_size));
    my += p.success_rate;
  }
  const auto n = static_cast<double>(curve.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : curve) {
    const double dx = std::log10(static_cast<double>(p.gallery_size)) - mx;
    sxx += dx * dx;
    sxy += dx * (p.success_rate - my);
  }
  require(sxx > 0.0, "extrapolation needs at least two distinct gallery sizes");
  SizeExtrapolation fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (fit.slope > 0.0) fit.size_at_half = std::pow(10.0, (0.5 - fit.intercept) / fit.slope);
  return fit;
}

}  // namespace mii
