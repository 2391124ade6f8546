#pragma once

// Independent brute-force reference implementations used by the unit and
// acceptance tests. They share no code with the library beyond basic types.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mii/morph.hpp"
#include "mii/sphere.hpp"

namespace oracle {

inline double angle(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return std::acos(std::clamp(s, -1.0, 1.0));
}

inline double far_strict(std::span<const double> neg, double eps) {
  std::size_t c = 0;
  for (double v : neg) c += v < eps;
  return static_cast<double>(c) / static_cast<double>(neg.size());
}

// Largest candidate epsilon (a distinct negative value) whose FAR is within
// the target; candidates are scanned exhaustively.
inline double threshold_scan(std::span<const double> neg, double target) {
  std::vector<double> cand(neg.begin(), neg.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  double best = cand.front();
  for (double c : cand) {
    if (far_strict(neg, c) <= target) best = std::max(best, c);
  }
  return best;
}

inline double auroc_pairs(std::span<const double> pos, std::span<const double> neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p < n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

struct ScanResult {
  std::size_t index;
  double value;
};

inline ScanResult gallery_scan(const std::vector<mii::Embedding>& g, const mii::Embedding& p,
                               const mii::Embedding& q) {
  ScanResult best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = std::max(angle(g[i].coords(), p.coords()), angle(g[i].coords(), q.coords()));
    if (v < best.value) best = {i, v};
  }
  return best;
}

// Circumcircle containment by explicit circumcentre; returns the signed
// margin (radius - distance), positive when p is strictly inside.
inline double circumcircle_margin(const mii::Point2& a, const mii::Point2& b, const mii::Point2& c,
                                  const mii::Point2& p) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
  const double a2 = a.x * a.x + a.y * a.y, b2 = b.x * b.x + b.y * b.y, c2 = c.x * c.x + c.y * c.y;
  const double ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
  const double uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
  const double r = std::hypot(a.x - ux, a.y - uy);
  return r - std::hypot(p.x - ux, p.y - uy);
}

// Affine map dst -> src solved as a 3x3 linear system by Cramer's rule.
struct Affine {
  double a, b, c, d, e, f;  // x' = a x + b y + c, y' = d x + e y + f
};

inline Affine solve_affine(const std::array<mii::Point2, 3>& from, const std::array<mii::Point2, 3>& to) {
  auto det3 = [](double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  double m[3][3];
  for (int i = 0; i < 3; ++i) {
    m[i][0] = from[i].x;
    m[i][1] = from[i].y;
    m[i][2] = 1.0;
  }
  const double det = det3(m);
  auto solve = [&](double r0, double r1, double r2, int col) {
    double mm[3][3];
    std::copy(&m[0][0], &m[0][0] + 9, &mm[0][0]);
    mm[0][col] = r0;
    mm[1][col] = r1;
    mm[2][col] = r2;
    return det3(mm) / det;
  };
  Affine out;
  out.a = solve(to[0].x, to[1].x, to[2].x, 0);
  out.b = solve(to[0].x, to[1].x, to[2].x, 1);
  out.c = solve(to[0].x, to[1].x, to[2].x, 2);
  out.d = solve(to[0].y, to[1].y, to[2].y, 0);
  out.e = solve(to[0].y, to[1].y, to[2].y, 1);
  out.f = solve(to[0].y, to[1].y, to[2].y, 2);
  return out;
}

inline double bilinear(const mii::RasterImage& img, double x, double y, int ch) {
  x = std::min(std::max(x, 0.0), img.width() - 1.0);
  y = std::min(std::max(y, 0.0), img.height() - 1.0);
  const int ix = static_cast<int>(x), iy = static_cast<int>(y);
  const double fx = x - ix, fy = y - iy;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int sx = std::min(ix + dx, img.width() - 1);
      const int sy = std::min(iy + dy, img.height() - 1);
      const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
      acc += w * img.at(sx, sy, ch);
    }
  }
  return acc;
}

// Barycentric containment with the same edge tolerance convention.
inline bool inside(const std::array<mii::Point2, 3>& t, const mii::Point2& p) {
  const double den = (t[1].y - t[2].y) * (t[0].x - t[2].x) + (t[2].x - t[1].x) * (t[0].y - t[2].y);
  const double l0 = ((t[1].y - t[2].y) * (p.x - t[2].x) + (t[2].x - t[1].x) * (p.y - t[2].y)) / den;
  const double l1 = ((t[2].y - t[0].y) * (p.x - t[2].x) + (t[0].x - t[2].x) * (p.y - t[2].y)) / den;
  const double l2 = 1.0 - l0 - l1;
  return l0 >= -1e-9 && l1 >= -1e-9 && l2 >= -1e-9;
}

// Per-pixel warp: every pixel looks for a containing triangle (last one in
// mesh order wins, as when triangles are painted in order) and pulls its
// colour through the inverse affine map.
inline mii::RasterImage warp(const mii::RasterImage& img, const std::vector<mii::Point2>& from,
                             const std::vector<mii::Point2>& to,
                             const std::vector<std::array<int, 3>>& tris) {
  mii::RasterImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::optional<std::size_t> hit;
      for (std::size_t t = 0; t < tris.size(); ++t) {
        const std::array<mii::Point2, 3> dst{to[tris[t][0]], to[tris[t][1]], to[tris[t][2]]};
        if (inside(dst, {double(x), double(y)})) hit = t;
      }
      if (!hit) continue;
      const auto& tr = tris[*hit];
      const auto m = solve_affine({to[tr[0]], to[tr[1]], to[tr[2]]}, {from[tr[0]], from[tr[1]], from[tr[2]]});
      const double sx = m.a * x + m.b * y + m.c;
      const double sy = m.d * x + m.e * y + m.f;
      for (int c = 0; c < 3; ++c) out.set(x, y, c, bilinear(img, sx, sy, c));
    }
  }
  return out;
}

// Straightforward morph: blend landmarks, warp both with the given mesh on the
// blended points, cross-dissolve.
inline mii::RasterImage morph(const mii::RasterImage& p, const std::vector<mii::Point2>& pl,
                              const mii::RasterImage& q, const std::vector<mii::Point2>& ql,
                              const std::vector<std::array<int, 3>>& tris, double alpha) {
  std::vector<mii::Point2> mean(pl.size());
  for (std::size_t i = 0; i < pl.size(); ++i) {
    mean[i] = {(1.0 - alpha) * pl[i].x + alpha * ql[i].x, (1.0 - alpha) * pl[i].y + alpha * ql[i].y};
  }
  const auto wp = warp(p, pl, mean, tris);
  const auto wq = warp(q, ql, mean, tris);
  mii::RasterImage out(p.width(), p.height());
  for (std::size_t i = 0; i < out.sample_count(); ++i) {
    out.set_sample(i, (1.0 - alpha) * wp.samples()[i] + alpha * wq.samples()[i]);
  }
  return out;
}

inline mii::RasterImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mii::RasterImage img(w, h);
  for (std::size_t i = 0; i < img.sample_count(); ++i) img.set_sample(i, u(rng));
  return img;
}

inline double max_abs_diff(const mii::RasterImage& a, const mii::RasterImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.sample_count(); ++i) m = std::max(m, std::abs(a.samples()[i] - b.samples()[i]));
  return m;
}

}  // namespace oracle
