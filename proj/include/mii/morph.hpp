#pragma once

// Landmark-driven face morphing: boundary landmark augmentation, Delaunay
// triangulation of the blended landmarks, per-triangle inverse affine warps
// with bilinear sampling, and a cross-dissolve of the two warped images.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "mii/error.hpp"

namespace mii {

inline constexpr std::size_t kFacialLandmarks = 68;
inline constexpr std::size_t kBoundaryLandmarks = 20;
inline constexpr std::size_t kMorphLandmarks = kFacialLandmarks + kBoundaryLandmarks;
inline constexpr double kMinTriangleArea = 1e-9;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
  friend auto operator<=>(const Point2&, const Point2&) = default;
};

// Row-major RGB raster with samples in [0, 1].
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels,
              std::clamp(fill, 0.0, 1.0)) {
    require(width > 0 && height > 0, "image dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t sample_count() const { return data_.size(); }
  std::span<const double> samples() const { return data_; }

  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  void set(int x, int y, int c, double v) { data_[index(x, y, c)] = std::clamp(v, 0.0, 1.0); }
  void set_sample(std::size_t i, double v) { data_[i] = std::clamp(v, 0.0, 1.0); }

  bool same_shape(const RasterImage& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct LandmarkSet {
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
};

struct TriangleMesh {
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
};

// Appends 20 points evenly spaced around the border, clockwise from the
// top-left corner: 6 along the top (both corners), 4 down the right side,
// 6 along the bottom (both corners), 4 up the left side.
inline LandmarkSet add_boundary_landmarks(std::span<const Point2> facial, int width, int height) {
  require(facial.size() == kFacialLandmarks, "expected 68 facial landmarks");
  require(width >= 2 && height >= 2, "image must be at least 2x2");
  LandmarkSet out;
  out.points.assign(facial.begin(), facial.end());
  const double r = width - 1.0;
  const double b = height - 1.0;
  for (int i = 0; i <= 5; ++i) out.points.push_back({r * i / 5.0, 0.0});
  for (int i = 1; i <= 4; ++i) out.points.push_back({r, b * i / 5.0});
  for (int i = 5; i >= 0; --i) out.points.push_back({r * i / 5.0, b});
  for (int i = 4; i >= 1; --i) out.points.push_back({0.0, b * i / 5.0});
  return out;
}

namespace detail {

inline double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of the counter-clockwise
// triangle (a, b, c). Evaluated in long double relative to d.
inline long double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const long double adx = a.x - d.x, ady = a.y - d.y;
  const long double bdx = b.x - d.x, bdy = b.y - d.y;
  const long double cdx = c.x - d.x, cdy = c.y - d.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

// Scale of incircle() for the given points; used to tell cocircular from inside.
inline long double incircle_scale(const Point2& a, const Point2& b, const Point2& c,
                                  const Point2& d) {
  long double m = 0.0L;
  for (const Point2* p : {&a, &b, &c}) {
    m = std::max({m, std::abs(static_cast<long double>(p->x - d.x)),
                  std::abs(static_cast<long double>(p->y - d.y))});
  }
  return m * m * m * m;
}

inline constexpr long double kCocircularRelTol = 1e-12L;

inline std::array<int, 3> ccw(const std::vector<Point2>& v, std::array<int, 3> t) {
  if (orient2d(v[t[0]], v[t[1]], v[t[2]]) < 0.0) std::swap(t[1], t[2]);
  return t;
}

inline std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace detail

// Bowyer-Watson triangulation. Points are inserted in lexicographic (x, y)
// order; exact duplicates are inserted once. Afterwards every interior edge
// of a cocircular quadrilateral is set to the diagonal whose (low, high)
// vertex-index pair is lexicographically smaller, which makes the output
// independent of insertion details. Triangles are counter-clockwise (in
// x-right, y-up orientation) and sorted.
inline TriangleMesh delaunay(std::span<const Point2> points) {
  require(points.size() >= 3, "Delaunay needs at least 3 points");
  const int n = static_cast<int>(points.size());

  bool any_area = false;
  for (int i = 2; i < n && !any_area; ++i) {
    for (int j = 1; j < i && !any_area; ++j) {
      any_area = std::abs(detail::orient2d(points[0], points[j], points[i])) > kMinTriangleArea;
    }
  }
  if (!any_area) throw DegenerateGeometryError("Delaunay input points are collinear");

  std::vector<Point2> v(points.begin(), points.end());
  double minx = v[0].x, maxx = v[0].x, miny = v[0].y, maxy = v[0].y;
  for (const auto& p : v) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double span = std::max({maxx - minx, maxy - miny, 1.0});
  const double cx = 0.5 * (minx + maxx);
  const double cy = 0.5 * (miny + maxy);
  const double big = 64.0 * span;
  const int s0 = n, s1 = n + 1, s2 = n + 2;
  v.push_back({cx - 2.0 * big, cy - big});
  v.push_back({cx + 2.0 * big, cy - big});
  v.push_back({cx, cy + 2.0 * big});

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return points[a] < points[b]; });

  std::vector<std::array<int, 3>> tris{detail::ccw(v, {s0, s1, s2})};
  const Point2* prev = nullptr;
  for (int idx : order) {
    const Point2& p = v[static_cast<std::size_t>(idx)];
    if (prev && *prev == p) continue;
    prev = &v[static_cast<std::size_t>(idx)];

    std::vector<std::array<int, 3>> keep;
    std::map<std::pair<int, int>, int> edge_count;
    std::vector<std::pair<int, int>> cavity_edges;
    for (const auto& t : tris) {
      const auto& a = v[t[0]];
      const auto& b = v[t[1]];
      const auto& c = v[t[2]];
      const long double s = detail::incircle(a, b, c, p);
      if (s > detail::kCocircularRelTol * detail::incircle_scale(a, b, c, p)) {
        for (int e = 0; e < 3; ++e) {
          const int u = t[e], w = t[(e + 1) % 3];
          if (edge_count[detail::edge_key(u, w)]++ == 0) cavity_edges.push_back({u, w});
        }
      } else {
        keep.push_back(t);
      }
    }
    for (const auto& [u, w] : cavity_edges) {
      if (edge_count[detail::edge_key(u, w)] != 1) continue;
      if (std::abs(detail::orient2d(v[u], v[w], p)) <= kMinTriangleArea) continue;
      keep.push_back(detail::ccw(v, {u, w, idx}));
    }
    tris.swap(keep);
  }

  std::vector<std::array<int, 3>> mesh_tris;
  for (const auto& t : tris) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) continue;
    if (std::abs(detail::orient2d(v[t[0]], v[t[1]], v[t[2]])) <= kMinTriangleArea) continue;
    mesh_tris.push_back(t);
  }

  // Cocircular tie rule: flip shared edges to the lexicographically smaller
  // diagonal while the quadrilateral stays cocircular.
  for (std::size_t pass = 0; pass < 4 * mesh_tris.size() + 4; ++pass) {
    std::map<std::pair<int, int>, std::vector<std::pair<std::size_t, int>>> owners;
    for (std::size_t ti = 0; ti < mesh_tris.size(); ++ti) {
      for (int e = 0; e < 3; ++e) {
        const auto& t = mesh_tris[ti];
        owners[detail::edge_key(t[e], t[(e + 1) % 3])].push_back({ti, t[(e + 2) % 3]});
      }
    }
    bool flipped = false;
    for (const auto& [edge, sides] : owners) {
      if (sides.size() != 2) continue;
      const int a = edge.first, b = edge.second;
      const int c = sides[0].second, d = sides[1].second;
      const auto alternative = detail::edge_key(c, d);
      if (!(alternative < edge)) continue;
      const auto t0 = detail::ccw(v, {a, b, c});
      const long double s = detail::incircle(v[t0[0]], v[t0[1]], v[t0[2]], v[d]);
      if (std::abs(s) > detail::kCocircularRelTol *
                            detail::incircle_scale(v[t0[0]], v[t0[1]], v[t0[2]], v[d])) {
        continue;
      }
      // the new diagonal must split the quad into two proper triangles
      if (std::abs(detail::orient2d(v[c], v[d], v[a])) <= kMinTriangleArea ||
          std::abs(detail::orient2d(v[c], v[d], v[b])) <= kMinTriangleArea ||
          (detail::orient2d(v[c], v[d], v[a]) > 0) == (detail::orient2d(v[c], v[d], v[b]) > 0)) {
        continue;
      }
      mesh_tris[sides[0].first] = detail::ccw(v, {c, d, a});
      mesh_tris[sides[1].first] = detail::ccw(v, {c, d, b});
      flipped = true;
      break;
    }
    if (!flipped) break;
  }

  for (auto& t : mesh_tris) {
    // rotate so the smallest index leads, keeping orientation
    const auto m = std::min_element(t.begin(), t.end()) - t.begin();
    std::rotate(t.begin(), t.begin() + m, t.end());
  }
  std::sort(mesh_tris.begin(), mesh_tris.end());

  TriangleMesh mesh;
  mesh.vertices.assign(points.begin(), points.end());
  mesh.triangles = std::move(mesh_tris);
  return mesh;
}

// x' = m[0][0] x + m[0][1] y + m[0][2];  y' = m[1][0] x + m[1][1] y + m[1][2]
struct Affine2 {
  std::array<std::array<double, 3>, 2> m{};

  Point2 apply(const Point2& p) const {
    return {m[0][0] * p.x + m[0][1] * p.y + m[0][2], m[1][0] * p.x + m[1][1] * p.y + m[1][2]};
  }
};

inline double triangle_area(const std::array<Point2, 3>& t) {
  return 0.5 * std::abs(detail::orient2d(t[0], t[1], t[2]));
}

// The affine map taking src[i] to dst[i].
inline Affine2 affine_from_triangles(const std::array<Point2, 3>& src,
                                     const std::array<Point2, 3>& dst) {
  if (triangle_area(src) <= kMinTriangleArea || triangle_area(dst) <= kMinTriangleArea) {
    throw DegenerateGeometryError("affine map needs non-degenerate triangles");
  }
  // Linear part L solves L [u1 u2] = [v1 v2] for edge vectors from vertex 0.
  const double u1x = src[1].x - src[0].x, u1y = src[1].y - src[0].y;
  const double u2x = src[2].x - src[0].x, u2y = src[2].y - src[0].y;
  const double v1x = dst[1].x - dst[0].x, v1y = dst[1].y - dst[0].y;
  const double v2x = dst[2].x - dst[0].x, v2y = dst[2].y - dst[0].y;
  const double det = u1x * u2y - u2x * u1y;
  const double i00 = u2y / det, i01 = -u2x / det;
  const double i10 = -u1y / det, i11 = u1x / det;

  Affine2 a;
  a.m[0][0] = v1x * i00 + v2x * i10;
  a.m[0][1] = v1x * i01 + v2x * i11;
  a.m[1][0] = v1y * i00 + v2y * i10;
  a.m[1][1] = v1y * i01 + v2y * i11;
  a.m[0][2] = dst[0].x - (a.m[0][0] * src[0].x + a.m[0][1] * src[0].y);
  a.m[1][2] = dst[0].y - (a.m[1][0] * src[0].x + a.m[1][1] * src[0].y);
  return a;
}

// Bilinear sample at a real-valued pixel position, clamped to the border.
inline double sample_bilinear(const RasterImage& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

namespace detail {

// Inclusive point-in-triangle test with a small tolerance on the edges.
inline bool covers(const std::array<Point2, 3>& t, const Point2& p) {
  const double area2 = orient2d(t[0], t[1], t[2]);
  const double sign = area2 > 0 ? 1.0 : -1.0;
  const double tol = -1e-9 * std::abs(area2);
  return sign * orient2d(t[0], t[1], p) >= tol && sign * orient2d(t[1], t[2], p) >= tol &&
         sign * orient2d(t[2], t[0], p) >= tol;
}

}  // namespace detail

// Warps `img` so that landmarks `from` move onto `to`. Each destination pixel
// centre inside a mesh triangle is pulled from the source through the inverse
// affine map of that triangle; pixels outside the mesh keep the source value.
inline RasterImage warp_to_mean(const RasterImage& img, const LandmarkSet& from,
                                const LandmarkSet& to, const TriangleMesh& mesh) {
  require(from.size() == to.size(), "landmark sets must have equal length");
  require(mesh.vertices.size() == to.size(), "mesh must be built on the destination landmarks");
  RasterImage out = img;
  for (const auto& tri : mesh.triangles) {
    const std::array<Point2, 3> dst{to.points[tri[0]], to.points[tri[1]], to.points[tri[2]]};
    const std::array<Point2, 3> src{from.points[tri[0]], from.points[tri[1]],
                                    from.points[tri[2]]};
    const Affine2 back = affine_from_triangles(dst, src);

    const double lo_x = std::min({dst[0].x, dst[1].x, dst[2].x});
    const double hi_x = std::max({dst[0].x, dst[1].x, dst[2].x});
    const double lo_y = std::min({dst[0].y, dst[1].y, dst[2].y});
    const double hi_y = std::max({dst[0].y, dst[1].y, dst[2].y});
    const int x0 = std::max(0, static_cast<int>(std::ceil(lo_x - 1e-9)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::floor(hi_x + 1e-9)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(lo_y - 1e-9)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::floor(hi_y + 1e-9)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point2 p{static_cast<double>(x), static_cast<double>(y)};
        if (!detail::covers(dst, p)) continue;
        const Point2 s = back.apply(p);
        for (int c = 0; c < RasterImage::kChannels; ++c) out.set(x, y, c, sample_bilinear(img, s.x, s.y, c));
      }
    }
  }
  return out;
}

inline LandmarkSet blend_landmarks(const LandmarkSet& p, const LandmarkSet& q, double alpha) {
  require(p.size() == q.size(), "landmark sets must have equal length");
  LandmarkSet out;
  out.points.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.points.push_back({(1.0 - alpha) * p.points[i].x + alpha * q.points[i].x,
                          (1.0 - alpha) * p.points[i].y + alpha * q.points[i].y});
  }
  return out;
}

struct MorphResult {
  RasterImage image;
  LandmarkSet landmarks;  // the blended landmark positions
  TriangleMesh mesh;
};

inline MorphResult morph_detailed(const RasterImage& p_img, const LandmarkSet& p_lms,
                                  const RasterImage& q_img, const LandmarkSet& q_lms,
                                  double alpha = 0.5) {
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(p_img.same_shape(q_img), "morph inputs must share image dimensions");
  MorphResult r;
  r.landmarks = blend_landmarks(p_lms, q_lms, alpha);
  r.mesh = delaunay(r.landmarks.points);
  const RasterImage wp = warp_to_mean(p_img, p_lms, r.landmarks, r.mesh);
  const RasterImage wq = warp_to_mean(q_img, q_lms, r.landmarks, r.mesh);
  r.image = RasterImage(p_img.width(), p_img.height());
  for (std::size_t i = 0; i < wp.sample_count(); ++i) {
    r.image.set_sample(i, (1.0 - alpha) * wp.samples()[i] + alpha * wq.samples()[i]);
  }
  return r;
}

inline RasterImage morph(const RasterImage& p_img, const LandmarkSet& p_lms,
                         const RasterImage& q_img, const LandmarkSet& q_lms, double alpha = 0.5) {
  return morph_detailed(p_img, p_lms, q_img, q_lms, alpha).image;
}

}  // namespace mii
