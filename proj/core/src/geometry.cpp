// ----------------------------------------------------------------------------
// Copyright 2026 The pairfuse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#include "pairfuse/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "pairfuse/error.hpp"

namespace pairfuse {
namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Clockwise on screen (y down) starting from the top-left-most corner.
Quad order_corners(std::array<Point2, 4> c) {
  double cx = 0.0, cy = 0.0;
  for (const Point2& p : c) {
    cx += p.x / 4.0;
    cy += p.y / 4.0;
  }
  std::sort(c.begin(), c.end(), [&](const Point2& a, const Point2& b) {
    return std::atan2(a.y - cy, a.x - cx) < std::atan2(b.y - cy, b.x - cx);
  });
  std::size_t start = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    const double si = c[i].x + c[i].y;
    const double ss = c[start].x + c[start].y;
    const double tol = 1e-9 * (1.0 + std::abs(ss));
    if (si < ss - tol || (std::abs(si - ss) <= tol && c[i].y < c[start].y)) start = i;
  }
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = c[(start + i) % 4];
  return out;
}

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

}  // namespace

double polygon_area(std::span<const Point2> polygon) {
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2& p = polygon[i];
    const Point2& q = polygon[(i + 1) % polygon.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2.0;
}

std::vector<Point2> convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Quad min_area_rect(std::span<const Point2> polygon) {
  const std::vector<Point2> hull = convex_hull(polygon);
  if (hull.size() < 3 || polygon_area(hull) <= 1e-12) {
    raise(ErrorCode::degenerate_polygon, "polygon has no area");
  }
  double best_area = std::numeric_limits<double>::infinity();
  std::array<Point2, 4> best{};
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& p = hull[i];
    const Point2& q = hull[(i + 1) % hull.size()];
    const double len = std::hypot(q.x - p.x, q.y - p.y);
    const double ux = (q.x - p.x) / len, uy = (q.y - p.y) / len;
    const double vx = -uy, vy = ux;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const Point2& h : hull) {
      const double u = h.x * ux + h.y * uy;
      const double v = h.x * vx + h.y * vy;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      auto corner = [&](double u, double v) { return Point2{u * ux + v * vx, u * uy + v * vy}; };
      best = {corner(umin, vmin), corner(umax, vmin), corner(umax, vmax), corner(umin, vmax)};
    }
  }
  return order_corners(best);
}

Quad expand_quad(const Quad& quad, double margin) {
  if (margin == 0.0) return quad;
  // Corners are TL, TR, BR, BL; expanding along both edge directions.
  const Point2 ex{quad[1].x - quad[0].x, quad[1].y - quad[0].y};
  const Point2 ey{quad[3].x - quad[0].x, quad[3].y - quad[0].y};
  const double sx[4] = {-1, 1, 1, -1};
  const double sy[4] = {-1, -1, 1, 1};
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = Point2{quad[i].x + margin * (sx[i] * ex.x + sy[i] * ey.x),
                    quad[i].y + margin * (sx[i] * ex.y + sy[i] * ey.y)};
  }
  return out;
}

Homography homography_from_quads(const Quad& src, const Quad& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    const double x = src[static_cast<std::size_t>(i)].x, y = src[static_cast<std::size_t>(i)].y;
    const double u = dst[static_cast<std::size_t>(i)].x, v = dst[static_cast<std::size_t>(i)].y;
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    rhs(2 * i) = u;
    rhs(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  lu.setThreshold(1e-12);
  if (!lu.isInvertible() || polygon_area(std::span<const Point2>(src.data(), 4)) < 1e-9 ||
      polygon_area(std::span<const Point2>(dst.data(), 4)) < 1e-9) {
    raise(ErrorCode::singular_homography, "quad corners are degenerate");
  }
  const Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);
  if (!h.allFinite() || (a * h - rhs).norm() > 1e-6 * scale) {
    raise(ErrorCode::singular_homography, "homography solve is ill-conditioned");
  }
  return {h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0};
}

Point2 apply_homography(const Homography& h, Point2 p) {
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

float sample_bilinear(const Image& image, double x, double y, std::size_t channel) {
  // Index space: pixel centres at integers.
  const double fx = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width - 1));
  const double fy = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(fx));
  const auto y0 = static_cast<std::size_t>(std::floor(fy));
  const std::size_t x1 = std::min(x0 + 1, image.width - 1);
  const std::size_t y1 = std::min(y0 + 1, image.height - 1);
  const double tx = fx - static_cast<double>(x0);
  const double ty = fy - static_cast<double>(y0);
  const double top = (1.0 - tx) * image.at(x0, y0, channel) + tx * image.at(x1, y0, channel);
  const double bottom = (1.0 - tx) * image.at(x0, y1, channel) + tx * image.at(x1, y1, channel);
  return static_cast<float>((1.0 - ty) * top + ty * bottom);
}

Image warp_to_square(const Image& image, const Quad& rect, std::size_t out_size) {
  if (image.empty()) raise(ErrorCode::singular_homography, "cannot warp an empty image");
  if (out_size < 8) raise(ErrorCode::invalid_config, "crop size must be at least 8");
  const double top = std::hypot(rect[1].x - rect[0].x, rect[1].y - rect[0].y);
  const double left = std::hypot(rect[3].x - rect[0].x, rect[3].y - rect[0].y);
  const auto side = static_cast<std::size_t>(std::max(1.0, std::round(std::max(top, left))));
  const double s = static_cast<double>(side);
  const Quad square{Point2{0, 0}, Point2{s, 0}, Point2{s, s}, Point2{0, s}};
  const Homography to_source = homography_from_quads(square, rect);

  Image warped(side, side, image.channels);
  for (std::size_t v = 0; v < side; ++v) {
    for (std::size_t u = 0; u < side; ++u) {
      const Point2 src = apply_homography(
          to_source, Point2{static_cast<double>(u) + 0.5, static_cast<double>(v) + 0.5});
      for (std::size_t c = 0; c < image.channels; ++c) {
        warped.at(u, v, c) = sample_bilinear(image, src.x, src.y, c);
      }
    }
  }
  if (side == out_size) return warped;
  return resize_bicubic(warped, out_size, out_size);
}

Image resize_bicubic(const Image& image, std::size_t out_width, std::size_t out_height) {
  if (out_width == image.width && out_height == image.height) return image;
  Image out(out_width, out_height, image.channels);
  const double sx = static_cast<double>(image.width) / static_cast<double>(out_width);
  const double sy = static_cast<double>(image.height) / static_cast<double>(out_height);
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t oy = 0; oy < out_height; ++oy) {
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const auto iy = static_cast<std::ptrdiff_t>(std::floor(fy));
    for (std::size_t ox = 0; ox < out_width; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const auto ix = static_cast<std::ptrdiff_t>(std::floor(fx));
      for (std::size_t c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t m = -1; m <= 2; ++m) {
          const double wy = cubic_weight(fy - static_cast<double>(iy + m));
          const std::size_t yy = clampi(iy + m, image.height);
          for (std::ptrdiff_t n = -1; n <= 2; ++n) {
            const double wx = cubic_weight(fx - static_cast<double>(ix + n));
            acc += wy * wx * image.at(clampi(ix + n, image.width), yy, c);
          }
        }
        out.at(ox, oy, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace pairfuse
