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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pairfuse/error.hpp"
#include "pairfuse/geometry.hpp"

namespace pairfuse {
namespace {

double quad_area(const Quad& q) { return polygon_area(std::span<const Point2>(q.data(), 4)); }

// Inside test for a convex, consistently oriented quad.
bool inside(const Quad& q, Point2 p, double tol) {
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2& a = q[i];
    const Point2& b = q[(i + 1) % 4];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double c = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len;
    if (std::fabs(c) <= tol) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign != 0 && s != sign) return false;
    sign = s;
  }
  return true;
}

std::vector<Point2> random_polygon(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_int_distribution<int> count(3, 12);
  std::vector<Point2> pts(static_cast<std::size_t>(count(rng)));
  for (Point2& p : pts) p = {coord(rng), coord(rng)};
  return pts;
}

TEST(MinAreaRect, AxisAlignedSquareIsItself) {
  const std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Quad r = min_area_rect(sq);
  const Quad want{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(r[i].x, want[i].x, 1e-12);
    EXPECT_NEAR(r[i].y, want[i].y, 1e-12);
  }
}

TEST(MinAreaRect, RotatedSquareKeepsUnitArea) {
  const double h = std::numbers::sqrt2 / 2.0;
  const std::vector<Point2> diamond{{0, -h}, {h, 0}, {0, h}, {-h, 0}};
  const Quad r = min_area_rect(diamond);
  EXPECT_NEAR(quad_area(r), 1.0, 1e-12);
  EXPECT_NEAR(testing::aabb_area(diamond), 2.0, 1e-12);
}

TEST(MinAreaRect, CornersStartTopLeftAndRunClockwise) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const Quad r = min_area_rect(random_polygon(rng));
    for (std::size_t i = 1; i < 4; ++i) EXPECT_LE(r[0].x + r[0].y, r[i].x + r[i].y + 1e-9);
    // Clockwise on screen (y down) means a positive signed area in x-right/y-down coordinates.
    double twice = 0.0;
    for (std::size_t i = 0; i < 4; ++i) twice += r[i].x * r[(i + 1) % 4].y - r[(i + 1) % 4].x * r[i].y;
    EXPECT_GT(twice, 0.0);
  }
}

TEST(MinAreaRect, ContainsVerticesAndBeatsBoundingBox) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<Point2> poly = random_polygon(rng);
    const Quad r = min_area_rect(poly);
    EXPECT_LE(quad_area(r), testing::aabb_area(poly) * (1 + 1e-12) + 1e-9);
    for (const Point2& p : poly) EXPECT_TRUE(inside(r, p, 1e-6));
  }
}

TEST(MinAreaRect, MatchesRotationSweep) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<Point2> poly = testing::random_footprint(rng);
    const double got = quad_area(min_area_rect(poly));
    const double sweep = testing::rotation_sweep_min_area(poly, 0.1);
    EXPECT_LE(got, sweep * (1 + 1e-9));
    EXPECT_NEAR(got, sweep, 0.005 * sweep);
  }
}

// Uniform point clouds include slivers, where a 0.1 degree step is too coarse.
TEST(MinAreaRect, MatchesFineSweepOnPointClouds) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Point2> poly = random_polygon(rng);
    const double got = quad_area(min_area_rect(poly));
    const double sweep = testing::rotation_sweep_min_area(poly, 0.001);
    EXPECT_LE(got, sweep * (1 + 1e-9));
    EXPECT_NEAR(got, sweep, 1e-3 * sweep);
  }
}

TEST(MinAreaRect, DegenerateRejected) {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}};
  try {
    min_area_rect(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_polygon);
  }
}

TEST(ConvexHull, DropsInteriorPoints) {
  const std::vector<Point2> pts{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {2, 2}, {1, 3}};
  EXPECT_EQ(convex_hull(pts).size(), 4u);
  EXPECT_DOUBLE_EQ(polygon_area(convex_hull(pts)), 16.0);
}

TEST(Homography, MapsSourceCornersToDestination) {
  const Quad src{Point2{0, 0}, Point2{10, 0}, Point2{10, 10}, Point2{0, 10}};
  const Quad dst{Point2{3, 1}, Point2{12, 4}, Point2{9, 13}, Point2{1, 8}};
  const Homography h = homography_from_quads(src, dst);
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2 p = apply_homography(h, src[i]);
    EXPECT_NEAR(p.x, dst[i].x, 1e-9);
    EXPECT_NEAR(p.y, dst[i].y, 1e-9);
  }
  const Quad flat{Point2{0, 0}, Point2{1, 0}, Point2{2, 0}, Point2{3, 0}};
  try {
    homography_from_quads(src, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_homography);
  }
}

Image gradient_image(std::size_t w, std::size_t h) {
  Image img(w, h, 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<float>(x) / static_cast<float>(w);
      img.at(x, y, 1) = static_cast<float>(y) / static_cast<float>(h);
      img.at(x, y, 2) = static_cast<float>((x * 7 + y * 13) % 17) / 17.0f;
    }
  }
  return img;
}

TEST(WarpToSquare, AxisAlignedRectOfOutputSizeIsCopy) {
  const Image img = gradient_image(20, 16);
  const Quad rect{Point2{2, 3}, Point2{12, 3}, Point2{12, 13}, Point2{2, 13}};
  const Image crop = warp_to_square(img, rect, 10);
  ASSERT_EQ(crop.width, 10u);
  for (std::size_t y = 0; y < 10; ++y) {
    for (std::size_t x = 0; x < 10; ++x) {
      for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(crop.at(x, y, c), img.at(x + 2, y + 3, c), 1e-6);
    }
  }
}

TEST(WarpToSquare, ConstantImageGivesConstantCrop) {
  const Image img(30, 30, 3, 0.25f);
  const Quad rect{Point2{5, 2}, Point2{20, 7}, Point2{15, 22}, Point2{0, 17}};
  for (std::size_t size : {8u, 16u, 32u}) {
    const Image crop = warp_to_square(img, rect, size);
    ASSERT_EQ(crop.width, size);
    for (float v : crop.pixels) ASSERT_NEAR(v, 0.25f, 1e-6f);
  }
}

TEST(WarpToSquare, GradientStaysMonotoneAlongMappedAxis) {
  const Image img = gradient_image(64, 64);
  const Quad rect{Point2{10, 20}, Point2{40, 10}, Point2{50, 40}, Point2{20, 50}};
  const Image crop = warp_to_square(img, rect, 32);
  const Homography h = homography_from_quads(Quad{Point2{0, 0}, Point2{32, 0}, Point2{32, 32}, Point2{0, 32}}, rect);
  for (std::size_t v = 0; v < 32; v += 5) {
    // The x-gradient increases wherever the mapped source x increases along the row.
    for (std::size_t u = 0; u + 1 < 32; ++u) {
      const Point2 p0 = apply_homography(h, {u + 0.5, v + 0.5});
      const Point2 p1 = apply_homography(h, {u + 1.5, v + 0.5});
      ASSERT_GT(p1.x, p0.x);
      EXPECT_GE(crop.at(u + 1, v, 0), crop.at(u, v, 0) - 0.02f);
    }
    EXPECT_GT(crop.at(31, v, 0), crop.at(0, v, 0));
  }
  // Sample-point oracle: the crop at a point equals the source at its homography image.
  const Image direct = warp_to_square(img, rect, 30);  // native side is 32, so a resize follows
  EXPECT_EQ(direct.width, 30u);
  const Image native = warp_to_square(img, rect, 32);
  for (std::size_t v = 0; v < 32; v += 3) {
    for (std::size_t u = 0; u < 32; u += 3) {
      const Point2 p = apply_homography(h, {u + 0.5, v + 0.5});
      EXPECT_NEAR(native.at(u, v, 0), sample_bilinear(img, p.x, p.y, 0), 1e-6);
    }
  }
}

TEST(WarpToSquare, TooSmallRejected) {
  const Image img(16, 16, 3);
  const Quad rect{Point2{0, 0}, Point2{8, 0}, Point2{8, 8}, Point2{0, 8}};
  EXPECT_THROW(warp_to_square(img, rect, 4), Error);
}

TEST(ResizeBicubic, ConstantAndIdentity) {
  const Image c(9, 7, 3, 0.5f);
  for (float v : resize_bicubic(c, 20, 11).pixels) EXPECT_NEAR(v, 0.5f, 1e-6f);
  const Image g = gradient_image(12, 12);
  EXPECT_EQ(resize_bicubic(g, 12, 12), g);
}

TEST(ExpandQuad, GrowsByMarginFractionPerSide) {
  const Quad q{Point2{0, 0}, Point2{10, 0}, Point2{10, 4}, Point2{0, 4}};
  const Quad e = expand_quad(q, 0.1);
  EXPECT_NEAR(quad_area(e), 12.0 * 4.8, 1e-9);
  EXPECT_EQ(expand_quad(q, 0.0), q);
}

}  // namespace
}  // namespace pairfuse
