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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pairfuse/image.hpp"

namespace pairfuse {

/// Continuous pixel coordinates: the image covers [0, W] x [0, H] and pixel
/// (i, j) has its centre at (j + 0.5, i + 0.5). y grows downwards.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Quad = std::array<Point2, 4>;

double polygon_area(std::span<const Point2> polygon);

/// Convex hull (counter-clockwise in y-up terms, no collinear points).
std::vector<Point2> convex_hull(std::span<const Point2> points);

/// Smallest-area enclosing rectangle via rotating calipers over the hull.
/// Corners start at the top-left-most one (smallest x + y, then smallest y)
/// and run clockwise on screen. Throws degenerate_polygon.
Quad min_area_rect(std::span<const Point2> polygon);

/// Grows a rectangle about its centre by `margin` times each side length on
/// every side.
Quad expand_quad(const Quad& quad, double margin);

using Homography = std::array<double, 9>;  // row-major 3x3

/// Homography taking src[i] to dst[i]. Throws singular_homography.
Homography homography_from_quads(const Quad& src, const Quad& dst);
Point2 apply_homography(const Homography& h, Point2 p);

/// Bilinear sample at continuous coordinates with edge replication.
float sample_bilinear(const Image& image, double x, double y, std::size_t channel);

/// Maps the quad (TL, TR, BR, BL) onto a square: bilinear perspective warp at
/// the quad's native side length, then bicubic resize to out_size.
Image warp_to_square(const Image& image, const Quad& rect_corners, std::size_t out_size);

/// Bicubic (Keys, a = -0.5) resize with edge replication.
Image resize_bicubic(const Image& image, std::size_t out_width, std::size_t out_height);

}  // namespace pairfuse
