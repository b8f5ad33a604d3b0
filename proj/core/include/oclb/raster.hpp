#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oclb {

/// Binary H x W silhouettes, sampled at pixel centers.
std::vector<std::uint8_t> rasterize_polygon(const std::vector<std::array<double, 2>>& vertices,
                                            std::size_t height, std::size_t width);
std::vector<std::uint8_t> rasterize_disc(double cx, double cy, double radius, std::size_t height,
                                         std::size_t width);

/// Vertices (x, y) of an equilateral triangle with the given circumradius.
std::vector<std::array<double, 2>> equilateral_triangle(double cx, double cy, double circumradius,
                                                        double orientation);

}  // namespace oclb
