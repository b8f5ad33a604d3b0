#include "oclb/raster.hpp"

#include <cmath>
#include <numbers>

namespace oclb {

std::vector<std::uint8_t> rasterize_polygon(const std::vector<std::array<double, 2>>& v,
                                            std::size_t height, std::size_t width) {
  std::vector<std::uint8_t> out(height * width, 0);
  const std::size_t n = v.size();
  if (n < 3) return out;
  // Signed area fixes the winding so one edge-function sign test works for both.
  double area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % n];
    area += a[0] * b[1] - b[0] * a[1];
  }
  const double sign = area >= 0.0 ? 1.0 : -1.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      bool inside = true;
      for (std::size_t i = 0; i < n && inside; ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % n];
        const double edge = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
        inside = sign * edge >= 0.0;
      }
      out[y * width + x] = inside ? 1 : 0;
    }
  }
  return out;
}

std::vector<std::uint8_t> rasterize_disc(double cx, double cy, double radius, std::size_t height,
                                         std::size_t width) {
  std::vector<std::uint8_t> out(height * width, 0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
      out[y * width + x] = dx * dx + dy * dy <= radius * radius ? 1 : 0;
    }
  }
  return out;
}

std::vector<std::array<double, 2>> equilateral_triangle(double cx, double cy, double r,
                                                        double orientation) {
  std::vector<std::array<double, 2>> v;
  for (int k = 0; k < 3; ++k) {
    const double a = orientation + 2.0 * std::numbers::pi * k / 3.0;
    v.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return v;
}

}  // namespace oclb
