#pragma once

#include <array>

namespace oclb {

using Rgb = std::array<double, 3>;

/// Hexcone RGB <-> HSV on [0,1]; hue in [0,1).
Rgb rgb_to_hsv(const Rgb& rgb);
Rgb hsv_to_rgb(const Rgb& hsv);

/// ITU-R 601 luma.
inline double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

}  // namespace oclb
