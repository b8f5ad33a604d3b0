#include "oclb/color.hpp"

#include <algorithm>
#include <cmath>

namespace oclb {

Rgb rgb_to_hsv(const Rgb& rgb) {
  const double r = rgb[0], g = rgb[1], b = rgb[2];
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double v = hi;
  if (hi == lo) return {0.0, 0.0, v};
  const double s = (hi - lo) / hi;
  const double rc = (hi - r) / (hi - lo);
  const double gc = (hi - g) / (hi - lo);
  const double bc = (hi - b) / (hi - lo);
  double h;
  if (r == hi) {
    h = bc - gc;
  } else if (g == hi) {
    h = 2.0 + rc - bc;
  } else {
    h = 4.0 + gc - rc;
  }
  h = std::fmod(h / 6.0, 1.0);
  if (h < 0.0) h += 1.0;
  return {h, s, v};
}

Rgb hsv_to_rgb(const Rgb& hsv) {
  const double h = hsv[0], s = hsv[1], v = hsv[2];
  if (s == 0.0) return {v, v, v};
  const double scaled = h * 6.0;
  double sector = std::floor(scaled);
  const double f = scaled - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(sector) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace oclb
