#include "oclb/shifts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oclb/parallel.hpp"
#include "oclb/raster.hpp"

namespace oclb {

const char* shift_kind_name(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::Occlusion: return "occlusion";
    case ShiftKind::Crop: return "crop";
    case ShiftKind::ObjectColor: return "object_color";
    case ShiftKind::ObjectShape: return "object_shape";
  }
  return "?";
}

ShiftKind shift_kind_from_name(const std::string& name) {
  if (name == "occlusion") return ShiftKind::Occlusion;
  if (name == "crop") return ShiftKind::Crop;
  if (name == "object_color") return ShiftKind::ObjectColor;
  if (name == "object_shape") return ShiftKind::ObjectShape;
  throw ConfigError("unknown shift kind '" + name + "'");
}

ShiftSpec make_shift_spec(ShiftKind kind, const std::string& preset, std::uint64_t seed) {
  ShiftSpec s;
  s.kind = kind;
  s.seed = seed;
  s.preset = preset;
  s.occluder_color = preset == "clevr" ? Rgb{0.2, 0.2, 0.2} : Rgb{0.5, 0.5, 0.5};
  return s;
}

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Occlusion

ShiftOutcome occlude(const Scene& scene, const ShiftSpec& spec, std::size_t background_count,
                     Rng& rng) {
  const std::size_t h = scene.height, w = scene.width, hw = scene.pixels();
  if (!(spec.occluder_fraction > 0.0 && spec.occluder_fraction <= 1.0)) {
    throw ConfigError("occluder does not fit inside the image");
  }
  const auto sh = static_cast<std::size_t>(std::floor(spec.occluder_fraction * static_cast<double>(h)));
  const auto sw = static_cast<std::size_t>(std::floor(spec.occluder_fraction * static_cast<double>(w)));
  if (sh > h || sw > w) throw ConfigError("occluder does not fit inside the image");
  if (background_count == 0 || scene.num_objects() == 0) {
    throw ShiftError("occlusion needs a background mask to absorb the occluder");
  }
  if (spec.occlusion_candidates == 0) throw ConfigError("occlusion needs at least one candidate");

  const auto labels = scene.labels();
  OcclusionLog log;
  log.size_h = sh;
  log.size_w = sw;
  for (std::size_t c = 0; c < spec.occlusion_candidates; ++c) {
    const auto top = std::uniform_int_distribution<std::size_t>(0, h - sh)(rng);
    const auto left = std::uniform_int_distribution<std::size_t>(0, w - sw)(rng);
    std::size_t overlap = 0;
    for (std::size_t y = top; y < top + sh; ++y) {
      for (std::size_t x = left; x < left + sw; ++x) {
        if (labels[y * w + x] >= static_cast<int>(background_count)) ++overlap;
      }
    }
    log.candidates.push_back({top, left});
    log.foreground_overlap.push_back(overlap);
  }
  log.chosen = static_cast<std::size_t>(
      std::min_element(log.foreground_overlap.begin(), log.foreground_overlap.end()) -
      log.foreground_overlap.begin());

  ShiftOutcome out{scene, false, std::nullopt, log, std::nullopt};
  auto& s = out.scene;
  const auto [top, left] = log.candidates[log.chosen];
  for (std::size_t y = top; y < top + sh; ++y) {
    for (std::size_t x = left; x < left + sw; ++x) {
      const std::size_t p = y * w + x;
      for (std::size_t c = 0; c < s.channels; ++c) {
        s.image[p * s.channels + c] = static_cast<float>(spec.occluder_color[std::min<std::size_t>(c, 2)]);
      }
      for (std::size_t m = 0; m < s.num_objects(); ++m) s.masks.data[m * hw + p] = 0;
      s.masks.data[p] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Crop

std::vector<float> resize_bilinear(const std::vector<float>& src, std::size_t src_h,
                                   std::size_t src_w, std::size_t channels, std::size_t dst_h,
                                   std::size_t dst_w) {
  std::vector<float> out(dst_h * dst_w * channels);
  const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
  const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
  for (std::size_t y = 0; y < dst_h; ++y) {
    const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
    const auto y0 = std::min(static_cast<std::size_t>(fy), src_h - 1);
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
      const auto x0 = std::min(static_cast<std::size_t>(fx), src_w - 1);
      const std::size_t x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(src[(yy * src_w + xx) * channels + c]);
        };
        const double top = at(y0, x0) * (1.0 - wx) + at(y0, x1) * wx;
        const double bottom = at(y1, x0) * (1.0 - wx) + at(y1, x1) * wx;
        out[(y * dst_w + x) * channels + c] = clamp01(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

ShiftOutcome crop_zoom(const Scene& scene, const ShiftSpec& spec) {
  const std::size_t h = scene.height, w = scene.width, ch = scene.channels;
  if (h < 3 || w < 3) throw ConfigError("crop needs images of at least 3x3");
  const auto crop_h = static_cast<std::size_t>(std::floor(spec.crop_fraction * static_cast<double>(h)));
  const auto crop_w = static_cast<std::size_t>(std::floor(spec.crop_fraction * static_cast<double>(w)));
  if (crop_h == 0 || crop_w == 0 || crop_h > h || crop_w > w) {
    throw ConfigError("crop fraction must leave a non-empty region inside the image");
  }
  const std::size_t top = (h - crop_h) / 2, left = (w - crop_w) / 2;

  std::vector<float> cropped(crop_h * crop_w * ch);
  for (std::size_t y = 0; y < crop_h; ++y) {
    for (std::size_t x = 0; x < crop_w; ++x) {
      for (std::size_t c = 0; c < ch; ++c) {
        cropped[(y * crop_w + x) * ch + c] = scene.image[((y + top) * w + x + left) * ch + c];
      }
    }
  }
  ShiftOutcome out{scene, false, std::nullopt, std::nullopt, std::nullopt};
  auto& s = out.scene;
  s.image = resize_bilinear(cropped, crop_h, crop_w, ch, h, w);

  const auto labels = scene.labels();
  std::fill(s.masks.data.begin(), s.masks.data.end(), std::uint8_t{0});
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = std::min(y * crop_h / h, crop_h - 1) + top;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = std::min(x * crop_w / w, crop_w - 1) + left;
      const int label = labels[sy * w + sx];
      s.masks.data[static_cast<std::size_t>(label) * h * w + y * w + x] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Object color

Scene apply_color_jitter(const Scene& scene, std::size_t object, const ColorJitterFactors& f) {
  if (scene.channels != 3) throw ShiftError("color jitter needs RGB images");
  if (object >= scene.num_objects()) throw ShiftError("color jitter object out of range");
  Scene s = scene;
  const std::size_t hw = s.pixels();
  const auto mask = s.masks.slice(object);
  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < hw; ++p) {
    if (mask[p]) pixels.push_back(p);
  }
  if (pixels.empty()) return s;
  auto px = [&](std::size_t p) {
    return Rgb{s.image[p * 3], s.image[p * 3 + 1], s.image[p * 3 + 2]};
  };
  auto store = [&](std::size_t p, const Rgb& c) {
    for (std::size_t k = 0; k < 3; ++k) s.image[p * 3 + k] = clamp01(c[k]);
  };

  if (f.brightness != 1.0) {
    for (auto p : pixels) {
      auto c = px(p);
      for (auto& v : c) v *= f.brightness;
      store(p, c);
    }
  }
  if (f.contrast != 1.0) {
    double mean = 0.0;
    for (auto p : pixels) mean += luma(px(p));
    mean /= static_cast<double>(pixels.size());
    for (auto p : pixels) {
      auto c = px(p);
      for (auto& v : c) v = mean + f.contrast * (v - mean);
      store(p, c);
    }
  }
  if (f.saturation != 1.0) {
    for (auto p : pixels) {
      auto c = px(p);
      const double l = luma(c);
      for (auto& v : c) v = l + f.saturation * (v - l);
      store(p, c);
    }
  }
  if (f.hue != 0.0) {
    for (auto p : pixels) {
      auto hsv = rgb_to_hsv(px(p));
      hsv[0] = std::fmod(hsv[0] + f.hue, 1.0);
      if (hsv[0] < 0.0) hsv[0] += 1.0;
      store(p, hsv_to_rgb(hsv));
    }
  }
  return s;
}

ShiftOutcome jitter_object_color(const Scene& scene, const ShiftSpec& spec,
                                 std::size_t background_count, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (std::size_t m = background_count; m < scene.num_objects(); ++m) {
    if (scene.mask_area(m) > 0) candidates.push_back(m);
  }
  if (candidates.empty()) throw ShiftError("object color shift needs a visible foreground object");
  const auto pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
  ColorJitterFactors f;
  f.brightness = uniform(rng, 1.0 - spec.jitter_brightness, 1.0 + spec.jitter_brightness);
  f.contrast = uniform(rng, 1.0 - spec.jitter_contrast, 1.0 + spec.jitter_contrast);
  f.saturation = uniform(rng, 1.0 - spec.jitter_saturation, 1.0 + spec.jitter_saturation);
  f.hue = uniform(rng, -spec.jitter_hue, spec.jitter_hue);
  const std::size_t object = candidates[pick];
  ShiftOutcome out{apply_color_jitter(scene, object, f), false, object, std::nullopt, f};
  out.scene.ood_flags[object] = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Object shape

Scene insert_shape(const Scene& scene, const PropertySchema& schema,
                   std::size_t background_count, const InsertedShape& shape) {
  const std::size_t hw = scene.pixels(), m = scene.num_objects();
  if (shape.silhouette.size() != hw) throw ShapeError("silhouette size differs from the image");
  if (shape.depth < 1) throw ConfigError("insertion depth starts at 1");
  if (background_count > m) throw ShiftError("scene has fewer masks than background objects");
  const std::size_t foreground = m - background_count;
  const std::size_t slot = background_count + std::min(shape.depth - 1, foreground);
  const auto labels = scene.labels();

  Scene s;
  s.height = scene.height;
  s.width = scene.width;
  s.channels = scene.channels;
  s.image = scene.image;
  s.masks = Tensor<std::uint8_t>({m + 1, s.height, s.width});
  for (std::size_t p = 0; p < hw; ++p) {
    const auto old = static_cast<std::size_t>(labels[p]);
    const bool above = old >= slot;
    std::size_t label;
    if (!above && shape.silhouette[p]) {
      label = slot;
      for (std::size_t c = 0; c < s.channels; ++c) {
        s.image[p * s.channels + c] = static_cast<float>(shape.color[std::min<std::size_t>(c, 2)]);
      }
    } else {
      label = above ? old + 1 : old;
    }
    s.masks.data[label * hw + p] = 1;
  }

  for (std::size_t e = 0; e < schema.size(); ++e) {
    const auto& entry = schema[e];
    const std::size_t width = entry.width();
    Tensor<float> rows({m + 1, width});
    const auto& src = scene.properties[e];
    for (std::size_t o = 0; o <= m; ++o) {
      if (o == slot) continue;
      const std::size_t from = o < slot ? o : o - 1;
      std::copy(src.data.begin() + static_cast<std::ptrdiff_t>(from * width),
                src.data.begin() + static_cast<std::ptrdiff_t>((from + 1) * width),
                rows.data.begin() + static_cast<std::ptrdiff_t>(o * width));
    }
    float* row = rows.data.data() + slot * width;
    if (!entry.categorical()) {
      if (entry.name == "color" && width == 3) {
        for (std::size_t k = 0; k < 3; ++k) row[k] = static_cast<float>(shape.color[k]);
      } else if (entry.name == "scale" && width == 1) {
        row[0] = static_cast<float>(shape.scale);
      } else if (entry.name == "x" && width == 1) {
        row[0] = static_cast<float>(shape.x);
      } else if (entry.name == "y" && width == 1) {
        row[0] = static_cast<float>(shape.y);
      }
    }
    s.properties.push_back(std::move(rows));
  }
  s.ood_flags.assign(m + 1, 0);
  for (std::size_t o = 0; o <= m; ++o) {
    if (o == slot) continue;
    s.ood_flags[o] = scene.ood_flags[o < slot ? o : o - 1];
  }
  s.ood_flags[slot] = 1;
  return s;
}

ShiftOutcome insert_triangle(const Scene& scene, const ShiftSpec& spec,
                             const PropertySchema& schema, std::size_t background_count,
                             Rng& rng) {
  const std::size_t foreground =
      scene.num_objects() > background_count ? scene.num_objects() - background_count : 0;
  if (foreground > spec.shape_max_foreground) {
    return ShiftOutcome{scene, true, std::nullopt, std::nullopt, std::nullopt};
  }
  const double h = static_cast<double>(scene.height), w = static_cast<double>(scene.width);
  InsertedShape shape;
  shape.color = hsv_to_rgb({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)});
  const std::size_t steps = std::max<std::size_t>(spec.shape_scale_steps, 1);
  const auto step = std::uniform_int_distribution<std::size_t>(0, steps - 1)(rng);
  shape.scale = steps == 1 ? spec.shape_scale_max
                           : spec.shape_scale_min + (spec.shape_scale_max - spec.shape_scale_min) *
                                                        static_cast<double>(step) /
                                                        static_cast<double>(steps - 1);
  const double orientation = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double radius = shape.scale * 0.5 * std::min(h, w);
  // Vertex offsets decide how far the center may move while staying inside.
  const auto offsets = equilateral_triangle(0.0, 0.0, radius, orientation);
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (const auto& v : offsets) {
    min_x = std::min(min_x, v[0]);
    max_x = std::max(max_x, v[0]);
    min_y = std::min(min_y, v[1]);
    max_y = std::max(max_y, v[1]);
  }
  const double lo_x = -min_x, hi_x = std::max(lo_x, w - max_x);
  const double lo_y = -min_y, hi_y = std::max(lo_y, h - max_y);
  const double cx = lo_x == hi_x ? lo_x : uniform(rng, lo_x, hi_x);
  const double cy = lo_y == hi_y ? lo_y : uniform(rng, lo_y, hi_y);
  shape.depth = std::uniform_int_distribution<std::size_t>(1, spec.shape_max_depth)(rng);
  shape.x = cx / w;
  shape.y = cy / h;
  shape.silhouette = rasterize_polygon(equilateral_triangle(cx, cy, radius, orientation),
                                       scene.height, scene.width);
  auto inserted = insert_shape(scene, schema, background_count, shape);
  const std::size_t slot = background_count + std::min(shape.depth - 1, foreground);
  return ShiftOutcome{std::move(inserted), false, slot, std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------
// Dataset level

ShiftResult apply_shift(const SceneBatch& batch, const ShiftSpec& spec) {
  const std::size_t n = batch.size();
  std::vector<ShiftOutcome> outcomes(n);
  const auto stream = static_cast<std::uint64_t>(spec.kind) + 1;
  parallel_for(n, [&](std::size_t i) {
    auto rng = make_rng(spec.seed, i, stream);
    const Scene scene = batch.scene(i);
    switch (spec.kind) {
      case ShiftKind::Occlusion:
        outcomes[i] = occlude(scene, spec, batch.background_count, rng);
        break;
      case ShiftKind::Crop: outcomes[i] = crop_zoom(scene, spec); break;
      case ShiftKind::ObjectColor:
        outcomes[i] = jitter_object_color(scene, spec, batch.background_count, rng);
        break;
      case ShiftKind::ObjectShape:
        outcomes[i] = insert_triangle(scene, spec, batch.schema, batch.background_count, rng);
        break;
    }
  });

  ShiftResult result;
  std::vector<Scene> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (outcomes[i].skipped) {
      result.skipped.push_back(i);
      continue;
    }
    result.source_index.push_back(i);
    result.occlusion_logs.push_back(outcomes[i].occlusion);
    kept.push_back(std::move(outcomes[i].scene));
  }
  const std::size_t h = batch.images.shape.size() == 4 ? batch.height() : 0;
  const std::size_t w = batch.images.shape.size() == 4 ? batch.width() : 0;
  const std::size_t c = batch.images.shape.size() == 4 ? batch.channels() : 0;
  result.batch = assemble_batch(batch.schema, kept, batch.background_count, h, w, c,
                                batch.max_objects());

  std::vector<std::string> excluded = batch.excluded_properties;
  for (const auto& name : batch.schema.excluded_for_shift(shift_kind_name(spec.kind))) {
    if (std::find(excluded.begin(), excluded.end(), name) == excluded.end()) excluded.push_back(name);
  }
  std::sort(excluded.begin(), excluded.end());
  result.batch.excluded_properties = excluded;
  result.metadata.kind = shift_kind_name(spec.kind);
  result.metadata.excluded_properties = excluded;
  for (std::size_t i = 0; i < result.batch.size(); ++i) {
    std::int64_t idx = -1;
    const auto flags = result.batch.ood_flags.slice(i);
    for (std::size_t o = 0; o < flags.size(); ++o) {
      if (flags[o]) {
        idx = static_cast<std::int64_t>(o);
        break;
      }
    }
    result.metadata.ood_object_index.push_back(idx);
  }
  return result;
}

}  // namespace oclb
