#include "oclb/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include <Eigen/QR>

#include "oclb/color.hpp"
#include "oclb/linalg.hpp"
#include "oclb/parallel.hpp"
#include "oclb/raster.hpp"
#include "oclb/rng.hpp"

namespace oclb {

namespace {

constexpr std::uint64_t kSceneStream = 11;
constexpr std::uint64_t kEmbeddingStream = 12;
constexpr std::uint64_t kEncodeStream = 13;

}  // namespace

void validate_synth_config(const SynthConfig& c) {
  if (c.height == 0 || c.width == 0) throw ConfigError("image size must be positive");
  if (c.min_objects > c.max_objects) throw ConfigError("min_objects exceeds max_objects");
  if (c.shapes.empty()) throw ConfigError("shape set is empty");
  if (c.scale_steps == 0) throw ConfigError("scale_steps must be positive");
  if (!(c.scale_min > 0.0) || c.scale_min > c.scale_max) throw ConfigError("invalid scale range");
  if (!(c.size_factor > 0.0) || c.scale_max * c.size_factor > 0.5) {
    throw ConfigError("objects must fit inside the image");
  }
}

SceneBatch generate_scenes(const SynthConfig& config) {
  validate_synth_config(config);
  const auto schema = schema_preset("synthetic");
  const std::size_t h = config.height, w = config.width, hw = h * w;
  std::vector<Scene> scenes(config.num_scenes);

  parallel_for(config.num_scenes, [&](std::size_t i) {
    auto rng = make_rng(config.seed, i, kSceneStream);
    const auto count =
        std::uniform_int_distribution<std::size_t>(config.min_objects, config.max_objects)(rng);
    const double gray = uniform(rng, 0.0, 1.0);

    Scene s;
    s.height = h;
    s.width = w;
    s.channels = 3;
    s.image.assign(hw * 3, static_cast<float>(gray));
    std::vector<int> labels(hw, 0);
    const std::size_t m = count + 1;
    for (const auto& e : schema.entries()) s.properties.emplace_back(Shape{m, e.width()});
    s.ood_flags.assign(m, 0);

    for (std::size_t o = 1; o <= count; ++o) {
      const auto shape =
          config.shapes[std::uniform_int_distribution<std::size_t>(0, config.shapes.size() - 1)(rng)];
      const auto step = std::uniform_int_distribution<std::size_t>(0, config.scale_steps - 1)(rng);
      const double scale =
          config.scale_steps == 1
              ? config.scale_max
              : config.scale_min + (config.scale_max - config.scale_min) *
                                       static_cast<double>(step) /
                                       static_cast<double>(config.scale_steps - 1);
      const Rgb color =
          hsv_to_rgb({uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)});
      const double r = scale * config.size_factor * static_cast<double>(std::min(h, w));
      const double cx = uniform(rng, r, static_cast<double>(w) - r);
      const double cy = uniform(rng, r, static_cast<double>(h) - r);

      std::vector<std::uint8_t> silhouette;
      switch (shape) {
        case SynthShape::Square:
          silhouette = rasterize_polygon(
              {{cx - r, cy - r}, {cx + r, cy - r}, {cx + r, cy + r}, {cx - r, cy + r}}, h, w);
          break;
        case SynthShape::Circle: silhouette = rasterize_disc(cx, cy, r, h, w); break;
        case SynthShape::Triangle:
          silhouette = rasterize_polygon(
              equilateral_triangle(cx, cy, r, -std::numbers::pi / 2.0), h, w);
          break;
      }
      for (std::size_t p = 0; p < hw; ++p) {
        if (!silhouette[p]) continue;
        labels[p] = static_cast<int>(o);
        for (std::size_t c = 0; c < 3; ++c) s.image[p * 3 + c] = static_cast<float>(color[c]);
      }
      // color(3), shape(3), scale, x, y
      for (std::size_t c = 0; c < 3; ++c) s.properties[0].data[o * 3 + c] = static_cast<float>(color[c]);
      s.properties[1].data[o * 3 + static_cast<std::size_t>(shape)] = 1.0f;
      s.properties[2].data[o] = static_cast<float>(scale);
      s.properties[3].data[o] = static_cast<float>(cx / static_cast<double>(w));
      s.properties[4].data[o] = static_cast<float>(cy / static_cast<double>(h));
    }
    s.masks = Tensor<std::uint8_t>({m, h, w});
    for (std::size_t p = 0; p < hw; ++p) s.masks.data[static_cast<std::size_t>(labels[p]) * hw + p] = 1;
    scenes[i] = std::move(s);
  });
  return assemble_batch(schema, scenes, 1, h, w, 3, config.max_objects + 1);
}

namespace {

void box_blur(std::vector<double>& plane, std::size_t h, std::size_t w, std::size_t radius) {
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);
  std::vector<double> tmp(plane.size());
  for (std::ptrdiff_t y = 0; y < hh; ++y) {
    for (std::ptrdiff_t x = 0; x < ww; ++x) {
      double sum = 0.0;
      std::ptrdiff_t n = 0;
      for (auto xx = std::max<std::ptrdiff_t>(0, x - r); xx <= std::min(ww - 1, x + r); ++xx, ++n) {
        sum += plane[static_cast<std::size_t>(y * ww + xx)];
      }
      tmp[static_cast<std::size_t>(y * ww + x)] = sum / static_cast<double>(n);
    }
  }
  for (std::ptrdiff_t y = 0; y < hh; ++y) {
    for (std::ptrdiff_t x = 0; x < ww; ++x) {
      double sum = 0.0;
      std::ptrdiff_t n = 0;
      for (auto yy = std::max<std::ptrdiff_t>(0, y - r); yy <= std::min(hh - 1, y + r); ++yy, ++n) {
        sum += tmp[static_cast<std::size_t>(yy * ww + x)];
      }
      plane[static_cast<std::size_t>(y * ww + x)] = sum / static_cast<double>(n);
    }
  }
}

}  // namespace

MockEncoding mock_encode(const SceneBatch& scenes, const MockEncoderConfig& config) {
  const std::size_t n = scenes.size(), k = config.num_slots, d = config.latent_width;
  const std::size_t p_width = scenes.schema.total_width();
  if (k == 0) throw ConfigError("mock encoder needs at least one slot");
  if (n > 0 && scenes.max_objects() > k) {
    // Only scenes that actually hold more objects than slots are rejected.
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(scenes.num_objects[i]) > k) {
        throw ConfigError("scene " + std::to_string(i) + " has more objects than slots");
      }
    }
  }
  if (d < p_width) throw ConfigError("latent_width must be at least the target width");
  if (config.noise < 0.0 || config.mask_noise < 0.0) throw ConfigError("noise must be non-negative");
  for (auto s : config.slot_corruption) {
    if (s >= k) throw ConfigError("corrupted slot index out of range");
  }

  // Embedding with orthonormal columns, so targets are recovered by its transpose.
  auto erng = make_rng(config.seed, 0, kEmbeddingStream);
  RowMatrix gauss(d, std::max<std::size_t>(p_width, 1));
  for (Eigen::Index r = 0; r < gauss.rows(); ++r) {
    for (Eigen::Index c = 0; c < gauss.cols(); ++c) gauss(r, c) = normal(erng);
  }
  const Eigen::HouseholderQR<RowMatrix> qr(gauss);
  const RowMatrix embedding =
      (qr.householderQ() * RowMatrix::Identity(static_cast<Eigen::Index>(d), gauss.cols()))
          .leftCols(static_cast<Eigen::Index>(p_width));
  Vector empty_code(static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < empty_code.size(); ++r) empty_code(r) = normal(erng);

  const std::size_t h = n > 0 ? scenes.height() : 0, w = n > 0 ? scenes.width() : 0, hw = h * w;
  MockEncoding out;
  out.slot_of_object.resize(n);
  out.corrupted_objects.resize(n);
  Tensor<float> slots({n, k, d});
  Tensor<float> masks({n, k, h, w});

  parallel_for(n, [&](std::size_t i) {
    auto rng = make_rng(config.seed, i, kEncodeStream);
    const auto m = static_cast<std::size_t>(scenes.num_objects[i]);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (config.permute_slots) {
      for (std::size_t j = k; j > 1; --j) std::swap(perm[j - 1], perm[rng() % j]);
    }
    std::vector<std::size_t> corrupted;
    if (config.corrupt_objects_per_scene > 0) {
      auto visible = scenes.visible_foreground(i);
      const std::size_t take = std::min(config.corrupt_objects_per_scene, visible.size());
      for (std::size_t j = 0; j < take; ++j) {
        std::swap(visible[j], visible[j + rng() % (visible.size() - j)]);
      }
      corrupted.assign(visible.begin(), visible.begin() + static_cast<std::ptrdiff_t>(take));
      std::sort(corrupted.begin(), corrupted.end());
    }
    std::vector<bool> noisy(k, false);
    for (auto s : config.slot_corruption) noisy[s] = true;
    for (auto o : corrupted) noisy[perm[o]] = true;

    auto scene_slots = slots.slice(i);
    std::vector<bool> used(k, false);
    for (std::size_t o = 0; o < m; ++o) {
      const auto t = scenes.target(i, o);
      const Eigen::Map<const Vector> target(t.data(), static_cast<Eigen::Index>(t.size()));
      const Vector z = embedding * target;
      const std::size_t slot = perm[o];
      used[slot] = true;
      for (std::size_t c = 0; c < d; ++c) scene_slots[slot * d + c] = static_cast<float>(z(static_cast<Eigen::Index>(c)));
    }
    for (std::size_t slot = 0; slot < k; ++slot) {
      if (!used[slot]) {
        for (std::size_t c = 0; c < d; ++c) scene_slots[slot * d + c] = static_cast<float>(empty_code(static_cast<Eigen::Index>(c)));
      }
    }
    for (std::size_t slot = 0; slot < k; ++slot) {
      for (std::size_t c = 0; c < d; ++c) {
        auto& v = scene_slots[slot * d + c];
        if (noisy[slot]) {
          v = static_cast<float>(config.corruption_scale * normal(rng));
        } else if (config.noise > 0.0) {
          v = static_cast<float>(v + config.noise * normal(rng));
        }
      }
    }

    // Masks routed through the same permutation.
    std::vector<std::vector<double>> planes(k, std::vector<double>(hw, 0.0));
    const auto gt = scenes.gt_masks.slice(i);
    for (std::size_t o = 0; o < m; ++o) {
      for (std::size_t p = 0; p < hw; ++p) planes[perm[o]][p] = gt[o * hw + p];
    }
    if (config.blur_radius > 0) {
      for (auto& plane : planes) box_blur(plane, h, w, config.blur_radius);
    }
    if (config.mask_noise > 0.0) {
      std::vector<double> logits(k);
      for (std::size_t p = 0; p < hw; ++p) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < k; ++s) {
          logits[s] = 4.0 * planes[s][p] + config.mask_noise * normal(rng);
          top = std::max(top, logits[s]);
        }
        double sum = 0.0;
        for (std::size_t s = 0; s < k; ++s) sum += (logits[s] = std::exp(logits[s] - top));
        for (std::size_t s = 0; s < k; ++s) planes[s][p] = logits[s] / sum;
      }
    } else {
      for (std::size_t p = 0; p < hw; ++p) {
        double sum = 0.0;
        for (std::size_t s = 0; s < k; ++s) sum += planes[s][p];
        for (std::size_t s = 0; s < k; ++s) planes[s][p] = sum > 0.0 ? planes[s][p] / sum : 1.0 / static_cast<double>(k);
      }
    }
    auto scene_masks = masks.slice(i);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t p = 0; p < hw; ++p) scene_masks[s * hw + p] = static_cast<float>(planes[s][p]);
    }

    std::vector<std::size_t> slot_of(m);
    for (std::size_t o = 0; o < m; ++o) slot_of[o] = perm[o];
    out.slot_of_object[i] = std::move(slot_of);
    out.corrupted_objects[i] = std::move(corrupted);
  });

  if (config.distributed) {
    out.slots.slots = Tensor<float>({n, 1, k * d}, std::move(slots.data));
    out.slots.pred_masks = Tensor<float>({n, 1, h, w}, 1.0f);
    out.slots.distributed = true;
    out.slots.virtual_slots = k;
  } else {
    out.slots.slots = std::move(slots);
    out.slots.pred_masks = std::move(masks);
  }
  return out;
}

void flag_corrupted_objects(SceneBatch& scenes, const MockEncoding& encoding) {
  if (encoding.corrupted_objects.size() != scenes.size()) {
    throw ShapeError("encoding and scene batch differ in size");
  }
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    auto flags = scenes.ood_flags.slice(i);
    for (auto o : encoding.corrupted_objects[i]) flags[o] = 1;
  }
}

}  // namespace oclb
