#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oclb/color.hpp"
#include "oclb/rng.hpp"
#include "oclb/scene_data.hpp"

namespace oclb {

enum class ShiftKind { Occlusion, Crop, ObjectColor, ObjectShape };

const char* shift_kind_name(ShiftKind kind);
ShiftKind shift_kind_from_name(const std::string& name);

struct ShiftSpec {
  ShiftKind kind = ShiftKind::Occlusion;
  std::uint64_t seed = 0;
  /// Dataset preset; "clevr" selects the darker occluder.
  std::string preset = "default";

  Rgb occluder_color{0.5, 0.5, 0.5};
  double occluder_fraction = 0.4;
  std::size_t occlusion_candidates = 5;

  double crop_fraction = 2.0 / 3.0;

  double jitter_brightness = 0.5;
  double jitter_contrast = 0.5;
  double jitter_saturation = 0.5;
  double jitter_hue = 0.5;

  std::size_t shape_max_foreground = 4;
  std::size_t shape_max_depth = 5;
  double shape_scale_min = 0.5;
  double shape_scale_max = 1.0;
  std::size_t shape_scale_steps = 6;
};

/// Spec with preset-dependent defaults filled in.
ShiftSpec make_shift_spec(ShiftKind kind, const std::string& preset, std::uint64_t seed);

struct OcclusionLog {
  std::vector<std::array<std::size_t, 2>> candidates;  // (top, left)
  std::vector<std::size_t> foreground_overlap;
  std::size_t chosen = 0;
  std::size_t size_h = 0, size_w = 0;
};

struct ColorJitterFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
};

struct ShiftOutcome {
  Scene scene;
  bool skipped = false;
  std::optional<std::size_t> ood_object;
  std::optional<OcclusionLog> occlusion;
  std::optional<ColorJitterFactors> jitter;
};

/// Paints the candidate square with the least foreground overlap; its pixels
/// move to the lowest-index background mask.
ShiftOutcome occlude(const Scene& scene, const ShiftSpec& spec, std::size_t background_count,
                     Rng& rng);

/// Center crop to floor(f*H) x floor(f*W), bilinear (half-pixel centers) back
/// to H x W for the image and nearest neighbor for masks.
ShiftOutcome crop_zoom(const Scene& scene, const ShiftSpec& spec);

/// Bilinear resize with half-pixel centers, clamped at the borders. Exposed for tests.
std::vector<float> resize_bilinear(const std::vector<float>& src, std::size_t src_h,
                                   std::size_t src_w, std::size_t channels, std::size_t dst_h,
                                   std::size_t dst_w);

/// Brightness, contrast, saturation and hue in that order on one object's pixels.
Scene apply_color_jitter(const Scene& scene, std::size_t object, const ColorJitterFactors& f);

ShiftOutcome jitter_object_color(const Scene& scene, const ShiftSpec& spec,
                                 std::size_t background_count, Rng& rng);

struct InsertedShape {
  std::vector<std::uint8_t> silhouette;  // H*W
  Rgb color{};
  /// 1 = directly above the background; larger values go up the stack.
  std::size_t depth = 1;
  double scale = 1.0;
  double x = 0.5, y = 0.5;  // center, normalized
};

/// Inserts a shape into the painter stack and recomputes visible masks.
/// The new object is flagged OOD; its categorical rows are left unlabeled.
Scene insert_shape(const Scene& scene, const PropertySchema& schema,
                   std::size_t background_count, const InsertedShape& shape);

/// Adds a random equilateral triangle to scenes with at most
/// spec.shape_max_foreground foreground objects; otherwise skipped.
ShiftOutcome insert_triangle(const Scene& scene, const ShiftSpec& spec,
                             const PropertySchema& schema, std::size_t background_count,
                             Rng& rng);

struct ShiftResult {
  SceneBatch batch;
  ShiftMetadata metadata;
  /// Source scene of each output scene (skipped scenes are dropped).
  std::vector<std::size_t> source_index;
  std::vector<std::size_t> skipped;
  std::vector<std::optional<OcclusionLog>> occlusion_logs;
};

/// Applies the shift to every scene with per-scene seeds derived from spec.seed.
ShiftResult apply_shift(const SceneBatch& batch, const ShiftSpec& spec);

}  // namespace oclb
