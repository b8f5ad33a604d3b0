#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "oclb/scene_data.hpp"

namespace oclb {

enum class SynthShape { Square = 0, Circle = 1, Triangle = 2 };

struct SynthConfig {
  std::size_t num_scenes = 16;
  std::size_t height = 64, width = 64;
  std::size_t min_objects = 2, max_objects = 5;  // foreground objects per scene
  std::vector<SynthShape> shapes{SynthShape::Square, SynthShape::Circle, SynthShape::Triangle};
  double scale_min = 0.5, scale_max = 1.0;
  std::size_t scale_steps = 6;
  /// Object extent: scale * size_factor * min(H, W).
  double size_factor = 0.2;
  std::uint64_t seed = 0;
};

void validate_synth_config(const SynthConfig& config);

/// Painter-rendered scenes with one gray background mask and the
/// "synthetic" schema (color, shape, scale, x, y).
SceneBatch generate_scenes(const SynthConfig& config);

struct MockEncoderConfig {
  std::size_t num_slots = 6;
  std::size_t latent_width = 16;
  /// Std of Gaussian noise added to slot embeddings.
  double noise = 0.0;
  /// Box blur radius (pixels) applied to routed masks.
  std::size_t blur_radius = 0;
  /// Std of Gaussian noise on mask logits; > 0 switches masks to a softmax.
  double mask_noise = 0.0;
  std::uint64_t seed = 0;
  bool permute_slots = true;
  /// Slot indices replaced by noise in every scene.
  std::vector<std::size_t> slot_corruption;
  /// Visible foreground objects per scene whose slot is replaced by noise.
  std::size_t corrupt_objects_per_scene = 0;
  /// Std of the replacement noise.
  double corruption_scale = 1.0;
  /// Emit one flat vector (K=1, width num_slots*latent_width).
  bool distributed = false;
};

struct MockEncoding {
  SlotBatch slots;
  /// Per scene, slot index of each object (size = scene's object count).
  std::vector<std::vector<std::size_t>> slot_of_object;
  /// Per scene, objects whose slots were corrupted.
  std::vector<std::vector<std::size_t>> corrupted_objects;
};

MockEncoding mock_encode(const SceneBatch& scenes, const MockEncoderConfig& config);

/// Marks corrupted objects OOD.
void flag_corrupted_objects(SceneBatch& scenes, const MockEncoding& encoding);

}  // namespace oclb
