#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oclb/tensor.hpp"

namespace oclb {

enum class PropertyKind { Categorical, Numeric };

struct PropertyEntry {
  std::string name;
  PropertyKind kind = PropertyKind::Numeric;
  /// Class count for categorical entries, dimensionality for numeric ones.
  std::size_t size = 1;
  /// Shift kinds under which this property is not predicted.
  std::vector<std::string> excluded_under;

  std::size_t width() const { return size; }
  bool categorical() const { return kind == PropertyKind::Categorical; }
};

/// Ordered object properties. Declaration order is the canonical order used for
/// target layout and for deterministic matching.
class PropertySchema {
public:
  PropertySchema() = default;
  explicit PropertySchema(std::vector<PropertyEntry> entries);

  const std::vector<PropertyEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PropertyEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Total target width P.
  std::size_t total_width() const { return total_width_; }
  /// Column offset of entry `i` inside a target vector.
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;
  std::vector<std::string> names() const;
  /// Properties flagged as excluded under the given shift kind.
  std::vector<std::string> excluded_for_shift(const std::string& shift_kind) const;

  bool operator==(const PropertySchema& other) const;

private:
  std::vector<PropertyEntry> entries_;
  std::vector<std::size_t> offsets_;
  std::size_t total_width_ = 0;
};

/// Known presets: "clevr", "multi_dsprites", "tetrominoes", "shapestacks",
/// "objects_room" (empty; metrics only), "synthetic".
PropertySchema schema_preset(const std::string& name);

nlohmann::json schema_to_json(const PropertySchema& schema);
PropertySchema schema_from_json(const nlohmann::json& j);

/// One scene with unpadded per-object data. Mask index order is painter order.
struct Scene {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<float> image;                 // H*W*C
  Tensor<std::uint8_t> masks;               // M,H,W
  std::vector<Tensor<float>> properties;    // per schema entry: M,width
  std::vector<std::uint8_t> ood_flags;      // M
  std::size_t num_objects() const { return masks.shape.empty() ? 0 : masks.shape[0]; }
  std::size_t pixels() const { return height * width; }
  /// Object index owning each pixel.
  std::vector<int> labels() const;
  std::size_t mask_area(std::size_t object) const;
};

struct SceneBatch {
  PropertySchema schema;
  Tensor<float> images;                     // N,H,W,C in [0,1]
  Tensor<std::uint8_t> gt_masks;            // N,Mmax,H,W partition of pixels
  std::vector<std::int64_t> num_objects;    // N, counts include background masks
  std::vector<Tensor<float>> properties;    // per schema entry: N,Mmax,width
  std::size_t background_count = 1;
  Tensor<std::uint8_t> ood_flags;           // N,Mmax
  std::vector<std::string> excluded_properties;

  std::size_t size() const { return images.shape.empty() ? 0 : images.shape[0]; }
  std::size_t height() const { return images.shape.at(1); }
  std::size_t width() const { return images.shape.at(2); }
  std::size_t channels() const { return images.shape.at(3); }
  std::size_t max_objects() const { return gt_masks.shape.at(1); }

  Scene scene(std::size_t i) const;
  std::size_t mask_area(std::size_t scene, std::size_t object) const;
  /// Foreground objects with a non-empty visible mask.
  std::vector<std::size_t> visible_foreground(std::size_t scene) const;
  /// Encoded target vector (width P) of one object.
  std::vector<double> target(std::size_t scene, std::size_t object) const;
  bool is_ood(std::size_t scene, std::size_t object) const;

  bool operator==(const SceneBatch&) const = default;
};

/// Empty batch with the given geometry.
SceneBatch make_empty_batch(const PropertySchema& schema, std::size_t height, std::size_t width,
                            std::size_t channels, std::size_t background_count);

/// Packs scenes into a padded batch. Mmax is the largest object count (or `min_max_objects`).
SceneBatch assemble_batch(const PropertySchema& schema, const std::vector<Scene>& scenes,
                          std::size_t background_count, std::size_t height, std::size_t width,
                          std::size_t channels, std::size_t min_max_objects = 0);

/// Throws ValidationError (with scene index) or ShapeError on any broken invariant.
void validate_batch(const SceneBatch& batch);
void validate_scene(const Scene& scene, const PropertySchema& schema, std::ptrdiff_t index = -1);

struct SlotBatch {
  Tensor<float> slots;                      // N,K,d
  Tensor<float> pred_masks;                 // N,K,H,W soft masks
  std::optional<Tensor<float>> recon;       // N,H,W,C
  /// Flat (non-slotted) representation stored as K=1.
  bool distributed = false;
  /// Number of object predictions a distributed representation is decoded into.
  std::size_t virtual_slots = 0;

  std::size_t size() const { return slots.shape.empty() ? 0 : slots.shape[0]; }
  std::size_t num_slots() const { return slots.shape.at(1); }
  std::size_t slot_width() const { return slots.shape.at(2); }
  /// Predictions per scene: K for slotted, virtual_slots for distributed.
  std::size_t prediction_slots() const { return distributed ? virtual_slots : num_slots(); }

  bool operator==(const SlotBatch&) const = default;
};

void validate_slots(const SlotBatch& slots);

struct SplitSizes {
  std::size_t train = 10000;
  std::size_t val = 1000;
  std::size_t test = 2000;
};

struct SplitDefinition {
  std::vector<std::size_t> train, val, test;
  bool operator==(const SplitDefinition&) const = default;
};

struct ShiftMetadata {
  std::string kind;
  /// Per scene: index of the OOD object, or -1.
  std::vector<std::int64_t> ood_object_index;
  std::vector<std::string> excluded_properties;
  bool operator==(const ShiftMetadata&) const = default;
};

struct DatasetManifest {
  std::string name = "dataset";
  std::size_t num_scenes = 0;
  /// Tensor role -> file name relative to the dataset directory.
  std::map<std::string, std::string> files;
  PropertySchema schema;
  std::size_t background_count = 1;
  std::optional<SplitDefinition> splits;
  std::optional<ShiftMetadata> shift;
};

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
  SceneBatch batch;
  DatasetManifest manifest;
};

Dataset load_dataset(const std::filesystem::path& dir);
/// Writes tensors and manifest.json. `manifest` supplies name, splits and shift metadata.
void save_dataset(const SceneBatch& batch, const std::filesystem::path& dir,
                  const DatasetManifest& manifest);
void save_dataset(const SceneBatch& batch, const std::filesystem::path& dir);

SplitDefinition make_splits(const DatasetManifest& manifest, SplitSizes sizes, std::uint64_t seed);
SplitDefinition make_splits(std::size_t num_scenes, SplitSizes sizes, std::uint64_t seed);

void save_slots(const SlotBatch& slots, const std::filesystem::path& dir);
SlotBatch load_slots(const std::filesystem::path& dir);

}  // namespace oclb
