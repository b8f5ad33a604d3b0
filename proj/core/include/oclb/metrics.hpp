#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oclb/scene_data.hpp"

namespace oclb {

enum class Metric { MSE, ARI, SC, mSC };

const char* metric_name(Metric metric);
Metric metric_from_name(const std::string& name);

struct SceneMetricRecord {
  std::size_t scene_index = 0;
  Metric metric = Metric::MSE;
  double value = 0.0;
  /// Degenerate scene; excluded from aggregation.
  bool skipped = false;
};

/// Mean squared error over all H*W*C entries.
double mse(std::span<const float> image, std::span<const float> recon);

/// ARI of two labelings of the same points. Returns 1 when the chance-corrected
/// denominator vanishes (both labelings trivially agree, e.g. one cluster each).
double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b);

/// Per-pixel argmax over K soft masks (K x HW), ties to the lowest slot index.
std::vector<int> argmax_labels(std::span<const float> soft_masks, std::size_t num_slots,
                               std::size_t pixels);

/// Ground-truth masks (M x HW partition) to per-pixel object labels.
std::vector<int> partition_labels(std::span<const std::uint8_t> gt_masks, std::size_t num_objects,
                                  std::size_t pixels);

/// Foreground ARI: pixels whose ground-truth object index is >= background_count.
/// nullopt when there are no foreground pixels.
std::optional<double> ari_foreground(std::span<const std::uint8_t> gt_masks,
                                     std::size_t num_objects, std::size_t background_count,
                                     std::span<const float> pred_masks, std::size_t num_slots,
                                     std::size_t pixels);

/// SC (weighted) or mSC (unweighted) covering of the non-empty foreground
/// ground-truth masks by the argmax-binarized predicted masks.
/// nullopt when no foreground mask is non-empty.
std::optional<double> segmentation_covering(std::span<const float> pred_masks,
                                            std::size_t num_slots,
                                            std::span<const std::uint8_t> gt_masks,
                                            std::size_t num_objects,
                                            std::size_t background_count, std::size_t pixels,
                                            bool weighted);

/// Covering of label set `covered` by label set `covering` on hard labelings.
/// Labels < 0 are ignored on the covered side.
double covering_from_labels(std::span<const int> covering, std::span<const int> covered,
                            bool weighted);

/// One record per scene per selected metric, ordered by scene then selection order.
std::vector<SceneMetricRecord> batch_metrics(const SceneBatch& scenes, const SlotBatch& slots,
                                             const std::vector<Metric>& selection);

}  // namespace oclb
