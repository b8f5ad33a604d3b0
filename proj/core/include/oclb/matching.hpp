#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oclb/linalg.hpp"
#include "oclb/scene_data.hpp"

namespace oclb {

/// Objects (rows) by slots (columns).
struct CostMatrix {
  RowMatrix costs;
  std::vector<std::size_t> row_objects;
  std::vector<std::size_t> col_slots;

  CostMatrix() = default;
  /// Rows labelled 0..M-1, columns 0..K-1.
  explicit CostMatrix(RowMatrix c);
  CostMatrix(RowMatrix c, std::vector<std::size_t> rows, std::vector<std::size_t> cols);

  std::size_t rows() const { return static_cast<std::size_t>(costs.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(costs.cols()); }
};

struct Assignment {
  /// (object index, slot index) in the labels of the cost matrix, sorted by object.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost injection of the smaller side into the larger. Throws
/// NumericsError on non-finite entries.
Assignment hungarian(const CostMatrix& costs);

/// cost[m,k] = -cos(g_m, p_k); zero-norm operands give cost 0.
/// `pred_masks` is K x HW, `gt_masks` is (at least) max(objects)+1 x HW.
CostMatrix mask_match_costs(std::span<const float> pred_masks, std::size_t num_slots,
                            std::span<const std::uint8_t> gt_masks,
                            const std::vector<std::size_t>& objects, std::size_t pixels);

/// cost[m,k] = loss(prediction_k, target_m) over the included properties.
CostMatrix loss_match_costs(const RowMatrix& predictions, const RowMatrix& targets,
                            const PropertySchema& schema,
                            const std::vector<std::string>& included);
CostMatrix loss_match_costs(const RowMatrix& predictions, const RowMatrix& targets,
                            const PropertySchema& schema, const std::vector<bool>& included);

/// Positions of target rows in lexicographic order of (ood group, property
/// tuple in declaration order). Stable. Slot k is paired with row order[k].
std::vector<std::size_t> deterministic_order(const RowMatrix& targets,
                                             const PropertySchema& schema,
                                             std::span<const std::uint8_t> ood_flags);

/// Pairs slot k with the k-th object of deterministic_order, for k < min(M,K).
Assignment deterministic_match(const RowMatrix& predictions, const RowMatrix& targets,
                               const PropertySchema& schema,
                               std::span<const std::uint8_t> ood_flags,
                               const std::vector<bool>& included);

/// Step 1 matches on properties that are in-distribution for every object and
/// keeps the OOD objects' pairs; step 2 re-matches the rest on all properties.
/// Throws MatchError when there are more OOD objects than slots or the step-1
/// property set is empty.
Assignment two_step_ood_match(const RowMatrix& predictions, const RowMatrix& targets,
                              const PropertySchema& schema,
                              std::span<const std::uint8_t> ood_flags,
                              const std::vector<std::string>& globally_id_properties);

}  // namespace oclb
