#pragma once

#include <span>
#include <string>
#include <vector>

#include "oclb/scene_data.hpp"

namespace oclb {

/// Schema entries that contribute to a loss. Throws ConfigError for unknown names.
std::vector<bool> included_mask(const PropertySchema& schema,
                                const std::vector<std::string>& names);
/// All schema entries except `excluded`.
std::vector<bool> included_except(const PropertySchema& schema,
                                  const std::vector<std::string>& excluded);

struct LossBreakdown {
  double total = 0.0;
  /// One term per schema entry; zero for entries not included.
  std::vector<double> per_property;
};

/// Softmax cross-entropy per categorical segment plus mean squared error over
/// the dimensions of each numeric segment, summed over included properties.
/// When `grad` is non-empty it receives d(total)/d(output) (overwritten).
double property_loss(std::span<const double> output, std::span<const double> target,
                     const PropertySchema& schema, const std::vector<bool>& included,
                     std::span<double> grad = {});

LossBreakdown property_loss_breakdown(std::span<const double> output,
                                      std::span<const double> target,
                                      const PropertySchema& schema,
                                      const std::vector<bool>& included);

}  // namespace oclb
