#include "oclb/loss.hpp"

#include <algorithm>
#include <cmath>

namespace oclb {

std::vector<bool> included_mask(const PropertySchema& schema,
                                const std::vector<std::string>& names) {
  std::vector<bool> mask(schema.size(), false);
  for (const auto& name : names) {
    const auto idx = schema.find(name);
    if (!idx) throw ConfigError("property '" + name + "' is not in the schema");
    mask[*idx] = true;
  }
  return mask;
}

std::vector<bool> included_except(const PropertySchema& schema,
                                  const std::vector<std::string>& excluded) {
  std::vector<bool> mask(schema.size(), true);
  for (const auto& name : excluded) {
    const auto idx = schema.find(name);
    if (!idx) throw ConfigError("property '" + name + "' is not in the schema");
    mask[*idx] = false;
  }
  return mask;
}

namespace {

double segment_loss(const PropertyEntry& entry, const double* out, const double* target,
                    double* grad) {
  const std::size_t w = entry.width();
  if (entry.categorical()) {
    const double peak = *std::max_element(out, out + w);
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < w; ++c) sum_exp += std::exp(out[c] - peak);
    const double log_norm = peak + std::log(sum_exp);
    double loss = 0.0, mass = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      if (target[c] != 0.0) loss -= target[c] * (out[c] - log_norm);
      mass += target[c];
    }
    if (grad) {
      for (std::size_t c = 0; c < w; ++c) {
        grad[c] = mass * std::exp(out[c] - log_norm) - target[c];
      }
    }
    return loss;
  }
  double sq = 0.0;
  const double scale = 1.0 / static_cast<double>(w);
  for (std::size_t k = 0; k < w; ++k) {
    const double d = out[k] - target[k];
    sq += d * d;
    if (grad) grad[k] = 2.0 * scale * d;
  }
  return sq * scale;
}

void check_widths(std::span<const double> output, std::span<const double> target,
                  const PropertySchema& schema, const std::vector<bool>& included) {
  if (output.size() != schema.total_width() || target.size() != schema.total_width()) {
    throw ShapeError("loss: expected width " + std::to_string(schema.total_width()) + ", got " +
                     std::to_string(output.size()) + " and " + std::to_string(target.size()));
  }
  if (included.size() != schema.size()) throw ShapeError("loss: inclusion mask size mismatch");
}

}  // namespace

double property_loss(std::span<const double> output, std::span<const double> target,
                     const PropertySchema& schema, const std::vector<bool>& included,
                     std::span<double> grad) {
  check_widths(output, target, schema, included);
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != output.size()) throw ShapeError("loss: gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  double total = 0.0;
  for (std::size_t e = 0; e < schema.size(); ++e) {
    if (!included[e]) continue;
    const std::size_t off = schema.offset(e);
    total += segment_loss(schema[e], output.data() + off, target.data() + off,
                          want_grad ? grad.data() + off : nullptr);
  }
  return total;
}

LossBreakdown property_loss_breakdown(std::span<const double> output,
                                      std::span<const double> target,
                                      const PropertySchema& schema,
                                      const std::vector<bool>& included) {
  check_widths(output, target, schema, included);
  LossBreakdown out;
  out.per_property.assign(schema.size(), 0.0);
  for (std::size_t e = 0; e < schema.size(); ++e) {
    if (!included[e]) continue;
    const std::size_t off = schema.offset(e);
    out.per_property[e] =
        segment_loss(schema[e], output.data() + off, target.data() + off, nullptr);
    out.total += out.per_property[e];
  }
  return out;
}

}  // namespace oclb
