#include "oclb/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oclb/loss.hpp"

namespace oclb {

CostMatrix::CostMatrix(RowMatrix c) : costs(std::move(c)) {
  row_objects.resize(rows());
  col_slots.resize(cols());
  std::iota(row_objects.begin(), row_objects.end(), std::size_t{0});
  std::iota(col_slots.begin(), col_slots.end(), std::size_t{0});
}

CostMatrix::CostMatrix(RowMatrix c, std::vector<std::size_t> r, std::vector<std::size_t> k)
    : costs(std::move(c)), row_objects(std::move(r)), col_slots(std::move(k)) {
  if (row_objects.size() != rows() || col_slots.size() != cols()) {
    throw ShapeError("cost matrix labels do not match its shape");
  }
}

namespace {

/// Square assignment with row/column potentials (shortest augmenting paths).
/// Returns the column assigned to each row.
std::vector<std::size_t> solve_square(const RowMatrix& a) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

Assignment hungarian(const CostMatrix& cm) {
  const std::size_t m = cm.rows(), k = cm.cols();
  Assignment out;
  if (m == 0 || k == 0) return out;
  double largest = -std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < cm.costs.rows(); ++r) {
    for (Eigen::Index c = 0; c < cm.costs.cols(); ++c) {
      const double v = cm.costs(r, c);
      if (!std::isfinite(v)) {
        throw NumericsError("cost matrix entry (" + std::to_string(r) + "," + std::to_string(c) +
                            ") is not finite");
      }
      largest = std::max(largest, v);
    }
  }
  // Pad to square with a constant strictly above every real entry; padded
  // pairs are dropped afterwards.
  const std::size_t n = std::max(m, k);
  const double pad = largest + 1.0 + std::abs(largest);
  RowMatrix square = RowMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), pad);
  square.topLeftCorner(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = cm.costs;
  const auto row_to_col = solve_square(square);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t c = row_to_col[r];
    if (c >= k) continue;
    out.pairs.emplace_back(cm.row_objects[r], cm.col_slots[c]);
    out.total_cost += cm.costs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

CostMatrix mask_match_costs(std::span<const float> pred_masks, std::size_t num_slots,
                            std::span<const std::uint8_t> gt_masks,
                            const std::vector<std::size_t>& objects, std::size_t pixels) {
  if (pred_masks.size() != num_slots * pixels) throw ShapeError("predicted masks shape mismatch");
  std::vector<double> slot_norm(num_slots, 0.0);
  for (std::size_t k = 0; k < num_slots; ++k) {
    double s = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = pred_masks[k * pixels + p];
      s += v * v;
    }
    slot_norm[k] = std::sqrt(s);
  }
  RowMatrix costs(static_cast<Eigen::Index>(objects.size()), static_cast<Eigen::Index>(num_slots));
  for (std::size_t r = 0; r < objects.size(); ++r) {
    const std::size_t m = objects[r];
    if ((m + 1) * pixels > gt_masks.size()) throw ShapeError("ground-truth object out of range");
    const auto g = gt_masks.subspan(m * pixels, pixels);
    double g_sq = 0.0;
    for (auto v : g) g_sq += static_cast<double>(v) * v;
    const double g_norm = std::sqrt(g_sq);
    for (std::size_t k = 0; k < num_slots; ++k) {
      double dot = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) {
        if (g[p]) dot += static_cast<double>(g[p]) * pred_masks[k * pixels + p];
      }
      const double denom = g_norm * slot_norm[k];
      costs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          denom > 0.0 ? -dot / denom : 0.0;
    }
  }
  std::vector<std::size_t> cols(num_slots);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return CostMatrix(std::move(costs), objects, std::move(cols));
}

CostMatrix loss_match_costs(const RowMatrix& predictions, const RowMatrix& targets,
                            const PropertySchema& schema, const std::vector<bool>& included) {
  const auto width = static_cast<Eigen::Index>(schema.total_width());
  if (predictions.cols() != width || targets.cols() != width) {
    throw ShapeError("loss matching: prediction/target width differs from schema width " +
                     std::to_string(width));
  }
  RowMatrix costs(targets.rows(), predictions.rows());
  for (Eigen::Index m = 0; m < targets.rows(); ++m) {
    const std::span<const double> t(targets.row(m).data(), schema.total_width());
    for (Eigen::Index k = 0; k < predictions.rows(); ++k) {
      const std::span<const double> y(predictions.row(k).data(), schema.total_width());
      costs(m, k) = property_loss(y, t, schema, included);
    }
  }
  return CostMatrix(std::move(costs));
}

CostMatrix loss_match_costs(const RowMatrix& predictions, const RowMatrix& targets,
                            const PropertySchema& schema,
                            const std::vector<std::string>& included) {
  return loss_match_costs(predictions, targets, schema, included_mask(schema, included));
}

namespace {

std::vector<double> sort_key(const RowMatrix& targets, Eigen::Index row,
                             const PropertySchema& schema, bool ood) {
  std::vector<double> key{ood ? 1.0 : 0.0};
  for (std::size_t e = 0; e < schema.size(); ++e) {
    const auto off = static_cast<Eigen::Index>(schema.offset(e));
    const auto w = static_cast<Eigen::Index>(schema[e].width());
    if (schema[e].categorical()) {
      // Class index; unlabeled (all-zero) rows sort first.
      double cls = -1.0;
      for (Eigen::Index c = 0; c < w; ++c) {
        if (targets(row, off + c) > 0.5) {
          cls = static_cast<double>(c);
          break;
        }
      }
      key.push_back(cls);
    } else {
      for (Eigen::Index d = 0; d < w; ++d) key.push_back(targets(row, off + d));
    }
  }
  return key;
}

}  // namespace

std::vector<std::size_t> deterministic_order(const RowMatrix& targets,
                                             const PropertySchema& schema,
                                             std::span<const std::uint8_t> ood_flags) {
  const auto m = static_cast<std::size_t>(targets.rows());
  if (!ood_flags.empty() && ood_flags.size() != m) throw ShapeError("ood flags length mismatch");
  if (targets.cols() != static_cast<Eigen::Index>(schema.total_width())) {
    throw ShapeError("deterministic order: target width differs from schema");
  }
  std::vector<std::vector<double>> keys;
  keys.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const bool ood = !ood_flags.empty() && ood_flags[i] != 0;
    keys.push_back(sort_key(targets, static_cast<Eigen::Index>(i), schema, ood));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return order;
}

Assignment deterministic_match(const RowMatrix& predictions, const RowMatrix& targets,
                               const PropertySchema& schema,
                               std::span<const std::uint8_t> ood_flags,
                               const std::vector<bool>& included) {
  const auto order = deterministic_order(targets, schema, ood_flags);
  const std::size_t count = std::min<std::size_t>(order.size(), static_cast<std::size_t>(predictions.rows()));
  Assignment out;
  for (std::size_t k = 0; k < count; ++k) {
    const auto m = static_cast<Eigen::Index>(order[k]);
    const auto kk = static_cast<Eigen::Index>(k);
    out.pairs.emplace_back(order[k], k);
    out.total_cost += property_loss(
        std::span<const double>(predictions.row(kk).data(), schema.total_width()),
        std::span<const double>(targets.row(m).data(), schema.total_width()), schema, included);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

Assignment two_step_ood_match(const RowMatrix& predictions, const RowMatrix& targets,
                              const PropertySchema& schema,
                              std::span<const std::uint8_t> ood_flags,
                              const std::vector<std::string>& globally_id_properties) {
  const auto m = static_cast<std::size_t>(targets.rows());
  const auto k = static_cast<std::size_t>(predictions.rows());
  if (ood_flags.size() != m) throw ShapeError("ood flags length mismatch");
  if (globally_id_properties.empty()) {
    throw MatchError("two-step matching needs at least one property that is ID for all objects");
  }
  const auto num_ood = static_cast<std::size_t>(std::count_if(
      ood_flags.begin(), ood_flags.end(), [](std::uint8_t f) { return f != 0; }));
  if (num_ood > k) {
    throw MatchError(std::to_string(num_ood) + " OOD objects but only " + std::to_string(k) +
                     " slots");
  }
  const auto all = std::vector<bool>(schema.size(), true);

  Assignment result;
  std::vector<bool> object_taken(m, false), slot_taken(k, false);
  if (num_ood > 0) {
    const auto step1 =
        hungarian(loss_match_costs(predictions, targets, schema, globally_id_properties));
    for (const auto& [obj, slot] : step1.pairs) {
      if (!ood_flags[obj]) continue;
      result.pairs.emplace_back(obj, slot);
      object_taken[obj] = true;
      slot_taken[slot] = true;
    }
  }

  std::vector<std::size_t> rest_objects, rest_slots;
  for (std::size_t i = 0; i < m; ++i) {
    if (!object_taken[i]) rest_objects.push_back(i);
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (!slot_taken[j]) rest_slots.push_back(j);
  }
  RowMatrix rest(static_cast<Eigen::Index>(rest_objects.size()),
                 static_cast<Eigen::Index>(rest_slots.size()));
  const auto full = loss_match_costs(predictions, targets, schema, all);
  for (std::size_t r = 0; r < rest_objects.size(); ++r) {
    for (std::size_t c = 0; c < rest_slots.size(); ++c) {
      rest(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          full.costs(static_cast<Eigen::Index>(rest_objects[r]),
                     static_cast<Eigen::Index>(rest_slots[c]));
    }
  }
  const auto step2 = hungarian(CostMatrix(std::move(rest), rest_objects, rest_slots));
  result.pairs.insert(result.pairs.end(), step2.pairs.begin(), step2.pairs.end());
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [obj, slot] : result.pairs) {
    result.total_cost +=
        full.costs(static_cast<Eigen::Index>(obj), static_cast<Eigen::Index>(slot));
  }
  return result;
}

}  // namespace oclb
