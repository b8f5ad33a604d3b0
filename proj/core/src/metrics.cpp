#include "oclb/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_map>

#include "oclb/parallel.hpp"

namespace oclb {

const char* metric_name(Metric metric) {
  switch (metric) {
    case Metric::MSE: return "MSE";
    case Metric::ARI: return "ARI";
    case Metric::SC: return "SC";
    case Metric::mSC: return "mSC";
  }
  return "?";
}

Metric metric_from_name(const std::string& name) {
  if (name == "MSE") return Metric::MSE;
  if (name == "ARI") return Metric::ARI;
  if (name == "SC") return Metric::SC;
  if (name == "mSC") return Metric::mSC;
  throw ConfigError("unknown metric '" + name + "'");
}

double mse(std::span<const float> image, std::span<const float> recon) {
  if (image.size() != recon.size()) {
    throw ShapeError("mse: image has " + std::to_string(image.size()) + " values, recon " +
                     std::to_string(recon.size()));
  }
  if (image.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double d = static_cast<double>(image[i]) - static_cast<double>(recon[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(image.size());
}

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b) {
  if (labels_a.size() != labels_b.size()) throw ShapeError("ARI: labelings differ in length");
  const auto n = static_cast<double>(labels_a.size());
  std::map<std::pair<int, int>, std::size_t> joint;
  std::unordered_map<int, std::size_t> count_a, count_b;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++joint[{labels_a[i], labels_b[i]}];
    ++count_a[labels_a[i]];
    ++count_b[labels_b[i]];
  }
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : joint) sum_joint += choose2(static_cast<double>(c));
  for (const auto& [key, c] : count_a) sum_a += choose2(static_cast<double>(c));
  for (const auto& [key, c] : count_b) sum_b += choose2(static_cast<double>(c));
  const double pairs = choose2(n);
  if (pairs == 0.0) return 1.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denominator = max_index - expected;
  if (denominator == 0.0) return 1.0;
  return (sum_joint - expected) / denominator;
}

std::vector<int> argmax_labels(std::span<const float> soft_masks, std::size_t num_slots,
                               std::size_t pixels) {
  if (soft_masks.size() != num_slots * pixels) throw ShapeError("predicted masks shape mismatch");
  std::vector<int> out(pixels, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    float best = soft_masks[p];
    for (std::size_t k = 1; k < num_slots; ++k) {
      const float v = soft_masks[k * pixels + p];
      if (v > best) {
        best = v;
        out[p] = static_cast<int>(k);
      }
    }
  }
  return out;
}

std::vector<int> partition_labels(std::span<const std::uint8_t> gt_masks, std::size_t num_objects,
                                  std::size_t pixels) {
  if (gt_masks.size() < num_objects * pixels) throw ShapeError("ground-truth masks shape mismatch");
  std::vector<int> out(pixels, -1);
  for (std::size_t m = 0; m < num_objects; ++m) {
    for (std::size_t p = 0; p < pixels; ++p) {
      if (gt_masks[m * pixels + p]) out[p] = static_cast<int>(m);
    }
  }
  return out;
}

std::optional<double> ari_foreground(std::span<const std::uint8_t> gt_masks,
                                     std::size_t num_objects, std::size_t background_count,
                                     std::span<const float> pred_masks, std::size_t num_slots,
                                     std::size_t pixels) {
  const auto truth = partition_labels(gt_masks, num_objects, pixels);
  const auto pred = argmax_labels(pred_masks, num_slots, pixels);
  std::vector<int> fg_truth, fg_pred;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (truth[p] >= static_cast<int>(background_count)) {
      fg_truth.push_back(truth[p]);
      fg_pred.push_back(pred[p]);
    }
  }
  if (fg_truth.empty()) return std::nullopt;
  return adjusted_rand_index(fg_pred, fg_truth);
}

double covering_from_labels(std::span<const int> covering, std::span<const int> covered,
                            bool weighted) {
  if (covering.size() != covered.size()) throw ShapeError("covering: labelings differ in length");
  std::map<int, std::size_t> area_a, area_b;
  std::map<std::pair<int, int>, std::size_t> inter;
  for (std::size_t p = 0; p < covering.size(); ++p) {
    ++area_a[covering[p]];
    if (covered[p] < 0) continue;
    ++area_b[covered[p]];
    ++inter[{covered[p], covering[p]}];
  }
  if (area_b.empty()) return 0.0;
  double numerator = 0.0, denominator = 0.0;
  for (const auto& [b, size_b] : area_b) {
    double best = 0.0;
    for (auto it = inter.lower_bound({b, std::numeric_limits<int>::min()});
         it != inter.end() && it->first.first == b; ++it) {
      const double i = static_cast<double>(it->second);
      const double u = static_cast<double>(size_b + area_a[it->first.second]) - i;
      best = std::max(best, i / u);
    }
    const double w = weighted ? static_cast<double>(size_b) : 1.0;
    numerator += w * best;
    denominator += w;
  }
  return numerator / denominator;
}

std::optional<double> segmentation_covering(std::span<const float> pred_masks,
                                            std::size_t num_slots,
                                            std::span<const std::uint8_t> gt_masks,
                                            std::size_t num_objects,
                                            std::size_t background_count, std::size_t pixels,
                                            bool weighted) {
  const auto pred = argmax_labels(pred_masks, num_slots, pixels);
  auto truth = partition_labels(gt_masks, num_objects, pixels);
  bool any = false;
  for (auto& t : truth) {
    if (t < static_cast<int>(background_count)) {
      t = -1;
    } else {
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return covering_from_labels(pred, truth, weighted);
}

std::vector<SceneMetricRecord> batch_metrics(const SceneBatch& scenes, const SlotBatch& slots,
                                             const std::vector<Metric>& selection) {
  const std::size_t n = scenes.size();
  if (slots.size() != n) {
    throw ShapeError("scene batch has " + std::to_string(n) + " scenes, slot batch " +
                     std::to_string(slots.size()));
  }
  if (n == 0) return {};
  const std::size_t hw = scenes.height() * scenes.width();
  const std::size_t k = slots.num_slots();
  if (slots.pred_masks.dim(2) * slots.pred_masks.dim(3) != hw) {
    throw ShapeError("predicted masks resolution differs from ground truth");
  }
  const bool need_recon =
      std::find(selection.begin(), selection.end(), Metric::MSE) != selection.end();
  if (need_recon && !slots.recon) throw ShapeError("MSE requested but slot batch has no recon");
  if (need_recon && slots.recon->shape != scenes.images.shape) {
    throw ShapeError("recon shape " + shape_string(slots.recon->shape) + " differs from images");
  }

  std::vector<SceneMetricRecord> records(n * selection.size());
  parallel_for(n, [&](std::size_t i) {
    const auto m = static_cast<std::size_t>(scenes.num_objects[i]);
    const auto gt = scenes.gt_masks.slice(i);
    const auto pred = slots.pred_masks.slice(i);
    for (std::size_t s = 0; s < selection.size(); ++s) {
      SceneMetricRecord r{i, selection[s], 0.0, false};
      std::optional<double> v;
      switch (selection[s]) {
        case Metric::MSE: v = mse(scenes.images.slice(i), slots.recon->slice(i)); break;
        case Metric::ARI: v = ari_foreground(gt, m, scenes.background_count, pred, k, hw); break;
        case Metric::SC:
          v = segmentation_covering(pred, k, gt, m, scenes.background_count, hw, true);
          break;
        case Metric::mSC:
          v = segmentation_covering(pred, k, gt, m, scenes.background_count, hw, false);
          break;
      }
      r.skipped = !v.has_value();
      r.value = v.value_or(0.0);
      records[i * selection.size() + s] = r;
    }
  });
  return records;
}

}  // namespace oclb
