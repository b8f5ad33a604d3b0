#include <algorithm>
#include <cmath>
#include <numeric>

#include "oclb/loss.hpp"
#include "oclb/probe.hpp"
#include "oclb/rng.hpp"

namespace oclb {

namespace {

std::size_t rows_per_scene(const PredictorConfig& config, const SlotBatch& reps) {
  return config.distributed ? 1 : reps.num_slots();
}

void check_compatible(const PredictorConfig& config, const SlotBatch& reps,
                      const SceneBatch& scenes) {
  if (reps.size() != scenes.size()) {
    throw ShapeError("representations cover " + std::to_string(reps.size()) + " scenes, dataset " +
                     std::to_string(scenes.size()));
  }
  if (config.distributed != reps.distributed) {
    throw ConfigError("predictor and representation disagree on the distributed flag");
  }
  if (config.input_width != reps.slot_width()) {
    throw ShapeError("predictor input width " + std::to_string(config.input_width) +
                     " differs from representation width " + std::to_string(reps.slot_width()));
  }
  if (config.output_width != scenes.schema.total_width() * config.virtual_slots) {
    throw ShapeError("predictor output width does not match the schema");
  }
}

/// Stacks the representation rows of `scenes` into one input matrix.
RowMatrix gather_inputs(const SlotBatch& reps, const PredictorConfig& config,
                        std::span<const std::size_t> indices) {
  const std::size_t r = rows_per_scene(config, reps);
  const std::size_t d = reps.slot_width();
  RowMatrix x(static_cast<Eigen::Index>(indices.size() * r), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = reps.slots.slice(indices[i]);
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        x(static_cast<Eigen::Index>(i * r + k), static_cast<Eigen::Index>(j)) = src[k * d + j];
      }
    }
  }
  return x;
}

/// K' x P view of the outputs belonging to scene position `i` in a stacked batch.
RowMatrix scene_predictions(const RowMatrix& outputs, std::size_t i, std::size_t rows,
                            const PredictorConfig& config, std::size_t width) {
  if (config.distributed) {
    RowMatrix p(static_cast<Eigen::Index>(config.virtual_slots), static_cast<Eigen::Index>(width));
    const auto row = outputs.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < config.virtual_slots; ++k) {
      for (std::size_t c = 0; c < width; ++c) {
        p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
            row(static_cast<Eigen::Index>(k * width + c));
      }
    }
    return p;
  }
  return outputs.block(static_cast<Eigen::Index>(i * rows), 0, static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(width));
}

/// Location in the stacked output matrix of prediction `k` of scene position `i`.
std::pair<Eigen::Index, Eigen::Index> output_location(std::size_t i, std::size_t k,
                                                      std::size_t rows,
                                                      const PredictorConfig& config,
                                                      std::size_t width) {
  if (config.distributed) {
    return {static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k * width)};
  }
  return {static_cast<Eigen::Index>(i * rows + k), 0};
}

RowMatrix gather_targets(const SceneBatch& scenes, std::size_t scene,
                         const std::vector<std::size_t>& objects) {
  const auto width = static_cast<Eigen::Index>(scenes.schema.total_width());
  RowMatrix t(static_cast<Eigen::Index>(objects.size()), width);
  for (std::size_t r = 0; r < objects.size(); ++r) {
    const auto v = scenes.target(scene, objects[r]);
    for (Eigen::Index c = 0; c < width; ++c) t(static_cast<Eigen::Index>(r), c) = v[static_cast<std::size_t>(c)];
  }
  return t;
}

std::vector<std::size_t> training_objects(const SceneBatch& scenes, std::size_t scene) {
  std::vector<std::size_t> out;
  for (auto o : scenes.visible_foreground(scene)) {
    if (!scenes.is_ood(scene, o)) out.push_back(o);
  }
  return out;
}

Assignment mask_assignment(const SceneBatch& scenes, const SlotBatch& reps, std::size_t scene,
                           const std::vector<std::size_t>& objects) {
  if (reps.distributed) throw ConfigError("mask matching needs slot-wise representations");
  const std::size_t hw = scenes.height() * scenes.width();
  if (reps.pred_masks.dim(2) * reps.pred_masks.dim(3) != hw) {
    throw ShapeError("predicted masks resolution differs from ground truth");
  }
  return hungarian(mask_match_costs(reps.pred_masks.slice(scene), reps.num_slots(),
                                    scenes.gt_masks.slice(scene), objects, hw));
}

/// Assignment over training objects; pairs are (row in `objects`, prediction).
Assignment training_assignment(const RowMatrix& predictions, const RowMatrix& targets,
                               const SceneBatch& scenes, const SlotBatch& reps, std::size_t scene,
                               const std::vector<std::size_t>& objects, MatchingMode mode,
                               const std::vector<bool>& included) {
  switch (mode) {
    case MatchingMode::Mask: {
      auto a = mask_assignment(scenes, reps, scene, objects);
      for (auto& [obj, slot] : a.pairs) {
        obj = static_cast<std::size_t>(
            std::find(objects.begin(), objects.end(), obj) - objects.begin());
      }
      return a;
    }
    case MatchingMode::Loss:
      return hungarian(loss_match_costs(predictions, targets, scenes.schema, included));
    case MatchingMode::Deterministic:
      return deterministic_match(predictions, targets, scenes.schema, {}, included);
  }
  return {};
}

struct BatchLoss {
  double sum = 0.0;
  std::size_t pairs = 0;
};

/// Matched loss over a set of scenes; fills `grad` (same shape as outputs) when non-null.
BatchLoss matched_loss(const RowMatrix& outputs, std::span<const std::size_t> indices,
                       const PredictorConfig& config, const SlotBatch& reps,
                       const SceneBatch& scenes, MatchingMode mode,
                       const std::vector<bool>& included,
                       std::vector<std::optional<Assignment>>& mask_cache, RowMatrix* grad) {
  const std::size_t width = scenes.schema.total_width();
  const std::size_t rows = rows_per_scene(config, reps);
  BatchLoss out;
  std::vector<double> g(width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t scene = indices[i];
    const auto objects = training_objects(scenes, scene);
    if (objects.empty()) continue;
    const RowMatrix preds = scene_predictions(outputs, i, rows, config, width);
    const RowMatrix targets = gather_targets(scenes, scene, objects);
    Assignment a;
    if (mode == MatchingMode::Mask) {
      if (!mask_cache[scene]) {
        mask_cache[scene] = training_assignment(preds, targets, scenes, reps, scene, objects,
                                                mode, included);
      }
      a = *mask_cache[scene];
    } else {
      a = training_assignment(preds, targets, scenes, reps, scene, objects, mode, included);
    }
    for (const auto& [row, k] : a.pairs) {
      const auto kr = static_cast<Eigen::Index>(k);
      const auto tr = static_cast<Eigen::Index>(row);
      const std::span<const double> y(preds.row(kr).data(), width);
      const std::span<const double> t(targets.row(tr).data(), width);
      out.sum += property_loss(y, t, scenes.schema, included, grad ? std::span<double>(g) : std::span<double>{});
      ++out.pairs;
      if (grad) {
        const auto [r0, c0] = output_location(i, k, rows, config, width);
        for (std::size_t c = 0; c < width; ++c) (*grad)(r0, c0 + static_cast<Eigen::Index>(c)) += g[c];
      }
    }
  }
  return out;
}

}  // namespace

RowMatrix predict_scene(const PredictorParams& params, const PredictorConfig& config,
                        const SlotBatch& reps, std::size_t scene, std::size_t target_width) {
  const std::size_t idx[1] = {scene};
  const RowMatrix out = forward(params, config, gather_inputs(reps, config, idx));
  return scene_predictions(out, 0, rows_per_scene(config, reps), config, target_width);
}

double validation_loss(const PredictorParams& params, const PredictorConfig& config,
                       const SlotBatch& reps, const SceneBatch& scenes,
                       const std::vector<std::size_t>& indices, MatchingMode mode) {
  std::vector<std::optional<Assignment>> cache(scenes.size());
  const auto included = included_except(scenes.schema, scenes.excluded_properties);
  BatchLoss total;
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < indices.size(); begin += kChunk) {
    const std::span<const std::size_t> part(indices.data() + begin,
                                            std::min(kChunk, indices.size() - begin));
    const RowMatrix out = forward(params, config, gather_inputs(reps, config, part));
    const auto l = matched_loss(out, part, config, reps, scenes, mode, included, cache, nullptr);
    total.sum += l.sum;
    total.pairs += l.pairs;
  }
  return total.pairs ? total.sum / static_cast<double>(total.pairs) : 0.0;
}

TrainResult train_probe(const SlotBatch& reps, const SceneBatch& scenes,
                        const SplitDefinition& splits, const PredictorConfig& predictor,
                        const TrainConfig& train, MatchingMode mode) {
  validate_config(predictor);
  validate_train_config(train);
  check_compatible(predictor, reps, scenes);
  if (mode == MatchingMode::Mask && reps.distributed) {
    throw ConfigError("mask matching needs slot-wise representations");
  }
  TrainResult result{init_params(predictor, train.seed), {}};
  if (train.max_steps == 0) return result;
  if (splits.train.empty()) throw ConfigError("training split is empty");

  const auto included = included_except(scenes.schema, scenes.excluded_properties);
  auto rng = make_rng(train.seed, 0, 0x7EA1);
  std::vector<std::size_t> order = splits.train;
  std::size_t cursor = order.size();
  auto next_batch = [&] {
    std::vector<std::size_t> batch;
    const std::size_t want = std::min(train.batch_size, order.size());
    while (batch.size() < want) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
        }
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    return batch;
  };

  std::vector<std::optional<Assignment>> mask_cache(scenes.size());
  Adam adam(result.params, train);
  EarlyStopping stopper(train.early_stop_patience, train.early_stop_min_delta);
  PredictorParams grads;
  ForwardCache cache;
  auto& params = result.params;
  auto& log = result.log;

  for (std::size_t step = 0; step < train.max_steps; ++step) {
    const auto batch = next_batch();
    const RowMatrix out = forward(params, predictor, gather_inputs(reps, predictor, batch), &cache);
    RowMatrix grad = RowMatrix::Zero(out.rows(), out.cols());
    const auto l = matched_loss(out, batch, predictor, reps, scenes, mode, included, mask_cache, &grad);
    log.steps_run = step + 1;
    if (l.pairs > 0) {
      const double mean = l.sum / static_cast<double>(l.pairs);
      if (!std::isfinite(mean)) {
        throw NumericsError("non-finite training loss at step " + std::to_string(step));
      }
      log.train_loss.push_back(mean);
      grad /= static_cast<double>(l.pairs);
      backward(params, predictor, cache, grad, grads);
      adam.step(params, grads, learning_rate_at(train, step));
    } else {
      log.train_loss.push_back(0.0);
    }
    if ((step + 1) % train.eval_period == 0 && !splits.val.empty()) {
      const double v = validation_loss(params, predictor, reps, scenes, splits.val, mode);
      if (!std::isfinite(v)) {
        throw NumericsError("non-finite validation loss at step " + std::to_string(step));
      }
      log.eval_steps.push_back(step + 1);
      log.validation_loss.push_back(v);
      if (stopper.update(v)) {
        log.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

Assignment match_for_evaluation(const RowMatrix& predictions, const SceneBatch& scenes,
                                const SlotBatch& reps, std::size_t scene,
                                const std::vector<std::size_t>& objects, MatchingMode mode) {
  const auto included = included_except(scenes.schema, scenes.excluded_properties);
  const RowMatrix targets = gather_targets(scenes, scene, objects);
  std::vector<std::uint8_t> flags(objects.size());
  for (std::size_t r = 0; r < objects.size(); ++r) flags[r] = scenes.is_ood(scene, objects[r]) ? 1 : 0;
  const bool any_ood = std::any_of(flags.begin(), flags.end(), [](auto f) { return f != 0; });

  Assignment a;
  switch (mode) {
    case MatchingMode::Mask:
      a = mask_assignment(scenes, reps, scene, objects);
      for (auto& [obj, slot] : a.pairs) {
        obj = static_cast<std::size_t>(std::find(objects.begin(), objects.end(), obj) - objects.begin());
      }
      break;
    case MatchingMode::Loss:
      if (any_ood) {
        std::vector<std::string> globally_id;
        for (std::size_t e = 0; e < scenes.schema.size(); ++e) {
          if (included[e]) globally_id.push_back(scenes.schema[e].name);
        }
        a = two_step_ood_match(predictions, targets, scenes.schema, flags, globally_id);
      } else {
        a = hungarian(loss_match_costs(predictions, targets, scenes.schema, included));
      }
      break;
    case MatchingMode::Deterministic:
      a = deterministic_match(predictions, targets, scenes.schema, flags, included);
      break;
  }
  // Report in object indices of the scene.
  for (auto& [row, slot] : a.pairs) row = objects[row];
  std::sort(a.pairs.begin(), a.pairs.end());
  return a;
}

std::vector<PropertyScore> evaluate_probe(const PredictorParams& params,
                                          const PredictorConfig& config, const SlotBatch& reps,
                                          const SceneBatch& scenes,
                                          const std::vector<std::size_t>& test_indices,
                                          MatchingMode mode) {
  check_compatible(config, reps, scenes);
  const std::size_t width = scenes.schema.total_width();
  std::vector<std::vector<ObjectPrediction>> per_scene(test_indices.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < test_indices.size(); begin += kChunk) {
    const std::span<const std::size_t> part(test_indices.data() + begin,
                                            std::min(kChunk, test_indices.size() - begin));
    const RowMatrix out = forward(params, config, gather_inputs(reps, config, part));
    for (std::size_t i = 0; i < part.size(); ++i) {
      const std::size_t scene = part[i];
      const auto objects = scenes.visible_foreground(scene);
      if (objects.empty()) continue;
      const RowMatrix preds = scene_predictions(out, i, rows_per_scene(config, reps), config, width);
      const auto a = match_for_evaluation(preds, scenes, reps, scene, objects, mode);
      auto& bucket = per_scene[begin + i];
      for (auto o : objects) {
        ObjectPrediction op{scenes.target(scene, o), std::nullopt, scenes.is_ood(scene, o)};
        for (const auto& [obj, slot] : a.pairs) {
          if (obj != o) continue;
          const auto row = preds.row(static_cast<Eigen::Index>(slot));
          op.prediction = std::vector<double>(row.data(), row.data() + width);
        }
        bucket.push_back(std::move(op));
      }
    }
  }
  std::vector<ObjectPrediction> all;
  for (auto& bucket : per_scene) {
    for (auto& op : bucket) all.push_back(std::move(op));
  }
  return score_predictions(scenes.schema, scenes.excluded_properties, all);
}

std::vector<PropertyScore> score_predictions(const PropertySchema& schema,
                                             const std::vector<std::string>& excluded,
                                             const std::vector<ObjectPrediction>& objects) {
  const auto included = included_except(schema, excluded);
  const bool any_ood = std::any_of(objects.begin(), objects.end(), [](const auto& o) { return o.ood; });
  std::vector<std::pair<std::string, int>> groups{{"all", -1}, {"ID", 0}};
  if (any_ood) groups.emplace_back("OOD", 1);

  std::vector<PropertyScore> scores;
  for (std::size_t e = 0; e < schema.size(); ++e) {
    if (!included[e]) continue;
    const auto& entry = schema[e];
    const std::size_t off = schema.offset(e), w = entry.width();
    for (const auto& [group_name, group] : groups) {
      PropertyScore s{entry.name, group_name, entry.categorical(), std::nullopt, 0};
      auto in_group = [&, group = group](const ObjectPrediction& o) {
        return group < 0 || o.ood == (group == 1);
      };
      if (entry.categorical()) {
        std::size_t correct = 0;
        for (const auto& o : objects) {
          if (!in_group(o)) continue;
          const auto t0 = o.target.begin() + static_cast<std::ptrdiff_t>(off);
          const auto t_max = std::max_element(t0, t0 + static_cast<std::ptrdiff_t>(w));
          if (*t_max <= 0.0) continue;  // unlabeled
          ++s.count;
          if (!o.prediction) continue;
          const auto p0 = o.prediction->begin() + static_cast<std::ptrdiff_t>(off);
          const auto p_max = std::max_element(p0, p0 + static_cast<std::ptrdiff_t>(w));
          if (p_max - p0 == t_max - t0) ++correct;
        }
        if (s.count) s.value = static_cast<double>(correct) / static_cast<double>(s.count);
      } else {
        std::vector<double> mean(w, 0.0);
        for (const auto& o : objects) {
          if (!in_group(o) || !o.prediction) continue;
          ++s.count;
          for (std::size_t d = 0; d < w; ++d) mean[d] += o.target[off + d];
        }
        if (s.count) {
          for (auto& m : mean) m /= static_cast<double>(s.count);
          double ss_res = 0.0, ss_tot = 0.0;
          for (const auto& o : objects) {
            if (!in_group(o) || !o.prediction) continue;
            for (std::size_t d = 0; d < w; ++d) {
              const double t = o.target[off + d];
              const double r = t - (*o.prediction)[off + d];
              ss_res += r * r;
              ss_tot += (t - mean[d]) * (t - mean[d]);
            }
          }
          if (ss_tot > 0.0) s.value = 1.0 - ss_res / ss_tot;
        }
      }
      scores.push_back(std::move(s));
    }
  }
  return scores;
}

}  // namespace oclb
