#include <algorithm>

#include "oclb/loss.hpp"
#include "oclb/probe.hpp"

namespace oclb {

const char* baseline_mode_name(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::AnalyticSlotwise: return "analytic_slotwise";
    case BaselineMode::LearnedLossMatch: return "learned_loss_match";
    case BaselineMode::LearnedDeterministic: return "learned_deterministic";
  }
  return "?";
}

BaselineMode baseline_mode_from_name(const std::string& name) {
  if (name == "analytic_slotwise") return BaselineMode::AnalyticSlotwise;
  if (name == "learned_loss_match") return BaselineMode::LearnedLossMatch;
  if (name == "learned_deterministic") return BaselineMode::LearnedDeterministic;
  throw ConfigError("unknown baseline mode '" + name + "'");
}

namespace {

std::vector<PropertyScore> analytic_scores(const SceneBatch& scenes,
                                           const std::vector<std::size_t>& indices) {
  const auto& schema = scenes.schema;
  const auto included = included_except(schema, scenes.excluded_properties);
  std::vector<ObjectPrediction> objects;
  for (auto i : indices) {
    for (auto o : scenes.visible_foreground(i)) {
      objects.push_back({scenes.target(i, o), std::nullopt, scenes.is_ood(i, o)});
    }
  }
  // Per-dimension mean of numeric segments, majority class of categorical ones.
  std::vector<double> constant(schema.total_width(), 0.0);
  for (std::size_t e = 0; e < schema.size(); ++e) {
    const std::size_t off = schema.offset(e), w = schema[e].width();
    if (schema[e].categorical()) {
      std::vector<std::size_t> counts(w, 0);
      for (const auto& o : objects) {
        for (std::size_t c = 0; c < w; ++c) {
          if (o.target[off + c] > 0.5) ++counts[c];
        }
      }
      const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
      constant[off + static_cast<std::size_t>(best)] = 1.0;
    } else if (!objects.empty()) {
      for (std::size_t d = 0; d < w; ++d) {
        double sum = 0.0;
        for (const auto& o : objects) sum += o.target[off + d];
        constant[off + d] = sum / static_cast<double>(objects.size());
      }
    }
  }
  for (auto& o : objects) o.prediction = constant;
  return score_predictions(schema, scenes.excluded_properties, objects);
}

}  // namespace

std::vector<BaselineResult> baseline_constant(const SceneBatch& scenes,
                                              const SplitDefinition& splits, BaselineMode mode,
                                              const std::vector<std::uint64_t>& seeds,
                                              const TrainConfig& train, std::size_t num_slots) {
  if (mode == BaselineMode::AnalyticSlotwise) {
    return {BaselineResult{0, analytic_scores(scenes, splits.test)}};
  }
  if (num_slots == 0) throw ConfigError("learned baselines need at least one slot");
  // A zero-width distributed representation: the predictor reduces to its bias,
  // a constant vector of width P * num_slots.
  SlotBatch empty;
  empty.slots = Tensor<float>({scenes.size(), 1, 0});
  empty.pred_masks = Tensor<float>({scenes.size(), 1, 1, 1}, 1.0f);
  empty.distributed = true;
  empty.virtual_slots = num_slots;
  const auto config = make_predictor_config(empty, scenes.schema, 0);
  const auto matching =
      mode == BaselineMode::LearnedLossMatch ? MatchingMode::Loss : MatchingMode::Deterministic;

  std::vector<BaselineResult> out;
  for (auto seed : seeds) {
    TrainConfig tc = train;
    tc.seed = seed;
    const auto trained = train_probe(empty, scenes, splits, config, tc, matching);
    out.push_back({seed, evaluate_probe(trained.params, config, empty, scenes, splits.test, matching)});
  }
  return out;
}

}  // namespace oclb
