#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oclb/linalg.hpp"
#include "oclb/matching.hpp"
#include "oclb/scene_data.hpp"

namespace oclb {

enum class MatchingMode { Mask, Loss, Deterministic };

const char* matching_mode_name(MatchingMode mode);
MatchingMode matching_mode_from_name(const std::string& name);

struct PredictorConfig {
  std::size_t hidden_layers = 1;  // 0 = linear probe
  std::size_t hidden_width = 256;
  double leaky_slope = 0.01;
  std::size_t input_width = 0;   // d, or d*K for distributed inputs
  std::size_t output_width = 0;  // P, or P*K for distributed inputs
  bool distributed = false;
  /// Object predictions decoded from one distributed output.
  std::size_t virtual_slots = 1;
};

/// Widths derived from the representation and schema.
PredictorConfig make_predictor_config(const SlotBatch& reps, const PropertySchema& schema,
                                      std::size_t hidden_layers);
void validate_config(const PredictorConfig& config);

/// Layer l maps width in_l to out_l: weights[l] is out_l x in_l.
struct PredictorParams {
  std::vector<RowMatrix> weights;
  std::vector<Vector> biases;

  std::size_t num_parameters() const;
  bool operator==(const PredictorParams& other) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; bound 1
/// when fan_in is zero (constant-output models).
PredictorParams init_params(const PredictorConfig& config, std::uint64_t seed);

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<RowMatrix> inputs;        // input to each affine layer
  std::vector<RowMatrix> pre_activations;
};

/// Rows of `inputs` are samples. Affine layers with LeakyReLU between them and
/// no output nonlinearity.
RowMatrix forward(const PredictorParams& params, const PredictorConfig& config,
                  const RowMatrix& inputs, ForwardCache* cache = nullptr);

/// Accumulates parameter gradients given d(loss)/d(output). `grads` is resized.
void backward(const PredictorParams& params, const PredictorConfig& config,
              const ForwardCache& cache, const RowMatrix& grad_output, PredictorParams& grads);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t max_steps = 6000;
  std::size_t lr_halving_period = 2000;
  std::size_t eval_period = 250;
  std::size_t early_stop_patience = 3;
  double early_stop_min_delta = 0.01;
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

/// Learning rate used for the update at zero-based step `step`.
double learning_rate_at(const TrainConfig& config, std::size_t step);

/// Decides when validation loss has stopped improving. An evaluation counts as
/// an improvement when it beats the reference loss by more than min_delta; the
/// reference then moves to that loss.
class EarlyStopping {
public:
  EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}
  /// Returns true when training should stop.
  bool update(double validation_loss);
  double reference() const { return reference_; }

private:
  std::size_t patience_;
  double min_delta_;
  double reference_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

class Adam {
public:
  Adam(const PredictorParams& shape_like, const TrainConfig& config);
  void step(PredictorParams& params, const PredictorParams& grads, double lr);

private:
  TrainConfig config_;
  PredictorParams m_, v_;
  std::size_t t_ = 0;
};

struct TrainLog {
  std::vector<std::size_t> eval_steps;
  std::vector<double> validation_loss;
  std::vector<double> train_loss;  // mean minibatch loss per step
  std::size_t steps_run = 0;
  bool early_stopped = false;

  nlohmann::json to_json() const;
};

struct TrainResult {
  PredictorParams params;
  TrainLog log;
};

/// Fits a probe on frozen representations over splits.train, early-stopping on
/// splits.val. OOD-flagged objects and batch.excluded_properties are ignored.
TrainResult train_probe(const SlotBatch& reps, const SceneBatch& scenes,
                        const SplitDefinition& splits, const PredictorConfig& predictor,
                        const TrainConfig& train, MatchingMode mode);

/// Mean matched loss per object over `indices` (OOD objects ignored).
double validation_loss(const PredictorParams& params, const PredictorConfig& config,
                       const SlotBatch& reps, const SceneBatch& scenes,
                       const std::vector<std::size_t>& indices, MatchingMode mode);

/// Per-object predictions for one scene, K' x P.
RowMatrix predict_scene(const PredictorParams& params, const PredictorConfig& config,
                        const SlotBatch& reps, std::size_t scene, std::size_t target_width);

struct PropertyScore {
  std::string property;
  std::string split;  // "ID", "OOD" or "all"
  bool categorical = false;
  /// Accuracy or R^2; empty when undefined (no objects, or zero variance).
  std::optional<double> value;
  std::size_t count = 0;
};

/// One object's ground truth and (if matched) the prediction assigned to it.
struct ObjectPrediction {
  std::vector<double> target;
  std::optional<std::vector<double>> prediction;
  bool ood = false;
};

/// Accuracy per categorical property (unmatched objects count as errors,
/// unlabeled rows skipped) and R^2 per numeric property pooled over matched
/// objects and dimensions, with SS_tot about the per-dimension ground-truth
/// mean. Scores for "all", "ID" and, when OOD objects exist, "OOD".
std::vector<PropertyScore> score_predictions(const PropertySchema& schema,
                                             const std::vector<std::string>& excluded,
                                             const std::vector<ObjectPrediction>& objects);

/// Matches every visible foreground object of one scene at test time.
Assignment match_for_evaluation(const RowMatrix& predictions, const SceneBatch& scenes,
                                const SlotBatch& reps, std::size_t scene,
                                const std::vector<std::size_t>& objects, MatchingMode mode);

std::vector<PropertyScore> evaluate_probe(const PredictorParams& params,
                                          const PredictorConfig& config, const SlotBatch& reps,
                                          const SceneBatch& scenes,
                                          const std::vector<std::size_t>& test_indices,
                                          MatchingMode mode);

enum class BaselineMode { AnalyticSlotwise, LearnedLossMatch, LearnedDeterministic };

const char* baseline_mode_name(BaselineMode mode);
BaselineMode baseline_mode_from_name(const std::string& name);

struct BaselineResult {
  std::uint64_t seed = 0;
  std::vector<PropertyScore> scores;
};

/// Constant-output baselines. The analytic mode predicts the per-dimension mean
/// and majority class of the test objects (one result). Learned modes fit a
/// constant vector of width P*num_slots through the selected matching, one
/// result per seed.
std::vector<BaselineResult> baseline_constant(const SceneBatch& scenes,
                                              const SplitDefinition& splits, BaselineMode mode,
                                              const std::vector<std::uint64_t>& seeds,
                                              const TrainConfig& train, std::size_t num_slots);

void save_params(const PredictorParams& params, const PredictorConfig& config,
                 const std::filesystem::path& dir);
std::pair<PredictorParams, PredictorConfig> load_params(const std::filesystem::path& dir);

nlohmann::json predictor_config_to_json(const PredictorConfig& config);
PredictorConfig predictor_config_from_json(const nlohmann::json& j);

}  // namespace oclb
