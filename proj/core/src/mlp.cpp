#include <cmath>
#include <fstream>

#include "oclb/probe.hpp"
#include "oclb/rng.hpp"

namespace oclb {

using nlohmann::json;

const char* matching_mode_name(MatchingMode mode) {
  switch (mode) {
    case MatchingMode::Mask: return "mask";
    case MatchingMode::Loss: return "loss";
    case MatchingMode::Deterministic: return "deterministic";
  }
  return "?";
}

MatchingMode matching_mode_from_name(const std::string& name) {
  if (name == "mask") return MatchingMode::Mask;
  if (name == "loss") return MatchingMode::Loss;
  if (name == "deterministic") return MatchingMode::Deterministic;
  throw ConfigError("unknown matching mode '" + name + "'");
}

PredictorConfig make_predictor_config(const SlotBatch& reps, const PropertySchema& schema,
                                      std::size_t hidden_layers) {
  PredictorConfig c;
  c.hidden_layers = hidden_layers;
  c.distributed = reps.distributed;
  c.virtual_slots = reps.distributed ? reps.virtual_slots : 1;
  c.input_width = reps.slot_width();
  c.output_width = schema.total_width() * c.virtual_slots;
  validate_config(c);
  return c;
}

void validate_config(const PredictorConfig& c) {
  if (c.hidden_layers > 3) throw ConfigError("hidden_layers must be in {0,1,2,3}");
  if (c.hidden_layers > 0 && c.hidden_width == 0) throw ConfigError("hidden_width must be positive");
  if (c.output_width == 0) throw ConfigError("output width must be positive");
  if (c.virtual_slots == 0) throw ConfigError("virtual_slots must be positive");
  if (c.output_width % c.virtual_slots != 0) {
    throw ConfigError("output width is not a multiple of virtual_slots");
  }
  if (!c.distributed && c.virtual_slots != 1) {
    throw ConfigError("slot-wise predictors decode exactly one object per slot");
  }
}

std::size_t PredictorParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

bool PredictorParams::operator==(const PredictorParams& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() || weights[l] != other.weights[l]) {
      return false;
    }
    if (biases[l].size() != other.biases[l].size() || biases[l] != other.biases[l]) return false;
  }
  return true;
}

namespace {

std::vector<std::size_t> layer_widths(const PredictorConfig& c) {
  std::vector<std::size_t> widths{c.input_width};
  for (std::size_t h = 0; h < c.hidden_layers; ++h) widths.push_back(c.hidden_width);
  widths.push_back(c.output_width);
  return widths;
}

}  // namespace

PredictorParams init_params(const PredictorConfig& config, std::uint64_t seed) {
  validate_config(config);
  const auto widths = layer_widths(config);
  auto rng = make_rng(seed, 0, 0x1417);
  PredictorParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    const double bound = in > 0 ? 1.0 / std::sqrt(static_cast<double>(in)) : 1.0;
    RowMatrix w(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) w(r, c) = uniform(rng, -bound, bound);
    }
    Vector b(out);
    for (Eigen::Index r = 0; r < out; ++r) b(r) = uniform(rng, -bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

RowMatrix forward(const PredictorParams& params, const PredictorConfig& config,
                  const RowMatrix& inputs, ForwardCache* cache) {
  if (inputs.cols() != static_cast<Eigen::Index>(config.input_width)) {
    throw ShapeError("forward: input width " + std::to_string(inputs.cols()) + ", expected " +
                     std::to_string(config.input_width));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  RowMatrix x = inputs;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    RowMatrix z(x.rows(), params.weights[l].rows());
    if (x.cols() > 0) {
      z.noalias() = x * params.weights[l].transpose();
    } else {
      z.setZero();
    }
    z.rowwise() += params.biases[l].transpose();
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(z);
    }
    if (l + 1 < layers) {
      const double slope = config.leaky_slope;
      x = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    } else {
      x = std::move(z);
    }
  }
  return x;
}

void backward(const PredictorParams& params, const PredictorConfig& config,
              const ForwardCache& cache, const RowMatrix& grad_output, PredictorParams& grads) {
  const std::size_t layers = params.weights.size();
  if (cache.inputs.size() != layers) throw ShapeError("backward: cache does not match params");
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  RowMatrix delta = grad_output;
  for (std::size_t li = layers; li-- > 0;) {
    if (li + 1 < layers) {
      const auto& z = cache.pre_activations[li];
      const double slope = config.leaky_slope;
      delta = delta.cwiseProduct(z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    }
    grads.weights[li].noalias() = delta.transpose() * cache.inputs[li];
    grads.biases[li] = delta.colwise().sum().transpose();
    if (li > 0) {
      RowMatrix next = delta * params.weights[li];
      delta = std::move(next);
    }
  }
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.lr_halving_period == 0) throw ConfigError("lr_halving_period must be positive");
  if (c.eval_period == 0) throw ConfigError("eval_period must be positive");
  if (c.early_stop_patience == 0) throw ConfigError("early_stop_patience must be at least 1");
  if (!(c.early_stop_min_delta >= 0.0)) throw ConfigError("early_stop_min_delta must be >= 0");
}

double learning_rate_at(const TrainConfig& config, std::size_t step) {
  return config.learning_rate *
         std::ldexp(1.0, -static_cast<int>(step / config.lr_halving_period));
}

bool EarlyStopping::update(double loss) {
  if (reference_ - loss > min_delta_) {
    reference_ = loss;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

Adam::Adam(const PredictorParams& like, const TrainConfig& config) : config_(config) {
  for (const auto& w : like.weights) {
    m_.weights.push_back(RowMatrix::Zero(w.rows(), w.cols()));
    v_.weights.push_back(RowMatrix::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : like.biases) {
    m_.biases.push_back(Vector::Zero(b.size()));
    v_.biases.push_back(Vector::Zero(b.size()));
  }
}

void Adam::step(PredictorParams& params, const PredictorParams& grads, double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
    update(params.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
  }
}

json TrainLog::to_json() const {
  return {{"eval_steps", eval_steps},
          {"validation_loss", validation_loss},
          {"steps_run", steps_run},
          {"early_stopped", early_stopped},
          {"final_train_loss", train_loss.empty() ? 0.0 : train_loss.back()}};
}

json predictor_config_to_json(const PredictorConfig& c) {
  return {{"hidden_layers", c.hidden_layers}, {"hidden_width", c.hidden_width},
          {"leaky_slope", c.leaky_slope},     {"input_width", c.input_width},
          {"output_width", c.output_width},   {"distributed", c.distributed},
          {"virtual_slots", c.virtual_slots}};
}

PredictorConfig predictor_config_from_json(const json& j) {
  PredictorConfig c;
  try {
    c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
    c.hidden_width = j.value("hidden_width", std::size_t{256});
    c.leaky_slope = j.value("leaky_slope", 0.01);
    c.input_width = j.at("input_width").get<std::size_t>();
    c.output_width = j.at("output_width").get<std::size_t>();
    c.distributed = j.value("distributed", false);
    c.virtual_slots = j.value("virtual_slots", std::size_t{1});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed predictor config: ") + e.what());
  }
  validate_config(c);
  return c;
}

void save_params(const PredictorParams& params, const PredictorConfig& config,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    Tensor<double> wt({static_cast<std::size_t>(w.rows()), static_cast<std::size_t>(w.cols())});
    std::copy(w.data(), w.data() + w.size(), wt.data.begin());
    write_tensor(dir / ("layer" + std::to_string(l) + "_weight.ocbt"), wt);
    const auto& b = params.biases[l];
    Tensor<double> bt({static_cast<std::size_t>(b.size())});
    std::copy(b.data(), b.data() + b.size(), bt.data.begin());
    write_tensor(dir / ("layer" + std::to_string(l) + "_bias.ocbt"), bt);
  }
  json sidecar = predictor_config_to_json(config);
  sidecar["num_layers"] = params.weights.size();
  std::ofstream out(dir / "predictor.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "predictor.json").string());
  out << sidecar.dump(2) << '\n';
}

std::pair<PredictorParams, PredictorConfig> load_params(const std::filesystem::path& dir) {
  std::ifstream in(dir / "predictor.json");
  if (!in) throw IoError("cannot open " + (dir / "predictor.json").string());
  json sidecar;
  try {
    sidecar = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed predictor.json: ") + e.what());
  }
  const auto config = predictor_config_from_json(sidecar);
  const auto layers = sidecar.value("num_layers", config.hidden_layers + 1);
  PredictorParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto wt = read_tensor<double>(dir / ("layer" + std::to_string(l) + "_weight.ocbt"));
    const auto bt = read_tensor<double>(dir / ("layer" + std::to_string(l) + "_bias.ocbt"));
    if (wt.ndim() != 2 || bt.ndim() != 1 || bt.dim(0) != wt.dim(0)) {
      throw FormatError("layer " + std::to_string(l) + " tensors have inconsistent shapes");
    }
    RowMatrix w(static_cast<Eigen::Index>(wt.dim(0)), static_cast<Eigen::Index>(wt.dim(1)));
    std::copy(wt.data.begin(), wt.data.end(), w.data());
    Vector b(static_cast<Eigen::Index>(bt.dim(0)));
    std::copy(bt.data.begin(), bt.data.end(), b.data());
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return {std::move(p), config};
}

}  // namespace oclb
