#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

#include "oclb/metrics.hpp"
#include "oclb/probe.hpp"
#include "oclb/report.hpp"
#include "oclb/scene_data.hpp"
#include "oclb/shifts.hpp"
#include "oclb/synthgen.hpp"

namespace oclb::cli {

namespace fs = std::filesystem;

namespace {

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  make_dirs(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path input_path(const RunContext& ctx, const std::string& key) {
  return fs::path(require_string(ctx.config, key));
}

std::string shift_tag(const DatasetManifest& m) { return m.shift ? m.shift->kind : "none"; }

SplitDefinition resolve_splits(const RunContext& ctx, const DatasetManifest& manifest) {
  if (manifest.splits && !lookup(ctx.config, "splits")) return *manifest.splits;
  SplitSizes sizes;
  sizes.train = get_or<std::size_t>(ctx.config, "splits.train", sizes.train);
  sizes.val = get_or<std::size_t>(ctx.config, "splits.val", sizes.val);
  sizes.test = get_or<std::size_t>(ctx.config, "splits.test", sizes.test);
  return make_splits(manifest, sizes, ctx.seed);
}

TrainConfig train_config(const RunContext& ctx) {
  TrainConfig t;
  t.learning_rate = get_or(ctx.config, "train.learning_rate", t.learning_rate);
  t.batch_size = get_or(ctx.config, "train.batch_size", t.batch_size);
  t.max_steps = get_or(ctx.config, "train.max_steps", t.max_steps);
  t.lr_halving_period = get_or(ctx.config, "train.lr_halving_period", t.lr_halving_period);
  t.eval_period = get_or(ctx.config, "train.eval_period", t.eval_period);
  t.early_stop_patience = get_or(ctx.config, "train.early_stop_patience", t.early_stop_patience);
  t.early_stop_min_delta = get_or(ctx.config, "train.early_stop_min_delta", t.early_stop_min_delta);
  t.seed = ctx.seed;
  validate_train_config(t);
  return t;
}

std::vector<Record> score_records(const std::vector<PropertyScore>& scores,
                                  const DatasetManifest& manifest, const std::string& model_tag,
                                  std::uint64_t seed) {
  std::vector<Record> out;
  for (const auto& s : scores) {
    if (!s.value) continue;
    out.push_back({manifest.name, model_tag, seed, shift_tag(manifest), s.split, s.property, *s.value});
  }
  return out;
}

}  // namespace

void prepare_output(const RunContext& ctx) { make_dirs(ctx.out); }

void write_run_record(const RunContext& ctx) {
  json record = {{"subcommand", ctx.command},
                 {"seed", ctx.seed},
                 {"config", ctx.config},
                 {"config_hash", config_hash(ctx.config)},
                 {"tool_version", kToolVersion}};
  write_json(ctx.out / "run.json", record);
}

void run_gen_synth(const RunContext& ctx) {
  SynthConfig sc;
  sc.num_scenes = get_or(ctx.config, "synth.num_scenes", sc.num_scenes);
  sc.height = get_or(ctx.config, "synth.height", sc.height);
  sc.width = get_or(ctx.config, "synth.width", sc.width);
  sc.min_objects = get_or(ctx.config, "synth.min_objects", sc.min_objects);
  sc.max_objects = get_or(ctx.config, "synth.max_objects", sc.max_objects);
  sc.scale_steps = get_or(ctx.config, "synth.scale_steps", sc.scale_steps);
  sc.size_factor = get_or(ctx.config, "synth.size_factor", sc.size_factor);
  sc.seed = ctx.seed;
  const auto batch = generate_scenes(sc);

  DatasetManifest manifest;
  manifest.name = get_or<std::string>(ctx.config, "synth.name", "synthetic");
  if (lookup(ctx.config, "splits")) {
    SplitSizes sizes{get_or<std::size_t>(ctx.config, "splits.train", 0),
                     get_or<std::size_t>(ctx.config, "splits.val", 0),
                     get_or<std::size_t>(ctx.config, "splits.test", 0)};
    manifest.splits = make_splits(batch.size(), sizes, ctx.seed);
  }
  save_dataset(batch, ctx.out / "dataset", manifest);

  if (get_or(ctx.config, "mock.enabled", true)) {
    MockEncoderConfig mc;
    mc.num_slots = get_or(ctx.config, "mock.num_slots", sc.max_objects + 1);
    mc.latent_width = get_or(ctx.config, "mock.latent_width", mc.latent_width);
    mc.noise = get_or(ctx.config, "mock.noise", mc.noise);
    mc.mask_noise = get_or(ctx.config, "mock.mask_noise", mc.mask_noise);
    mc.blur_radius = get_or(ctx.config, "mock.blur_radius", mc.blur_radius);
    mc.permute_slots = get_or(ctx.config, "mock.permute_slots", mc.permute_slots);
    mc.corrupt_objects_per_scene =
        get_or(ctx.config, "mock.corrupt_objects_per_scene", mc.corrupt_objects_per_scene);
    mc.distributed = get_or(ctx.config, "mock.distributed", mc.distributed);
    mc.seed = ctx.seed;
    auto encoding = mock_encode(batch, mc);
    save_slots(encoding.slots, ctx.out / "slots");
  }
}

void run_apply_shift(const RunContext& ctx) {
  const auto dataset = load_dataset(input_path(ctx, "input.dataset"));
  const auto kind = shift_kind_from_name(require_string(ctx.config, "shift.kind"));
  const auto preset = get_or<std::string>(ctx.config, "shift.preset", dataset.manifest.name);
  auto spec = make_shift_spec(kind, preset, ctx.seed);
  spec.occluder_fraction = get_or(ctx.config, "shift.occluder_fraction", spec.occluder_fraction);
  spec.occlusion_candidates = get_or(ctx.config, "shift.occlusion_candidates", spec.occlusion_candidates);
  spec.crop_fraction = get_or(ctx.config, "shift.crop_fraction", spec.crop_fraction);
  spec.shape_max_foreground = get_or(ctx.config, "shift.max_foreground", spec.shape_max_foreground);

  const auto result = apply_shift(dataset.batch, spec);
  DatasetManifest manifest = dataset.manifest;
  manifest.shift = result.metadata;
  if (manifest.splits) {
    // Renumber split indices through the kept scenes.
    std::vector<std::int64_t> remap(dataset.batch.size(), -1);
    for (std::size_t i = 0; i < result.source_index.size(); ++i) {
      remap[result.source_index[i]] = static_cast<std::int64_t>(i);
    }
    auto renumber = [&](const std::vector<std::size_t>& in) {
      std::vector<std::size_t> out;
      for (auto i : in) {
        if (remap[i] >= 0) out.push_back(static_cast<std::size_t>(remap[i]));
      }
      return out;
    };
    manifest.splits = SplitDefinition{renumber(manifest.splits->train), renumber(manifest.splits->val),
                                      renumber(manifest.splits->test)};
  }
  save_dataset(result.batch, ctx.out / "dataset", manifest);

  json log = {{"kind", shift_kind_name(kind)},
              {"source_index", result.source_index},
              {"skipped", result.skipped}};
  if (kind == ShiftKind::Occlusion) {
    json occ = json::array();
    for (const auto& l : result.occlusion_logs) {
      if (!l) continue;
      occ.push_back({{"candidates", l->candidates},
                     {"foreground_overlap", l->foreground_overlap},
                     {"chosen", l->chosen}});
    }
    log["occlusion"] = occ;
  }
  write_json(ctx.out / "shift_log.json", log);
}

void run_eval_metrics(const RunContext& ctx) {
  const auto dataset = load_dataset(input_path(ctx, "input.dataset"));
  const auto& scenes = dataset.batch;
  SlotBatch slots;
  if (lookup(ctx.config, "input.slots")) {
    slots = load_slots(input_path(ctx, "input.slots"));
  } else {
    // Ground-truth masks as predictions: an oracle self-evaluation.
    slots.slots = Tensor<float>({scenes.size(), scenes.max_objects(), 0});
    slots.pred_masks = Tensor<float>(Shape{scenes.size(), scenes.max_objects(), scenes.height(), scenes.width()});
    for (std::size_t i = 0; i < scenes.gt_masks.numel(); ++i) {
      slots.pred_masks.data[i] = static_cast<float>(scenes.gt_masks.data[i]);
    }
    slots.recon = scenes.images;
  }
  std::vector<std::string> default_selection{"ARI", "SC", "mSC"};
  if (slots.recon) default_selection.insert(default_selection.begin(), "MSE");
  std::vector<Metric> selection;
  for (const auto& name : get_list(ctx.config, "metrics.selection", default_selection)) {
    selection.push_back(metric_from_name(name));
  }
  const auto records = batch_metrics(scenes, slots, selection);

  std::string per_scene = "scene_index,metric,value,skipped\n";
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : records) {
    per_scene += std::to_string(r.scene_index) + ',' + metric_name(r.metric) + ',' +
                 (r.skipped ? std::string() : format_value(r.value)) + ',' + (r.skipped ? "1" : "0") + '\n';
    if (!r.skipped) values[metric_name(r.metric)].push_back(r.value);
  }
  write_text(ctx.out / "scene_metrics.csv", per_scene);

  const auto model_tag = get_or<std::string>(ctx.config, "report.model_tag", "model");
  EvalReport report;
  std::vector<Record> per_scene_records;
  for (auto metric : selection) {
    const auto& v = values[metric_name(metric)];
    if (v.empty()) continue;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    report.records.push_back({dataset.manifest.name, model_tag, ctx.seed, shift_tag(dataset.manifest), "all",
                              metric_name(metric), mean});
    for (double x : v) {
      per_scene_records.push_back({dataset.manifest.name, model_tag, ctx.seed,
                                   shift_tag(dataset.manifest), "all", metric_name(metric), x});
    }
  }
  BootstrapConfig bc;
  bc.seed = ctx.seed;
  bc.resamples = get_or(ctx.config, "bootstrap.resamples", bc.resamples);
  report.aggregates = aggregate(per_scene_records, {"key"}, bc);
  emit(report, ReportFormat::Csv, ctx.out / "metrics.csv");
  emit(report, ReportFormat::Json, ctx.out / "report.json");
}

void run_train_probe(const RunContext& ctx) {
  const auto dataset = load_dataset(input_path(ctx, "input.dataset"));
  const auto slots = load_slots(input_path(ctx, "input.slots"));
  const auto splits = resolve_splits(ctx, dataset.manifest);
  auto config = make_predictor_config(slots, dataset.batch.schema,
                                      get_or<std::size_t>(ctx.config, "probe.hidden_layers", 1));
  config.hidden_width = get_or(ctx.config, "probe.hidden_width", config.hidden_width);
  validate_config(config);
  const auto mode = matching_mode_from_name(
      get_or<std::string>(ctx.config, "probe.matching", slots.distributed ? "deterministic" : "mask"));
  const auto result = train_probe(slots, dataset.batch, splits, config, train_config(ctx), mode);
  save_params(result.params, config, ctx.out / "params");
  json log = result.log.to_json();
  log["matching"] = matching_mode_name(mode);
  write_json(ctx.out / "train_log.json", log);
}

void run_eval_probe(const RunContext& ctx) {
  const auto dataset = load_dataset(input_path(ctx, "input.dataset"));
  const auto slots = load_slots(input_path(ctx, "input.slots"));
  const auto [params, config] = load_params(input_path(ctx, "input.params"));
  const auto splits = resolve_splits(ctx, dataset.manifest);
  const auto mode = matching_mode_from_name(
      get_or<std::string>(ctx.config, "probe.matching", slots.distributed ? "deterministic" : "mask"));
  const auto which = get_or<std::string>(ctx.config, "probe.split", "test");
  const auto& indices = which == "train" ? splits.train : which == "val" ? splits.val : splits.test;
  const auto scores = evaluate_probe(params, config, slots, dataset.batch, indices, mode);
  EvalReport report;
  report.records = score_records(scores, dataset.manifest,
                                 get_or<std::string>(ctx.config, "report.model_tag", "model"), ctx.seed);
  emit(report, ReportFormat::Csv, ctx.out / "scores.csv");
  emit(report, ReportFormat::Json, ctx.out / "report.json");
}

void run_baseline(const RunContext& ctx) {
  const auto dataset = load_dataset(input_path(ctx, "input.dataset"));
  const auto splits = resolve_splits(ctx, dataset.manifest);
  const auto mode = baseline_mode_from_name(
      get_or<std::string>(ctx.config, "baseline.mode", "analytic_slotwise"));
  std::vector<std::uint64_t> seeds;
  if (const json* s = lookup(ctx.config, "baseline.seeds"); s && s->is_array()) {
    seeds = s->get<std::vector<std::uint64_t>>();
  } else {
    const auto count = get_or<std::size_t>(ctx.config, "baseline.num_seeds", 10);
    for (std::size_t i = 0; i < count; ++i) seeds.push_back(ctx.seed + i);
  }
  const auto num_slots = get_or<std::size_t>(ctx.config, "baseline.num_slots", dataset.batch.max_objects());
  const auto results = baseline_constant(dataset.batch, splits, mode, seeds, train_config(ctx), num_slots);
  EvalReport report;
  for (const auto& r : results) {
    auto recs = score_records(r.scores, dataset.manifest, baseline_mode_name(mode),
                              mode == BaselineMode::AnalyticSlotwise ? ctx.seed : r.seed);
    report.records.insert(report.records.end(), recs.begin(), recs.end());
  }
  emit(report, ReportFormat::Csv, ctx.out / "baseline.csv");
}

namespace {

std::vector<Record> load_inputs(const RunContext& ctx) {
  std::vector<Record> records;
  const auto inputs = get_list(ctx.config, "input.reports", {});
  if (inputs.empty()) throw ConfigError("input.reports lists no report files");
  for (const auto& path : inputs) {
    auto r = load_report(path).records;
    records.insert(records.end(), r.begin(), r.end());
  }
  return records;
}

}  // namespace

void run_correlate(const RunContext& ctx) {
  const auto records = load_inputs(ctx);
  const auto split = get_or<std::string>(ctx.config, "correlate.split", "all");
  const auto method = get_or<std::string>(ctx.config, "correlate.method", "t") == "exact"
                          ? PValueMethod::ExactPermutation
                          : PValueMethod::TApproximation;
  using RunKey = std::tuple<std::string, std::string, std::uint64_t, std::string>;
  std::map<RunKey, std::map<std::string, double>> runs;
  for (const auto& r : records) {
    if (r.split == split) runs[{r.dataset, r.model_tag, r.seed, r.shift}][r.key] = r.value;
  }
  EvalReport report;
  for (const auto& pair : get_list(ctx.config, "correlate.pairs", {})) {
    const auto colon = pair.find(':');
    if (colon == std::string::npos) throw ConfigError("correlation pair '" + pair + "' must be x:y");
    const std::string x = pair.substr(0, colon), y = pair.substr(colon + 1);
    std::vector<double> xs, ys;
    for (const auto& [key, values] : runs) {
      const auto ix = values.find(x), iy = values.find(y);
      if (ix != values.end() && iy != values.end()) {
        xs.push_back(ix->second);
        ys.push_back(iy->second);
      }
    }
    if (xs.size() < 3) throw ConfigError("pair " + pair + " has fewer than 3 paired runs");
    if (auto c = spearman(xs, ys, method)) {
      c->x = x;
      c->y = y;
      report.correlations.push_back(*c);
    }
  }
  emit(report, ReportFormat::Json, ctx.out / "correlations.json");
}

void run_report(const RunContext& ctx) {
  EvalReport report;
  report.records = load_inputs(ctx);
  BootstrapConfig bc;
  bc.seed = ctx.seed;
  bc.resamples = get_or(ctx.config, "bootstrap.resamples", bc.resamples);
  const auto keys = get_list(ctx.config, "report.group_by", {"dataset", "model_tag", "shift", "split", "key"});
  report.aggregates = aggregate(report.records, keys, bc);
  emit(report, ReportFormat::Json, ctx.out / "report.json");
  emit(report, ReportFormat::Csv, ctx.out / "records.csv");
}

}  // namespace oclb::cli
