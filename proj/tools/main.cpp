#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "oclb/errors.hpp"
#include "oclb/parallel.hpp"

namespace {

using namespace oclb;
using namespace oclb::cli;

const std::map<std::string, std::pair<std::string, std::function<void(const RunContext&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<void(const RunContext&)>>> table{
      {"gen-synth", {"Generate a synthetic dataset and mock-encoder slots", run_gen_synth}},
      {"apply-shift", {"Apply a distribution shift to a dataset", run_apply_shift}},
      {"eval-metrics", {"Per-scene MSE / ARI / SC / mSC", run_eval_metrics}},
      {"train-probe", {"Train a property-prediction probe", run_train_probe}},
      {"eval-probe", {"Score a trained probe on a split", run_eval_probe}},
      {"baseline", {"Constant-output baselines", run_baseline}},
      {"correlate", {"Spearman correlations between report keys", run_correlate}},
      {"report", {"Median and bootstrap CI aggregation", run_report}},
  };
  return table;
}

std::size_t env_threads() {
  const char* v = std::getenv("OCLB_THREADS");
  if (!v || !*v) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(v));
  } catch (const std::exception&) {
    throw ConfigError(std::string("OCLB_THREADS is not a number: ") + v);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-centric evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string selected;

  for (const auto& [name, entry] : commands()) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--threads", threads, "Worker threads (default: OCLB_THREADS or all cores)");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--set", overrides, "Dotted override key=value (repeatable)");
    sub->callback([&selected, n = name] { selected = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (argc > 1 && !commands().count(argv[1])) std::cerr << app.help();
    return 1;
  }

  try {
    RunContext ctx;
    ctx.command = selected;
    ctx.config = config_path.empty() ? json::object() : load_config(config_path);
    for (const auto& o : overrides) apply_override(ctx.config, o);
    ctx.seed = seed ? *seed : get_or<std::uint64_t>(ctx.config, "seed", 0);
    ctx.out = out_dir;
    set_thread_count(threads ? *threads : env_threads());
    prepare_output(ctx);
    commands().at(selected).second(ctx);
    write_run_record(ctx);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
