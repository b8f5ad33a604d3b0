#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "config.hpp"

namespace oclb::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunContext {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void run_gen_synth(const RunContext& ctx);
void run_apply_shift(const RunContext& ctx);
void run_eval_metrics(const RunContext& ctx);
void run_train_probe(const RunContext& ctx);
void run_eval_probe(const RunContext& ctx);
void run_baseline(const RunContext& ctx);
void run_correlate(const RunContext& ctx);
void run_report(const RunContext& ctx);

void prepare_output(const RunContext& ctx);

/// run.json: subcommand, seed, effective config, its hash and the tool version.
void write_run_record(const RunContext& ctx);

}  // namespace oclb::cli
