#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oclb {

struct Record {
  std::string dataset;
  std::string model_tag;
  std::uint64_t seed = 0;
  std::string shift = "none";
  std::string split = "all";  // ID, OOD or all
  std::string key;            // metric or property name
  double value = 0.0;
  bool operator==(const Record&) const = default;
};

/// Grouping fields: any of dataset, model_tag, seed, shift, split, key.
using GroupKeys = std::vector<std::string>;

struct Aggregate {
  std::map<std::string, std::string> group;
  std::size_t count = 0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool operator==(const Aggregate&) const = default;
};

struct BootstrapConfig {
  std::size_t resamples = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

double median(std::vector<double> values);

/// Percentile-bootstrap CI of the median.
std::pair<double, double> bootstrap_median_ci(const std::vector<double>& values,
                                              const BootstrapConfig& config);

/// One aggregate per non-empty group, ordered by group values.
std::vector<Aggregate> aggregate(const std::vector<Record>& records, const GroupKeys& keys,
                                 const BootstrapConfig& config = {});

struct Correlation {
  std::string x, y;
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  bool operator==(const Correlation&) const = default;
};

enum class PValueMethod { TApproximation, ExactPermutation };

/// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Spearman rho and two-sided p. nullopt when either series is constant.
/// The exact mode enumerates all permutations and needs n <= 10.
std::optional<Correlation> spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                                    PValueMethod method = PValueMethod::TApproximation);

struct EvalReport {
  std::vector<Record> records;
  std::vector<Aggregate> aggregates;
  std::vector<Correlation> correlations;
  bool operator==(const EvalReport&) const = default;
};

/// "%.9g" rendering shared by every emitter.
std::string format_value(double v);

std::string records_to_csv(const std::vector<Record>& records);
std::vector<Record> records_from_csv(const std::string& text);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { Csv, Json };

/// CSV holds the records only; JSON holds the whole report.
void emit(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace oclb
