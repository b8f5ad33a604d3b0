#include "oclb/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "oclb/errors.hpp"
#include "oclb/rng.hpp"

namespace oclb {

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty set");
  const std::size_t n = values.size(), mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

/// Linear-interpolation percentile of sorted data, q in [0,1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string field(const Record& r, const std::string& name) {
  if (name == "dataset") return r.dataset;
  if (name == "model_tag") return r.model_tag;
  if (name == "seed") return std::to_string(r.seed);
  if (name == "shift") return r.shift;
  if (name == "split") return r.split;
  if (name == "key") return r.key;
  throw ConfigError("unknown group key '" + name + "'");
}

}  // namespace

std::pair<double, double> bootstrap_median_ci(const std::vector<double>& values,
                                              const BootstrapConfig& config) {
  if (values.empty()) throw ConfigError("bootstrap of an empty set");
  if (!(config.level > 0.0 && config.level < 1.0)) throw ConfigError("CI level must be in (0,1)");
  const double center = median(values);
  if (values.size() == 1 || config.resamples == 0) return {center, center};
  auto rng = make_rng(config.seed, values.size(), 21);
  std::vector<double> medians(config.resamples), sample(values.size());
  for (auto& m : medians) {
    for (auto& s : sample) s = values[rng() % values.size()];
    m = median(sample);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = 0.5 * (1.0 - config.level);
  // Clamped so the interval always brackets the point estimate.
  return {std::min(center, percentile_sorted(medians, alpha)),
          std::max(center, percentile_sorted(medians, 1.0 - alpha))};
}

std::vector<Aggregate> aggregate(const std::vector<Record>& records, const GroupKeys& keys,
                                 const BootstrapConfig& config) {
  std::map<std::vector<std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    std::vector<std::string> g;
    for (const auto& k : keys) g.push_back(field(r, k));
    groups[g].push_back(r.value);
  }
  std::vector<Aggregate> out;
  for (auto& [g, values] : groups) {
    // Order-independent input for the bootstrap.
    std::sort(values.begin(), values.end());
    Aggregate a;
    for (std::size_t i = 0; i < keys.size(); ++i) a.group[keys[i]] = g[i];
    a.count = values.size();
    a.median = median(values);
    std::tie(a.ci_low, a.ci_high) = bootstrap_median_ci(values, config);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::optional<Correlation> spearman(const std::vector<double>& xs, const std::vector<double>& ys,
                                    PValueMethod method) {
  if (xs.size() != ys.size()) throw ShapeError("spearman series differ in length");
  const std::size_t n = xs.size();
  if (n < 3) throw ConfigError("spearman needs at least 3 pairs");
  const auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  const auto rho = pearson(rx, ry);
  if (!rho) return std::nullopt;

  Correlation c;
  c.rho = *rho;
  c.n = n;
  if (method == PValueMethod::ExactPermutation) {
    if (n > 10) throw ConfigError("exact spearman p-values need n <= 10");
    std::sort(ry.begin(), ry.end());
    std::size_t total = 0, extreme = 0;
    do {
      ++total;
      if (std::abs(*pearson(rx, ry)) >= std::abs(c.rho) - 1e-12) ++extreme;
    } while (std::next_permutation(ry.begin(), ry.end()));
    c.p = static_cast<double>(extreme) / static_cast<double>(total);
  } else if (std::abs(c.rho) >= 1.0) {
    c.p = 0.0;
  } else {
    const double df = static_cast<double>(n - 2);
    const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
    const boost::math::students_t dist(df);
    c.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  }
  return c;
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

constexpr const char* kCsvHeader = "dataset,model_tag,seed,shift,split,key,value";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "'");
  }
  if (used != s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw FormatError("bad seed '" + s + "'");
  }
  if (used != s.size()) throw FormatError("bad seed '" + s + "'");
  return v;
}

/// The value as it reads back from its 9-digit rendering.
double rounded(double v) { return std::isfinite(v) ? std::stod(format_value(v)) : v; }

nlohmann::json number(double v) {
  if (!std::isfinite(v)) return format_value(v);
  return rounded(v);
}

double read_number(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

std::string records_to_csv(const std::vector<Record>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    out += csv_field(r.dataset) + ',' + csv_field(r.model_tag) + ',' + std::to_string(r.seed) +
           ',' + csv_field(r.shift) + ',' + csv_field(r.split) + ',' + csv_field(r.key) + ',' +
           format_value(r.value) + '\n';
  }
  return out;
}

std::vector<Record> records_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("CSV is missing its header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kCsvHeader) throw FormatError("unexpected CSV header '" + header + "'");
  std::vector<Record> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 7) throw FormatError("CSV row " + std::to_string(i) + " has " + std::to_string(row.size()) + " fields");
    out.push_back({row[0], row[1], parse_u64(row[2]), row[3], row[4], row[5], parse_double(row[6])});
  }
  return out;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    j["records"].push_back({{"dataset", r.dataset}, {"model_tag", r.model_tag}, {"seed", r.seed},
                            {"shift", r.shift}, {"split", r.split}, {"key", r.key},
                            {"value", number(r.value)}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    j["aggregates"].push_back({{"group", a.group}, {"count", a.count}, {"median", number(a.median)},
                               {"ci_low", number(a.ci_low)}, {"ci_high", number(a.ci_high)}});
  }
  j["correlations"] = nlohmann::json::array();
  for (const auto& c : report.correlations) {
    j["correlations"].push_back({{"x", c.x}, {"y", c.y}, {"rho", number(c.rho)},
                                 {"p", number(c.p)}, {"n", c.n}});
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    for (const auto& r : j.value("records", nlohmann::json::array())) {
      report.records.push_back({r.at("dataset").get<std::string>(), r.at("model_tag").get<std::string>(),
                                r.at("seed").get<std::uint64_t>(), r.at("shift").get<std::string>(),
                                r.at("split").get<std::string>(), r.at("key").get<std::string>(),
                                read_number(r.at("value"))});
    }
    for (const auto& a : j.value("aggregates", nlohmann::json::array())) {
      report.aggregates.push_back({a.at("group").get<std::map<std::string, std::string>>(),
                                   a.at("count").get<std::size_t>(), read_number(a.at("median")),
                                   read_number(a.at("ci_low")), read_number(a.at("ci_high"))});
    }
    for (const auto& c : j.value("correlations", nlohmann::json::array())) {
      report.correlations.push_back({c.at("x").get<std::string>(), c.at("y").get<std::string>(),
                                     read_number(c.at("rho")), read_number(c.at("p")),
                                     c.at("n").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

void emit(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == ReportFormat::Csv) {
    out << records_to_csv(report.records);
  } else {
    out << report_to_json(report).dump(2) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() == ".json") {
    try {
      return report_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  EvalReport report;
  report.records = records_from_csv(text);
  return report;
}

}  // namespace oclb
