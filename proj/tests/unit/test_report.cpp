#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oclb/report.hpp"
#include "oracles.hpp"

using namespace oclb;

namespace {

std::vector<Record> sample_records() {
  std::vector<Record> r;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const char* split : {"ID", "OOD"}) {
      r.push_back({"synthetic", "mock", seed, "crop", split, "shape", u(rng)});
    }
    r.push_back({"synthetic", "mock,\"quoted\"", seed, "none", "all", "ARI", u(rng)});
  }
  return r;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("median and bootstrap CI") {
  CHECK(median({4}) == 4);
  CHECK(median({5, 1, 4, 2, 3}) == 3);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK_THROWS_AS(median({}), ConfigError);
  const auto one = bootstrap_median_ci({0.7}, {});
  CHECK(one.first == 0.7);
  CHECK(one.second == 0.7);

  BootstrapConfig cfg;
  cfg.resamples = 2000;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(2 + static_cast<std::size_t>(t));
    for (auto& x : v) x = nd(rng);
    const auto [lo, hi] = bootstrap_median_ci(v, cfg);
    const double m = median(v);
    CHECK(lo <= m);
    CHECK(m <= hi);
    CHECK(lo >= *std::min_element(v.begin(), v.end()));
    CHECK(hi <= *std::max_element(v.begin(), v.end()));
  }
}

TEST_CASE("aggregate groups records and ignores their order") {
  auto records = sample_records();
  const auto a = aggregate(records, {"shift", "split", "key"});
  REQUIRE(a.size() == 3);
  CHECK(a[0].group.at("shift") == "crop");
  CHECK(a[0].group.at("split") == "ID");
  CHECK(a[0].count == 10);
  for (const auto& g : a) {
    CHECK(g.ci_low <= g.median);
    CHECK(g.median <= g.ci_high);
  }
  std::reverse(records.begin(), records.end());
  CHECK(aggregate(records, {"shift", "split", "key"}) == a);
  CHECK_THROWS_AS(aggregate(records, {"colour"}), ConfigError);
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 3, 2, 5, 4};
  const auto golden_rho = oracle::spearman_rho(x, y);  // 0.8 from the rank-Pearson oracle
  CHECK(golden_rho == doctest::Approx(0.8).epsilon(1e-15));
  const auto c = *spearman(x, y);
  CHECK(c.rho == doctest::Approx(golden_rho).epsilon(1e-12));
  CHECK(c.p == doctest::Approx(0.10408803866182788).epsilon(1e-9));
  CHECK(c.n == 5);

  const auto exact = *spearman(x, y, PValueMethod::ExactPermutation);
  CHECK(exact.p == doctest::Approx(16.0 / 120.0).epsilon(1e-12));

  const auto same = *spearman(x, x);
  CHECK(same.rho == 1.0);
  CHECK(same.p == 0.0);
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  CHECK(spearman(x, neg)->rho == -1.0);

  CHECK_FALSE(spearman(x, {2, 2, 2, 2, 2}).has_value());
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), ConfigError);
  CHECK_THROWS_AS(spearman({1, 2, 3}, {1, 2}), ShapeError);

  SUBCASE("invariance under increasing transforms and tie handling") {
    std::vector<double> ex(x.size());
    std::transform(x.begin(), x.end(), ex.begin(), [](double v) { return std::exp(3 * v); });
    CHECK(spearman(ex, y)->rho == doctest::Approx(c.rho).epsilon(1e-12));
    const std::vector<double> tx{1, 1, 2, 3, 3, 3}, ty{4, 2, 2, 9, 1, 5};
    CHECK(average_ranks(tx) == oracle::ranks(tx));
    CHECK(spearman(tx, ty)->rho == doctest::Approx(oracle::spearman_rho(tx, ty)).epsilon(1e-12));
  }
  SUBCASE("p decreases in |rho| at fixed n") {
    const std::vector<double> base{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<std::vector<double>> ys{{8, 7, 6, 5, 4, 3, 2, 1}, {2, 1, 4, 3, 6, 5, 8, 7},
                                              {3, 1, 2, 6, 4, 5, 8, 7}, {1, 8, 2, 7, 3, 6, 4, 5}};
    std::vector<std::pair<double, double>> pts;
    for (const auto& v : ys) {
      const auto r = *spearman(base, v);
      pts.emplace_back(std::abs(r.rho), r.p);
    }
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].second <= pts[i - 1].second);
  }
}

TEST_CASE("csv and json serialization") {
  CHECK(records_to_csv({}) == "dataset,model_tag,seed,shift,split,key,value\n");
  CHECK(format_value(1.0 / 3.0) == "0.333333333");
  auto records = sample_records();
  for (auto& r : records) r.value = std::stod(format_value(r.value));
  CHECK(records_from_csv(records_to_csv(records)) == records);

  EvalReport rep;
  rep.records = records;
  rep.aggregates = aggregate(records, {"key"}, {500, 0.95, 1});
  rep.correlations.push_back({"ARI", "shape", 0.5, 0.25, 10});
  const auto back = report_from_json(report_to_json(rep));
  CHECK(back.records == rep.records);
  CHECK(back.correlations == rep.correlations);
  REQUIRE(back.aggregates.size() == rep.aggregates.size());
  for (std::size_t i = 0; i < back.aggregates.size(); ++i) {
    CHECK(back.aggregates[i].group == rep.aggregates[i].group);
    CHECK(back.aggregates[i].median == doctest::Approx(rep.aggregates[i].median).epsilon(1e-8));
  }

  fixtures::TempDir dir;
  emit(rep, ReportFormat::Json, dir / "a.json");
  emit(rep, ReportFormat::Json, dir / "b.json");
  emit(rep, ReportFormat::Csv, dir / "a.csv");
  emit(rep, ReportFormat::Csv, dir / "b.csv");
  CHECK(fixtures::read_bytes(dir / "a.json") == fixtures::read_bytes(dir / "b.json"));
  CHECK(fixtures::read_bytes(dir / "a.csv") == fixtures::read_bytes(dir / "b.csv"));
  CHECK(load_report(dir / "a.csv").records == records);
  CHECK(load_report(dir / "a.json").correlations == rep.correlations);
  CHECK_THROWS_AS(emit(rep, ReportFormat::Csv, dir / "missing" / "x.csv"), IoError);
}

}  // TEST_SUITE
