// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oclb/loss.hpp"
#include "oclb/matching.hpp"
#include "oclb/metrics.hpp"
#include "oclb/probe.hpp"
#include "oclb/report.hpp"
#include "oclb/shifts.hpp"
#include "oclb/synthgen.hpp"
#include "oracles.hpp"

using namespace oclb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng() % static_cast<unsigned>(k));
  return v;
}

RowMatrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  }
  return m;
}

std::vector<std::vector<double>> nested(const RowMatrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)].push_back(m(r, c));
  }
  return out;
}

std::optional<double> score_of(const std::vector<PropertyScore>& scores, const std::string& property,
                               const std::string& split) {
  for (const auto& s : scores) {
    if (s.property == property && s.split == split) return s.value;
  }
  return std::nullopt;
}

/// Synthetic scenes plus a 2000/500/1000 style split.
struct Problem {
  SceneBatch scenes;
  SplitDefinition splits;
};

Problem make_problem(std::size_t train, std::size_t val, std::size_t test, std::size_t side, std::uint64_t seed) {
  SynthConfig sc;
  sc.num_scenes = train + val + test;
  sc.height = sc.width = side;
  sc.seed = seed;
  return {generate_scenes(sc), make_splits(sc.num_scenes, SplitSizes{train, val, test}, seed)};
}

std::vector<PropertyScore> fit_and_score(const SlotBatch& reps, const SceneBatch& train_scenes,
                                         const SceneBatch& eval_scenes, const SplitDefinition& splits,
                                         std::uint64_t seed, std::size_t hidden_layers) {
  const auto cfg = make_predictor_config(reps, train_scenes.schema, hidden_layers);
  TrainConfig t;
  t.seed = seed;
  const auto trained = train_probe(reps, train_scenes, splits, cfg, t, MatchingMode::Mask);
  return evaluate_probe(trained.params, cfg, reps, eval_scenes, splits.test, MatchingMode::Mask);
}

double mean_test_ari(const SceneBatch& scenes, const SlotBatch& slots, const std::vector<std::size_t>& test) {
  const auto recs = batch_metrics(scenes, slots, {Metric::ARI});
  double sum = 0;
  std::size_t n = 0;
  for (auto i : test) {
    if (recs[i].skipped) continue;
    sum += recs[i].value;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome ari_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 50;
    const auto a = random_labels(rng, n, 1 + static_cast<int>(rng() % 6));
    const auto b = random_labels(rng, n, 1 + static_cast<int>(rng() % 6));
    worst = std::max(worst, std::abs(adjusted_rand_index(a, b) - oracle::ari_pairs(a, b)));
  }
  return {worst <= 1e-9, fmt("max |ARI - oracle| = %.3g over 200 pairs (tol 1e-9)", worst)};
}

Outcome hungarian_optimality() {
  std::mt19937_64 rng(202);
  std::size_t mismatches = 0;
  for (int t = 0; t < 500; ++t) {
    const auto m = static_cast<Eigen::Index>(1 + rng() % 7), k = static_cast<Eigen::Index>(1 + rng() % 7);
    // Integer-valued costs make every partial sum exact, so equality is exact.
    RowMatrix c(m, k);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) c(i, j) = static_cast<double>(rng() % 1000) - 500.0;
    }
    const auto a = hungarian(CostMatrix(c));
    double realized = 0;
    for (auto [r, col] : a.pairs) realized += c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
    const double best = oracle::brute_assignment(nested(c));
    if (a.total_cost != best || realized != best || a.pairs.size() != static_cast<std::size_t>(std::min(m, k))) {
      ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%zu of 500 matrices differ from exhaustive minimum", mismatches)};
}

Outcome gradient_check() {
  const PropertySchema schema({{"shape", PropertyKind::Categorical, 3, {}},
                               {"color", PropertyKind::Numeric, 3, {}},
                               {"x", PropertyKind::Numeric, 1, {}}});
  const auto all = included_except(schema, {});
  const std::size_t width = schema.total_width();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> nd;
  double worst = 0, worst_element = 0;
  for (std::size_t depth = 0; depth <= 3; ++depth) {
    for (int draw = 0; draw < 20; ++draw) {
      PredictorConfig cfg;
      cfg.hidden_layers = depth;
      cfg.hidden_width = 6;
      cfg.input_width = 5;
      cfg.output_width = width;
      auto params = init_params(cfg, rng());
      const RowMatrix x = random_matrix(rng, 3, 5, -2, 2);
      RowMatrix targets = RowMatrix::Zero(3, static_cast<Eigen::Index>(width));
      for (Eigen::Index r = 0; r < 3; ++r) {
        targets(r, static_cast<Eigen::Index>(rng() % 3)) = 1.0;
        for (Eigen::Index c = 3; c < static_cast<Eigen::Index>(width); ++c) targets(r, c) = nd(rng);
      }
      // Flat view of all parameters for the finite-difference oracle.
      std::vector<double*> slots;
      for (auto& w : params.weights) {
        for (Eigen::Index i = 0; i < w.size(); ++i) slots.push_back(w.data() + i);
      }
      for (auto& b : params.biases) {
        for (Eigen::Index i = 0; i < b.size(); ++i) slots.push_back(b.data() + i);
      }
      std::vector<double> theta;
      for (auto* p : slots) theta.push_back(*p);
      auto loss_at = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) *slots[i] = v[i];
        const RowMatrix y = forward(params, cfg, x);
        double total = 0;
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          total += property_loss(std::span<const double>(y.row(r).data(), width),
                                 std::span<const double>(targets.row(r).data(), width), schema, all);
        }
        return total;
      };
      const auto numeric = oracle::finite_difference(loss_at, theta, 1e-5);
      for (std::size_t i = 0; i < theta.size(); ++i) *slots[i] = theta[i];

      ForwardCache cache;
      const RowMatrix y = forward(params, cfg, x, &cache);
      RowMatrix gy(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        property_loss(std::span<const double>(y.row(r).data(), width),
                      std::span<const double>(targets.row(r).data(), width), schema, all,
                      std::span<double>(gy.row(r).data(), width));
      }
      PredictorParams grads;
      backward(params, cfg, cache, gy, grads);
      std::vector<double> analytic;
      for (const auto& w : grads.weights) analytic.insert(analytic.end(), w.data(), w.data() + w.size());
      for (const auto& b : grads.biases) analytic.insert(analytic.end(), b.data(), b.data() + b.size());
      // One relative error per draw over the whole parameter vector; elementwise
      // ratios for components near zero only measure finite-difference roundoff.
      double diff = 0, na = 0, nn = 0;
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
        const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
        if (scale >= 1e-6) worst_element = std::max(worst_element, std::abs(analytic[i] - numeric[i]) / scale);
      }
      worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(std::max(na, nn)), 1e-300));
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.3g over depths 0-3 x 20 draws (tol 1e-4); "
                             "max elementwise error %.3g for components >= 1e-6",
                             worst, worst_element)};
}

Outcome metric_vs_downstream() {
  const std::vector<double> sigmas{0, 0.1, 0.3, 1, 3};
  std::vector<double> aris, accs;
  std::ostringstream runs;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto p = make_problem(2000, 500, 1000, 32, 400 + seed);
    for (double sigma : sigmas) {
      MockEncoderConfig mc;
      mc.seed = 40 + seed;
      mc.noise = sigma;
      mc.mask_noise = sigma;
      const auto enc = mock_encode(p.scenes, mc);
      const double ari = mean_test_ari(p.scenes, enc.slots, p.splits.test);
      const auto scores = fit_and_score(enc.slots, p.scenes, p.scenes, p.splits, seed, 1);
      const double acc = score_of(scores, "shape", "all").value_or(0.0);
      aris.push_back(ari);
      accs.push_back(acc);
      runs << fmt(" [s=%g ari=%.3f acc=%.3f]", sigma, ari, acc);
    }
  }
  const auto c = spearman(aris, accs);
  if (!c) return {false, "Spearman undefined (constant series)"};
  return {c->rho >= 0.7 && c->p < 0.05,
          fmt("rho=%.4f p=%.3g n=%zu (need rho>=0.7, p<0.05);", c->rho, c->p, c->n) + runs.str()};
}

Outcome corrupted_slot() {
  std::vector<double> ood_acc, id_delta;
  std::ostringstream runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = make_problem(2000, 500, 1000, 32, 500 + seed);
    MockEncoderConfig mc;
    mc.seed = 50 + seed;
    const auto clean = mock_encode(p.scenes, mc);
    mc.corrupt_objects_per_scene = 1;
    const auto corrupted = mock_encode(p.scenes, mc);
    SceneBatch flagged = p.scenes;
    flag_corrupted_objects(flagged, corrupted);

    // Same test objects scored under both encodings; the clean probe never sees flags.
    const auto clean_scores = fit_and_score(clean.slots, p.scenes, flagged, p.splits, seed, 1);
    const auto corrupt_scores = fit_and_score(corrupted.slots, flagged, flagged, p.splits, seed, 1);
    const double clean_id = score_of(clean_scores, "shape", "ID").value_or(0.0);
    const double id = score_of(corrupt_scores, "shape", "ID").value_or(0.0);
    const double ood = score_of(corrupt_scores, "shape", "OOD").value_or(1.0);
    ood_acc.push_back(ood);
    id_delta.push_back(std::abs(id - clean_id));
    runs << fmt(" [seed %llu: ood=%.3f id=%.4f clean_id=%.4f]", static_cast<unsigned long long>(seed), ood, id,
                clean_id);
  }
  const double chance = 1.0 / 3.0;
  const double m_ood = median(ood_acc), m_delta = median(id_delta);
  return {m_ood <= chance + 0.1 && m_delta <= 0.02,
          fmt("median OOD shape acc %.4f (<= %.4f), median |dID| %.4f (<= 0.02);", m_ood, chance + 0.1, m_delta) +
              runs.str()};
}

Outcome baseline_identities() {
  double worst_acc = 0, worst_r2 = 0;
  std::size_t checked = 0;
  auto check = [&](const SceneBatch& scenes, const SplitDefinition& splits) {
    const auto res = baseline_constant(scenes, splits, BaselineMode::AnalyticSlotwise, {}, TrainConfig{}, 0);
    const auto& schema = scenes.schema;
    const std::size_t hw = scenes.height() * scenes.width(), mmax = scenes.max_objects();
    for (std::size_t e = 0; e < schema.size(); ++e) {
      const auto value = score_of(res.at(0).scores, schema[e].name, "all");
      if (std::find(scenes.excluded_properties.begin(), scenes.excluded_properties.end(), schema[e].name) !=
          scenes.excluded_properties.end()) {
        continue;
      }
      if (!value) continue;
      ++checked;
      if (!schema[e].categorical()) {
        worst_r2 = std::max(worst_r2, std::abs(*value));
        continue;
      }
      // Majority frequency counted directly from masks and one-hot rows.
      const std::size_t w = schema[e].width();
      std::vector<double> counts(w, 0.0);
      double labeled = 0;
      for (auto i : splits.test) {
        for (std::size_t o = scenes.background_count; o < static_cast<std::size_t>(scenes.num_objects[i]); ++o) {
          bool visible = false;
          for (std::size_t px = 0; px < hw && !visible; ++px) visible = scenes.gt_masks.data[(i * mmax + o) * hw + px];
          if (!visible) continue;
          const float* row = scenes.properties[e].data.data() + (i * mmax + o) * w;
          const auto best = std::max_element(row, row + w);
          if (*best <= 0.0f) continue;
          counts[static_cast<std::size_t>(best - row)] += 1;
          labeled += 1;
        }
      }
      const double majority = *std::max_element(counts.begin(), counts.end()) / labeled;
      worst_acc = std::max(worst_acc, std::abs(*value - majority));
    }
  };
  const auto p = make_problem(1500, 200, 800, 24, 606);
  check(p.scenes, p.splits);
  const auto occluded = apply_shift(p.scenes, make_shift_spec(ShiftKind::Occlusion, "synthetic", 6));
  check(occluded.batch, p.splits);
  return {worst_acc <= 1e-12 && worst_r2 <= 1e-9 && checked == 10,
          fmt("max |acc - majority| %.3g (tol 1e-12), max |R2| %.3g (tol 1e-9), %zu scores", worst_acc, worst_r2,
              checked)};
}

Outcome lossless_ceiling() {
  const auto p = make_problem(10000, 1000, 2000, 32, 707);
  MockEncoderConfig mc;
  mc.seed = 70;
  const auto enc = mock_encode(p.scenes, mc);
  const auto cfg = make_predictor_config(enc.slots, p.scenes.schema, 1);
  TrainConfig t;
  t.seed = 7;
  const auto trained = train_probe(enc.slots, p.scenes, p.splits, cfg, t, MatchingMode::Mask);
  const auto scores = evaluate_probe(trained.params, cfg, enc.slots, p.scenes, p.splits.test, MatchingMode::Mask);
  const double shape = score_of(scores, "shape", "all").value_or(0);
  const double x = score_of(scores, "x", "all").value_or(0), y = score_of(scores, "y", "all").value_or(0);
  return {shape >= 0.99 && x >= 0.99 && y >= 0.99,
          fmt("shape acc %.4f, x R2 %.4f, y R2 %.4f (need >= 0.99); %zu steps, final val loss %.4g", shape, x, y,
              trained.log.steps_run,
              trained.log.validation_loss.empty() ? 0.0 : trained.log.validation_loss.back())};
}

Outcome shift_contracts() {
  SynthConfig sc;
  sc.num_scenes = 1000;
  sc.height = sc.width = 32;
  sc.seed = 808;
  const auto batch = generate_scenes(sc);
  std::size_t partition_errors = 0, range_errors = 0, argmin_errors = 0, determinism_errors = 0;
  fixtures::TempDir dir;
  for (auto kind : {ShiftKind::Occlusion, ShiftKind::Crop, ShiftKind::ObjectColor, ShiftKind::ObjectShape}) {
    const auto spec = make_shift_spec(kind, "synthetic", 88);
    const auto a = apply_shift(batch, spec);
    const auto& b = a.batch;
    const std::size_t hw = b.height() * b.width(), mmax = b.max_objects();
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t px = 0; px < hw; ++px) {
        int owners = 0;
        for (std::size_t o = 0; o < mmax; ++o) owners += b.gt_masks.data[(i * mmax + o) * hw + px];
        partition_errors += owners != 1;
      }
    }
    for (float v : b.images.data) range_errors += !(v >= 0.0f && v <= 1.0f);

    if (kind == ShiftKind::Occlusion) {
      const std::size_t w = batch.width(), smax = batch.max_objects();
      for (std::size_t j = 0; j < a.source_index.size(); ++j) {
        const auto& log = *a.occlusion_logs[j];
        const std::size_t src = a.source_index[j];
        std::vector<std::size_t> overlap;
        for (const auto& [top, left] : log.candidates) {
          std::size_t count = 0;
          for (std::size_t y = top; y < top + log.size_h; ++y) {
            for (std::size_t x = left; x < left + log.size_w; ++x) {
              for (std::size_t o = 1; o < smax; ++o) count += batch.gt_masks.data[(src * smax + o) * hw + y * w + x];
            }
          }
          overlap.push_back(count);
        }
        const auto first_min =
            static_cast<std::size_t>(std::min_element(overlap.begin(), overlap.end()) - overlap.begin());
        argmin_errors += overlap != log.foreground_overlap || log.chosen != first_min || overlap.size() != 5;
      }
    }

    const auto again = apply_shift(batch, spec);
    const std::string name = shift_kind_name(kind);
    save_dataset(a.batch, dir / (name + "_1"));
    save_dataset(again.batch, dir / (name + "_2"));
    determinism_errors += !fixtures::same_tree(dir / (name + "_1"), dir / (name + "_2"));
  }
  return {partition_errors + range_errors + argmin_errors + determinism_errors == 0,
          fmt("partition violations %zu, out-of-range values %zu, occlusion argmin mismatches %zu, "
              "non-identical reruns %zu (1000 scenes x 4 shifts)",
              partition_errors, range_errors, argmin_errors, determinism_errors)};
}

Outcome metric_invariances() {
  std::mt19937_64 rng(909);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // ARI is invariant to relabeling either side and to slot order of soft masks.
  double worst_perm = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 60;
    const auto a = random_labels(rng, n, 5), b = random_labels(rng, n, 5);
    std::vector<int> relabel{3, 0, 4, 1, 2};
    std::vector<int> b2(n);
    for (std::size_t i = 0; i < n; ++i) b2[i] = relabel[static_cast<std::size_t>(b[i])];
    worst_perm = std::max(worst_perm, std::abs(adjusted_rand_index(a, b) - adjusted_rand_index(a, b2)));
  }
  expect(worst_perm <= 1e-12, fmt("ARI relabeling drift %.3g", worst_perm));

  // Soft masks with random slot order, plus covering bounds and the equal-size identity.
  const std::size_t side = 8, hw = side * side, k = 4;
  for (int t = 0; t < 100; ++t) {
    std::vector<int> gt(hw);
    for (std::size_t px = 0; px < hw; ++px) gt[px] = static_cast<int>((px / 16) % 4);  // 4 equal stripes
    std::vector<float> soft(k * hw);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : soft) v = u(rng);
    std::vector<float> permuted(k * hw);
    const std::vector<std::size_t> order{2, 0, 3, 1};
    for (std::size_t s = 0; s < k; ++s) {
      std::copy_n(soft.begin() + static_cast<std::ptrdiff_t>(order[s] * hw), hw,
                  permuted.begin() + static_cast<std::ptrdiff_t>(s * hw));
    }
    const auto g = fixtures::hard_gt(gt, 4);
    const auto a1 = ari_foreground(g, 4, 0, soft, k, hw), a2 = ari_foreground(g, 4, 0, permuted, k, hw);
    expect(a1 && a2 && *a1 == *a2, "ARI slot permutation");
    // Background count 0 keeps all four stripes as equal-size foreground masks.
    const auto sc = segmentation_covering(soft, k, g, 4, 0, hw, true);
    const auto msc = segmentation_covering(soft, k, g, 4, 0, hw, false);
    expect(sc && msc && *sc >= 0 && *sc <= 1 && *msc >= 0 && *msc <= 1, "covering bounds");
    expect(sc && msc && std::abs(*sc - *msc) <= 1e-12, "SC = mSC for equal-size masks");
    // Unequal sizes with background: still bounded.
    std::vector<int> gt2(hw);
    for (auto& v : gt2) v = static_cast<int>(rng() % 5);
    const auto g2 = fixtures::hard_gt(gt2, 5);
    for (bool weighted : {true, false}) {
      const auto v = segmentation_covering(soft, k, g2, 5, 1, hw, weighted);
      expect(v && *v >= 0 && *v <= 1, "covering bounds (random)");
    }
  }

  // Asymmetry witness: one predicted segment over objects of sizes 6 and 2.
  {
    const std::vector<int> truth{0, 0, 0, 0, 0, 0, 1, 1}, single(8, 0);
    const double gt_by_pred = covering_from_labels(single, truth, true);
    const double pred_by_gt = covering_from_labels(truth, single, true);
    const std::vector<std::set<std::size_t>> one{{0, 1, 2, 3, 4, 5, 6, 7}}, two{{0, 1, 2, 3, 4, 5}, {6, 7}};
    expect(std::abs(gt_by_pred - oracle::covering_sets(one, two, true)) <= 1e-15 &&
               std::abs(pred_by_gt - oracle::covering_sets(two, one, true)) <= 1e-15,
           "covering oracle agreement");
    expect(gt_by_pred == 0.625 && pred_by_gt == 0.75, fmt("asymmetry witness %.4f vs %.4f", gt_by_pred, pred_by_gt));
  }

  // Mask-matching costs ignore positive per-slot scaling.
  double worst_cos = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<int> labels(hw);
    for (auto& v : labels) v = static_cast<int>(rng() % 4);
    const auto g = fixtures::hard_gt(labels, 4);
    std::vector<float> soft(k * hw), scaled(k * hw);
    std::uniform_real_distribution<float> u(0.0f, 1.0f), f(0.1f, 10.0f);
    for (auto& v : soft) v = u(rng);
    for (std::size_t s = 0; s < k; ++s) {
      const float c = f(rng);
      for (std::size_t px = 0; px < hw; ++px) scaled[s * hw + px] = soft[s * hw + px] * c;
    }
    const auto c1 = mask_match_costs(soft, k, g, {1, 2, 3}, hw), c2 = mask_match_costs(scaled, k, g, {1, 2, 3}, hw);
    worst_cos = std::max(worst_cos, (c1.costs - c2.costs).cwiseAbs().maxCoeff());
    expect(hungarian(c1).pairs == hungarian(c2).pairs, "mask assignment under scaling");
  }
  expect(worst_cos <= 1e-6, fmt("cosine scale drift %.3g", worst_cos));

  // Deterministic order is unchanged by positive scaling of numeric properties.
  const PropertySchema schema({{"shape", PropertyKind::Categorical, 3, {}},
                               {"x", PropertyKind::Numeric, 1, {}},
                               {"color", PropertyKind::Numeric, 3, {}}});
  for (int t = 0; t < 200; ++t) {
    RowMatrix targets = RowMatrix::Zero(6, 7);
    for (Eigen::Index r = 0; r < 6; ++r) {
      targets(r, static_cast<Eigen::Index>(rng() % 3)) = 1;
      for (Eigen::Index c = 3; c < 7; ++c) targets(r, c) = static_cast<double>(rng() % 4) * 0.25 - 0.5;
    }
    std::vector<std::uint8_t> flags(6);
    for (auto& v : flags) v = rng() % 4 == 0;
    RowMatrix scaled = targets;
    scaled.col(3) *= 2.5;
    scaled.rightCols(3) *= 0.3;
    expect(deterministic_order(targets, schema, flags) == deterministic_order(scaled, schema, flags),
           "deterministic order under scaling");
  }

  std::sort(failures.begin(), failures.end());
  failures.erase(std::unique(failures.begin(), failures.end()), failures.end());
  std::string detail = "ARI relabel, slot permutation, covering bounds, SC=mSC, asymmetry witness, cosine scaling, "
                       "order scaling";
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

Outcome two_step_equivalence() {
  const PropertySchema schema({{"shape", PropertyKind::Categorical, 3, {}},
                               {"x", PropertyKind::Numeric, 1, {}},
                               {"color", PropertyKind::Numeric, 3, {}}});
  const std::vector<oracle::Segment> restricted{{0, 3, true, true}, {3, 1, false, true}, {4, 3, false, false}};
  const std::vector<oracle::Segment> full{{0, 3, true, true}, {3, 1, false, true}, {4, 3, false, true}};
  const std::vector<std::string> id_props{"shape", "x"};
  std::mt19937_64 rng(1010);
  std::size_t zero_mismatch = 0, ood_mismatch = 0, rest_mismatch = 0;
  for (int t = 0; t < 200; ++t) {
    const auto k = static_cast<Eigen::Index>(3 + rng() % 3);
    const RowMatrix preds = random_matrix(rng, k, 7, -2, 2);
    RowMatrix targets = random_matrix(rng, 3, 7);
    targets.leftCols(3).setZero();
    for (Eigen::Index r = 0; r < 3; ++r) targets(r, static_cast<Eigen::Index>(rng() % 3)) = 1;

    const std::vector<std::uint8_t> none(3, 0);
    const auto plain = hungarian(loss_match_costs(preds, targets, schema, std::vector<bool>(3, true)));
    const auto two = two_step_ood_match(preds, targets, schema, none, id_props);
    zero_mismatch += plain.pairs != two.pairs || plain.total_cost != two.total_cost;

    std::vector<std::uint8_t> flags(3, 0);
    const std::size_t ood = rng() % 3;
    flags[ood] = 1;
    const auto shifted = two_step_ood_match(preds, targets, schema, flags, id_props);

    // Brute force on independently computed restricted costs.
    auto cost_table = [&](const std::vector<oracle::Segment>& segs) {
      std::vector<std::vector<double>> c(3, std::vector<double>(static_cast<std::size_t>(k)));
      for (Eigen::Index m = 0; m < 3; ++m) {
        for (Eigen::Index s = 0; s < k; ++s) {
          std::vector<double> p(preds.row(s).data(), preds.row(s).data() + 7);
          std::vector<double> y(targets.row(m).data(), targets.row(m).data() + 7);
          c[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] = oracle::property_cost(p, y, segs);
        }
      }
      return c;
    };
    std::vector<std::pair<std::size_t, std::size_t>> step1;
    oracle::brute_assignment(cost_table(restricted), &step1);
    const auto want = std::find_if(step1.begin(), step1.end(), [&](auto pr) { return pr.first == ood; });
    const auto got = std::find_if(shifted.pairs.begin(), shifted.pairs.end(), [&](auto pr) { return pr.first == ood; });
    ood_mismatch += want == step1.end() || got == shifted.pairs.end() || *want != *got;

    // The remaining objects are matched on all properties among the remaining slots.
    if (want != step1.end()) {
      const auto fc = cost_table(full);
      std::vector<std::size_t> objs, slots;
      for (std::size_t m = 0; m < 3; ++m) {
        if (m != ood) objs.push_back(m);
      }
      for (std::size_t s = 0; s < static_cast<std::size_t>(k); ++s) {
        if (s != want->second) slots.push_back(s);
      }
      std::vector<std::vector<double>> sub(objs.size(), std::vector<double>(slots.size()));
      for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = 0; j < slots.size(); ++j) sub[i][j] = fc[objs[i]][slots[j]];
      }
      std::vector<std::pair<std::size_t, std::size_t>> rest;
      oracle::brute_assignment(sub, &rest);
      for (auto [i, j] : rest) {
        const std::pair<std::size_t, std::size_t> pr{objs[i], slots[j]};
        rest_mismatch += std::find(shifted.pairs.begin(), shifted.pairs.end(), pr) == shifted.pairs.end();
      }
    }
  }
  return {zero_mismatch + ood_mismatch + rest_mismatch == 0,
          fmt("zero-OOD mismatches %zu, OOD pair mismatches %zu, re-match mismatches %zu (200 instances)",
              zero_mismatch, ood_mismatch, rest_mismatch)};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;  // 0 = no runtime bound
  };
  const std::vector<Entry> criteria{
      {1, "ARI oracle equivalence", ari_oracle, 5},
      {2, "Hungarian optimality", hungarian_optimality, 10},
      {3, "gradient correctness", gradient_check, 30},
      {4, "metric vs downstream rank correlation", metric_vs_downstream, 15 * 60},
      {5, "corrupted-slot ID/OOD accuracy", corrupted_slot, 10 * 60},
      {6, "baseline identities", baseline_identities, 0},
      {7, "lossless-oracle ceiling", lossless_ceiling, 10 * 60},
      {8, "shift contracts", shift_contracts, 0},
      {9, "metric invariance suite", metric_invariances, 0},
      {10, "two-step OOD matching equivalence", two_step_equivalence, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = out.pass;
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      pass = false;
      out.detail += fmt("; runtime %.1fs exceeds %.0fs", secs, c.budget_seconds);
    }
    failed += !pass;
    std::printf("%s criterion %d (%s) [%.2fs]: %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
