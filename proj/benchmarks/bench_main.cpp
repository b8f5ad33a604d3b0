#include <benchmark/benchmark.h>

#include <random>

#include "oclb/loss.hpp"
#include "oclb/matching.hpp"
#include "oclb/metrics.hpp"
#include "oclb/probe.hpp"
#include "oclb/shifts.hpp"
#include "oclb/synthgen.hpp"

using namespace oclb;

namespace {

SceneBatch bench_scenes(std::size_t n, std::size_t side) {
  SynthConfig c;
  c.num_scenes = n;
  c.height = c.width = side;
  c.seed = 1;
  return generate_scenes(c);
}

void BM_AriForeground(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto scenes = bench_scenes(1, side);
  MockEncoderConfig mc;
  mc.mask_noise = 1.0;
  const auto enc = mock_encode(scenes, mc);
  const std::size_t hw = side * side;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ari_foreground(scenes.gt_masks.slice(0), scenes.max_objects(), 1,
                                            enc.slots.pred_masks.slice(0), mc.num_slots, hw));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * hw));
}
BENCHMARK(BM_AriForeground)->Arg(64)->Arg(128);

void BM_Hungarian(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  RowMatrix c(n, n);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  const CostMatrix cm(c);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cm));
}
BENCHMARK(BM_Hungarian)->Arg(7)->Arg(11)->Arg(32);

void BM_ForwardBackward(benchmark::State& state) {
  const PropertySchema schema = schema_preset("clevr");
  PredictorConfig cfg;
  cfg.hidden_layers = static_cast<std::size_t>(state.range(0));
  cfg.input_width = 64;
  cfg.output_width = schema.total_width();
  const auto params = init_params(cfg, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  RowMatrix x(64 * 7, 64);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  RowMatrix gy = RowMatrix::Constant(x.rows(), static_cast<Eigen::Index>(cfg.output_width), 0.01);
  PredictorParams grads;
  for (auto _ : state) {
    ForwardCache cache;
    benchmark::DoNotOptimize(forward(params, cfg, x, &cache));
    backward(params, cfg, cache, gy, grads);
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Arg(3);

void BM_Shift(benchmark::State& state) {
  const auto scenes = bench_scenes(64, 64);
  const auto spec = make_shift_spec(static_cast<ShiftKind>(state.range(0)), "synthetic", 5);
  for (auto _ : state) benchmark::DoNotOptimize(apply_shift(scenes, spec));
  state.SetLabel(shift_kind_name(spec.kind));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * scenes.size()));
}
BENCHMARK(BM_Shift)->DenseRange(0, 3);

void BM_BatchMetrics(benchmark::State& state) {
  const auto scenes = bench_scenes(256, 64);
  MockEncoderConfig mc;
  mc.blur_radius = 1;
  const auto enc = mock_encode(scenes, mc);
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_metrics(scenes, enc.slots, {Metric::ARI, Metric::SC, Metric::mSC}));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * scenes.size()));
}
BENCHMARK(BM_BatchMetrics)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
