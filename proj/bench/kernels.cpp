// Parallel kernels against their serial references, plus the head pipelines.

#include <benchmark/benchmark.h>

#include <random>

#include "querydet/model.hpp"
#include "querydet/parallel.hpp"
#include "querydet/query.hpp"
#include "querydet/sparse.hpp"
#include "querydet/tensor.hpp"

namespace {

qd::DenseTensor random_tensor(int c, int h, int w) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  qd::DenseTensor t(c, h, w);
  for (float& v : t.values) v = u(rng);
  return t;
}

qd::ConvWeights random_conv(int out, int in) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.1f, 0.1f);
  qd::ConvWeights cw(out, in, 3);
  for (float& v : cw.weights) v = u(rng);
  for (float& v : cw.bias) v = u(rng);
  return cw;
}

// Every second position along both axes: a quarter of the map, no 4-neighbours.
qd::KeySet strided_keys(int side) {
  std::vector<qd::GridPos> ps;
  for (int y = 0; y < side; y += 2)
    for (int x = 0; x < side; x += 2) ps.push_back({x, y});
  return qd::KeySet(2, side, side, std::move(ps));
}

void BM_Conv2dParallel(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  const auto in = random_tensor(c, side, side);
  const auto w = random_conv(c, c);
  for (auto _ : state) benchmark::DoNotOptimize(qd::conv2d(in, w));
}

void BM_Conv2dSerial(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  const auto in = random_tensor(c, side, side);
  const auto w = random_conv(c, c);
  for (auto _ : state) benchmark::DoNotOptimize(qd::reference::conv2d(in, w));
}

void BM_SparseConvParallel(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  const auto in = qd::gather(random_tensor(c, side, side), strided_keys(side));
  const auto rb = qd::build_rulebook(in.keys);
  const auto w = random_conv(c, c);
  for (auto _ : state) benchmark::DoNotOptimize(qd::sparse_conv(in, w, rb));
}

void BM_SparseConvSerial(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
  const auto in = qd::gather(random_tensor(c, side, side), strided_keys(side));
  const auto rb = qd::build_rulebook(in.keys);
  const auto w = random_conv(c, c);
  for (auto _ : state) benchmark::DoNotOptimize(qd::reference::sparse_conv(in, w, rb));
}

void BM_BuildRulebook(benchmark::State& state) {
  const auto keys = strided_keys(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(qd::build_rulebook(keys));
}

void BM_Pipeline(benchmark::State& state) {
  qd::SyntheticPyramidSpec spec;
  spec.seed = 3;
  spec.channels = 32;
  spec.blobs = qd::random_blobs(3, 3, spec.image_height, spec.image_width);
  const auto pyr = qd::make_synthetic_pyramid(spec);
  const auto w = qd::make_fixture_weights(1003, spec.channels, 1, 4);
  qd::QueryConfig cfg;
  cfg.strategy = static_cast<qd::Strategy>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(qd::run_pipeline(pyr, w, cfg));
  state.SetLabel(std::string(qd::to_string(cfg.strategy)));
}

}  // namespace

BENCHMARK(BM_Conv2dParallel)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dSerial)->Args({16, 64})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SparseConvParallel)->Args({16, 128})->Args({64, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SparseConvSerial)->Args({16, 128})->Args({64, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildRulebook)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Pipeline)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  qd::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
