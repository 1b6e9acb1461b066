#include <benchmark/benchmark.h>

#include "puq/metrics.hpp"
#include "puq/model.hpp"
#include "puq/perturb.hpp"
#include "puq/rng.hpp"

using namespace puq;

namespace {

LabeledDataset random_images(std::size_t count, std::uint64_t seed) {
  RngStream rng(seed, {5, 0, 0, 0});
  LabeledDataset ds;
  ds.num_classes = 10;
  for (std::size_t i = 0; i < count; ++i) {
    Matrix img(28, 28);
    for (double& v : img.flat()) v = 0.5 + 0.1 * rng.gaussian();
    ds.images.push_back(clamp_unit(img));
    ds.labels.push_back(static_cast<ClassIndex>(i % 10));
  }
  return ds;
}

Model model_of(ModelKind kind) {
  RngStream rng(7, {1, 0, 0, 0});
  return make_model(kind, 10, 784, 128, rng);
}

}  // namespace

static void BM_GaussianStream(benchmark::State& state) {
  RngStream rng(1, {3, 0, 0, 0});
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i < 1024; ++i) acc += rng.gaussian();
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_GaussianStream);

static void BM_Forward(benchmark::State& state) {
  const ModelKind kind = static_cast<ModelKind>(state.range(0));
  const Model m = model_of(kind);
  const LabeledDataset ds = random_images(16, 11);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(m, ds.images[i++ % ds.size()]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Arg(2)->ArgNames({"model"});

static void BM_Gradients(benchmark::State& state) {
  const ModelKind kind = static_cast<ModelKind>(state.range(0));
  const Model m = model_of(kind);
  const LabeledDataset ds = random_images(64, 13);
  std::vector<std::size_t> batch(64);
  for (std::size_t i = 0; i < 64; ++i) batch[i] = i;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradients(m, ds, batch));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Gradients)->Arg(0)->Arg(1)->Arg(2)->ArgNames({"model"});

static void BM_PerturbedPass(benchmark::State& state) {
  const Model m = model_of(ModelKind::Linear);
  const LabeledDataset ds = random_images(256, 17);
  const PerturbMode mode = state.range(0) == 0 ? PerturbMode::Weight : PerturbMode::Input;
  for (auto _ : state) {
    RngStream rng(3, {static_cast<std::uint32_t>(mode == PerturbMode::Weight ? 3 : 4), 0, 0, 0});
    benchmark::DoNotOptimize(run_perturbed_pass(m, ds, 0.5, mode, 10, rng));
  }
  state.SetItemsProcessed(state.iterations() * 256 * 10);
}
BENCHMARK(BM_PerturbedPass)->Arg(0)->Arg(1)->ArgNames({"mode"});

static void BM_SampleStatsAndGrid(benchmark::State& state) {
  const Model m = model_of(ModelKind::Linear);
  const LabeledDataset ds = random_images(512, 19);
  RngStream rng(3, {3, 0, 0, 0});
  const PredictionLog log = run_perturbed_pass(m, ds, 0.5, PerturbMode::Weight, 10, rng);
  const std::vector<double> lambdas{0.1, 0.5, 1.0, 2.0};
  const std::vector<PredictionLog> logs{log};
  for (auto _ : state) {
    benchmark::DoNotOptimize(metric_grid(logs, lambdas, 0.9));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_SampleStatsAndGrid);

BENCHMARK_MAIN();
