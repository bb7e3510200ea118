#include <benchmark/benchmark.h>

#include <numeric>

#include "csvreg/csv_metrics.hpp"
#include "csvreg/dataset.hpp"
#include "csvreg/model.hpp"
#include "csvreg/trainer.hpp"

using namespace csvreg;

namespace {

GroupedDataset bench_data(std::size_t n) {
    ToySpec spec = ToySpec::defaults();
    spec.sigma_yz = 0.8;
    return gen_toy(spec, n, 42);
}

}  // namespace

static void BM_ForwardBackwardLinear(benchmark::State& state) {
    GroupedDataset ds = bench_data(2048);
    const std::size_t batch = std::size_t(state.range(0));
    std::vector<std::size_t> ids(batch);
    std::iota(ids.begin(), ids.end(), 0);
    ModelParams p = ModelParams::linear(ds.dim(), 1, false);
    const Tensor feats = ds.features_of(ids);
    const std::vector<int> labels = ds.labels_of(ids);

    for (auto _ : state) {
        Tape tape;
        ModelNodes nodes = register_params(tape, p);
        NodeId out = forward(tape, p, nodes, tape.input(feats));
        NodeId losses = per_sample_losses(tape, p, out, labels);
        NodeId obj = tape.weighted_sum(losses, std::vector<double>(batch, 1.0 / double(batch)));
        tape.backward(obj);
        benchmark::DoNotOptimize(tape.adjoint(nodes.nodes[0]).data.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(batch));
}
BENCHMARK(BM_ForwardBackwardLinear)->Arg(32)->Arg(256)->Arg(1024);

static void BM_ForwardBackwardMlp(benchmark::State& state) {
    Rng rng(7);
    ModelParams p = ModelParams::mlp(588, std::size_t(state.range(0)), 10, rng);
    const std::size_t batch = 128;
    Tensor feats = Tensor::zeros({batch, 588});
    for (double& v : feats.data) v = rng.uniform();
    std::vector<int> labels(batch);
    for (auto& y : labels) y = int(rng.uniform_index(10));

    for (auto _ : state) {
        Tape tape;
        ModelNodes nodes = register_params(tape, p);
        NodeId out = forward(tape, p, nodes, tape.input(feats));
        NodeId losses = per_sample_losses(tape, p, out, labels);
        NodeId obj = tape.weighted_sum(losses, std::vector<double>(batch, 1.0 / double(batch)));
        tape.backward(obj);
        benchmark::DoNotOptimize(tape.adjoint(nodes.nodes[0]).data.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(batch));
}
BENCHMARK(BM_ForwardBackwardMlp)->Arg(64)->Arg(256);

static void BM_StratifiedSampler(benchmark::State& state) {
    GroupedDataset ds = bench_data(std::size_t(state.range(0)));
    GroupIndex idx = build_group_index(ds);
    Rng rng(3);
    for (auto _ : state) {
        auto batch = sample_batch(idx, {SamplerKind::kGroupBalanced}, 32, rng);
        benchmark::DoNotOptimize(batch.data());
    }
}
BENCHMARK(BM_StratifiedSampler)->Arg(1024)->Arg(65536);

static void BM_EmpiricalCsv(benchmark::State& state) {
    GroupedDataset ds = bench_data(std::size_t(state.range(0)));
    GroupIndex idx = build_group_index(ds);
    Rng rng(5);
    std::vector<double> losses(ds.size());
    for (double& l : losses) l = rng.uniform();
    for (auto _ : state) {
        GroupLossStats stats = group_mean_losses(losses, idx);
        benchmark::DoNotOptimize(empirical_csv(stats));
    }
}
BENCHMARK(BM_EmpiricalCsv)->Arg(1024)->Arg(65536);

static void BM_SmoothRangePenalty(benchmark::State& state) {
    Rng rng(9);
    std::vector<double> losses(std::size_t(state.range(0)));
    for (double& l : losses) l = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(smooth_range_penalty(losses, 0.1).penalty);
    }
}
BENCHMARK(BM_SmoothRangePenalty)->Arg(16)->Arg(512);

static void BM_TrainerStepRcsv(benchmark::State& state) {
    GroupedDataset ds = bench_data(1000);
    GroupIndex idx = build_group_index(ds);
    TrainConfig tc;
    tc.method = Method::kRcsv;
    tc.lambda = 1.0;
    tc.steps = std::size_t(-1);
    tc.seed = 11;
    Trainer t(ds, idx, tc, ModelParams::linear(ds.dim(), 1, false));
    for (auto _ : state) {
        t.step();
        benchmark::DoNotOptimize(t.step_count());
    }
}
BENCHMARK(BM_TrainerStepRcsv);

BENCHMARK_MAIN();
