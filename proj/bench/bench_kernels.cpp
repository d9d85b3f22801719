// Serial reference vs OpenMP kernels.
#include <random>

#include <benchmark/benchmark.h>

#include "histel/kernels.hpp"

namespace {

histel::EmbeddingIndex RandomIndex(std::size_t rows, std::size_t dim) {
  std::mt19937 rng(7);
  std::normal_distribution<float> g;
  std::vector<float> v(rows * dim);
  for (auto& x : v) x = g(rng);
  return histel::EmbeddingIndex(dim, std::move(v), histel::NormMode::kRaw);
}

void BM_DenseSerial(benchmark::State& state) {
  const auto index = RandomIndex(static_cast<std::size_t>(state.range(0)), 256);
  std::vector<float> q(256, 0.5f);
  std::vector<double> out(index.size());
  for (auto _ : state) {
    histel::kernels::DenseScoresSerial(index, q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DenseParallel(benchmark::State& state) {
  const auto index = RandomIndex(static_cast<std::size_t>(state.range(0)), 256);
  std::vector<float> q(256, 0.5f);
  std::vector<double> out(index.size());
  for (auto _ : state) {
    histel::kernels::DenseScoresParallel(index, q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ParallelFor(benchmark::State& state) {
  const int jobs = static_cast<int>(state.range(0));
  std::vector<double> acc(2000);
  for (auto _ : state) {
    histel::kernels::ParallelFor(acc.size(), jobs, [&](std::size_t i) {
      double s = 0.0;
      for (int k = 1; k < 20000; ++k) s += 1.0 / (k + static_cast<double>(i));
      acc[i] = s;
    });
    benchmark::DoNotOptimize(acc.data());
  }
}

}  // namespace

BENCHMARK(BM_DenseSerial)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_DenseParallel)->Arg(10'000)->Arg(100'000);
BENCHMARK(BM_ParallelFor)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
