#include <benchmark/benchmark.h>

#include <vector>

#include "qklab/dataset.hpp"
#include "qklab/kernel_matrix.hpp"
#include "qklab/mps.hpp"
#include "qklab/rng.hpp"
#include "qklab/statevector.hpp"

namespace {

std::vector<double> random_point(int n, std::uint64_t seed) {
  qklab::Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = rng.next_double();
  return x;
}

void BM_KernelEntryTn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_point(n, 1);
  const auto y = random_point(n, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(qklab::kernel_entry_tn(x, y, 0.7));
  state.SetComplexityN(n);
}
BENCHMARK(BM_KernelEntryTn)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_KernelEntrySv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_point(n, 1);
  const auto y = random_point(n, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(qklab::kernel_entry_sv(x, y, 0.7));
  state.SetComplexityN(n);
}
BENCHMARK(BM_KernelEntrySv)->DenseRange(6, 18, 2)->Complexity();

void BM_EmbedMps(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_point(n, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(qklab::embed_mps(x, 0.9));
  state.SetComplexityN(n);
}
BENCHMARK(BM_EmbedMps)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_MpsOverlap(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = qklab::embed_mps(random_point(n, 4), 0.9);
  const auto b = qklab::embed_mps(random_point(n, 5), 0.9);
  for (auto _ : state)
    benchmark::DoNotOptimize(qklab::mps_overlap(a, b));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MpsOverlap)->RangeMultiplier(2)->Range(8, 512)->Complexity();

void BM_TrainKernelMatrix(benchmark::State& state) {
  const auto n_samples = static_cast<Eigen::Index>(state.range(0));
  const qklab::SpectralDataset data =
      qklab::synth_dataset(n_samples, 32, qklab::SynthTask::Random, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(qklab::quantum_kernel_matrix(
        data.samples, 0.5, qklab::SimBackend::Tn, 0));
}
BENCHMARK(BM_TrainKernelMatrix)->Arg(16)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
