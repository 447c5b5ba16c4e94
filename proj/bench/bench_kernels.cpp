// Parallel kernels against their serial reference paths.
#include <map>

#include <benchmark/benchmark.h>

#include "critedge/flow.hpp"
#include "critedge/sampling.hpp"
#include "critedge/spectra.hpp"

using namespace critedge;

namespace {

const DeformationSpectrum& spectrum(std::int64_t n) {
    static std::map<std::int64_t, DeformationSpectrum> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, random_critical_spectrum(n, 1)).first;
    return it->second;
}

void estimate(benchmark::State& st, bool parallel) {
    const auto& a = spectrum(st.range(0));
    const KPointFunction f{1, radial_bump(2.0)};
    for (auto _ : st) benchmark::DoNotOptimize(estimate_statistic(a, Model::ginibre, f, 16, 1, parallel).value);
}

void girko(benchmark::State& st, bool parallel) {
    const Eigen::MatrixXcd y = diagonal_matrix(spectrum(50)) + sample_matrix(Model::ginibre, 50, 101);
    const int q = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(girko_check(y, radial_bump(1.0), q, parallel).rhs);
}

void sv_pool(benchmark::State& st, bool parallel) {
    const auto& a = spectrum(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(smallest_sv_pool(a, 0, SvPool::direct, 16, 1, Model::ginibre, parallel).front());
}

void sweep(benchmark::State& st, bool parallel) {
    for (auto _ : st) benchmark::DoNotOptimize(jacobian_sweep(0.5, 0.1, 0.9, 0.1, 0.1, 0.1, parallel).min_abs_det);
}

}  // namespace

BENCHMARK_CAPTURE(estimate, parallel, true)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(estimate, serial, false)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(girko, parallel, true)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(girko, serial, false)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sv_pool, parallel, true)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sv_pool, serial, false)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sweep, parallel, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sweep, serial, false)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
