// Library kernels (OpenMP, GEMM-backed) against the serial nested-loop references.

#include <random>

#include <benchmark/benchmark.h>

#include "reference.hpp"
#include "ssn/correlation.hpp"

using namespace ssn;

namespace {

struct ConvCase {
    Tensor x, w, b;
};

ConvCase conv_case(std::size_t c, std::size_t hw) {
    std::mt19937_64 rng(1);
    return {ref::random_tensor({c, hw, hw}, rng), ref::random_tensor({c, c, 3, 3}, rng), ref::random_tensor({c}, rng)};
}

void BM_Conv2d(benchmark::State& st) {
    const auto k = conv_case(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    NoGradGuard g;
    for (auto _ : st) benchmark::DoNotOptimize(conv2d(Var(k.x), Var(k.w), Var(k.b), 1, 1));
}

void BM_Conv2dReference(benchmark::State& st) {
    const auto k = conv_case(static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(ref::conv2d(k.x, k.w, &k.b, 1, 1));
}

void BM_GroupNorm(benchmark::State& st) {
    std::mt19937_64 rng(2);
    const Tensor x = ref::random_tensor({96, 16, 16}, rng);
    NoGradGuard g;
    for (auto _ : st) benchmark::DoNotOptimize(group_norm(Var(x), 24, 1e-5));
}

void BM_GroupNormReference(benchmark::State& st) {
    std::mt19937_64 rng(2);
    const Tensor x = ref::random_tensor({96, 16, 16}, rng);
    for (auto _ : st) benchmark::DoNotOptimize(ref::group_norm(x, 24, 1e-5));
}

void BM_CorrelationVolume(benchmark::State& st) {
    std::mt19937_64 rng(3);
    const auto w = static_cast<std::size_t>(st.range(0));
    const Tensor l = ref::random_tensor({32, w / 2, w}, rng), r = ref::random_tensor({32, w / 2, w}, rng);
    NoGradGuard g;
    for (auto _ : st) benchmark::DoNotOptimize(build_volume(Var(l), Var(r)));
}

void BM_CorrelationVolumeReference(benchmark::State& st) {
    std::mt19937_64 rng(3);
    const auto w = static_cast<std::size_t>(st.range(0));
    const Tensor l = ref::random_tensor({32, w / 2, w}, rng), r = ref::random_tensor({32, w / 2, w}, rng);
    for (auto _ : st) benchmark::DoNotOptimize(ref::correlation_volume(l, r));
}

struct LookupCase {
    Tensor volume, disparity;
};

LookupCase lookup_case() {
    std::mt19937_64 rng(4);
    LookupCase c{ref::random_tensor({16, 64, 64}, rng), ref::random_tensor({16, 64}, rng, 0, 30)};
    return c;
}

void BM_Lookup(benchmark::State& st) {
    const auto c = lookup_case();
    NoGradGuard g;
    const CorrPyramid p = build_pyramid({Var(c.volume)}, 4);
    for (auto _ : st) benchmark::DoNotOptimize(lookup(p, c.disparity, 4));
}

void BM_LookupReference(benchmark::State& st) {
    const auto c = lookup_case();
    const auto levels = ref::pyramid(c.volume, 4);
    for (auto _ : st) benchmark::DoNotOptimize(ref::lookup(levels, c.disparity, 4));
}

}  // namespace

BENCHMARK(BM_Conv2d)->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv2dReference)->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GroupNorm)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GroupNormReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CorrelationVolume)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CorrelationVolumeReference)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Lookup)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LookupReference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
