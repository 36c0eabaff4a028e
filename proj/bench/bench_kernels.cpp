// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <vector>

#include <benchmark/benchmark.h>

#include "tcwm/kernels.hpp"
#include "tcwm/rng.hpp"
#include "tcwm/world.hpp"

namespace {

using namespace tcwm;
using kernels::AffineDims;

std::vector<Real> random_values(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Real> v(n);
    for (auto& x : v) x = static_cast<Real>(rng.normal());
    return v;
}

struct AffineData {
    AffineDims d;
    std::vector<Real> w, b, x, y, dy, dx, dw, db;
    explicit AffineData(const benchmark::State& s)
        : d{std::size_t(s.range(0)), std::size_t(s.range(1)), std::size_t(s.range(1))},
          w(random_values(d.out * d.in, 1)), b(random_values(d.out, 2)), x(random_values(d.rows * d.in, 3)),
          y(d.rows * d.out), dy(random_values(d.rows * d.out, 4)), dx(d.rows * d.in), dw(d.out * d.in), db(d.out) {}
    void set_flops(benchmark::State& s) const {
        s.SetItemsProcessed(std::int64_t(s.iterations()) * std::int64_t(d.rows * d.in * d.out));
    }
};

template <auto Kernel>
void BM_forward(benchmark::State& state) {
    AffineData a(state);
    for (auto _ : state) {
        Kernel(a.w.data(), a.b.data(), a.x.data(), a.y.data(), a.d);
        benchmark::DoNotOptimize(a.y.data());
    }
    a.set_flops(state);
}

template <auto Kernel>
void BM_backward_input(benchmark::State& state) {
    AffineData a(state);
    for (auto _ : state) {
        Kernel(a.w.data(), a.dy.data(), a.dx.data(), a.d);
        benchmark::DoNotOptimize(a.dx.data());
    }
    a.set_flops(state);
}

template <auto Kernel>
void BM_backward_params(benchmark::State& state) {
    AffineData a(state);
    for (auto _ : state) {
        Kernel(a.x.data(), a.dy.data(), a.dw.data(), a.db.data(), a.d);
        benchmark::DoNotOptimize(a.dw.data());
    }
    a.set_flops(state);
}

template <auto Kernel>
void BM_tanh(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    const auto x = random_values(n, 5);
    std::vector<Real> y(n);
    for (auto _ : state) {
        Kernel(x.data(), y.data(), n);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(n));
}

template <bool Parallel>
void BM_generate(benchmark::State& state) {
    WorldSpec spec;
    const World world = build_world(spec);
    GenerateOptions opt;
    opt.n_traj = std::size_t(state.range(0));
    for (auto _ : state) {
        auto batch = Parallel ? generate_dataset(world, opt) : generate_dataset_serial(world, opt);
        benchmark::DoNotOptimize(batch.embeddings.data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(opt.n_traj * opt.horizon));
}

void affine_sizes(benchmark::internal::Benchmark* b) {
    for (int rows : {64, 512}) {
        for (int width : {64, 256}) b->Args({rows, width});
    }
}

}  // namespace

BENCHMARK(BM_forward<kernels::serial::affine_forward>)->Name("affine_forward/serial")->Apply(affine_sizes);
BENCHMARK(BM_forward<kernels::parallel::affine_forward>)->Name("affine_forward/parallel")->Apply(affine_sizes);
BENCHMARK(BM_backward_input<kernels::serial::affine_backward_input>)
    ->Name("affine_backward_input/serial")
    ->Apply(affine_sizes);
BENCHMARK(BM_backward_input<kernels::parallel::affine_backward_input>)
    ->Name("affine_backward_input/parallel")
    ->Apply(affine_sizes);
BENCHMARK(BM_backward_params<kernels::serial::affine_backward_params>)
    ->Name("affine_backward_params/serial")
    ->Apply(affine_sizes);
BENCHMARK(BM_backward_params<kernels::parallel::affine_backward_params>)
    ->Name("affine_backward_params/parallel")
    ->Apply(affine_sizes);
BENCHMARK(BM_tanh<kernels::serial::tanh_forward>)->Name("tanh_forward/serial")->Arg(1 << 16);
BENCHMARK(BM_tanh<kernels::parallel::tanh_forward>)->Name("tanh_forward/parallel")->Arg(1 << 16);
BENCHMARK(BM_generate<false>)->Name("generate_dataset/serial")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate<true>)->Name("generate_dataset/parallel")->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
