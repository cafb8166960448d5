#include <benchmark/benchmark.h>

#include <random>

#include "pelab/energy.hpp"
#include "pelab/grid.hpp"

using namespace pelab;

namespace {

GridField field(int n, int comps) {
    GridField f(make_grid(2, 1.0, n), comps);
    std::mt19937_64 r(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& x : f.v) x = u(r);
    return f;
}

template <GridField (*K)(const GridField&, int)>
void gradient(benchmark::State& st) {
    GridField f = field(static_cast<int>(st.range(0)), 1);
    for (auto _ : st) benchmark::DoNotOptimize(K(f, 0));
    st.SetItemsProcessed(st.iterations() * f.N());
}

template <GridField (*K)(const GridField&)>
void divergence(benchmark::State& st) {
    GridField f = field(static_cast<int>(st.range(0)), 2);
    for (auto _ : st) benchmark::DoNotOptimize(K(f));
    st.SetItemsProcessed(st.iterations() * f.N());
}

template <double (*K)(const GridField&)>
void norm(benchmark::State& st) {
    GridField f = field(static_cast<int>(st.range(0)), 2);
    for (auto _ : st) benchmark::DoNotOptimize(K(f));
    st.SetItemsProcessed(st.iterations() * f.N());
}

template <void (*K)(const EnergyForm&, const double*, double*)>
void operator_apply(benchmark::State& st) {
    GridField x = field(static_cast<int>(st.range(0)), 2);
    std::vector<std::uint8_t> V(x.N());
    for (std::size_t i = 0; i < V.size(); i += 3) V[i] = 1;
    EnergyForm f = assemble(x.grid, 0.1, 30.0, V, 2);
    std::vector<double> y(f.size());
    for (auto _ : st) {
        K(f, x.v.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * x.N());
}

}  // namespace

BENCHMARK(operator_apply<apply_serial>)->Name("apply/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(operator_apply<apply>)->Name("apply/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(gradient<forward_gradient_serial>)->Name("gradient/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(gradient<forward_gradient>)->Name("gradient/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(divergence<forward_divergence_serial>)->Name("divergence/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(divergence<forward_divergence>)->Name("divergence/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(norm<l2_norm_sq_serial>)->Name("l2/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(norm<l2_norm_sq>)->Name("l2/omp")->RangeMultiplier(4)->Range(64, 4096);

BENCHMARK_MAIN();
