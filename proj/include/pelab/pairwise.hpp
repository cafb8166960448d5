#pragma once
#include <cstddef>
#include <vector>

namespace pelab {

constexpr std::size_t kChunk = 4096;

template <class F>
double pairwise_range(F&& f, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 16) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        return s;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_range(f, lo, mid) + pairwise_range(f, mid, hi);
}

// Σ f(i) for i < n; fixed chunking so the result does not depend on thread count
template <class F>
double det_sum(std::size_t n, F&& f) {
    if (n == 0) return 0.0;
    std::size_t nc = (n + kChunk - 1) / kChunk;
    std::vector<double> part(nc);
#pragma omp parallel for schedule(static)
    for (std::size_t c = 0; c < nc; ++c) {
        std::size_t lo = c * kChunk, hi = lo + kChunk < n ? lo + kChunk : n;
        part[c] = pairwise_range(f, lo, hi);
    }
    return pairwise_range([&](std::size_t c) { return part[c]; }, 0, nc);
}

template <class F>
double det_sum_serial(std::size_t n, F&& f) {
    if (n == 0) return 0.0;
    std::size_t nc = (n + kChunk - 1) / kChunk;
    std::vector<double> part(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        std::size_t lo = c * kChunk, hi = lo + kChunk < n ? lo + kChunk : n;
        part[c] = pairwise_range(f, lo, hi);
    }
    return pairwise_range([&](std::size_t c) { return part[c]; }, 0, nc);
}

}  // namespace pelab
