#pragma once
#include <cstdint>
#include <span>

namespace pelab {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// stateless hash of (seed, lattice index): same value for the same cell, any order
inline std::uint64_t cell_hash(std::uint64_t seed, std::span<const std::int64_t> z) {
    std::uint64_t h = mix64(seed ^ 0x5bd1e995ULL);
    for (std::int64_t c : z) h = mix64(h ^ static_cast<std::uint64_t>(c));
    return h;
}

inline double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(master ^ mix64(a)) ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// small counter-based stream for starting vectors and Monte Carlo
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(mix64(seed)) {}
    std::uint64_t next() { return mix64(state_++); }
    double uniform() { return to_unit(next()); }
    double symmetric() { return 2.0 * uniform() - 1.0; }

private:
    std::uint64_t state_;
};

}  // namespace pelab
