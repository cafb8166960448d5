#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pelab/grid.hpp"

namespace pelab {

// bitmap over the pixels of a grid (pixel = node cell)
struct Raster {
    Grid grid;
    std::vector<std::uint8_t> bits;

    Raster() = default;
    explicit Raster(const Grid& g) : grid(g), bits(g.nodes(), 0) {}
    std::size_t count() const;
    double measure() const { return static_cast<double>(count()) * grid.cell_volume(); }
};

std::vector<std::uint32_t> rle_encode(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> rle_decode(const std::vector<std::uint32_t>& runs, std::size_t n);

// Chebyshev distance (in pixels, between centres) to the nearest set pixel; two-pass sweep
std::vector<std::int32_t> chessboard_distance(const Raster& r);

struct LevelInfo {
    std::vector<Index> empty;  // 𝔼_k
    std::size_t E_plus = 0;    // |E_k^+| in pixels
    std::size_t E_k = 0;       // |E ∩ E_k^+|
    std::size_t Phi = 0;       // |Φ_k|
    std::size_t Phi_E = 0;     // |Φ_k ∩ E|
};

struct BlockHierarchy {
    int T = 3;
    double H0 = 1;
    double gamma = 0.5;
    int m0 = 1;
    int K_star = 1;
    int k0 = -1;
    int top = 0;  // highest level examined
    bool top_level_nonempty = false;  // 𝔼_{K*} ≠ ∅
    int px_per_H0 = 1;
    Raster E;  // padded copy of the source set
    std::vector<LevelInfo> levels;
    std::vector<std::vector<std::uint8_t>> E_plus;  // per level

    double H(int k) const;
    std::vector<std::uint8_t> Psi(int k) const;
    std::vector<std::uint8_t> Phi(int k) const;
    Index block_of(int k, const int* pixel) const;
};

BlockHierarchy build_hierarchy(const Raster& E, int T, double gamma, int m0, int K_star, double H0);

struct Schedule {
    int T;
    double kappa, gamma;
    int m0, K_star;
    double h_star;
};
Schedule schedule_38(int T, int d);

Raster neighborhood_U(const BlockHierarchy& h);

struct CutoffField {
    GridField values;  // on the hierarchy raster
    double grad_bound = 0;  // max over pixels of max_j |D_j ζ|
    double grad_bound_euclid = 0;
};
CutoffField cutoff(const BlockHierarchy& h);

std::string hierarchy_json(const BlockHierarchy& h);

// ζ_z(x) = η(x/(L H1) - z) / sqrt(Σ η²), η a product of cos² ramps (1 on Q, 0 outside 1.4 Q)
struct PouTerm {
    Index z;
    double value;
    std::array<double, 4> grad;
};
std::vector<PouTerm> pou_at(int d, int L, double H1, const double* x);
std::vector<std::pair<Index, GridField>> partition_of_unity(int L, double H1, const Grid& grid);

struct B10Params {
    double alpha = 1;
    double beta = 100;
    double C_alpha = 1;  // estimate of 𝒞_α
    double nu = std::log(2.0);
    double delta = 0.1;
    int T = 3;
    double c1 = 1, c3 = 1, c4 = 1;
};
struct B10Report {
    bool vacuous = false;
    bool psi1 = false, psi2 = false;
    double eps = 0, eps1 = 0;
    double E_measure = 0, U_measure = 0;
    double lhs = 0, rhs = 0, margin = 0;
    int k0 = -1;
};
B10Report verify_b10(const GridField& phi, const B10Params& prm);

}  // namespace pelab
