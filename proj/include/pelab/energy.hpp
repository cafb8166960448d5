#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pelab/grid.hpp"

namespace pelab {

// E(φ) = s^d Σ [ |∇φ|² + α⁻¹ (div φ)² + β V |φ|² ] over Z^d for the zero extension.
// components == 1 gives the scalar form (no divergence term).
struct EnergyForm {
    Grid grid;
    int components = 2;
    double alpha = 1.0;
    double beta = 0.0;
    double beta_scale = 1.0;
    std::vector<std::uint8_t> V;

    std::size_t size() const { return grid.nodes() * static_cast<std::size_t>(components); }
    double beta_eff() const { return beta * beta_scale; }
};

EnergyForm assemble(const Grid& grid, double alpha, double beta, const std::vector<std::uint8_t>& potential,
                    int components, double beta_scale = 1.0);
EnergyForm assemble(const Grid& grid, double alpha, double beta, const GridField& potential, int components,
                    double beta_scale = 1.0);

// y = A x with <A x, x> s^d = E(x); plain coefficient vectors laid out like GridField::v
void apply(const EnergyForm& f, const double* x, double* y);
void apply_serial(const EnergyForm& f, const double* x, double* y);
std::vector<double> diagonal(const EnergyForm& f);

double energy(const EnergyForm& f, const GridField& phi);
double rayleigh_quotient(const EnergyForm& f, const GridField& phi);

// node box [lo, lo + count) along each axis, Dirichlet on its boundary
EnergyForm restrict_nodes(const EnergyForm& f, const std::array<int, 4>& lo, const std::array<int, 4>& count);
// cube of side_cells cells (r nodes per cell edge) centred on cell z, clipped to the box
EnergyForm restrict_to_subbox(const EnergyForm& f, const Index& center, int side_cells, double tau);

struct Triplet {
    std::size_t row, col;
    double value;
};
std::vector<Triplet> assemble_triplets(const EnergyForm& f);
void export_triplets(const EnergyForm& f, const std::string& path);

}  // namespace pelab
