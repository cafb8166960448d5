#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pelab/skeleton.hpp"

namespace pelab {

// Cell-centred nodes: x_j(i) = x0[j] + (i + 1/2) s, i = 0..n[j]-1.
struct Grid {
    int d = 2;
    std::array<int, 4> n{1, 1, 1, 1};
    double s = 1.0;
    std::array<double, 4> x0{0, 0, 0, 0};

    std::size_t nodes() const;
    std::size_t stride(int j) const;
    double coord(int j, int i) const { return x0[j] + (i + 0.5) * s; }
    double side(int j) const { return n[j] * s; }
    double cell_volume() const;
    void unravel(std::size_t idx, int* i) const;
    bool operator==(const Grid& o) const;
};

// centred cube of the given side with m nodes per edge
Grid make_grid(int d, double side, int m);
// m interior nodes of the vertex grid on [-side/2, side/2]; the zero extension sits on the boundary
Grid make_dirichlet_grid(int d, double side, int m);

struct GridField {
    Grid grid;
    int components = 1;
    std::vector<double> v;  // component-major: v[c * N + node]

    GridField() = default;
    GridField(const Grid& g, int comps);
    std::size_t N() const { return grid.nodes(); }
    double* comp(int c) { return v.data() + static_cast<std::size_t>(c) * N(); }
    const double* comp(int c) const { return v.data() + static_cast<std::size_t>(c) * N(); }
};

constexpr double kSupportThreshold = 1e-14;

GridField forward_gradient(const GridField& f, int component = 0);
GridField forward_gradient_serial(const GridField& f, int component = 0);
GridField forward_divergence(const GridField& v);
GridField forward_divergence_serial(const GridField& v);

// stream-function field (D2 psi, -D1 psi); exactly divergence free when psi vanishes on the first layer
GridField curl_field(const GridField& psi);

GridField magnitude_sq(const GridField& f);
double l2_norm_sq(const GridField& f);
double l2_norm_sq_serial(const GridField& f);
double lp_norm(const GridField& f, double p);
double max_abs(const GridField& f);
// Σ|Dφ|² s^d over all of Z^d for the zero extension (includes the lower boundary layer)
double dirichlet_grad_norm_sq(const GridField& f);
double dot(const GridField& a, const GridField& b);
double support_measure(const GridField& f);

// cell C_z = tau (z + Q); nodes must tile cells exactly
struct CellLayout {
    int r = 1;                      // nodes per cell edge
    std::array<std::int64_t, 4> zlo{};  // cell index of node 0 along each axis
    std::array<int, 4> first{};     // nodes of the first (possibly clipped) cell
    std::array<std::int64_t, 4> ncells{};
};
CellLayout cell_layout(const Grid& g, double tau);
double cell_average(const GridField& f, double tau, const Index& z);
// all cells meeting the grid: averages in canonical order (dimension 0 fastest)
std::vector<double> cell_averages(const GridField& f, double tau, CellLayout* layout = nullptr);

GridField mollify(const GridField& f, double delta);
GridField truncate_eps(const GridField& f, double eps_sqrt);
GridField truncate_r(const GridField& f, double r);

struct SobolevReport {
    double lhs = 0, base = 0, ratio = 0;
};
SobolevReport check_sobolev(const GridField& f, double q);

struct NodeBox {
    std::array<int, 4> lo{}, hi{};  // inclusive node ranges
};
struct PoincareReport {
    double lhs = 0, mass_term = 0, grad_term = 0, C_required = 0, c_fit = 0;
};
PoincareReport check_poincare(const GridField& f, const NodeBox& qplus, const std::vector<std::uint8_t>& q0,
                              const std::vector<std::uint8_t>& q1, double alpha_star);

// V_t at nodes: 1 iff x/tau lies in an occupied cube
std::vector<std::uint8_t> sample_potential(const SkeletonField& sk, const Grid& g, double tau);

void write_snapshot(const GridField& f, const std::string& path);
GridField read_snapshot(const std::string& path);
void write_csv(const GridField& f, const std::string& path);

}  // namespace pelab
