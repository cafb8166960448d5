#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pelab/energy.hpp"

namespace pelab {

struct LobpcgOptions {
    double tol = 1e-8;
    int max_iter = 20000;
    int block = 4;
    std::uint64_t seed = 1;
    int refresh = 25;  // recompute A X explicitly every so many iterations
};

struct LobpcgResult {
    double lambda = 0;
    std::vector<double> x;  // unit Euclidean norm
    double residual = 0;    // ||A x - λ x|| / λ
    int iterations = 0;
    bool converged = false;
};

using ApplyFn = std::function<void(const double*, double*)>;

// smallest eigenpair of a symmetric positive definite operator, Jacobi preconditioned
LobpcgResult lobpcg(std::size_t n, const ApplyFn& A, const std::vector<double>& diag, const LobpcgOptions& opt,
                    const std::vector<double>* start = nullptr);

struct EigenResult {
    double lambda = 0;
    GridField field;  // unit L² norm
    double residual = 0;
    int iterations = 0;
    bool converged = false;
    double grad_norm_sq = 0;  // ||∇φ||² of the returned field
};

EigenResult smallest_eigenpair(const EnergyForm& form, double tol = 1e-8, int max_iter = 20000, std::uint64_t seed = 1,
                               int block = 4);
EigenResult smallest_eigenpair(const EnergyForm& form, const LobpcgOptions& opt,
                               const GridField* start = nullptr);

struct PartialPe {
    Index z;
    double lambda = 0;
    bool converged = false;
};
struct PartialPeResult {
    double min_lambda = 0;
    Index argmin;
    std::vector<PartialPe> all;
    bool converged = true;
};

// λ_z on the inner boxes L H1 (z + 1.4 Q), over all z whose outer box L H1 (z + 1.5 Q) meets the domain
PartialPeResult partial_pe_minimum(const EnergyForm& form, int L, double H1, const LobpcgOptions& opt = {});

std::string eigen_result_json(const EigenResult& r);

}  // namespace pelab
