#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pelab/eigensolver.hpp"
#include "pelab/ldp.hpp"
#include "pelab/skeleton.hpp"

namespace pelab {

struct LocalizedOptions {
    std::vector<double> windows{1.0, 1.5, 2.0};  // screening window sides, scaled units
    int per_window = 4;                          // candidates kept per window size
    double side = 6.0;                           // first-pass subbox side, scaled units
    double side_refine = 10.0;                   // second pass
    int refine = 2;                              // best first-pass boxes re-solved
};

struct ExperimentConfig {
    int d = 2;
    double p = 0.5, w = 0.5;
    std::vector<double> alphas{1.0}, betas{10.0}, ts{64.0};
    int trials = 1;
    int resolution = 4;  // nodes per unit cell edge
    std::uint64_t master_seed = 1;
    std::string output;
    std::string solver = "global";  // global | localized
    double tol = 1e-8;
    int max_iter = 20000;
    LocalizedOptions local;

    void validate() const;
};
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

// H* = ceil((32 d / mu^2)^{1/d}) + 1, T odd and nearest H*/tau, H1 = tau T
struct H1Schedule {
    double H_star, tau, H1;
    int T;
};
H1Schedule h1_schedule(double t, int d, double mu);

// ---- candidate families for the variational constants ----

enum class FamilyKind { Stream, Scalar, Mixed };
struct CandidateFamily {
    FamilyKind kind = FamilyKind::Mixed;
    int d = 2;
    int resolution = 96;  // quadrature order (grid candidates: nodes per edge)
    double support = 1.0;  // support measure of every candidate
};
std::string family_label(FamilyKind k);
FamilyKind family_from_label(const std::string& s);

struct ConstantEstimate {
    double value = 0;
    std::string family;
    nlohmann::json params;
};

// shape descriptors enumerated by a family, best first by construction order
struct ShapeSpec {
    std::string kind;  // stream-disk, stream-box, scalar-bessel, scalar-bump, scalar-box
    double power = 2;
    double aspect = 1;
};
std::vector<ShapeSpec> family_shapes(const CandidateFamily& fam);
// candidate field on a grid scaled so that its discrete support measure equals `support`
GridField candidate_field(const ShapeSpec& sh, int d, int resolution, double support);

// continuum integrals of a candidate by Gauss quadrature with analytic derivatives
struct CandidateIntegrals {
    double norm_sq = 0, grad_sq = 0, div_sq = 0, support = 0;
    WeightedDensity density;  // |φ|² at the quadrature points
    double quotient(double alpha) const;
};
CandidateIntegrals candidate_integrals(const ShapeSpec& sh, int d, double support, int order = 96);

ConstantEstimate estimate_c_alpha(double alpha, const CandidateFamily& fam, int budget);
// one estimate per beta, all from the same candidate set
std::vector<ConstantEstimate> estimate_c_alpha_beta(double alpha, const std::vector<double>& betas,
                                                    const LdpProfile& pr, const CandidateFamily& fam, int budget,
                                                    int scales = 21);

// ---- penalized PE of a skeleton instance ----

struct InstanceGeometry {
    double tau = 1;
    int n = 1;  // nodes per edge of the full box
    double s = 1;
    double x0 = 0;
};
InstanceGeometry instance_geometry(const SkeletonField& sk, int resolution);
EnergyForm box_form(const SkeletonField& sk, const InstanceGeometry& geo, double alpha, double beta,
                    const std::array<int, 4>& lo, const std::array<int, 4>& count);
EnergyForm global_form(const SkeletonField& sk, int resolution, double alpha, double beta);

struct InstancePe {
    double lambda = 0;
    double residual = 0;
    int iterations = 0;
    bool converged = false;
    std::array<int, 4> lo{}, count{};  // node box of the reported solve
    int boxes = 1;
    GridField field;
};
InstancePe global_pe(const SkeletonField& sk, int resolution, double alpha, double beta, const LobpcgOptions& opt);
// min over screened subboxes; an upper bound for the global PE
InstancePe localized_pe(const SkeletonField& sk, int resolution, double alpha, double beta,
                        const LobpcgOptions& opt, const LocalizedOptions& loc);
// cell centres of the least occupied windows, greedy with suppression
std::vector<Index> screen_windows(const SkeletonField& sk, const LocalizedOptions& loc);

struct SweepRow {
    double t = 0;
    int trial = 0;
    double alpha = 0, beta = 0;
    double lambda_scaled = 0, residual = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    int iterations = 0;
    bool empty_blocks = false;  // 𝔼_t ≠ ∅ under the H1 schedule
};
std::uint64_t trial_seed(std::uint64_t master, double t, int trial);
std::vector<SweepRow> normalized_pe_sweep(const ExperimentConfig& cfg);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
std::string sweep_csv(const std::vector<SweepRow>& rows);
double empirical_quantile(std::vector<double> v, double q);

// λ >= c μ min{μ^{2/d}, β} over rows with 𝔼_t = ∅
double fit_rough_bound(const std::vector<SweepRow>& rows, double mu, int d);

// P{𝔼_t ≠ ∅} over seeds derived from master
double empty_block_frequency(int d, double p, double w, double t, int seeds, std::uint64_t master);

struct ChainInstance {
    double t = 0;
    int trial = 0;
    double lambda = 0;
    double best_candidate = 0;  // smallest divergence-free quotient
    double gap = 0;
    int candidates = 0;
    int violations = 0;
    double reference = 0;  // (ν/d)^{2/d} Ŝ - ε(β)
    bool converged = false;
};
struct ChainReport {
    double alpha = 0, beta = 0;
    double S_hat = 0, eps = 0, reference = 0;
    std::vector<ChainInstance> instances;
    int violations = 0;
    nlohmann::json to_json() const;
};
ChainReport theorem11_chain(const ExperimentConfig& cfg, double alpha, double beta);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};
struct ValidationReport {
    std::vector<CheckResult> checks;
    bool passed() const;
    nlohmann::json to_json() const;
};
ValidationReport run_validation_suite(double tol_scale = 1.0, const std::string& skeleton_path = "");

}  // namespace pelab
