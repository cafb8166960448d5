#pragma once
#include <string>
#include <vector>

#include "pelab/grid.hpp"

namespace pelab {

// discrete law of ξ₀ on [0,1]
struct LdpProfile {
    std::vector<double> atoms, probs;
    double p = 0, mu = 0, nu = 0;
};

LdpProfile make_profile(std::vector<double> atoms, std::vector<double> probs);
LdpProfile bernoulli_profile(double p, double atom);

double cumulant(const LdpProfile& pr, double u);         // G(u) = -ln E e^{-uξ}
double cumulant_prime(const LdpProfile& pr, double u);   // G'(u)
double cumulant_second(const LdpProfile& pr, double u);  // G''(u) <= 0

struct GammaEvaluation {
    double h = 0, gamma = 0, gamma_prime = 0, D_inf = 0;
};
// |φ|² samples with quadrature weights (w empty: common weight vol) and the support measure
struct WeightedDensity {
    std::vector<double> m, w;
    double vol = 1;
    double support = 0;
};
WeightedDensity density_of(const GridField& phi);

GammaEvaluation gamma_functional(const LdpProfile& pr, const GridField& phi, double h);
GammaEvaluation gamma_functional(const LdpProfile& pr, const WeightedDensity& q, double h);

struct GValue {
    double value = 0;
    double h_star = 0;
    bool saturated = false;
    bool approximate = false;  // maximiser not attained within the bracket
    double crosscheck = 0;     // h^{-1}(Γ(h) - D) at h_star
};
GValue g_functional(const LdpProfile& pr, const GridField& phi, double D);
GValue g_functional(const LdpProfile& pr, const WeightedDensity& q, double D);

struct GBar {
    double gbar = 0, gbar_prime = 0;
};
GBar discrete_gbar(const LdpProfile& pr, const GridField& phi, double tau, double h);
GBar discrete_gbar_from_averages(const LdpProfile& pr, const std::vector<double>& avg, double tau, int d, double h);

struct TailBound {
    double bound = 1, gbar = 0, gbar_prime = 0;
    bool valid = false;
};
TailBound cramer_tail_bound(const LdpProfile& pr, const GridField& phi, double tau, double h, double x);
TailBound cramer_tail_bound_from_averages(const LdpProfile& pr, const std::vector<double>& avg, double tau, int d,
                                          double h, double x);

enum class Verdict { Infeasible, Rare, NoCertificate };
struct FeasibilityReport {
    Verdict verdict = Verdict::NoCertificate;
    double G_value = 0, margin = 0, h = 0, exponent = 0;
};
FeasibilityReport feasibility_exponent(const LdpProfile& pr, const GridField& phi, double w, double D);

void write_gamma_table(const LdpProfile& pr, const GridField& phi, const std::vector<double>& hs, double D,
                       const std::string& path);
void write_g_table(const LdpProfile& pr, const GridField& phi, const std::vector<double>& Ds, const std::string& path);

}  // namespace pelab
