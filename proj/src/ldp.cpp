#include "pelab/ldp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pelab/pairwise.hpp"

namespace pelab {

LdpProfile make_profile(std::vector<double> atoms, std::vector<double> probs) {
    if (atoms.empty() || atoms.size() != probs.size()) throw std::invalid_argument("atoms/probs mismatch");
    LdpProfile pr;
    double tot = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!(atoms[i] >= 0 && atoms[i] <= 1)) throw std::invalid_argument("atoms must lie in [0,1]");
        if (!(probs[i] >= 0)) throw std::invalid_argument("negative probability");
        tot += probs[i];
        if (atoms[i] == 0) pr.p += probs[i];
        pr.mu += atoms[i] * probs[i];
    }
    if (std::abs(tot - 1) > 1e-12) throw std::invalid_argument("probabilities must sum to 1");
    if (!(pr.p > 0 && pr.p < 1)) throw std::invalid_argument("P{xi=0} must lie in (0,1)");
    if (!(pr.mu > 0)) throw std::invalid_argument("mu must be positive");
    pr.nu = std::log(1 / pr.p);
    pr.atoms = std::move(atoms);
    pr.probs = std::move(probs);
    return pr;
}

LdpProfile bernoulli_profile(double p, double atom) {
    if (!(atom > 0 && atom <= 1)) throw std::invalid_argument("atom must lie in (0,1]");
    return make_profile({0.0, atom}, {p, 1 - p});
}

double cumulant(const LdpProfile& pr, double u) {
    if (u < 0) throw std::invalid_argument("u must be nonnegative");
    double s = 0;  // 1 - E e^{-uξ}
    for (std::size_t i = 0; i < pr.atoms.size(); ++i) s += pr.probs[i] * -std::expm1(-u * pr.atoms[i]);
    if (s < 0.5) return -std::log1p(-s);
    double e = 0;
    for (std::size_t i = 0; i < pr.atoms.size(); ++i) e += pr.probs[i] * std::exp(-u * pr.atoms[i]);
    return -std::log(e);
}

double cumulant_prime(const LdpProfile& pr, double u) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < pr.atoms.size(); ++i) {
        double w = pr.probs[i] * std::exp(-u * pr.atoms[i]);
        num += pr.atoms[i] * w;
        den += w;
    }
    return num / den;
}

double cumulant_second(const LdpProfile& pr, double u) {
    double m0 = 0, m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < pr.atoms.size(); ++i) {
        double w = pr.probs[i] * std::exp(-u * pr.atoms[i]);
        m0 += w;
        m1 += pr.atoms[i] * w;
        m2 += pr.atoms[i] * pr.atoms[i] * w;
    }
    double a = m1 / m0;
    return -(m2 / m0 - a * a);
}

namespace {

struct Sums {
    double gamma, gamma_prime;
};

// Σ w_i G(h m_i), Σ w_i m_i G'(h m_i); w == nullptr means the common weight vol
Sums gamma_sums(const LdpProfile& pr, const std::vector<double>& m, const double* w, double h, double vol) {
    const double* a = m.data();
    auto wt = [&](std::size_t i) { return w ? w[i] : 1.0; };
    double g = det_sum(m.size(), [&](std::size_t i) { return a[i] > 0 ? wt(i) * cumulant(pr, h * a[i]) : 0.0; });
    double gp = det_sum(m.size(),
                        [&](std::size_t i) { return a[i] > 0 ? wt(i) * a[i] * cumulant_prime(pr, h * a[i]) : 0.0; });
    return {g * vol, gp * vol};
}

Sums gamma_sums(const LdpProfile& pr, const WeightedDensity& q, double h) {
    return q.w.empty() ? gamma_sums(pr, q.m, nullptr, h, q.vol) : gamma_sums(pr, q.m, q.w.data(), h, 1.0);
}

}  // namespace

WeightedDensity density_of(const GridField& phi) {
    WeightedDensity q;
    q.m = magnitude_sq(phi).v;
    q.vol = phi.grid.cell_volume();
    q.support = support_measure(phi);
    return q;
}

GammaEvaluation gamma_functional(const LdpProfile& pr, const WeightedDensity& q, double h) {
    if (!(h > 0)) throw std::invalid_argument("h must be positive");
    Sums s = gamma_sums(pr, q, h);
    GammaEvaluation e;
    e.h = h;
    e.gamma = s.gamma;
    e.gamma_prime = s.gamma_prime;
    e.D_inf = pr.nu * q.support;
    return e;
}

GammaEvaluation gamma_functional(const LdpProfile& pr, const GridField& phi, double h) {
    return gamma_functional(pr, density_of(phi), h);
}

GValue g_functional(const LdpProfile& pr, const WeightedDensity& q, double D) {
    GValue out;
    if (D < 0) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    const double Dinf = pr.nu * q.support;
    if (D >= Dinf) {
        out.saturated = true;
        return out;
    }
    if (D == 0) {
        double mass = 0;
        for (std::size_t i = 0; i < q.m.size(); ++i) mass += q.m[i] * (q.w.empty() ? q.vol : q.w[i]);
        out.value = pr.mu * mass;
        return out;
    }
    auto U = [&](double h) {
        Sums s = gamma_sums(pr, q, h);
        return D - (s.gamma - h * s.gamma_prime);
    };
    auto f = [&](double h) { return (gamma_sums(pr, q, h).gamma - D) / h; };
    double lo = 1e-9, hi = 1e9;
    while (U(lo) <= 0 && lo > 1e-300) lo *= 1e-3;
    while (U(hi) >= 0) {
        if (hi > 1e300) {
            // D within rounding of D_inf: 0 <= G < (D_inf - D) / hi
            out.approximate = true;
            out.h_star = hi;
            out.value = std::max(f(hi), 0.0);
            out.crosscheck = out.value;
            return out;
        }
        hi *= 4;
    }
    for (int it = 0; it < 400 && hi / lo - 1 > 1e-15; ++it) {
        double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (U(mid) > 0)
            lo = mid;
        else
            hi = mid;
    }
    double h = std::sqrt(lo * hi);
    Sums s = gamma_sums(pr, q, h);
    out.h_star = h;
    out.value = s.gamma_prime;
    out.crosscheck = (s.gamma - D) / h;
    return out;
}

GValue g_functional(const LdpProfile& pr, const GridField& phi, double D) {
    if (D < 0) return g_functional(pr, WeightedDensity{}, D);
    return g_functional(pr, density_of(phi), D);
}

GBar discrete_gbar_from_averages(const LdpProfile& pr, const std::vector<double>& avg, double tau, int d, double h) {
    Sums s = gamma_sums(pr, avg, nullptr, h, std::pow(tau, d));
    return {s.gamma, s.gamma_prime};
}

GBar discrete_gbar(const LdpProfile& pr, const GridField& phi, double tau, double h) {
    if (!(h > 0)) throw std::invalid_argument("h must be positive");
    GridField m = magnitude_sq(phi);
    return discrete_gbar_from_averages(pr, cell_averages(m, tau), tau, phi.grid.d, h);
}

TailBound cramer_tail_bound_from_averages(const LdpProfile& pr, const std::vector<double>& avg, double tau, int d,
                                          double h, double x) {
    GBar g = discrete_gbar_from_averages(pr, avg, tau, d, h);
    TailBound t;
    t.gbar = g.gbar;
    t.gbar_prime = g.gbar_prime;
    t.valid = x < g.gbar_prime;
    t.bound = std::exp(-(g.gbar - h * g.gbar_prime) / std::pow(tau, d));
    return t;
}

TailBound cramer_tail_bound(const LdpProfile& pr, const GridField& phi, double tau, double h, double x) {
    GridField m = magnitude_sq(phi);
    return cramer_tail_bound_from_averages(pr, cell_averages(m, tau), tau, phi.grid.d, h, x);
}

FeasibilityReport feasibility_exponent(const LdpProfile& pr, const GridField& phi, double w, double D) {
    FeasibilityReport r;
    if (w < 0) {
        r.verdict = Verdict::Infeasible;
        return r;
    }
    GValue g = g_functional(pr, phi, D);
    r.G_value = g.value;
    r.margin = g.value - w;
    if (w < g.value && g.h_star > 0) {
        r.verdict = Verdict::Rare;
        r.h = g.h_star;
        r.exponent = gamma_functional(pr, phi, g.h_star).gamma - g.h_star * w;
    } else {
        r.verdict = Verdict::NoCertificate;
    }
    return r;
}

void write_gamma_table(const LdpProfile& pr, const GridField& phi, const std::vector<double>& hs, double D,
                       const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "h,gamma,gamma_prime,U\n";
    for (double h : hs) {
        auto e = gamma_functional(pr, phi, h);
        os << h << ',' << e.gamma << ',' << e.gamma_prime << ',' << D - (e.gamma - h * e.gamma_prime) << '\n';
    }
}

void write_g_table(const LdpProfile& pr, const GridField& phi, const std::vector<double>& Ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    os << "D,G,h_D\n";
    for (double D : Ds) {
        auto g = g_functional(pr, phi, D);
        os << D << ',' << g.value << ',' << g.h_star << '\n';
    }
}

}  // namespace pelab
