#include "pelab/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pelab/blocks.hpp"
#include "pelab/io.hpp"
#include "pelab/rng.hpp"

namespace pelab {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (d < 2 || d > 3) throw std::invalid_argument("d must be 2 or 3");
    if (!(p > 0 && p < 1)) throw std::invalid_argument("p must lie in (0,1)");
    if (!(w > 0 && w < 1)) throw std::invalid_argument("w must lie in (0,1)");
    if (alphas.empty() || betas.empty() || ts.empty()) throw std::invalid_argument("alpha, beta and t lists must be non-empty");
    for (double a : alphas)
        if (!(a > 0)) throw std::invalid_argument("alpha must be positive");
    for (double b : betas)
        if (!(b >= 0)) throw std::invalid_argument("beta must be nonnegative");
    for (double t : ts)
        if (!(t >= std::numbers::e)) throw std::invalid_argument("t must be at least e");
    if (trials < 1) throw std::invalid_argument("trials must be positive");
    if (resolution < 4) throw std::invalid_argument("resolution must be at least 4 nodes per cell");
    if (solver != "global" && solver != "localized") throw std::invalid_argument("solver must be global or localized");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        c.d = j.value("d", c.d);
        c.p = j.value("p", c.p);
        c.w = j.value("w", c.w);
        if (j.contains("alpha")) c.alphas = j.at("alpha").get<std::vector<double>>();
        if (j.contains("beta")) c.betas = j.at("beta").get<std::vector<double>>();
        if (j.contains("t")) c.ts = j.at("t").get<std::vector<double>>();
        c.trials = j.value("trials", c.trials);
        c.resolution = j.value("resolution", c.resolution);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.output = j.value("output", c.output);
        c.solver = j.value("solver", c.solver);
        c.tol = j.value("tol", c.tol);
        c.max_iter = j.value("max_iter", c.max_iter);
        if (j.contains("localized")) {
            const json& l = j.at("localized");
            if (l.contains("windows")) c.local.windows = l.at("windows").get<std::vector<double>>();
            c.local.per_window = l.value("per_window", c.local.per_window);
            c.local.side = l.value("side", c.local.side);
            c.local.side_refine = l.value("side_refine", c.local.side_refine);
            c.local.refine = l.value("refine", c.local.refine);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bad config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    return json{{"d", c.d},
                {"p", c.p},
                {"w", c.w},
                {"alpha", c.alphas},
                {"beta", c.betas},
                {"t", c.ts},
                {"trials", c.trials},
                {"resolution", c.resolution},
                {"master_seed", c.master_seed},
                {"output", c.output},
                {"solver", c.solver},
                {"tol", c.tol},
                {"max_iter", c.max_iter},
                {"localized",
                 {{"windows", c.local.windows},
                  {"per_window", c.local.per_window},
                  {"side", c.local.side},
                  {"side_refine", c.local.side_refine},
                  {"refine", c.local.refine}}}};
}

H1Schedule h1_schedule(double t, int d, double mu) {
    H1Schedule h;
    h.H_star = std::ceil(std::pow(32.0 * d / (mu * mu), 1.0 / d)) + 1;
    h.tau = scaling_tau(t, d);
    double r = h.H_star / h.tau;
    int T = 2 * static_cast<int>(std::floor((r - 1) / 2)) + 1;  // odd below
    if (std::abs(T + 2 - r) < std::abs(T - r)) T += 2;
    h.T = std::max(T, 1);
    h.H1 = h.tau * h.T;
    return h;
}

// ---------------------------------------------------------------------------
// candidate families

std::string family_label(FamilyKind k) {
    switch (k) {
        case FamilyKind::Stream: return "stream";
        case FamilyKind::Scalar: return "scalar";
        default: return "mixed";
    }
}

FamilyKind family_from_label(const std::string& s) {
    if (s == "stream") return FamilyKind::Stream;
    if (s == "scalar") return FamilyKind::Scalar;
    if (s == "mixed") return FamilyKind::Mixed;
    throw std::invalid_argument("unknown family " + s);
}

std::vector<ShapeSpec> family_shapes(const CandidateFamily& fam) {
    std::vector<ShapeSpec> out;
    if (fam.kind != FamilyKind::Scalar && fam.d == 2) {
        for (double k : {2.0, 2.5, 3.0, 4.0})
            for (double a : {1.0, 1.3, 1.7}) out.push_back({"stream-disk", k, a});
        for (double k : {2.0, 3.0}) out.push_back({"stream-box", k, 1.0});
    }
    if (fam.kind != FamilyKind::Stream) {
        for (double a : {1.0, 1.3, 1.7, 2.5}) out.push_back({"scalar-bessel", 1.0, a});
        for (double k : {1.0, 1.5, 2.0}) out.push_back({"scalar-bump", k, 1.0});
        out.push_back({"scalar-box", 1.0, 1.0});
    }
    return out;
}

namespace {

constexpr double kJ01 = 2.404825557695773;

std::array<double, 4> semi_axes(int d, double aspect) {
    std::array<double, 4> a{1, 1, 1, 1};
    a[0] = std::pow(aspect, (d - 1.0) / d);
    for (int j = 1; j < d; ++j) a[j] = std::pow(aspect, -1.0 / d);
    return a;
}

// nodal values on a reference grid, support semi-axes from semi_axes()
GridField reference_shape(const ShapeSpec& sh, int d, int res) {
    auto a = semi_axes(d, sh.aspect);
    double amax = *std::max_element(a.begin(), a.begin() + d);
    Grid g = make_grid(d, 2.2 * amax, res);
    bool stream = sh.kind.rfind("stream", 0) == 0;
    if (stream && d != 2) throw std::invalid_argument("stream candidates need d = 2");
    GridField f(g, 1);
    std::vector<int> idx(4, 0);
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        g.unravel(n, idx.data());
        double rho2 = 0, prod = 1;
        bool inside_box = true;
        for (int j = 0; j < d; ++j) {
            double u = g.coord(j, idx[j]) / a[j];
            rho2 += u * u;
            if (std::abs(u) >= 1) inside_box = false;
            prod *= std::cos(0.5 * std::numbers::pi * u);
        }
        double v = 0;
        if (sh.kind == "stream-disk" || sh.kind == "scalar-bump") {
            if (rho2 < 1) v = std::pow(1 - rho2, sh.power);
        } else if (sh.kind == "scalar-bessel") {
            if (rho2 < 1) v = std::cyl_bessel_j(0.0, kJ01 * std::sqrt(rho2));
        } else if (sh.kind == "stream-box" || sh.kind == "scalar-box") {
            if (inside_box) v = std::pow(std::abs(prod), sh.power);
        } else {
            throw std::invalid_argument("unknown shape " + sh.kind);
        }
        f.v[n] = v;
    }
    if (stream) return curl_field(f);
    GridField out(g, d);
    std::copy(f.v.begin(), f.v.end(), out.v.begin());
    return out;
}

json shape_json(const ShapeSpec& sh, double support, int res) {
    return json{{"kind", sh.kind}, {"power", sh.power}, {"aspect", sh.aspect}, {"support", support}, {"resolution", res}};
}

[[maybe_unused]] double free_quotient(const GridField& phi, double alpha) {
    std::vector<std::uint8_t> V(phi.grid.nodes(), 0);
    EnergyForm f = assemble(phi.grid, alpha, 0.0, V, phi.components);
    return rayleigh_quotient(f, phi);
}

}  // namespace

GridField candidate_field(const ShapeSpec& sh, int d, int resolution, double support) {
    if (!(support > 0)) throw std::invalid_argument("support must be positive");
    GridField f = reference_shape(sh, d, resolution);
    double m = support_measure(f);
    if (!(m > 0)) throw std::runtime_error("degenerate candidate " + sh.kind);
    double lam = std::pow(support / m, 1.0 / d);
    f.grid.s *= lam;
    for (int j = 0; j < d; ++j) f.grid.x0[j] *= lam;
    return f;
}

namespace {

// Gauss-Legendre nodes and weights on [-1, 1]
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2 / ((1 - z * z) * dp * dp);
    }
}

double unit_ball_volume(int d) { return d == 2 ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0; }

bool box_kind(const std::string& k) { return k == "stream-box" || k == "scalar-box"; }

// φ and J[c][j] = ∂_j φ_c at x; b are the semi-axes
void shape_eval(const ShapeSpec& sh, int d, const double* b, const double* x, double* phi, double (*J)[3]) {
    for (int c = 0; c < 3; ++c) {
        phi[c] = 0;
        for (int j = 0; j < 3; ++j) J[c][j] = 0;
    }
    const double k = sh.power;
    if (sh.kind == "stream-disk" || sh.kind == "scalar-bump") {
        double q = 0;
        for (int j = 0; j < d; ++j) q += x[j] * x[j] / (b[j] * b[j]);
        double g1 = -k * std::pow(1 - q, k - 1);  // g'(q)
        double dq[3];
        for (int j = 0; j < d; ++j) dq[j] = 2 * x[j] / (b[j] * b[j]);
        if (sh.kind == "scalar-bump") {
            phi[0] = std::pow(1 - q, k);
            for (int j = 0; j < d; ++j) J[0][j] = g1 * dq[j];
            return;
        }
        double g2 = k * (k - 1) * std::pow(1 - q, k - 2);
        double H[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) H[i][j] = g2 * dq[i] * dq[j] + (i == j ? g1 * 2 / (b[j] * b[j]) : 0.0);
        phi[0] = g1 * dq[1];
        phi[1] = -g1 * dq[0];
        J[0][0] = H[0][1];
        J[0][1] = H[1][1];
        J[1][0] = -H[0][0];
        J[1][1] = -H[1][0];
        return;
    }
    if (sh.kind == "scalar-bessel") {
        double q = 0;
        for (int j = 0; j < d; ++j) q += x[j] * x[j] / (b[j] * b[j]);
        double rho = std::sqrt(q), f, fp;
        if (d == 2) {
            f = std::cyl_bessel_j(0.0, kJ01 * rho);
            fp = -kJ01 * std::cyl_bessel_j(1.0, kJ01 * rho);
        } else {
            double a = std::numbers::pi * rho;
            f = a > 0 ? std::sin(a) / a : 1.0;
            fp = a > 1e-8 ? (a * std::cos(a) - std::sin(a)) / (a * rho) : 0.0;
        }
        phi[0] = f;
        if (rho > 0)
            for (int j = 0; j < d; ++j) J[0][j] = fp * x[j] / (b[j] * b[j] * rho);
        return;
    }
    if (box_kind(sh.kind)) {
        double p[3], p1[3], p2[3];
        for (int j = 0; j < d; ++j) {
            double th = 0.5 * std::numbers::pi * x[j] / b[j], c = std::cos(th), sn = std::sin(th);
            double sc = 0.5 * std::numbers::pi / b[j];
            p[j] = std::pow(c, k);
            p1[j] = -k * std::pow(c, k - 1) * sn * sc;
            p2[j] = (k * (k - 1) * std::pow(c, k - 2) * sn * sn - k * std::pow(c, k)) * sc * sc;
        }
        if (sh.kind == "scalar-box") {
            phi[0] = 1;
            for (int j = 0; j < d; ++j) phi[0] *= p[j];
            for (int j = 0; j < d; ++j) {
                J[0][j] = p1[j];
                for (int i = 0; i < d; ++i)
                    if (i != j) J[0][j] *= p[i];
            }
            return;
        }
        double d0 = p1[0] * p[1], d1 = p[0] * p1[1];
        double h00 = p2[0] * p[1], h01 = p1[0] * p1[1], h11 = p[0] * p2[1];
        phi[0] = d1;
        phi[1] = -d0;
        J[0][0] = h01;
        J[0][1] = h11;
        J[1][0] = -h00;
        J[1][1] = -h01;
        return;
    }
    throw std::invalid_argument("unknown shape " + sh.kind);
}

}  // namespace

double CandidateIntegrals::quotient(double alpha) const { return (grad_sq + div_sq / alpha) / norm_sq; }

CandidateIntegrals candidate_integrals(const ShapeSpec& sh, int d, double support, int order) {
    if (!(support > 0)) throw std::invalid_argument("support must be positive");
    if (d != 2 && d != 3) throw std::invalid_argument("candidates need d = 2 or 3");
    if (sh.kind.rfind("stream", 0) == 0 && d != 2) throw std::invalid_argument("stream candidates need d = 2");
    if (order < 4) throw std::invalid_argument("quadrature order too small");
    const bool box = box_kind(sh.kind);
    auto a = semi_axes(d, sh.aspect);
    const double unit = box ? std::exp2(d) : unit_ball_volume(d);
    const double R = std::pow(support / unit, 1.0 / d);
    double b[3];
    for (int j = 0; j < d; ++j) b[j] = R * a[j];
    double jac = 1;
    for (int j = 0; j < d; ++j) jac *= b[j];

    std::vector<double> gx, gw;
    gauss_legendre(order, gx, gw);
    CandidateIntegrals out;
    out.support = support;
    auto add = [&](const double* u, double wt) {
        double x[3], phi[3], J[3][3];
        for (int j = 0; j < d; ++j) x[j] = b[j] * u[j];
        shape_eval(sh, d, b, x, phi, J);
        double m = 0, gsq = 0, div = 0;
        for (int c = 0; c < d; ++c) {
            m += phi[c] * phi[c];
            div += J[c][c];
            for (int j = 0; j < d; ++j) gsq += J[c][j] * J[c][j];
        }
        double w = wt * jac;
        out.norm_sq += w * m;
        out.grad_sq += w * gsq;
        out.div_sq += w * div * div;
        out.density.m.push_back(m);
        out.density.w.push_back(w);
    };
    double u[3];
    if (box) {
        std::vector<int> i(d, 0);
        std::size_t total = 1;
        for (int j = 0; j < d; ++j) total *= order;
        for (std::size_t n = 0; n < total; ++n) {
            std::size_t r = n;
            double wt = 1;
            for (int j = 0; j < d; ++j) {
                int ij = static_cast<int>(r % order);
                r /= order;
                u[j] = gx[ij];
                wt *= gw[ij];
            }
            add(u, wt);
        }
    } else if (d == 2) {
        const int nth = 2 * order;
        for (int ir = 0; ir < order; ++ir) {
            double rho = 0.5 * (gx[ir] + 1), wr = 0.5 * gw[ir] * rho;
            for (int it = 0; it < nth; ++it) {
                double th = 2 * std::numbers::pi * (it + 0.5) / nth;
                u[0] = rho * std::cos(th);
                u[1] = rho * std::sin(th);
                add(u, wr * 2 * std::numbers::pi / nth);
            }
        }
    } else {
        const int nph = 2 * order;
        for (int ir = 0; ir < order; ++ir) {
            double rho = 0.5 * (gx[ir] + 1), wr = 0.5 * gw[ir] * rho * rho;
            for (int ic = 0; ic < order; ++ic) {
                double ct = gx[ic], st = std::sqrt(1 - ct * ct);
                for (int ip = 0; ip < nph; ++ip) {
                    double ph = 2 * std::numbers::pi * (ip + 0.5) / nph;
                    u[0] = rho * st * std::cos(ph);
                    u[1] = rho * st * std::sin(ph);
                    u[2] = rho * ct;
                    add(u, wr * gw[ic] * 2 * std::numbers::pi / nph);
                }
            }
        }
    }
    out.density.support = support;
    return out;
}

ConstantEstimate estimate_c_alpha(double alpha, const CandidateFamily& fam, int budget) {
    auto shapes = family_shapes(fam);
    if (budget < 1 || shapes.empty()) throw std::runtime_error("candidate budget exhausted without a feasible candidate");
    ConstantEstimate best;
    best.value = std::numeric_limits<double>::infinity();
    best.family = family_label(fam.kind);
    int used = 0;
    for (const auto& sh : shapes) {
        if (used++ >= budget) break;
        double q = candidate_integrals(sh, fam.d, fam.support, fam.resolution).quotient(alpha);
        if (q < best.value) {
            best.value = q;
            best.params = shape_json(sh, fam.support, fam.resolution);
        }
    }
    if (!(best.value > 0 && std::isfinite(best.value))) throw std::runtime_error("no feasible candidate");
    best.params["alpha"] = alpha;
    best.params["evaluated"] = std::min<int>(budget, static_cast<int>(shapes.size()));
    return best;
}

std::vector<ConstantEstimate> estimate_c_alpha_beta(double alpha, const std::vector<double>& betas,
                                                    const LdpProfile& pr, const CandidateFamily& fam, int budget,
                                                    int scales) {
    auto shapes = family_shapes(fam);
    if (budget < 1 || shapes.empty()) throw std::runtime_error("candidate budget exhausted without a feasible candidate");
    if (scales < 1) throw std::invalid_argument("need at least one scale");
    const int d = fam.d;
    const double u0 = d / pr.nu;  // 𝒢(φ; d) = 0 once |supp φ| <= d/ν
    // support measures u0 2^{(k - 8)/4}; k = 8 is u0 itself
    std::vector<double> us;
    for (int k = 0; k < scales; ++k) us.push_back(u0 * std::exp2((k - 8) / 4.0));

    struct Cand {
        std::size_t shape;
        double u, q, G;
    };
    std::vector<Cand> table;
    int used = 0;
    for (std::size_t si = 0; si < shapes.size() && used < budget; ++si, ++used) {
        for (double u : us) {
            CandidateIntegrals ci = candidate_integrals(shapes[si], d, u, fam.resolution);
            WeightedDensity q = ci.density;
            for (double& m : q.m) m /= ci.norm_sq;
            double G = u * pr.nu <= d ? 0.0 : g_functional(pr, q, static_cast<double>(d)).value;
            table.push_back({si, u, ci.quotient(alpha), G});
        }
    }
    std::vector<ConstantEstimate> out;
    for (double beta : betas) {
        ConstantEstimate e;
        e.value = std::numeric_limits<double>::infinity();
        e.family = family_label(fam.kind);
        const Cand* arg = nullptr;
        for (const auto& c : table) {
            double v = c.q + beta * c.G;
            if (v < e.value) {
                e.value = v;
                arg = &c;
            }
        }
        e.params = shape_json(shapes[arg->shape], arg->u, fam.resolution);
        e.params["alpha"] = alpha;
        e.params["beta"] = beta;
        e.params["quotient"] = arg->q;
        e.params["G"] = arg->G;
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// instances

InstanceGeometry instance_geometry(const SkeletonField& sk, int resolution) {
    InstanceGeometry g;
    const double t = sk.box_side();
    g.tau = scaling_tau(t, sk.dim());
    g.n = static_cast<int>(std::llround(resolution * t));
    if (g.n < 3) throw std::invalid_argument("box too small for the resolution");
    double side = g.tau * t;
    g.s = side / g.n;
    g.x0 = -side / 2;
    return g;
}

EnergyForm box_form(const SkeletonField& sk, const InstanceGeometry& geo, double alpha, double beta,
                    const std::array<int, 4>& lo, const std::array<int, 4>& count) {
    const int d = sk.dim();
    Grid g;
    g.d = d;
    g.s = geo.s;
    for (int j = 0; j < d; ++j) {
        if (lo[j] < 0 || count[j] < 1 || lo[j] + count[j] > geo.n) throw std::out_of_range("node box outside the domain");
        g.n[j] = count[j];
        g.x0[j] = geo.x0 + lo[j] * geo.s;
    }
    return assemble(g, alpha, beta, sample_potential(sk, g, geo.tau), d);
}

EnergyForm global_form(const SkeletonField& sk, int resolution, double alpha, double beta) {
    InstanceGeometry geo = instance_geometry(sk, resolution);
    std::array<int, 4> lo{0, 0, 0, 0}, cnt{1, 1, 1, 1};
    for (int j = 0; j < sk.dim(); ++j) cnt[j] = geo.n;
    return box_form(sk, geo, alpha, beta, lo, cnt);
}

namespace {

InstancePe solve_box(const SkeletonField& sk, const InstanceGeometry& geo, double alpha, double beta,
                     const std::array<int, 4>& lo, const std::array<int, 4>& cnt, const LobpcgOptions& opt) {
    EnergyForm f = box_form(sk, geo, alpha, beta, lo, cnt);
    EigenResult r = smallest_eigenpair(f, opt);
    InstancePe out;
    out.lambda = r.lambda;
    out.residual = r.residual;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.lo = lo;
    out.count = cnt;
    out.field = std::move(r.field);
    return out;
}

// node box of `side` scaled units centred on cell z, clipped to the domain
void centred_box(const InstanceGeometry& geo, int d, const Index& z, double side, std::array<int, 4>& lo,
                 std::array<int, 4>& cnt) {
    int m = std::min(geo.n, std::max(3, static_cast<int>(std::lround(side / geo.s))));
    lo = {0, 0, 0, 0};
    cnt = {1, 1, 1, 1};
    for (int j = 0; j < d; ++j) {
        long c = std::lround((geo.tau * z[j] - geo.x0) / geo.s - 0.5);
        long l = std::clamp<long>(c - m / 2, 0, geo.n - m);
        lo[j] = static_cast<int>(l);
        cnt[j] = m;
    }
}

}  // namespace

InstancePe global_pe(const SkeletonField& sk, int resolution, double alpha, double beta, const LobpcgOptions& opt) {
    InstanceGeometry geo = instance_geometry(sk, resolution);
    std::array<int, 4> lo{0, 0, 0, 0}, cnt{1, 1, 1, 1};
    for (int j = 0; j < sk.dim(); ++j) cnt[j] = geo.n;
    return solve_box(sk, geo, alpha, beta, lo, cnt, opt);
}

std::vector<Index> screen_windows(const SkeletonField& sk, const LocalizedOptions& loc) {
    const int d = sk.dim();
    const double tau = scaling_tau(sk.box_side(), d);
    const std::int64_t E = sk.extent();
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(E + 1);
    // summed-area table over the stored cells, P[i] = Σ_{k < i} ε_k
    std::vector<std::int32_t> P(total, 0);
    std::array<std::size_t, 4> st{1, 1, 1, 1};
    for (int j = 1; j < d; ++j) st[j] = st[j - 1] * static_cast<std::size_t>(E + 1);
    const auto& occ = sk.occupancy();
    {
        std::array<std::int64_t, 4> i{};
        for (std::size_t c = 0; c < occ.size(); ++c) {
            std::size_t r = c, off = 0;
            for (int j = 0; j < d; ++j) {
                i[j] = static_cast<std::int64_t>(r % E);
                r /= E;
                off += static_cast<std::size_t>(i[j] + 1) * st[j];
            }
            P[off] = occ[c];
        }
    }
    for (int j = 0; j < d; ++j)
        for (std::size_t o = 0; o < total; ++o) {
            std::size_t ij = (o / st[j]) % static_cast<std::size_t>(E + 1);
            if (ij > 0) P[o] += P[o - st[j]];
        }

    std::vector<Index> picked;
    for (double wside : loc.windows) {
        std::int64_t wc = std::max<std::int64_t>(1, std::llround(wside / tau));
        if (wc > E) wc = E;
        const std::int64_t ns = E - wc + 1;
        std::size_t nstarts = 1;
        for (int j = 0; j < d; ++j) nstarts *= static_cast<std::size_t>(ns);
        std::vector<std::pair<std::int32_t, std::uint32_t>> score(nstarts);
        for (std::size_t b = 0; b < nstarts; ++b) {
            std::size_t r = b;
            std::array<std::size_t, 4> i{};
            for (int j = 0; j < d; ++j) {
                i[j] = r % static_cast<std::size_t>(ns);
                r /= static_cast<std::size_t>(ns);
            }
            std::int64_t sum = 0;
            for (int mask = 0; mask < (1 << d); ++mask) {
                std::size_t off = 0;
                int ones = 0;
                for (int j = 0; j < d; ++j) {
                    bool hi = mask >> j & 1;
                    ones += hi;
                    off += (i[j] + (hi ? wc : 0)) * st[j];
                }
                sum += ((d - ones) % 2 ? -1 : 1) * static_cast<std::int64_t>(P[off]);
            }
            score[b] = {static_cast<std::int32_t>(sum), static_cast<std::uint32_t>(b)};
        }
        std::sort(score.begin(), score.end());
        std::vector<std::array<std::int64_t, 4>> mine;
        for (const auto& [sc, b] : score) {
            if (static_cast<int>(mine.size()) >= loc.per_window) break;
            std::array<std::int64_t, 4> i{};
            std::size_t r = b;
            for (int j = 0; j < d; ++j) {
                i[j] = static_cast<std::int64_t>(r % static_cast<std::size_t>(ns));
                r /= static_cast<std::size_t>(ns);
            }
            bool clash = false;
            for (const auto& q : mine) {
                std::int64_t dist = 0;
                for (int j = 0; j < d; ++j) dist = std::max(dist, std::abs(q[j] - i[j]));
                if (dist < wc) clash = true;
            }
            if (clash) continue;
            mine.push_back(i);
            Index z(d);
            for (int j = 0; j < d; ++j) z[j] = sk.zmin() + i[j] + (wc - 1) / 2;
            bool dup = false;
            for (const auto& q : picked) {
                std::int64_t dist = 0;
                for (int j = 0; j < d; ++j) dist = std::max(dist, std::abs(q[j] - z[j]));
                if (dist <= 1) dup = true;
            }
            if (!dup) picked.push_back(z);
        }
    }
    return picked;
}

InstancePe localized_pe(const SkeletonField& sk, int resolution, double alpha, double beta, const LobpcgOptions& opt,
                        const LocalizedOptions& loc) {
    InstanceGeometry geo = instance_geometry(sk, resolution);
    const int d = sk.dim();
    if (loc.side / geo.s >= geo.n) return global_pe(sk, resolution, alpha, beta, opt);
    auto centres = screen_windows(sk, loc);
    if (centres.empty()) throw std::runtime_error("screening produced no windows");
    std::vector<std::pair<InstancePe, std::size_t>> first;
    for (std::size_t c = 0; c < centres.size(); ++c) {
        std::array<int, 4> lo, cnt;
        centred_box(geo, d, centres[c], loc.side, lo, cnt);
        InstancePe r = solve_box(sk, geo, alpha, beta, lo, cnt, opt);
        r.field = GridField();
        first.emplace_back(std::move(r), c);
    }
    std::stable_sort(first.begin(), first.end(),
                     [](const auto& a, const auto& b) { return a.first.lambda < b.first.lambda; });
    int boxes = static_cast<int>(first.size());
    InstancePe best = first.front().first;
    for (int k = 0; k < loc.refine && k < static_cast<int>(first.size()); ++k) {
        std::array<int, 4> lo, cnt;
        centred_box(geo, d, centres[first[k].second], loc.side_refine, lo, cnt);
        InstancePe r = solve_box(sk, geo, alpha, beta, lo, cnt, opt);
        ++boxes;
        if (r.lambda < best.lambda) best = std::move(r);
    }
    if (best.field.v.empty()) {  // re-solve to hand back the field of the winning box
        best = solve_box(sk, geo, alpha, beta, best.lo, best.count, opt);
        ++boxes;
    }
    best.boxes = boxes;
    for (const auto& f : first) best.converged = best.converged && f.first.converged;
    return best;
}

// ---------------------------------------------------------------------------
// sweeps

std::uint64_t trial_seed(std::uint64_t master, double t, int trial) {
    return derive_seed(master, std::bit_cast<std::uint64_t>(t), static_cast<std::uint64_t>(trial));
}

std::vector<SweepRow> normalized_pe_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<SweepRow> rows;
    LobpcgOptions opt;
    opt.tol = cfg.tol;
    opt.max_iter = cfg.max_iter;
    for (double t : cfg.ts) {
        for (int trial = 0; trial < cfg.trials; ++trial) {
            std::uint64_t seed = trial_seed(cfg.master_seed, t, trial);
            SkeletonField sk = generate_skeleton(cfg.d, t, cfg.p, ObstacleShape{cfg.w}, seed);
            H1Schedule hs = h1_schedule(t, cfg.d, sk.mu());
            bool nonempty = !low_occupancy_blocks(sk, hs.H1, hs.tau, sk.mu()).empty();
            opt.seed = seed;
            for (double a : cfg.alphas)
                for (double b : cfg.betas) {
                    InstancePe r = cfg.solver == "global" ? global_pe(sk, cfg.resolution, a, b, opt)
                                                          : localized_pe(sk, cfg.resolution, a, b, opt, cfg.local);
                    SweepRow row;
                    row.t = t;
                    row.trial = trial;
                    row.alpha = a;
                    row.beta = b;
                    row.lambda_scaled = r.lambda;
                    row.residual = r.residual;
                    row.seed = seed;
                    row.converged = r.converged;
                    row.iterations = r.iterations;
                    row.empty_blocks = nonempty;
                    rows.push_back(row);
                }
        }
    }
    if (!cfg.output.empty()) write_sweep_csv(rows, cfg.output);
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "t,trial,alpha,beta,lambda_scaled,residual,seed\n";
    for (const auto& r : rows)
        os << r.t << ',' << r.trial << ',' << r.alpha << ',' << r.beta << ',' << r.lambda_scaled << ',' << r.residual
           << ',' << r.seed << '\n';
    return os.str();
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << sweep_csv(rows);
}

double empirical_quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("empty sample");
    std::sort(v.begin(), v.end());
    // type 7: linear between order statistics
    double h = (v.size() - 1) * q;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

double fit_rough_bound(const std::vector<SweepRow>& rows, double mu, int d) {
    double c = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rows) {
        if (r.empty_blocks) continue;
        double ref = mu * std::min(std::pow(mu, 2.0 / d), r.beta);
        double v = r.lambda_scaled / ref;
        if (std::isnan(c) || v < c) c = v;
    }
    return c;
}

double empty_block_frequency(int d, double p, double w, double t, int seeds, std::uint64_t master) {
    if (seeds < 1) throw std::invalid_argument("seeds must be positive");
    int hits = 0;
    for (int i = 0; i < seeds; ++i) {
        SkeletonField sk = generate_skeleton(d, t, p, ObstacleShape{w}, trial_seed(master, t, i));
        H1Schedule hs = h1_schedule(t, d, sk.mu());
        if (!low_occupancy_blocks(sk, hs.H1, hs.tau, sk.mu()).empty()) ++hits;
    }
    return static_cast<double>(hits) / seeds;
}

// ---------------------------------------------------------------------------
// chain (1.11) on instances

json ChainReport::to_json() const {
    json j{{"alpha", alpha}, {"beta", beta}, {"S_hat", S_hat}, {"eps", eps}, {"reference", reference},
           {"violations", violations}};
    j["instances"] = json::array();
    for (const auto& i : instances)
        j["instances"].push_back({{"t", i.t},
                                  {"trial", i.trial},
                                  {"lambda_scaled", i.lambda},
                                  {"best_candidate", i.best_candidate},
                                  {"gap", i.gap},
                                  {"candidates", i.candidates},
                                  {"violations", i.violations},
                                  {"above_reference", i.lambda >= i.reference},
                                  {"converged", i.converged}});
    return j;
}

ChainReport theorem11_chain(const ExperimentConfig& cfg, double alpha, double beta) {
    cfg.validate();
    if (cfg.d != 2) throw std::invalid_argument("stream-function candidates need d = 2");
    ChainReport rep;
    rep.alpha = alpha;
    rep.beta = beta;
    LdpProfile pr = bernoulli_profile(cfg.p, std::pow(cfg.w, cfg.d));
    double amin = *std::min_element(cfg.alphas.begin(), cfg.alphas.end());
    CandidateFamily fam{FamilyKind::Stream, 2, 96, 1.0};
    rep.S_hat = estimate_c_alpha(amin, fam, 1 << 20).value;
    rep.eps = beta > 0 ? 1 / std::sqrt(beta) : std::numeric_limits<double>::infinity();
    rep.reference = std::pow(pr.nu / cfg.d, 2.0 / cfg.d) * rep.S_hat - rep.eps;

    LobpcgOptions opt;
    opt.tol = cfg.tol;
    opt.max_iter = cfg.max_iter;
    for (double t : cfg.ts)
        for (int trial = 0; trial < cfg.trials; ++trial) {
            std::uint64_t seed = trial_seed(cfg.master_seed, t, trial);
            SkeletonField sk = generate_skeleton(cfg.d, t, cfg.p, ObstacleShape{cfg.w}, seed);
            opt.seed = seed;
            InstancePe r = cfg.solver == "global" ? global_pe(sk, cfg.resolution, alpha, beta, opt)
                                                  : localized_pe(sk, cfg.resolution, alpha, beta, opt, cfg.local);
            InstanceGeometry geo = instance_geometry(sk, cfg.resolution);
            EnergyForm form = box_form(sk, geo, alpha, beta, r.lo, r.count);
            const Grid& g = form.grid;

            ChainInstance ci;
            ci.t = t;
            ci.trial = trial;
            ci.lambda = r.lambda;
            ci.converged = r.converged;
            ci.reference = rep.reference;
            ci.best_candidate = std::numeric_limits<double>::infinity();

            // centres: peak of the computed field, then a lattice
            std::vector<std::array<double, 2>> centres;
            {
                GridField m = magnitude_sq(r.field);
                std::size_t k = std::max_element(m.v.begin(), m.v.end()) - m.v.begin();
                int i[4];
                g.unravel(k, i);
                centres.push_back({g.coord(0, i[0]), g.coord(1, i[1])});
            }
            const double lo0 = g.x0[0], lo1 = g.x0[1], L0 = g.side(0), L1 = g.side(1);
            for (double rad : {0.5, 1.0, 1.5, 2.0}) {
                int k0 = static_cast<int>(L0 / rad), k1 = static_cast<int>(L1 / rad);
                for (int a = 1; a < k0 && centres.size() < 400; ++a)
                    for (int b = 1; b < k1 && centres.size() < 400; ++b)
                        centres.push_back({lo0 + a * rad, lo1 + b * rad});
            }
            std::vector<int> idx(4, 0);
            for (std::size_t ic = 0; ic < centres.size(); ++ic)
                for (double rad : {0.5, 0.8, 1.2, 1.6, 2.2}) {
                    const auto& c = centres[ic];
                    const double margin = 2 * g.s;
                    if (c[0] - rad < lo0 + margin || c[0] + rad > lo0 + L0 - margin || c[1] - rad < lo1 + margin ||
                        c[1] + rad > lo1 + L1 - margin)
                        continue;
                    for (double k : {2.0, 3.0}) {
                        GridField psi(g, 1);
                        for (std::size_t n = 0; n < g.nodes(); ++n) {
                            g.unravel(n, idx.data());
                            double u = (g.coord(0, idx[0]) - c[0]) / rad, v = (g.coord(1, idx[1]) - c[1]) / rad;
                            double rho2 = u * u + v * v;
                            psi.v[n] = rho2 < 1 ? std::pow(1 - rho2, k) : 0.0;
                        }
                        GridField phi = curl_field(psi);
                        if (l2_norm_sq(phi) == 0) continue;
                        double q = rayleigh_quotient(form, phi);
                        ++ci.candidates;
                        if (q < r.lambda * (1 - 1e-9)) ++ci.violations;
                        ci.best_candidate = std::min(ci.best_candidate, q);
                    }
                }
            ci.gap = ci.best_candidate - ci.lambda;
            rep.violations += ci.violations;
            rep.instances.push_back(ci);
        }
    return rep;
}

// ---------------------------------------------------------------------------
// validation suite

bool ValidationReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

json ValidationReport::to_json() const {
    json j{{"passed", passed()}, {"checks", json::array()}};
    for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return j;
}

namespace {

template <class F>
void run_check(ValidationReport& rep, const std::string& name, F&& f) {
    CheckResult c;
    c.name = name;
    try {
        c.passed = f(c.detail);
    } catch (const std::exception& e) {
        c.passed = false;
        c.detail = std::string("exception: ") + e.what();
    }
    rep.checks.push_back(std::move(c));
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

ValidationReport run_validation_suite(double tol_scale, const std::string& skeleton_path) {
    ValidationReport rep;
    const double tol = 1e-8 * tol_scale;

    if (!skeleton_path.empty()) {
        bool ok = false;
        run_check(rep, "skeleton_load", [&](std::string& d) {
            SkeletonField sk = load_skeleton(skeleton_path);
            d = "cells=" + std::to_string(sk.cell_count());
            ok = true;
            return true;
        });
        if (!ok) return rep;  // nothing else is meaningful without the input
    }

    run_check(rep, "dirichlet_square", [&](std::string& d) {
        const double L = 2.0;
        Grid g = make_dirichlet_grid(2, L, 64);
        EnergyForm f = assemble(g, 1.0, 0.0, std::vector<std::uint8_t>(g.nodes(), 0), 1);
        EigenResult r = smallest_eigenpair(f, tol);
        double ref = 2 * std::numbers::pi * std::numbers::pi / (L * L);
        double rel = std::abs(r.lambda - ref) / ref;
        d = "rel=" + fmt(rel);
        return r.converged && rel < 0.01;
    });

    run_check(rep, "stream_divergence_free", [&](std::string& d) {
        Grid g = make_grid(2, 1.0, 24);
        Stream rng(7);
        double worst = 0, spread = 0;
        for (int k = 0; k < 10; ++k) {
            GridField psi(g, 1);
            int idx[4];
            for (std::size_t n = 0; n < g.nodes(); ++n) {
                g.unravel(n, idx);
                bool edge = idx[0] == 0 || idx[1] == 0 || idx[0] == g.n[0] - 1 || idx[1] == g.n[1] - 1;
                psi.v[n] = edge ? 0.0 : rng.symmetric();
            }
            GridField phi = curl_field(psi);
            worst = std::max(worst, max_abs(forward_divergence(phi)) / max_abs(phi));
            std::vector<std::uint8_t> V(g.nodes(), 0);
            double e1 = energy(assemble(g, 1.0, 0.0, V, 2), phi), e2 = energy(assemble(g, 1e-3, 0.0, V, 2), phi);
            spread = std::max(spread, std::abs(e1 - e2) / e1);
        }
        d = "div=" + fmt(worst) + " spread=" + fmt(spread);
        return worst < 1e-12 && spread < 1e-12;
    });

    run_check(rep, "penalized_monotonicity", [&](std::string& d) {
        int bad = 0;
        for (int k = 0; k < 2; ++k) {
            SkeletonField sk = generate_skeleton(2, 8, 0.5, ObstacleShape{0.5}, 100 + k);
            LobpcgOptions o;
            o.tol = tol;
            double prev = 0;
            for (auto [a, b] : {std::pair{1.0, 1.0}, {1e-3, 1.0}, {1e-3, 1e3}}) {
                double lam = global_pe(sk, 4, a, b, o).lambda;
                if (lam < prev * (1 - 1e-7)) ++bad;
                prev = lam;
            }
        }
        d = "violations=" + std::to_string(bad);
        return bad == 0;
    });

    run_check(rep, "cumulant_properties", [&](std::string& d) {
        LdpProfile pr = bernoulli_profile(0.5, 1.0);
        double e0 = std::abs(cumulant(pr, 0)), e1 = std::abs(cumulant_prime(pr, 0) - 0.5),
               e2 = std::abs(cumulant(pr, 1e6) - std::log(2.0));
        bool concave = true;
        for (int i = 0; i < 200; ++i) concave = concave && cumulant_second(pr, 0.05 * i) <= 0;
        d = "G0=" + fmt(e0) + " G'0=" + fmt(e1) + " Ginf=" + fmt(e2);
        return e0 < 1e-12 && e1 < 1e-12 && e2 < 1e-4 && concave;
    });

    run_check(rep, "g_functional_monotone", [&](std::string& d) {
        LdpProfile pr = bernoulli_profile(0.5, 0.25);
        GridField f = candidate_field({"scalar-bump", 2.0, 1.0}, 2, 48, 4.0);
        double nrm = std::sqrt(l2_norm_sq(f));
        for (double& x : f.v) x /= nrm;
        double Dinf = pr.nu * support_measure(f), prev = std::numeric_limits<double>::infinity();
        bool ok = true;
        for (int i = 0; i <= 20; ++i) {
            double g = g_functional(pr, f, Dinf * i / 16.0).value;
            ok = ok && g <= prev * (1 + 1e-9);
            if (i >= 16) ok = ok && g == 0;
            prev = g;
        }
        d = "Dinf=" + fmt(Dinf);
        return ok;
    });

    run_check(rep, "partition_of_unity", [&](std::string& d) {
        Stream rng(11);
        double worst = 0;
        for (int k = 0; k < 2000; ++k) {
            double x[2] = {20 * rng.symmetric(), 20 * rng.symmetric()};
            double s = 0;
            for (const auto& t : pou_at(2, 3, 1.7, x)) s += t.value * t.value;
            worst = std::max(worst, std::abs(s - 1));
        }
        d = "max|Σζ²-1|=" + fmt(worst);
        return worst < 1e-12;
    });

    run_check(rep, "hierarchy_partition", [&](std::string& d) {
        Schedule sc = schedule_38(3, 2);
        Grid g = make_grid(2, 301.0, 301);  // odd count: unit blocks align
        Raster E(g);
        Stream rng(5);
        int idx[4];
        for (std::size_t n = 0; n < g.nodes(); ++n) {
            g.unravel(n, idx);
            double x = idx[0] - 150.0, y = idx[1] - 150.0;
            E.bits[n] = (x * x + y * y < 130.0 * 130.0) && rng.uniform() > 0.02;
        }
        BlockHierarchy h = build_hierarchy(E, sc.T, sc.gamma, sc.m0, sc.K_star, g.s);
        std::size_t overlap = 0;
        std::vector<std::uint8_t> seen(h.E.bits.size(), 0);
        for (int k = 0; k <= h.top; ++k) {
            auto phi = h.Phi(k);
            for (std::size_t i = 0; i < phi.size(); ++i)
                if (phi[i]) overlap += seen[i]++ > 0;
        }
        d = "overlap=" + std::to_string(overlap) + " top=" + std::to_string(h.top);
        return overlap == 0;
    });

    run_check(rep, "skeleton_roundtrip", [&](std::string& d) {
        SkeletonField a = generate_skeleton(2, 40, 0.5, ObstacleShape{0.5}, 99);
        SkeletonField b = skeleton_from_json(json::parse(skeleton_to_json(a).dump()));
        d = "cells=" + std::to_string(a.cell_count());
        return a.occupancy() == b.occupancy() && a.seed() == b.seed();
    });

    run_check(rep, "sweep_determinism", [&](std::string& d) {
        ExperimentConfig c;
        c.ts = {8.0};
        c.trials = 2;
        c.tol = tol;
        auto r1 = sweep_csv(normalized_pe_sweep(c)), r2 = sweep_csv(normalized_pe_sweep(c));
        d = std::to_string(r1.size()) + " bytes";
        return r1 == r2;
    });

    run_check(rep, "support_scaling", [&](std::string& d) {
        CandidateFamily f{FamilyKind::Mixed, 2, 48, 1.0};
        double v1 = estimate_c_alpha(1.0, f, 100).value;
        f.support = 4;
        double v4 = estimate_c_alpha(1.0, f, 100).value;
        double rel = std::abs(v4 - v1 / 4) / (v1 / 4);
        d = "rel=" + fmt(rel);
        return rel < 0.01;
    });

    return rep;
}

}  // namespace pelab
