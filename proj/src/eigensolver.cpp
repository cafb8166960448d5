#include "pelab/eigensolver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "pelab/pairwise.hpp"
#include "pelab/rng.hpp"

namespace pelab {

namespace {

using Col = std::vector<double>;

double vdot(const Col& a, const Col& b) {
    const double *x = a.data(), *y = b.data();
    return det_sum(a.size(), [x, y](std::size_t i) { return x[i] * y[i]; });
}

void axpy(double a, const Col& x, Col& y) {
    const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, Col& x) {
    for (double& v : x) v *= a;
}

// orthonormalise basis columns in place (two Gram-Schmidt sweeps), carrying A-images along;
// the first `keep` columns are assumed orthonormal already
void orthonormalize(std::vector<Col>& S, std::vector<Col>& AS, std::size_t keep) {
    std::vector<Col> outS, outA;
    for (std::size_t j = 0; j < S.size(); ++j) {
        Col s = std::move(S[j]), as = std::move(AS[j]);
        double n0 = std::sqrt(vdot(s, s));
        if (!(n0 > 0) || !std::isfinite(n0)) continue;
        if (j >= keep) {
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t k = 0; k < outS.size(); ++k) {
                    double c = vdot(outS[k], s);
                    axpy(-c, outS[k], s);
                    axpy(-c, outA[k], as);
                }
        }
        double n1 = std::sqrt(vdot(s, s));
        if (j >= keep && n1 < 1e-10 * n0) continue;
        scale(1.0 / n1, s);
        scale(1.0 / n1, as);
        outS.push_back(std::move(s));
        outA.push_back(std::move(as));
    }
    S = std::move(outS);
    AS = std::move(outA);
}

Col combine(const std::vector<Col>& B, const Eigen::MatrixXd& Y, int col, std::size_t from, std::size_t n) {
    Col out(n, 0.0);
    for (std::size_t k = from; k < B.size(); ++k) {
        double c = Y(static_cast<Eigen::Index>(k), col);
        if (c != 0.0) axpy(c, B[k], out);
    }
    return out;
}

}  // namespace

LobpcgResult lobpcg(std::size_t n, const ApplyFn& A, const std::vector<double>& diag, const LobpcgOptions& opt,
                    const std::vector<double>* start) {
    if (n == 0) throw std::invalid_argument("zero-dimensional form");
    if (!(opt.tol > 0)) throw std::invalid_argument("tol must be positive");
    const std::size_t m = std::min<std::size_t>(std::max(1, std::min(opt.block, 4)), n);
    Stream rng(opt.seed);
    std::vector<Col> X(m, Col(n)), AX(m, Col(n)), P, AP;
    for (std::size_t j = 0; j < m; ++j)
        for (auto& v : X[j]) v = rng.symmetric();
    if (start && start->size() == n) X[0] = *start;
    for (std::size_t j = 0; j < m; ++j) A(X[j].data(), AX[j].data());
    orthonormalize(X, AX, 0);
    if (X.empty()) throw std::runtime_error("degenerate starting block");

    LobpcgResult res;
    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> lam(X.size());
    auto rayleigh_ritz = [&](std::vector<Col>& S, std::vector<Col>& AS, std::size_t nx, bool with_p) {
        const Eigen::Index k = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd G(k, k);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = a; b < k; ++b) {
                double v = 0.5 * (vdot(S[a], AS[b]) + vdot(S[b], AS[a]));
                G(a, b) = G(b, a) = v;
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const Eigen::MatrixXd& Y = es.eigenvectors();
        const std::size_t mm = std::min<std::size_t>(m, S.size());
        std::vector<Col> Xn(mm), AXn(mm), Pn, APn;
        for (std::size_t j = 0; j < mm; ++j) {
            Xn[j] = combine(S, Y, static_cast<int>(j), 0, n);
            AXn[j] = combine(AS, Y, static_cast<int>(j), 0, n);
            lam[j] = es.eigenvalues()(static_cast<Eigen::Index>(j));
            if (with_p) {
                Pn.push_back(combine(S, Y, static_cast<int>(j), nx, n));
                APn.push_back(combine(AS, Y, static_cast<int>(j), nx, n));
            }
        }
        X = std::move(Xn);
        AX = std::move(AXn);
        P = std::move(Pn);
        AP = std::move(APn);
    };
    {
        std::vector<Col> S = X, AS = AX;
        rayleigh_ritz(S, AS, X.size(), false);
    }
    for (int it = 1; it <= opt.max_iter; ++it) {
        res.iterations = it;
        if (opt.refresh > 0 && it % opt.refresh == 0) {
            for (std::size_t j = 0; j < X.size(); ++j) A(X[j].data(), AX[j].data());
            for (std::size_t j = 0; j < P.size(); ++j) A(P[j].data(), AP[j].data());
            std::vector<Col> S = X, AS = AX;
            orthonormalize(S, AS, 0);
            auto Ps = std::move(P), APs = std::move(AP);
            rayleigh_ritz(S, AS, S.size(), false);
            P = std::move(Ps);
            AP = std::move(APs);
        }
        std::vector<Col> W(X.size(), Col(n));
        double rnorm0 = 0;
        for (std::size_t j = 0; j < X.size(); ++j) {
            Col& w = W[j];
            const std::int64_t nn = static_cast<std::int64_t>(n);
            const double l = lam[j];
#pragma omp parallel for schedule(static)
            for (std::int64_t i = 0; i < nn; ++i) w[i] = AX[j][i] - l * X[j][i];
            if (j == 0) rnorm0 = std::sqrt(vdot(w, w));
#pragma omp parallel for schedule(static)
            for (std::int64_t i = 0; i < nn; ++i) w[i] /= diag[i];
        }
        double l0 = lam[0];
        res.lambda = l0;
        res.residual = rnorm0 / std::abs(l0);
        double change = std::abs(l0 - prev) / std::abs(l0);
        prev = l0;
        if (change < opt.tol && res.residual < std::sqrt(opt.tol)) {
            res.converged = true;
            break;
        }
        std::vector<Col> AW(W.size(), Col(n));
        for (std::size_t j = 0; j < W.size(); ++j) A(W[j].data(), AW[j].data());
        std::vector<Col> S = X, AS = AX;
        const std::size_t nx = S.size();
        for (std::size_t j = 0; j < W.size(); ++j) {
            S.push_back(std::move(W[j]));
            AS.push_back(std::move(AW[j]));
        }
        for (std::size_t j = 0; j < P.size(); ++j) {
            S.push_back(std::move(P[j]));
            AS.push_back(std::move(AP[j]));
        }
        orthonormalize(S, AS, nx);
        rayleigh_ritz(S, AS, nx, true);
    }
    res.x = X[0];
    double nx = std::sqrt(vdot(res.x, res.x));
    scale(1.0 / nx, res.x);
    return res;
}

EigenResult smallest_eigenpair(const EnergyForm& form, const LobpcgOptions& opt, const GridField* start) {
    const std::size_t n = form.size();
    auto Aop = [&form](const double* x, double* y) { apply(form, x, y); };
    std::vector<double> dg = diagonal(form);
    const std::vector<double>* sv = start ? &start->v : nullptr;
    LobpcgResult r = lobpcg(n, Aop, dg, opt, sv);
    EigenResult out;
    out.lambda = r.lambda;
    out.residual = r.residual;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.field = GridField(form.grid, form.components);
    double sc = 1.0 / std::sqrt(form.grid.cell_volume());
    for (std::size_t i = 0; i < n; ++i) out.field.v[i] = r.x[i] * sc;
    out.grad_norm_sq = dirichlet_grad_norm_sq(out.field);
    return out;
}

EigenResult smallest_eigenpair(const EnergyForm& form, double tol, int max_iter, std::uint64_t seed, int block) {
    LobpcgOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.seed = seed;
    o.block = block;
    return smallest_eigenpair(form, o);
}

PartialPeResult partial_pe_minimum(const EnergyForm& form, int L, double H1, const LobpcgOptions& opt) {
    const Grid& g = form.grid;
    if (L < 1 || !(H1 > 0)) throw std::invalid_argument("L and H1 must be positive");
    const double S = L * H1;
    // node range of the inner box along one axis
    auto node_range = [&](int j, std::int64_t z, int& lo, int& hi) {
        double a = S * (static_cast<double>(z) - 0.7), b = S * (static_cast<double>(z) + 0.7);
        lo = std::max(0, static_cast<int>(std::floor((a - g.x0[j]) / g.s - 0.5 + 1e-9)) + 1);
        hi = std::min(g.n[j] - 1, static_cast<int>(std::floor((b - g.x0[j]) / g.s - 0.5 + 1e-9)));
    };
    std::array<std::int64_t, 4> zlo{}, zhi{};
    for (int j = 0; j < g.d; ++j) {
        double xa = g.x0[j], xb = g.x0[j] + g.side(j);
        // outer box (z ± 0.75) S meets the open interval (xa, xb)
        zlo[j] = static_cast<std::int64_t>(std::floor(xa / S - 0.75)) + 1;
        zhi[j] = static_cast<std::int64_t>(std::ceil(xb / S + 0.75)) - 1;
    }
    std::size_t total = 1;
    for (int j = 0; j < g.d; ++j) total *= static_cast<std::size_t>(zhi[j] - zlo[j] + 1);
    PartialPeResult out;
    out.min_lambda = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < total; ++b) {
        Index z(g.d);
        std::array<int, 4> lo{}, cnt{};
        std::size_t q = b;
        bool ok = true;
        for (int j = 0; j < g.d; ++j) {
            std::size_t w = static_cast<std::size_t>(zhi[j] - zlo[j] + 1);
            z[j] = zlo[j] + static_cast<std::int64_t>(q % w);
            q /= w;
            int l, h;
            node_range(j, z[j], l, h);
            if (h < l) ok = false;
            lo[j] = l;
            cnt[j] = h - l + 1;
        }
        if (!ok) continue;
        EnergyForm sub = restrict_nodes(form, lo, cnt);
        EigenResult r = smallest_eigenpair(sub, opt);
        out.all.push_back({z, r.lambda, r.converged});
        out.converged = out.converged && r.converged;
        if (r.lambda < out.min_lambda) {
            out.min_lambda = r.lambda;
            out.argmin = z;
        }
    }
    if (out.all.empty()) throw std::invalid_argument("no subbox meets the domain");
    return out;
}

std::string eigen_result_json(const EigenResult& r) {
    nlohmann::json j;
    j["lambda"] = r.lambda;
    j["residual"] = r.residual;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["grad_norm_sq"] = r.grad_norm_sq;
    return j.dump();
}

}  // namespace pelab
