#include "pelab/blocks.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pelab/energy.hpp"

namespace pelab {

std::size_t Raster::count() const {
    std::size_t c = 0;
    for (auto b : bits) c += b;
    return c;
}

std::vector<std::uint32_t> rle_encode(const std::vector<std::uint8_t>& bits) {
    // alternating run lengths, starting with a run of zeros (possibly empty)
    std::vector<std::uint32_t> runs;
    std::uint8_t cur = 0;
    std::uint32_t len = 0;
    for (auto b : bits) {
        std::uint8_t v = b ? 1 : 0;
        if (v != cur) {
            runs.push_back(len);
            cur = v;
            len = 0;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<std::uint32_t>& runs, std::size_t n) {
    std::vector<std::uint8_t> bits;
    bits.reserve(n);
    std::uint8_t cur = 0;
    for (auto r : runs) {
        bits.insert(bits.end(), r, cur);
        cur ^= 1;
    }
    if (bits.size() != n) throw std::runtime_error("run-length data does not match the expected size");
    return bits;
}

std::vector<std::int32_t> chessboard_distance(const Raster& r) {
    const Grid& g = r.grid;
    const std::size_t N = g.nodes();
    const std::int32_t INF = std::numeric_limits<std::int32_t>::max() / 2;
    std::vector<std::int32_t> D(N);
    for (std::size_t i = 0; i < N; ++i) D[i] = r.bits[i] ? 0 : INF;
    // neighbour offsets of the 3^d mask, split by sign of the linear offset
    std::vector<std::array<int, 4>> back, fwd;
    std::size_t cnt = 1;
    for (int j = 0; j < g.d; ++j) cnt *= 3;
    for (std::size_t c = 0; c < cnt; ++c) {
        std::array<int, 4> o{};
        std::size_t q = c;
        std::int64_t lin = 0;
        for (int j = 0; j < g.d; ++j) {
            o[j] = static_cast<int>(q % 3) - 1;
            q /= 3;
            lin += o[j] * static_cast<std::int64_t>(g.stride(j));
        }
        if (lin < 0) back.push_back(o);
        if (lin > 0) fwd.push_back(o);
    }
    auto relax = [&](std::size_t idx, const std::vector<std::array<int, 4>>& offs) {
        int i[4];
        g.unravel(idx, i);
        std::int32_t best = D[idx];
        for (const auto& o : offs) {
            std::size_t nb = 0;
            bool in = true;
            for (int j = 0; j < g.d; ++j) {
                int ij = i[j] + o[j];
                if (ij < 0 || ij >= g.n[j]) {
                    in = false;
                    break;
                }
                nb += static_cast<std::size_t>(ij) * g.stride(j);
            }
            if (in && D[nb] + 1 < best) best = D[nb] + 1;
        }
        D[idx] = best;
    };
    for (std::size_t idx = 0; idx < N; ++idx) relax(idx, back);
    for (std::size_t idx = N; idx-- > 0;) relax(idx, fwd);
    return D;
}

double BlockHierarchy::H(int k) const { return H0 * std::pow(static_cast<double>(T), k); }

std::vector<std::uint8_t> BlockHierarchy::Psi(int k) const {
    std::vector<std::uint8_t> out(E.bits.size(), 0);
    for (int l = std::max(k, 0); l <= top; ++l)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] |= E_plus[l][i];
    return out;
}

std::vector<std::uint8_t> BlockHierarchy::Phi(int k) const {
    auto a = Psi(k + 1);
    std::vector<std::uint8_t> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = E_plus[k][i] && !a[i];
    return out;
}

Index BlockHierarchy::block_of(int k, const int* pixel) const {
    Index z(E.grid.d);
    for (int j = 0; j < E.grid.d; ++j)
        z[j] = static_cast<std::int64_t>(std::floor(E.grid.coord(j, pixel[j]) / H(k) + 0.5));
    return z;
}

Schedule schedule_38(int T, int d) {
    if (T < 3 || T % 2 == 0) throw std::invalid_argument("T must be odd and at least 3");
    Schedule s;
    s.T = T;
    s.kappa = 0.25;
    s.gamma = std::pow(static_cast<double>(T), -s.kappa);
    s.m0 = static_cast<int>(std::ceil(std::pow(static_cast<double>(T), s.kappa) - 1e-12));
    double md = std::pow(static_cast<double>(s.m0), d);
    s.K_star = 1;
    while (!(md / (s.K_star + 1) < s.gamma)) ++s.K_star;
    s.h_star = s.gamma / 4;
    return s;
}

BlockHierarchy build_hierarchy(const Raster& Ein, int T, double gamma, int m0, int K_star, double H0) {
    const Grid& g0 = Ein.grid;
    const int d = g0.d;
    if (T < 3 || T % 2 == 0) throw std::invalid_argument("T must be odd and at least 3");
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (m0 < 1 || m0 >= T) throw std::invalid_argument("m0 must satisfy 1 <= m0 < T");
    if (K_star < 0) throw std::invalid_argument("K_star must be nonnegative");
    const std::size_t nE = Ein.count();
    if (nE == 0) throw std::invalid_argument("E is empty");
    double pr = H0 / g0.s;
    int px = static_cast<int>(std::llround(pr));
    if (px < 1 || std::abs(pr - px) > 1e-9 * pr) throw std::invalid_argument("H0 must be a multiple of the pixel size");
    for (int j = 0; j < d; ++j) {
        double q = g0.x0[j] / g0.s + px / 2.0;
        if (std::abs(q - std::round(q)) > 1e-7) throw std::invalid_argument("blocks do not align with pixels");
    }
    BlockHierarchy h;
    h.T = T;
    h.H0 = H0;
    h.gamma = gamma;
    h.m0 = m0;
    h.K_star = K_star;
    h.px_per_H0 = px;

    // levels beyond K_top cannot hold an empty block: (1-γ)|C| >= |E|
    int K_top = 0;
    while ((1 - gamma) * std::pow(static_cast<double>(px) * std::pow(T, K_top), d) < static_cast<double>(nE)) ++K_top;
    h.top = std::max(K_star, K_top);

    std::array<int, 4> lo{}, hi{};
    for (int j = 0; j < d; ++j) {
        lo[j] = g0.n[j];
        hi[j] = -1;
    }
    int ii[4];
    for (std::size_t idx = 0; idx < Ein.bits.size(); ++idx) {
        if (!Ein.bits[idx]) continue;
        g0.unravel(idx, ii);
        for (int j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], ii[j]);
            hi[j] = std::max(hi[j], ii[j]);
        }
    }
    const long long pad = static_cast<long long>(px) * static_cast<long long>(std::pow(T, h.top)) +
                          static_cast<long long>(m0) * px * static_cast<long long>(std::pow(T, K_star)) + 2;
    Grid g = g0;
    for (int j = 0; j < d; ++j) {
        g.n[j] = static_cast<int>(hi[j] - lo[j] + 1 + 2 * pad);
        g.x0[j] = g0.x0[j] + static_cast<double>(lo[j] - pad) * g0.s;
    }
    h.E = Raster(g);
    for (std::size_t idx = 0; idx < Ein.bits.size(); ++idx) {
        if (!Ein.bits[idx]) continue;
        g0.unravel(idx, ii);
        std::size_t off = 0;
        for (int j = 0; j < d; ++j) off += static_cast<std::size_t>(ii[j] - lo[j] + pad) * g.stride(j);
        h.E.bits[off] = 1;
    }

    const std::size_t N = g.nodes();
    h.levels.resize(h.top + 1);
    h.E_plus.assign(h.top + 1, std::vector<std::uint8_t>(N, 0));
    for (int k = 0; k <= h.top; ++k) {
        const double Hk = h.H(k);
        std::array<std::vector<std::int64_t>, 4> blk;
        std::array<std::int64_t, 4> zmin{}, nb{};
        std::size_t total = 1;
        for (int j = 0; j < d; ++j) {
            blk[j].resize(g.n[j]);
            for (int i = 0; i < g.n[j]; ++i) blk[j][i] = static_cast<std::int64_t>(std::floor(g.coord(j, i) / Hk + 0.5));
            zmin[j] = blk[j].front();
            nb[j] = blk[j].back() - zmin[j] + 1;
            total *= static_cast<std::size_t>(nb[j]);
        }
        auto block_index = [&](const int* i) {
            std::size_t off = 0, st = 1;
            for (int j = 0; j < d; ++j) {
                off += static_cast<std::size_t>(blk[j][i[j]] - zmin[j]) * st;
                st *= static_cast<std::size_t>(nb[j]);
            }
            return off;
        };
        std::vector<std::uint32_t> cnt(total, 0);
        for (std::size_t idx = 0; idx < N; ++idx) {
            if (!h.E.bits[idx]) continue;
            g.unravel(idx, ii);
            ++cnt[block_index(ii)];
        }
        const double vol = std::pow(static_cast<double>(px) * std::pow(T, k), d);
        std::vector<std::uint8_t> empty(total, 0);
        LevelInfo& L = h.levels[k];
        for (std::size_t b = 0; b < total; ++b) {
            if (static_cast<double>(cnt[b]) > (1 - gamma) * vol) {
                empty[b] = 1;
                Index z(d);
                std::size_t q = b;
                for (int j = 0; j < d; ++j) {
                    z[j] = zmin[j] + static_cast<std::int64_t>(q % static_cast<std::size_t>(nb[j]));
                    q /= static_cast<std::size_t>(nb[j]);
                }
                L.empty.push_back(z);
            }
        }
        for (std::size_t idx = 0; idx < N; ++idx) {
            g.unravel(idx, ii);
            if (empty[block_index(ii)]) {
                h.E_plus[k][idx] = 1;
                ++L.E_plus;
                L.E_k += h.E.bits[idx];
            }
        }
    }
    std::vector<std::uint8_t> psi(N, 0);
    for (int k = h.top; k >= 0; --k) {
        LevelInfo& L = h.levels[k];
        for (std::size_t idx = 0; idx < N; ++idx) {
            if (h.E_plus[k][idx] && !psi[idx]) {
                ++L.Phi;
                L.Phi_E += h.E.bits[idx];
            }
        }
        for (std::size_t idx = 0; idx < N; ++idx) psi[idx] |= h.E_plus[k][idx];
    }
    h.top_level_nonempty = K_star <= h.top && !h.levels[K_star].empty.empty();
    const double share = static_cast<double>(nE) / (K_star + 1);
    for (int k = std::min(K_star, h.top); k >= 0; --k) {
        const LevelInfo& L = h.levels[k];
        if (static_cast<double>(L.Phi_E) <= share && static_cast<double>(L.Phi) <= share / (1 - gamma)) {
            h.k0 = k;
            break;
        }
    }
    if (h.k0 < 0) throw std::logic_error("no level satisfies the pigeonhole selection");
    return h;
}

Raster neighborhood_U(const BlockHierarchy& h) {
    Raster psi(h.E.grid);
    psi.bits = h.Psi(h.k0);
    Raster U(h.E.grid);
    if (psi.count() == 0) return U;
    auto D = chessboard_distance(psi);
    const std::int64_t R = static_cast<std::int64_t>(h.m0) * h.px_per_H0 * static_cast<std::int64_t>(std::pow(h.T, h.k0));
    for (std::size_t i = 0; i < D.size(); ++i) U.bits[i] = D[i] <= R ? 1 : 0;
    return U;
}

CutoffField cutoff(const BlockHierarchy& h) {
    Raster psi(h.E.grid);
    psi.bits = h.Psi(h.k0);
    const Grid& g = h.E.grid;
    CutoffField c;
    c.values = GridField(g, 1);
    if (psi.count() == 0) return c;
    auto D = chessboard_distance(psi);
    const double ramp = h.m0 * h.H(h.k0);
    for (std::size_t i = 0; i < D.size(); ++i) {
        double v = D[i] == 0 ? 1.0 : 1.0 - (D[i] - 0.5) * g.s / ramp;
        c.values.v[i] = std::clamp(v, 0.0, 1.0);
    }
    GridField gr = forward_gradient(c.values);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        double e2 = 0;
        for (int j = 0; j < g.d; ++j) {
            double q = std::abs(gr.comp(j)[i]);
            c.grad_bound = std::max(c.grad_bound, q);
            e2 += q * q;
        }
        c.grad_bound_euclid = std::max(c.grad_bound_euclid, std::sqrt(e2));
    }
    return c;
}

std::string hierarchy_json(const BlockHierarchy& h) {
    nlohmann::json j;
    j["T"] = h.T;
    j["H0"] = h.H0;
    j["gamma"] = h.gamma;
    j["m0"] = h.m0;
    j["K_star"] = h.K_star;
    j["k0"] = h.k0;
    j["top"] = h.top;
    const Grid& g = h.E.grid;
    j["raster"] = {{"d", g.d},
                   {"n", std::vector<int>(g.n.begin(), g.n.begin() + g.d)},
                   {"spacing", g.s},
                   {"origin", std::vector<double>(g.x0.begin(), g.x0.begin() + g.d)}};
    j["E_rle"] = rle_encode(h.E.bits);
    auto& lv = j["levels"] = nlohmann::json::array();
    for (std::size_t k = 0; k < h.levels.size(); ++k) {
        const auto& L = h.levels[k];
        lv.push_back({{"k", k},
                      {"H", h.H(static_cast<int>(k))},
                      {"empty", L.empty},
                      {"E_plus", L.E_plus},
                      {"Phi", L.Phi},
                      {"Phi_E", L.Phi_E}});
    }
    return j.dump();
}

namespace {

void ramp(double u, double& g, double& dg) {
    // u = signed offset from the block centre in block units
    double a = std::abs(u);
    if (a <= 0.5) {
        g = 1;
        dg = 0;
    } else if (a >= 0.7) {
        g = 0;
        dg = 0;
    } else {
        double th = M_PI / 2 * (a - 0.5) / 0.2;
        double c = std::cos(th);
        g = c * c;
        dg = -std::sin(2 * th) * (M_PI / 0.4) * (u > 0 ? 1 : -1);
    }
}

}  // namespace

std::vector<PouTerm> pou_at(int d, int L, double H1, const double* x) {
    const double S = L * H1;
    std::array<std::vector<std::int64_t>, 4> cand;
    for (int j = 0; j < d; ++j) {
        double y = x[j] / S;
        for (std::int64_t z = static_cast<std::int64_t>(std::floor(y - 0.7)); z <= static_cast<std::int64_t>(std::ceil(y + 0.7)); ++z)
            if (std::abs(y - static_cast<double>(z)) < 0.7) cand[j].push_back(z);
    }
    std::vector<PouTerm> terms;
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= cand[j].size();
    for (std::size_t c = 0; c < total; ++c) {
        PouTerm t;
        t.z.resize(d);
        std::size_t q = c;
        std::array<double, 4> g{}, dg{};
        for (int j = 0; j < d; ++j) {
            t.z[j] = cand[j][q % cand[j].size()];
            q /= cand[j].size();
            ramp(x[j] / S - static_cast<double>(t.z[j]), g[j], dg[j]);
        }
        t.value = 1;
        for (int j = 0; j < d; ++j) t.value *= g[j];
        if (t.value == 0) continue;
        for (int j = 0; j < d; ++j) {
            double p = dg[j] / S;
            for (int k = 0; k < d; ++k)
                if (k != j) p *= g[k];
            t.grad[j] = p;
        }
        terms.push_back(t);
    }
    double S2 = 0;
    std::array<double, 4> mix{};
    for (const auto& t : terms) {
        S2 += t.value * t.value;
        for (int j = 0; j < d; ++j) mix[j] += t.value * t.grad[j];
    }
    const double Sn = std::sqrt(S2);
    for (auto& t : terms) {
        for (int j = 0; j < d; ++j) t.grad[j] = t.grad[j] / Sn - t.value * mix[j] / (Sn * S2);
        t.value /= Sn;
    }
    return terms;
}

std::vector<std::pair<Index, GridField>> partition_of_unity(int L, double H1, const Grid& grid) {
    std::map<Index, GridField> fam;
    int i[4];
    double x[4];
    for (std::size_t idx = 0; idx < grid.nodes(); ++idx) {
        grid.unravel(idx, i);
        for (int j = 0; j < grid.d; ++j) x[j] = grid.coord(j, i[j]);
        for (const auto& t : pou_at(grid.d, L, H1, x)) {
            auto it = fam.find(t.z);
            if (it == fam.end()) it = fam.emplace(t.z, GridField(grid, 1)).first;
            it->second.v[idx] = t.value;
        }
    }
    return {fam.begin(), fam.end()};
}

B10Report verify_b10(const GridField& phi, const B10Params& prm) {
    const Grid& g = phi.grid;
    const int d = g.d;
    B10Report r;
    r.eps = 1 / std::sqrt(prm.beta);
    const double es = std::sqrt(r.eps);
    GridField pe = truncate_eps(phi, es);
    GridField mag = magnitude_sq(phi);
    const double n2 = l2_norm_sq(phi), pe2 = l2_norm_sq(pe), grad2 = dirichlet_grad_norm_sq(phi);
    r.psi1 = pe2 <= es * n2;
    Raster E(g);
    for (std::size_t i = 0; i < g.nodes(); ++i) E.bits[i] = std::sqrt(mag.v[i]) > pe.v[i] ? 1 : 0;
    r.E_measure = E.measure();
    r.psi2 = r.E_measure <= (d + prm.delta) / prm.nu;
    Schedule sc = schedule_38(prm.T, d);
    r.eps1 = 1 / std::sqrt(prm.alpha * sc.gamma * sc.m0 * sc.m0);
    if (E.count() == 0) {
        r.vacuous = true;
        return r;
    }
    int px = 1;
    for (; px <= 2; ++px) {
        bool ok = true;
        for (int j = 0; j < d; ++j) {
            double q = g.x0[j] / g.s + px / 2.0;
            ok = ok && std::abs(q - std::round(q)) < 1e-7;
        }
        if (ok) break;
    }
    BlockHierarchy h = build_hierarchy(E, sc.T, sc.gamma, sc.m0, sc.K_star, px * g.s);
    r.k0 = h.k0;
    Raster U = neighborhood_U(h);
    r.U_measure = U.measure();
    // energy density of φ on U, mapped back from the padded raster
    GridField dv = phi.components > 1 ? forward_divergence(phi) : GridField(g, 1);
    double KU = 0;
    int i[4];
    const Grid& hg = h.E.grid;
    for (std::size_t idx = 0; idx < g.nodes(); ++idx) {
        g.unravel(idx, i);
        std::size_t off = 0;
        for (int j = 0; j < d; ++j) {
            long long p = std::llround((g.coord(j, i[j]) - hg.x0[j]) / g.s - 0.5);
            off += static_cast<std::size_t>(p) * hg.stride(j);
        }
        if (!U.bits[off]) continue;
        double dens = 0;
        for (int c = 0; c < phi.components; ++c) {
            const double* a = phi.comp(c);
            for (int j = 0; j < d; ++j) {
                double up = i[j] + 1 < g.n[j] ? a[idx + g.stride(j)] : 0.0;
                double q = (up - a[idx]) / g.s;
                dens += q * q;
            }
        }
        if (phi.components > 1) dens += dv.v[idx] * dv.v[idx] / prm.alpha;
        KU += dens;
    }
    KU *= g.cell_volume();
    const double Hk0 = h.H(h.k0);
    r.lhs = (1 + prm.c1 * r.eps1) * std::pow(r.U_measure, 2.0 / d) / prm.C_alpha * KU;
    r.rhs = n2 - prm.c3 * (r.eps1 / (Hk0 * Hk0) + 1 / sc.gamma) * pe2 - prm.c4 * sc.gamma * grad2;
    r.margin = r.lhs - r.rhs;
    return r;
}

}  // namespace pelab
