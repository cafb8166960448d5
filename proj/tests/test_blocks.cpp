#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "pelab/blocks.hpp"

using namespace pelab;

namespace {

// side n*s, n pixels per edge; px-aligned when n ≡ px (mod 2)
Raster blank(int d, int n, double s) { return Raster(make_grid(d, n * s, n)); }

Raster random_squares(int n, double s, int count, int maxw, std::uint64_t seed) {
    Raster r = blank(2, n, s);
    auto g = oracle::rng(seed);
    for (int c = 0; c < count; ++c) {
        int w = 1 + static_cast<int>(g() % maxw), h = 1 + static_cast<int>(g() % maxw);
        int x = static_cast<int>(g() % (n - w)), y = static_cast<int>(g() % (n - h));
        for (int j = y; j < y + h; ++j)
            for (int i = x; i < x + w; ++i) r.bits[j * n + i] = 1;
    }
    return r;
}

std::int64_t block_coord(double c, double H) { return static_cast<std::int64_t>(std::floor(c / H + 0.5)); }

// E-pixel counts per level-k block, by direct binning
std::map<std::pair<std::int64_t, std::int64_t>, int> bin(const BlockHierarchy& h, int k) {
    std::map<std::pair<std::int64_t, std::int64_t>, int> m;
    const Grid& g = h.E.grid;
    for (int j = 0; j < g.n[1]; ++j)
        for (int i = 0; i < g.n[0]; ++i)
            if (h.E.bits[j * g.n[0] + i]) ++m[{block_coord(g.coord(0, i), h.H(k)), block_coord(g.coord(1, j), h.H(k))}];
    return m;
}

std::size_t count(const std::vector<std::uint8_t>& v) {
    std::size_t c = 0;
    for (auto b : v) c += b;
    return c;
}

void check_hierarchy(const BlockHierarchy& h) {
    const Grid& g = h.E.grid;
    const std::size_t N = g.nodes();
    const std::size_t nE = h.E.count();
    for (int k = 0; k <= h.top; ++k) {
        auto m = bin(h, k);
        const double vol = std::pow(h.px_per_H0 * std::pow(h.T, k), 2);
        bool ok = true;
        for (int j = 0; j < g.n[1]; ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                auto it = m.find({block_coord(g.coord(0, i), h.H(k)), block_coord(g.coord(1, j), h.H(k))});
                bool empty = it != m.end() && it->second > (1 - h.gamma) * vol;
                ok = ok && (h.E_plus[k][j * g.n[0] + i] != 0) == empty;
            }
        CHECK(ok);
        const LevelInfo& L = h.levels[k];
        CHECK(L.E_plus == count(h.E_plus[k]));
        CHECK(L.E_k <= L.E_plus);
        CHECK(static_cast<double>(L.E_plus) * (1 - h.gamma) <= static_cast<double>(L.E_k));
        CHECK(L.Phi == count(h.Phi(k)));
    }
    // Φ_k are pairwise disjoint and tile Ψ_0
    std::vector<int> cover(N, 0);
    std::size_t phiE = 0;
    for (int k = 0; k <= h.top; ++k) {
        auto p = h.Phi(k);
        for (std::size_t i = 0; i < N; ++i) {
            cover[i] += p[i];
            phiE += p[i] && h.E.bits[i];
        }
    }
    auto psi0 = h.Psi(0);
    bool tile = true;
    for (std::size_t i = 0; i < N; ++i) tile = tile && cover[i] == psi0[i];
    CHECK(tile);
    CHECK(phiE <= nE);
    // k0: highest admissible level
    const double share = static_cast<double>(nE) / (h.K_star + 1);
    auto admissible = [&](int k) {
        return h.levels[k].Phi_E <= share && h.levels[k].Phi <= share / (1 - h.gamma);
    };
    REQUIRE(h.k0 >= 0);
    CHECK(admissible(h.k0));
    for (int k = h.k0 + 1; k <= std::min(h.K_star, h.top); ++k) CHECK_FALSE(admissible(k));
}

}  // namespace

TEST_CASE("run-length encoding round trip") {
    auto g = oracle::rng(1);
    for (std::size_t n : {0u, 1u, 17u, 1000u}) {
        std::vector<std::uint8_t> b(n);
        for (auto& x : b) x = g() % 5 == 0;
        CHECK(rle_decode(rle_encode(b), n) == b);
    }
    std::vector<std::uint8_t> ones(9, 1);
    CHECK(rle_decode(rle_encode(ones), 9) == ones);
    CHECK_THROWS(rle_decode(rle_encode(ones), 10));
}

TEST_CASE("chessboard distance against brute force") {
    auto g = oracle::rng(2);
    for (int d : {2, 3}) {
        Raster r = blank(d, d == 2 ? 15 : 7, 1.0);
        if (d == 2) r.grid.n[1] = 11;
        r.bits.assign(r.grid.nodes(), 0);
        for (auto& b : r.bits) b = g() % 13 == 0;
        r.bits[0] = 1;
        auto D = chessboard_distance(r);
        int a[4], b[4];
        bool ok = true;
        for (std::size_t i = 0; i < r.bits.size(); ++i) {
            r.grid.unravel(i, a);
            int best = 1 << 30;
            for (std::size_t k = 0; k < r.bits.size(); ++k) {
                if (!r.bits[k]) continue;
                r.grid.unravel(k, b);
                int m = 0;
                for (int j = 0; j < d; ++j) m = std::max(m, std::abs(a[j] - b[j]));
                best = std::min(best, m);
            }
            ok = ok && D[i] == best;
        }
        CHECK(ok);
    }
}

TEST_CASE("schedule constants") {
    Schedule s = schedule_38(3, 2);
    CHECK(s.gamma == doctest::Approx(std::pow(3.0, -0.25)));
    CHECK(s.gamma == doctest::Approx(0.7598).epsilon(1e-4));
    CHECK(s.m0 == 2);
    CHECK(s.K_star == 5);
    CHECK(4.0 / (s.K_star + 1) < s.gamma);
    CHECK_FALSE(4.0 / s.K_star < s.gamma);
    CHECK_THROWS(schedule_38(4, 2));
}

TEST_CASE("a full block is empty at its own level and below") {
    Raster E = blank(2, 41, 1.0);
    for (int j = 19; j <= 21; ++j)
        for (int i = 19; i <= 21; ++i) E.bits[j * 41 + i] = 1;
    BlockHierarchy h = build_hierarchy(E, 3, 0.5, 1, 1, 1.0);
    REQUIRE(h.levels.size() >= 2);
    REQUIRE(h.levels[1].empty.size() == 1);
    CHECK(h.levels[1].empty[0] == Index{0, 0});
    CHECK(h.levels[0].empty.size() == 9);
    CHECK(h.levels[1].E_plus == 9);
    CHECK(h.top_level_nonempty);
    check_hierarchy(h);
}

TEST_CASE("emptiness threshold is strict") {
    // px = 2, block volume 4, (1-γ)·4 = 2 exactly
    Raster E = blank(2, 40, 1.0);
    E.bits[19 * 40 + 19] = E.bits[19 * 40 + 20] = 1;
    BlockHierarchy h2 = build_hierarchy(E, 3, 0.5, 1, 1, 2.0);
    CHECK(h2.levels[0].empty.empty());
    E.bits[20 * 40 + 19] = 1;
    BlockHierarchy h3 = build_hierarchy(E, 3, 0.5, 1, 1, 2.0);
    REQUIRE(h3.levels[0].empty.size() == 1);
    CHECK(h3.levels[0].empty[0] == Index{0, 0});
}

TEST_CASE("hierarchy invariants on random sets") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Raster E = random_squares(61, 0.5, 4 + static_cast<int>(seed), 9, 100 + seed);
        BlockHierarchy h = build_hierarchy(E, 3, 0.5, 1, 2, 0.5);
        check_hierarchy(h);
    }
    Schedule s = schedule_38(3, 2);
    Raster E = random_squares(31, 1.0, 5, 6, 7);
    check_hierarchy(build_hierarchy(E, s.T, s.gamma, s.m0, s.K_star, 1.0));
}

TEST_CASE("neighbourhood and cutoff") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Raster E = random_squares(45, 1.0, 6, 7, 200 + seed);
        BlockHierarchy h = build_hierarchy(E, 3, 0.5, 1, 2, 1.0);
        const Grid& g = h.E.grid;
        auto psi = h.Psi(h.k0);
        const int R = h.m0 * h.px_per_H0 * static_cast<int>(std::pow(h.T, h.k0));
        Raster U = neighborhood_U(h);
        CutoffField c = cutoff(h);
        bool dil = true, one = true, zero = true, flat = true;
        for (int j = 0; j < g.n[1]; ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                bool near = false;
                for (int b = std::max(0, j - R); b <= std::min(g.n[1] - 1, j + R) && !near; ++b)
                    for (int a = std::max(0, i - R); a <= std::min(g.n[0] - 1, i + R); ++a)
                        if (psi[b * g.n[0] + a]) {
                            near = true;
                            break;
                        }
                const std::size_t idx = j * g.n[0] + i;
                dil = dil && (U.bits[idx] != 0) == near;
                if (psi[idx]) one = one && c.values.v[idx] == 1.0;
                if (!near) zero = zero && c.values.v[idx] == 0.0;
                if (h.E_plus[h.k0][idx]) flat = flat && c.values.v[idx] == 1.0;
            }
        CHECK(dil);
        CHECK(one);
        CHECK(zero);
        CHECK(flat);
        CHECK(c.grad_bound <= 1 / (h.m0 * h.H(h.k0)) * (1 + 1e-12));
        CHECK(c.grad_bound_euclid <= std::sqrt(2.0) / (h.m0 * h.H(h.k0)) * (1 + 1e-12));
    }
}

TEST_CASE("hierarchy descriptor") {
    Raster E = random_squares(31, 1.0, 3, 5, 9);
    BlockHierarchy h = build_hierarchy(E, 3, 0.5, 1, 2, 1.0);
    auto j = nlohmann::json::parse(hierarchy_json(h));
    CHECK(j["k0"] == h.k0);
    CHECK(j["levels"].size() == h.levels.size());
    auto bits = rle_decode(j["E_rle"].get<std::vector<std::uint32_t>>(), h.E.bits.size());
    CHECK(bits == h.E.bits);
}

TEST_CASE("hierarchy input validation") {
    Raster E = blank(2, 41, 1.0);
    CHECK_THROWS(build_hierarchy(E, 3, 0.5, 1, 1, 1.0));  // empty
    E.bits[100] = 1;
    CHECK_THROWS(build_hierarchy(E, 4, 0.5, 1, 1, 1.0));
    CHECK_THROWS(build_hierarchy(E, 3, 1.0, 1, 1, 1.0));
    CHECK_THROWS(build_hierarchy(E, 3, 0.5, 3, 1, 1.0));
    CHECK_THROWS(build_hierarchy(E, 3, 0.5, 1, 1, 1.5));
    CHECK_THROWS(build_hierarchy(E, 3, 0.5, 1, 1, 2.0));  // 41 pixels: even blocks misalign
}

TEST_CASE("partition of unity") {
    auto g = oracle::rng(4);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int d : {2, 3}) {
        for (int rep = 0; rep < 200; ++rep) {
            double x[4];
            for (int j = 0; j < d; ++j) x[j] = u(g);
            auto terms = pou_at(d, 3, 1.7, x);
            double s = 0;
            for (const auto& t : terms) s += t.value * t.value;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(terms.size() <= (1u << d));
            const double e = 1e-6;
            for (const auto& t : terms) {
                for (int j = 0; j < d; ++j) {
                    double xp[4], xm[4];
                    std::copy(x, x + 4, xp);
                    std::copy(x, x + 4, xm);
                    xp[j] += e;
                    xm[j] -= e;
                    auto val = [&](const double* y) {
                        for (const auto& q : pou_at(d, 3, 1.7, y))
                            if (q.z == t.z) return q.value;
                        return 0.0;
                    };
                    double fd = (val(xp) - val(xm)) / (2 * e);
                    CHECK(std::abs(t.grad[j] - fd) <= 1e-6);
                }
            }
        }
    }
    Grid grid = make_grid(2, 12.0, 60);
    auto fam = partition_of_unity(2, 1.5, grid);
    std::vector<double> s(grid.nodes(), 0.0);
    for (const auto& [z, f] : fam)
        for (std::size_t i = 0; i < grid.nodes(); ++i) s[i] += f.v[i] * f.v[i];
    for (double v : s) CHECK(v == doctest::Approx(1.0).epsilon(1e-13));
    // deep inside a cube only one term survives
    double x0[2] = {0.1, -0.2};
    auto t = pou_at(2, 2, 1.5, x0);
    REQUIRE(t.size() == 1);
    CHECK(t[0].value == 1.0);
}

TEST_CASE("mesoscopic inequality bookkeeping") {
    Grid g = make_grid(2, 8.0, 41);
    GridField small(g, 2), big(g, 2);
    int i[4];
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        g.unravel(n, i);
        double x = g.coord(0, i[0]), y = g.coord(1, i[1]);
        double r2 = (x * x + y * y) / 4;
        double b = r2 < 1 ? std::pow(1 - r2, 2) : 0;
        small.v[n] = 0.2 * b;
        big.v[n] = b;
        big.v[g.nodes() + n] = 0.3 * b;
    }
    B10Params prm;
    B10Report v = verify_b10(small, prm);
    CHECK(v.vacuous);
    B10Report r = verify_b10(big, prm);
    CHECK_FALSE(r.vacuous);
    CHECK(r.E_measure > 0);
    CHECK(r.lhs >= 0);  // U may be empty when no block is empty
    CHECK(r.k0 >= 0);
    CHECK(std::isfinite(r.margin));
    CHECK(r.eps == doctest::Approx(0.1));
}
