#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"
#include "pelab/energy.hpp"

using namespace pelab;

namespace {

oracle::Box box_of(const Grid& g) {
    oracle::Box b;
    b.d = g.d;
    for (int j = 0; j < g.d; ++j) b.n[j] = g.n[j];
    b.s = g.s;
    return b;
}

std::vector<std::uint8_t> random_V(std::size_t n, std::mt19937_64& r) {
    std::vector<std::uint8_t> V(n);
    for (auto& v : V) v = r() % 3 == 0;
    return V;
}

GridField random_field(const Grid& g, int comps, std::mt19937_64& r) {
    GridField f(g, comps);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& x : f.v) x = u(r);
    return f;
}

}  // namespace

TEST_CASE("operator matches the polarized energy matrix") {
    auto r = oracle::rng(3);
    for (int comps : {1, 2}) {
        Grid g = make_grid(2, 1.3, 5);
        g.n[1] = 4;
        auto V = random_V(g.nodes(), r);
        EnergyForm f = assemble(g, 0.37, 2.5, V, comps);
        Eigen::MatrixXd A = oracle::dense_matrix(box_of(g), 0.37, 2.5, V, comps);
        const std::size_t n = f.size();
        std::vector<double> e(n, 0.0), y(n);
        double worst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            e[i] = 1;
            apply(f, e.data(), y.data());
            e[i] = 0;
            for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(y[k] - A(k, i)));
        }
        CHECK(worst < 1e-9 * A.cwiseAbs().maxCoeff());
        auto D = diagonal(f);
        for (std::size_t i = 0; i < n; ++i) CHECK(D[i] == doctest::Approx(A(i, i)).epsilon(1e-13));
    }
}

TEST_CASE("energy equals the independent evaluator in 2d and 3d") {
    auto r = oracle::rng(5);
    for (int d : {2, 3}) {
        Grid g = make_grid(d, 1.0, d == 2 ? 7 : 4);
        auto V = random_V(g.nodes(), r);
        GridField phi = random_field(g, d, r);
        EnergyForm f = assemble(g, 0.01, 7.0, V, d);
        double ref = oracle::energy(box_of(g), 0.01, 7.0, V, d, phi.v);
        CHECK(energy(f, phi) == doctest::Approx(ref).epsilon(1e-12));
        std::vector<double> y(f.size());
        apply(f, phi.v.data(), y.data());
        double q = 0;
        for (std::size_t i = 0; i < y.size(); ++i) q += y[i] * phi.v[i];
        CHECK(q * g.cell_volume() == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("serial and parallel apply agree bitwise") {
    auto r = oracle::rng(9);
    Grid g = make_grid(2, 3.0, 40);
    EnergyForm f = assemble(g, 0.5, 3.0, random_V(g.nodes(), r), 2);
    GridField x = random_field(g, 2, r);
    std::vector<double> a(f.size()), b(f.size());
    apply(f, x.v.data(), a.data());
    apply_serial(f, x.v.data(), b.data());
    CHECK(a == b);
}

TEST_CASE("triplets reproduce the dense matrix") {
    auto r = oracle::rng(11);
    Grid g = make_grid(2, 1.0, 4);
    auto V = random_V(g.nodes(), r);
    EnergyForm f = assemble(g, 2.0, 1.0, V, 2);
    Eigen::MatrixXd A = oracle::dense_matrix(box_of(g), 2.0, 1.0, V, 2);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(A.rows(), A.cols());
    for (const auto& t : assemble_triplets(f)) B(t.row, t.col) += t.value;
    CHECK((A - B).cwiseAbs().maxCoeff() < 1e-9 * A.cwiseAbs().maxCoeff());
}

TEST_CASE("restriction is the principal submatrix") {
    auto r = oracle::rng(13);
    Grid g = make_grid(2, 1.0, 6);
    auto V = random_V(g.nodes(), r);
    EnergyForm f = assemble(g, 0.3, 4.0, V, 2);
    EnergyForm sub = restrict_nodes(f, {1, 2, 0, 0}, {3, 4, 1, 1});
    GridField small(sub.grid, 2), big(g, 2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 3; ++i) {
                double v = u(r);
                small.v[c * 12 + j * 3 + i] = v;
                big.v[c * 36 + (j + 2) * 6 + (i + 1)] = v;
            }
    CHECK(energy(sub, small) == doctest::Approx(energy(f, big)).epsilon(1e-13));
}

TEST_CASE("divergence term vanishes on stream fields") {
    Grid g = make_grid(2, 1.0, 12);
    auto r = oracle::rng(17);
    GridField psi(g, 1);
    std::uniform_real_distribution<double> u(-1, 1);
    int idx[4];
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        g.unravel(n, idx);
        if (idx[0] > 0 && idx[1] > 0) psi.v[n] = u(r);
    }
    GridField phi = curl_field(psi);
    std::vector<std::uint8_t> V(g.nodes(), 0);
    double e1 = energy(assemble(g, 1.0, 0.0, V, 2), phi), e2 = energy(assemble(g, 1e-6, 0.0, V, 2), phi);
    CHECK(std::abs(e1 - e2) <= 1e-12 * e1);
}

TEST_CASE("invalid inputs are rejected") {
    Grid g = make_grid(2, 1.0, 4);
    std::vector<std::uint8_t> V(g.nodes(), 0);
    CHECK_THROWS(assemble(g, 0.0, 1.0, V, 2));
    CHECK_THROWS(assemble(g, 1.0, -1.0, V, 2));
    CHECK_THROWS(assemble(g, 1.0, 1.0, std::vector<std::uint8_t>(3, 0), 2));
}
