#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"
#include "pelab/eigensolver.hpp"

using namespace pelab;

TEST_CASE("scalar box eigenvalue matches the separable formula") {
    Grid g = make_dirichlet_grid(2, 2.0, 40);
    g.n[1] = 30;
    EnergyForm f = assemble(g, 1.0, 0.0, std::vector<std::uint8_t>(g.nodes(), 0), 1);
    EigenResult r = smallest_eigenpair(f, 1e-10);
    REQUIRE(r.converged);
    double ref = oracle::dirichlet_1d(40, g.s) + oracle::dirichlet_1d(30, g.s);
    CHECK(r.lambda == doctest::Approx(ref).epsilon(1e-8));
    CHECK(l2_norm_sq(r.field) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vector form with potential agrees with dense eigenvalues") {
    auto rng = oracle::rng(21);
    for (int m : {3, 6, 9}) {
        Grid g = make_grid(2, 1.0, m);
        std::vector<std::uint8_t> V(g.nodes());
        for (auto& v : V) v = rng() % 2;
        EnergyForm f = assemble(g, 0.05, 30.0, V, 2);
        oracle::Box b;
        b.n[0] = b.n[1] = m;
        b.s = g.s;
        double ref = oracle::dense_smallest(oracle::dense_matrix(b, 0.05, 30.0, V, 2));
        EigenResult r = smallest_eigenpair(f, 1e-12);
        CHECK(r.converged);
        CHECK(std::abs(r.lambda - ref) <= 1e-8 * ref);
    }
}

TEST_CASE("residual and Rayleigh quotient are consistent") {
    Grid g = make_grid(2, 1.0, 20);
    std::vector<std::uint8_t> V(g.nodes(), 0);
    for (std::size_t i = 0; i < V.size(); i += 7) V[i] = 1;
    EnergyForm f = assemble(g, 0.5, 50.0, V, 2);
    EigenResult r = smallest_eigenpair(f, 1e-9);
    CHECK(r.converged);
    CHECK(rayleigh_quotient(f, r.field) == doctest::Approx(r.lambda).epsilon(1e-9));
    CHECK(r.residual < 1e-3);
}

TEST_CASE("same seed gives identical eigenpairs") {
    Grid g = make_grid(2, 1.0, 16);
    EnergyForm f = assemble(g, 1.0, 0.0, std::vector<std::uint8_t>(g.nodes(), 0), 2);
    EigenResult a = smallest_eigenpair(f, 1e-9, 5000, 4), b = smallest_eigenpair(f, 1e-9, 5000, 4);
    CHECK(a.lambda == b.lambda);
    CHECK(a.field.v == b.field.v);
}

TEST_CASE("partial eigenvalues bound the global one from above") {
    Grid g = make_grid(2, 4.0, 32);
    std::vector<std::uint8_t> V(g.nodes(), 0);
    auto rng = oracle::rng(2);
    for (auto& v : V) v = rng() % 4 == 0;
    EnergyForm f = assemble(g, 1.0, 20.0, V, 2);
    EigenResult glob = smallest_eigenpair(f, 1e-9);
    PartialPeResult part = partial_pe_minimum(f, 1, 1.0);
    REQUIRE(!part.all.empty());
    CHECK(part.min_lambda >= glob.lambda * (1 - 1e-8));
}
