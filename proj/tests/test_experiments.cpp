#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "pelab/experiments.hpp"
#include "pelab/io.hpp"

using namespace pelab;

TEST_CASE("config parsing and validation") {
    auto j = nlohmann::json::parse(R"({"d":2,"p":0.3,"w":0.4,"alpha":[1,0.1],"beta":[5],"t":[16,32],
        "trials":3,"resolution":6,"master_seed":9,"solver":"localized","localized":{"side":5}})");
    ExperimentConfig c = config_from_json(j);
    CHECK(c.alphas.size() == 2);
    CHECK(c.ts[1] == 32);
    CHECK(c.local.side == 5);
    CHECK(c.local.side_refine == 10);
    ExperimentConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    for (const char* bad : {R"({"p":1})", R"({"w":1})", R"({"d":4})", R"({"t":[2]})", R"({"alpha":[0]})",
                            R"({"beta":[-1]})", R"({"resolution":3})", R"({"solver":"dense"})", R"({"t":"x"})",
                            R"({"trials":0})"})
        CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(bad)), std::invalid_argument);
}

TEST_CASE("H1 schedule") {
    for (double t : {16.0, 64.0, 1024.0}) {
        H1Schedule h = h1_schedule(t, 2, 0.125);
        CHECK(h.H_star == 65);
        CHECK(h.T % 2 == 1);
        CHECK(std::abs(h.T - h.H_star / h.tau) <= 1.0 + 1e-12);
        CHECK(h.H1 == doctest::Approx(h.tau * h.T));
    }
    CHECK(h1_schedule(64, 3, 0.125).H_star == std::ceil(std::cbrt(96 / 0.015625)) + 1);
}

TEST_CASE("scalar candidates reproduce Faber-Krahn") {
    const double j = oracle::j01();
    CandidateFamily fam;
    fam.kind = FamilyKind::Scalar;
    ConstantEstimate e = estimate_c_alpha(1e6, fam, 100);
    CHECK(e.value == doctest::Approx(std::numbers::pi * j * j).epsilon(1e-6));
    CHECK(e.params["kind"] == "scalar-bessel");
    fam.d = 3;
    CHECK(estimate_c_alpha(1e6, fam, 100).value ==
          doctest::Approx(std::pow(4 * std::numbers::pi / 3, 2.0 / 3) * std::numbers::pi * std::numbers::pi)
              .epsilon(1e-6));
    CHECK_THROWS(estimate_c_alpha(1.0, fam, 0));
}

TEST_CASE("quotients scale with the support") {
    for (int d : {2, 3}) {
        for (const auto& sh : family_shapes(CandidateFamily{FamilyKind::Mixed, d, 96, 1.0})) {
            double a = candidate_integrals(sh, d, 1.0).quotient(0.5);
            double b = candidate_integrals(sh, d, 4.0).quotient(0.5);
            CHECK(b == doctest::Approx(a * std::pow(4.0, -2.0 / d)).epsilon(1e-10));
        }
    }
    CandidateFamily fam;
    fam.support = 4;
    CHECK(estimate_c_alpha(1.0, fam, 100).value ==
          doctest::Approx(estimate_c_alpha(1.0, CandidateFamily{}, 100).value / 4).epsilon(1e-10));
}

TEST_CASE("candidate integrals against the grid") {
    ShapeSpec sh{"scalar-bump", 2.0, 1.0};
    CandidateIntegrals ci = candidate_integrals(sh, 2, 1.0);
    CHECK(ci.support == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ci.density.support == doctest::Approx(1.0).epsilon(1e-12));
    // (1-ρ²)² on a disk of radius R: quotient 20/(3R²), R² = 1/π
    CHECK(ci.quotient(1e12) == doctest::Approx(20 * std::numbers::pi / 3).epsilon(1e-9));
    // embedded as ψ e₁ the divergence carries half the gradient
    CHECK(ci.quotient(1.0) == doctest::Approx(1.5 * ci.quotient(1e12)).epsilon(1e-9));
    GridField f = candidate_field(sh, 2, 200, 1.0);
    double q = dirichlet_grad_norm_sq(f) / l2_norm_sq(f);
    CHECK(q == doctest::Approx(ci.quotient(1e12)).epsilon(2e-2));
}

TEST_CASE("stream candidates are divergence free") {
    CandidateFamily fam;
    fam.kind = FamilyKind::Stream;
    for (const auto& sh : family_shapes(fam)) {
        CandidateIntegrals ci = candidate_integrals(sh, 2, 1.0);
        CHECK(ci.div_sq <= 1e-12 * ci.grad_sq);
        CHECK(ci.quotient(1e-3) == doctest::Approx(ci.quotient(1e3)).epsilon(1e-10));
    }
}

TEST_CASE("penalized constant is non-increasing in alpha") {
    double prev = std::numeric_limits<double>::infinity();
    for (double a : {1e-3, 1e-2, 0.1, 1.0, 10.0, 1e3}) {
        double v = estimate_c_alpha(a, CandidateFamily{}, 100).value;
        CHECK(v <= prev * (1 + 1e-12));
        prev = v;
    }
    CandidateFamily st;
    st.kind = FamilyKind::Stream;
    CHECK(estimate_c_alpha(1e-3, CandidateFamily{}, 100).value <= estimate_c_alpha(1e-3, st, 100).value);
}

TEST_CASE("constants with the large deviation penalty") {
    LdpProfile pr = bernoulli_profile(0.5, 0.5);
    std::vector<double> betas{0.1, 1, 10, 100, 1e3, 1e4};
    auto es = estimate_c_alpha_beta(1.0, betas, pr, CandidateFamily{}, 100, 21);
    const double limit = pr.nu / 2 * estimate_c_alpha(1.0, CandidateFamily{}, 100).value;
    for (std::size_t i = 0; i < es.size(); ++i) {
        CHECK(es[i].value <= limit * (1 + 1e-12));
        if (i) CHECK(es[i].value >= es[i - 1].value);
    }
    CHECK(es.back().value == doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("instance geometry and the empty potential") {
    SkeletonField sk = generate_skeleton(2, 8, 0.5, ObstacleShape{0.5}, 5);
    InstanceGeometry geo = instance_geometry(sk, 4);
    CHECK(geo.n == 32);
    CHECK(geo.s * geo.n == doctest::Approx(geo.tau * 8));
    // β = 0 and a negligible divergence penalty leave the scalar box problem
    LobpcgOptions opt;
    opt.tol = 1e-10;
    InstancePe r = global_pe(sk, 4, 1e12, 0.0, opt);
    REQUIRE(r.converged);
    CHECK(r.lambda == doctest::Approx(2 * oracle::dirichlet_1d(geo.n, geo.s)).epsilon(1e-6));
    CHECK(global_pe(sk, 4, 1.0, 10.0, opt).lambda > global_pe(sk, 4, 1.0, 1.0, opt).lambda);
}

TEST_CASE("localized solve bounds the global one") {
    SkeletonField sk = generate_skeleton(2, 24, 0.5, ObstacleShape{0.5}, 11);
    LobpcgOptions opt;
    opt.tol = 1e-9;
    LocalizedOptions loc;
    InstancePe g = global_pe(sk, 4, 1.0, 30.0, opt);
    InstancePe l = localized_pe(sk, 4, 1.0, 30.0, opt, loc);
    REQUIRE(g.converged);
    REQUIRE(l.converged);
    CHECK(l.lambda >= g.lambda * (1 - 1e-8));
    CHECK(l.lambda <= g.lambda * 1.25);
    CHECK(l.boxes >= 1);
    CHECK_FALSE(screen_windows(sk, loc).empty());
}

TEST_CASE("sweeps are reproducible") {
    ExperimentConfig c;
    c.ts = {8, 12};
    c.trials = 2;
    c.betas = {1, 5};
    auto a = normalized_pe_sweep(c), b = normalized_pe_sweep(c);
    REQUIRE(a.size() == 8);
    CHECK(sweep_csv(a) == sweep_csv(b));
    for (const auto& r : a) CHECK(r.converged);
    CHECK(a[0].seed == trial_seed(1, 8, 0));
    CHECK(a[0].seed != a[2].seed);
    c.master_seed = 2;
    CHECK(normalized_pe_sweep(c)[0].seed != a[0].seed);
    auto csv = sweep_csv(a);
    CHECK(csv.substr(0, csv.find('\n')) == "t,trial,alpha,beta,lambda_scaled,residual,seed");
}

TEST_CASE("quantiles and rough bound") {
    CHECK(empirical_quantile({3, 1, 2}, 0.5) == 2);
    CHECK(empirical_quantile({1, 2, 3, 4}, 0.05) == doctest::Approx(1.15));
    CHECK_THROWS(empirical_quantile({}, 0.5));
    std::vector<SweepRow> rows(3);
    rows[0].lambda_scaled = 4;
    rows[0].beta = 1;
    rows[1].lambda_scaled = 1;
    rows[1].beta = 1;
    rows[1].empty_blocks = true;
    rows[2].lambda_scaled = 6;
    rows[2].beta = 100;
    // μ = 0.25: reference μ min(μ, β) = 1/16
    CHECK(fit_rough_bound(rows, 0.25, 2) == doctest::Approx(64.0));
    double f = empty_block_frequency(2, 0.5, 0.5, 16, 4, 3);
    CHECK((f >= 0 && f <= 1));
}

TEST_CASE("chain inequality on instances") {
    ExperimentConfig c;
    c.ts = {12};
    c.trials = 2;
    ChainReport r = theorem11_chain(c, 1.0, 50.0);
    CHECK(r.violations == 0);
    REQUIRE(r.instances.size() == 2);
    for (const auto& in : r.instances) {
        CHECK(in.converged);
        CHECK(in.best_candidate >= in.lambda * (1 - 1e-9));
        CHECK(in.candidates > 0);
    }
    CHECK(r.to_json()["violations"] == 0);
}

TEST_CASE("validation suite") {
    CHECK(run_validation_suite().passed());
    CHECK(run_validation_suite(1e-2).passed());
    auto path = (std::filesystem::temp_directory_path() / "pelab_bad_skeleton.json").string();
    {
        std::ofstream os(path);
        os << "{\"d\": 2, \"t\": ";
    }
    ValidationReport bad = run_validation_suite(1.0, path);
    CHECK_FALSE(bad.passed());
    REQUIRE_FALSE(bad.checks.empty());
    CHECK(bad.checks.front().name == "skeleton_load");
    CHECK_FALSE(bad.checks.front().passed);
}
