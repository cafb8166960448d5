#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pelab/blocks.hpp"
#include "pelab/experiments.hpp"
#include "pelab/io.hpp"
#include "pelab/ldp.hpp"

using namespace pelab;
using nlohmann::json;

namespace {

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return ExperimentConfig{};
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path);
    return config_from_json(json::parse(is));
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
}

LobpcgOptions solver_options(const ExperimentConfig& c, std::uint64_t seed) {
    LobpcgOptions o;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    o.seed = seed;
    return o;
}

// default density for the ldp subcommand: normalized bump of unit support
GridField default_density() {
    ShapeSpec sh{"scalar-bump", 2.0, 1.0};
    GridField f = candidate_field(sh, 2, 48, 1.0);
    double s = std::sqrt(l2_norm_sq(f));
    for (double& v : f.v) v /= s;
    return f;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"penalized principal eigenvalue lab"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "experiment config (JSON)");

    // generate
    auto* gen = app.add_subcommand("generate", "draw a skeleton instance and save it as JSON");
    double gen_t = 0;
    int gen_trial = 0;
    std::string gen_out;
    gen->add_option("--t", gen_t, "box side in original units (default: first t of the config)");
    gen->add_option("--trial", gen_trial, "trial index");
    gen->add_option("-o,--out", gen_out, "output path")->required();

    // pe
    auto* pe = app.add_subcommand("pe", "penalized PE of one skeleton instance for every (alpha, beta) of the config");
    std::string pe_skel, pe_out, pe_field;
    int pe_trial = 0;
    pe->add_option("-s,--skeleton", pe_skel, "skeleton JSON")->required()->check(CLI::ExistingFile);
    pe->add_option("--trial", pe_trial, "trial index written to the table");
    pe->add_option("-o,--out", pe_out, "CSV output (default stdout)");
    pe->add_option("--field", pe_field, "snapshot of the last eigenfunction");

    // sweep
    auto* sw = app.add_subcommand("sweep", "seeded Monte Carlo sweep over t, trials, alpha, beta");
    std::string sw_out;
    sw->add_option("-o,--out", sw_out, "CSV output (overrides config output; default stdout)");

    // ldp
    auto* ld = app.add_subcommand("ldp", "G(phi; D) on a grid of D values");
    std::string ld_field, ld_out;
    int ld_points = 50;
    ld->add_option("--field", ld_field, "density snapshot (default: normalized bump)")->check(CLI::ExistingFile);
    ld->add_option("--points", ld_points, "number of D values in (0, D_inf]")->check(CLI::PositiveNumber);
    ld->add_option("-o,--out", ld_out, "CSV output (default stdout)");

    // blocks
    auto* bl = app.add_subcommand("blocks", "block hierarchy of the support of a field snapshot");
    std::string bl_field, bl_out;
    int bl_T = 3, bl_px = 0;
    bl->add_option("--field", bl_field, "snapshot whose support is the set E")->required()->check(CLI::ExistingFile);
    bl->add_option("--T", bl_T, "block ratio (odd)");
    bl->add_option("--px", bl_px, "pixels per base block edge (default: 1 or 2, matching the grid parity)")
        ->check(CLI::NonNegativeNumber);
    bl->add_option("-o,--out", bl_out, "JSON output (default stdout)");

    // validate
    auto* va = app.add_subcommand("validate", "oracle and invariant suite");
    double va_scale = 1.0;
    std::string va_skel;
    va->add_option("--tol-scale", va_scale, "multiplies every tolerance")->check(CLI::PositiveNumber);
    va->add_option("--skeleton", va_skel, "skeleton file whose loading is checked first");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path);

        if (*gen) {
            double t = gen_t > 0 ? gen_t : cfg.ts.front();
            SkeletonField sk = generate_skeleton(cfg.d, t, cfg.p, ObstacleShape{cfg.w},
                                                 trial_seed(cfg.master_seed, t, gen_trial));
            save_skeleton(sk, gen_out);
            return 0;
        }

        if (*pe) {
            SkeletonField sk = load_skeleton(pe_skel);
            std::vector<SweepRow> rows;
            InstancePe last;
            for (double a : cfg.alphas)
                for (double b : cfg.betas) {
                    LobpcgOptions o = solver_options(cfg, sk.seed());
                    last = cfg.solver == "localized" ? localized_pe(sk, cfg.resolution, a, b, o, cfg.local)
                                                     : global_pe(sk, cfg.resolution, a, b, o);
                    SweepRow r;
                    r.t = sk.box_side();
                    r.trial = pe_trial;
                    r.alpha = a;
                    r.beta = b;
                    r.lambda_scaled = last.lambda;
                    r.residual = last.residual;
                    r.seed = sk.seed();
                    r.converged = last.converged;
                    r.iterations = last.iterations;
                    rows.push_back(r);
                }
            emit(sweep_csv(rows), pe_out);
            if (!pe_field.empty()) write_snapshot(last.field, pe_field);
            for (const auto& r : rows)
                if (!r.converged) return 1;
            return 0;
        }

        if (*sw) {
            if (!sw_out.empty()) cfg.output = sw_out;
            std::string target = cfg.output;
            cfg.output.clear();
            auto rows = normalized_pe_sweep(cfg);
            emit(sweep_csv(rows), target);
            int bad = 0;
            for (const auto& r : rows) bad += !r.converged;
            if (bad) std::fprintf(stderr, "%d of %zu solves did not converge\n", bad, rows.size());
            return bad ? 1 : 0;
        }

        if (*ld) {
            GridField f = ld_field.empty() ? default_density() : read_snapshot(ld_field);
            LdpProfile pr = bernoulli_profile(cfg.p, cfg.w);
            const double Dinf = pr.nu * support_measure(f);
            std::ostringstream os;
            os.precision(17);
            os << "D,G,h_D,approximate\n";
            bool ok = true;
            for (int i = 1; i <= ld_points; ++i) {
                double D = Dinf * i / ld_points;
                GValue g = g_functional(pr, f, D);
                ok = ok && !g.approximate;
                os << D << ',' << g.value << ',' << g.h_star << ',' << g.approximate << '\n';
            }
            emit(os.str(), ld_out);
            return ok ? 0 : 1;
        }

        if (*bl) {
            GridField f = read_snapshot(bl_field);
            Raster E(f.grid);
            GridField m = magnitude_sq(f);
            for (std::size_t n = 0; n < m.v.size(); ++n) E.bits[n] = m.v[n] > 0;
            if (bl_px == 0) bl_px = f.grid.n[0] % 2 ? 1 : 2;
            Schedule s = schedule_38(bl_T, f.grid.d);
            BlockHierarchy h = build_hierarchy(E, s.T, s.gamma, s.m0, s.K_star, bl_px * f.grid.s);
            emit(hierarchy_json(h) + "\n", bl_out);
            return 0;
        }

        if (*va) {
            ValidationReport r = run_validation_suite(va_scale, va_skel);
            std::cout << r.to_json().dump(2) << '\n';
            return r.passed() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
