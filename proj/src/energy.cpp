#include "pelab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pelab/pairwise.hpp"

namespace pelab {

EnergyForm assemble(const Grid& grid, double alpha, double beta, const std::vector<std::uint8_t>& potential,
                    int components, double beta_scale) {
    if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive");
    if (!(beta >= 0)) throw std::invalid_argument("beta must be nonnegative");
    if (components != 1 && components != grid.d) throw std::invalid_argument("components must be 1 or d");
    if (potential.size() != grid.nodes()) throw std::invalid_argument("potential/grid shape mismatch");
    for (auto b : potential)
        if (b > 1) throw std::invalid_argument("potential must take values in {0,1}");
    EnergyForm f;
    f.grid = grid;
    f.components = components;
    f.alpha = alpha;
    f.beta = beta;
    f.beta_scale = beta_scale;
    f.V = potential;
    return f;
}

EnergyForm assemble(const Grid& grid, double alpha, double beta, const GridField& potential, int components,
                    double beta_scale) {
    if (!(potential.grid == grid) || potential.components != 1) throw std::invalid_argument("potential/grid shape mismatch");
    std::vector<std::uint8_t> V(potential.v.size());
    for (std::size_t i = 0; i < V.size(); ++i) {
        double x = potential.v[i];
        if (x != 0.0 && x != 1.0) throw std::invalid_argument("potential must take values in {0,1}");
        V[i] = x == 1.0 ? 1 : 0;
    }
    return assemble(grid, alpha, beta, V, components, beta_scale);
}

namespace {

template <bool Par>
void apply_impl(const EnergyForm& f, const double* x, double* y) {
    const Grid& g = f.grid;
    const int d = g.d, C = f.components;
    const std::int64_t N = static_cast<std::int64_t>(g.nodes());
    const double is = 1.0 / g.s, is2 = is * is, be = f.beta_eff();
    std::array<std::int64_t, 4> st{}, nn{};
    for (int j = 0; j < d; ++j) {
        st[j] = static_cast<std::int64_t>(g.stride(j));
        nn[j] = g.n[j];
    }
    std::vector<double> div;
    const bool vec = C > 1;
    if (vec) {
        div.assign(static_cast<std::size_t>(N), 0.0);
#pragma omp parallel for schedule(static) if (Par)
        for (std::int64_t idx = 0; idx < N; ++idx) {
            double acc = 0;
            for (int j = 0; j < d; ++j) {
                const double* a = x + j * N;
                std::int64_t ij = (idx / st[j]) % nn[j];
                double up = ij + 1 < nn[j] ? a[idx + st[j]] : 0.0;
                acc += up - a[idx];
            }
            div[idx] = acc * is;
        }
    }
    const double ia = 1.0 / f.alpha;
    for (int c = 0; c < C; ++c) {
        const double* a = x + c * N;
        double* o = y + c * N;
#pragma omp parallel for schedule(static) if (Par)
        for (std::int64_t idx = 0; idx < N; ++idx) {
            double v = a[idx];
            double lap = 2.0 * d * v;
            for (int j = 0; j < d; ++j) {
                std::int64_t ij = (idx / st[j]) % nn[j];
                if (ij + 1 < nn[j]) lap -= a[idx + st[j]];
                if (ij > 0) lap -= a[idx - st[j]];
            }
            double out = lap * is2 + be * f.V[idx] * v;
            if (vec) {
                std::int64_t ic = (idx / st[c]) % nn[c];
                double below = ic > 0 ? div[idx - st[c]] : v * is;
                out += ia * (below - div[idx]) * is;
            }
            o[idx] = out;
        }
    }
}

}  // namespace

void apply(const EnergyForm& f, const double* x, double* y) { apply_impl<true>(f, x, y); }
void apply_serial(const EnergyForm& f, const double* x, double* y) { apply_impl<false>(f, x, y); }

std::vector<double> diagonal(const EnergyForm& f) {
    const std::size_t N = f.grid.nodes();
    const double is2 = 1.0 / (f.grid.s * f.grid.s);
    std::vector<double> dg(f.size());
    double base = 2.0 * f.grid.d * is2 + (f.components > 1 ? 2.0 * is2 / f.alpha : 0.0);
    for (int c = 0; c < f.components; ++c)
        for (std::size_t i = 0; i < N; ++i) dg[c * N + i] = base + f.beta_eff() * f.V[i];
    return dg;
}

double energy(const EnergyForm& f, const GridField& phi) {
    if (!(phi.grid == f.grid) || phi.components != f.components) throw std::invalid_argument("field/form mismatch");
    double e = dirichlet_grad_norm_sq(phi);
    const Grid& g = f.grid;
    const double vol = g.cell_volume();
    const std::size_t N = g.nodes();
    if (f.components > 1) {
        GridField dv = forward_divergence(phi);
        double s2 = det_sum(N, [&](std::size_t i) { return dv.v[i] * dv.v[i]; });
        // outside nodes directly below the box along axis c
        double s3 = det_sum(N, [&](std::size_t idx) {
            double acc = 0;
            for (int c = 0; c < g.d; ++c) {
                if ((idx / g.stride(c)) % static_cast<std::size_t>(g.n[c]) != 0) continue;
                double q = phi.comp(c)[idx] / g.s;
                acc += q * q;
            }
            return acc;
        });
        e += vol * (s2 + s3) / f.alpha;
    }
    double sv = det_sum(N, [&](std::size_t i) {
        if (!f.V[i]) return 0.0;
        double acc = 0;
        for (int c = 0; c < f.components; ++c) acc += phi.comp(c)[i] * phi.comp(c)[i];
        return acc;
    });
    return e + f.beta_eff() * vol * sv;
}

double rayleigh_quotient(const EnergyForm& f, const GridField& phi) {
    double m = l2_norm_sq(phi);
    if (!(m > 0)) throw std::invalid_argument("Rayleigh quotient of the zero field");
    return energy(f, phi) / m;
}

EnergyForm restrict_nodes(const EnergyForm& f, const std::array<int, 4>& lo, const std::array<int, 4>& count) {
    const Grid& g = f.grid;
    Grid sub = g;
    for (int j = 0; j < g.d; ++j) {
        if (lo[j] < 0 || count[j] < 1 || lo[j] + count[j] > g.n[j]) throw std::out_of_range("subbox out of range");
        sub.n[j] = count[j];
        sub.x0[j] = g.x0[j] + lo[j] * g.s;
    }
    std::vector<std::uint8_t> V(sub.nodes());
    int i[4];
    for (std::size_t idx = 0; idx < V.size(); ++idx) {
        sub.unravel(idx, i);
        std::size_t off = 0;
        for (int j = 0; j < g.d; ++j) off += static_cast<std::size_t>(i[j] + lo[j]) * g.stride(j);
        V[idx] = f.V[off];
    }
    EnergyForm r = f;
    r.grid = sub;
    r.V = std::move(V);
    return r;
}

EnergyForm restrict_to_subbox(const EnergyForm& f, const Index& center, int side_cells, double tau) {
    const Grid& g = f.grid;
    if (static_cast<int>(center.size()) != g.d || side_cells < 1) throw std::invalid_argument("bad subbox");
    std::array<int, 4> lo{}, cnt{};
    for (int j = 0; j < g.d; ++j) {
        double a = tau * (static_cast<double>(center[j]) - side_cells / 2.0);
        double b = tau * (static_cast<double>(center[j]) + side_cells / 2.0);
        int l = static_cast<int>(std::floor((a - g.x0[j]) / g.s - 0.5 + 1e-9)) + 1;
        int h = static_cast<int>(std::floor((b - g.x0[j]) / g.s - 0.5 + 1e-9));
        l = std::max(l, 0);
        h = std::min(h, g.n[j] - 1);
        if (h < l) throw std::out_of_range("subbox out of range");
        lo[j] = l;
        cnt[j] = h - l + 1;
    }
    return restrict_nodes(f, lo, cnt);
}

std::vector<Triplet> assemble_triplets(const EnergyForm& f) {
    const Grid& g = f.grid;
    const int d = g.d, C = f.components;
    const std::size_t N = g.nodes();
    const double is = 1.0 / g.s, is2 = is * is;
    std::vector<Triplet> t;
    int i[4];
    for (int c = 0; c < C; ++c)
        for (std::size_t idx = 0; idx < N; ++idx) {
            g.unravel(idx, i);
            std::size_t r = c * N + idx;
            t.push_back({r, r, 2.0 * d * is2 + f.beta_eff() * f.V[idx]});
            for (int j = 0; j < d; ++j) {
                if (i[j] + 1 < g.n[j]) t.push_back({r, r + g.stride(j), -is2});
                if (i[j] > 0) t.push_back({r, r - g.stride(j), -is2});
            }
        }
    if (C > 1) {
        // rank-one contributions a_x a_x^T / alpha from every extended node x
        auto add_outer = [&](const std::vector<std::pair<std::size_t, double>>& a) {
            for (auto& p : a)
                for (auto& q : a) t.push_back({p.first, q.first, p.second * q.second / f.alpha});
        };
        std::vector<std::pair<std::size_t, double>> a;
        for (std::size_t idx = 0; idx < N; ++idx) {
            g.unravel(idx, i);
            a.clear();
            for (int k = 0; k < d; ++k) {
                a.push_back({k * N + idx, -is});
                if (i[k] + 1 < g.n[k]) a.push_back({k * N + idx + g.stride(k), is});
            }
            add_outer(a);
            for (int k = 0; k < d; ++k)
                if (i[k] == 0) {
                    a.clear();
                    a.push_back({k * N + idx, is});
                    add_outer(a);
                }
        }
    }
    std::sort(t.begin(), t.end(), [](const Triplet& x, const Triplet& y) {
        return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
    std::vector<Triplet> out;
    for (const auto& e : t) {
        if (!out.empty() && out.back().row == e.row && out.back().col == e.col)
            out.back().value += e.value;
        else
            out.push_back(e);
    }
    std::erase_if(out, [](const Triplet& e) { return e.value == 0.0; });
    return out;
}

void export_triplets(const EnergyForm& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(17);
    for (const auto& e : assemble_triplets(f)) os << e.row << ' ' << e.col << ' ' << e.value << '\n';
}

}  // namespace pelab
