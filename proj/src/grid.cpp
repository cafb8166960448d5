#include "pelab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pelab/pairwise.hpp"

namespace pelab {

std::size_t Grid::nodes() const {
    std::size_t N = 1;
    for (int j = 0; j < d; ++j) N *= static_cast<std::size_t>(n[j]);
    return N;
}

std::size_t Grid::stride(int j) const {
    std::size_t st = 1;
    for (int k = 0; k < j; ++k) st *= static_cast<std::size_t>(n[k]);
    return st;
}

double Grid::cell_volume() const { return std::pow(s, d); }

void Grid::unravel(std::size_t idx, int* i) const {
    for (int j = 0; j < d; ++j) {
        i[j] = static_cast<int>(idx % static_cast<std::size_t>(n[j]));
        idx /= static_cast<std::size_t>(n[j]);
    }
}

bool Grid::operator==(const Grid& o) const {
    if (d != o.d || s != o.s) return false;
    for (int j = 0; j < d; ++j)
        if (n[j] != o.n[j] || x0[j] != o.x0[j]) return false;
    return true;
}

Grid make_grid(int d, double side, int m) {
    if (d < 1 || d > 4) throw std::invalid_argument("dimension must be 1..4");
    if (m < 1 || !(side > 0)) throw std::invalid_argument("bad grid size");
    Grid g;
    g.d = d;
    g.s = side / m;
    for (int j = 0; j < d; ++j) {
        g.n[j] = m;
        g.x0[j] = -side / 2;
    }
    return g;
}

Grid make_dirichlet_grid(int d, double side, int m) {
    Grid g = make_grid(d, side, m + 1);
    for (int j = 0; j < d; ++j) {
        g.n[j] = m;
        g.x0[j] += g.s / 2;
    }
    return g;
}

GridField::GridField(const Grid& g, int comps) : grid(g), components(comps), v(g.nodes() * comps, 0.0) {}

namespace {

template <bool Par>
GridField gradient_impl(const GridField& f, int c) {
    if (c < 0 || c >= f.components) throw std::invalid_argument("component out of range");
    const Grid& g = f.grid;
    GridField out(g, g.d);
    const std::int64_t N = static_cast<std::int64_t>(g.nodes());
    const double* a = f.comp(c);
    const double inv = 1.0 / g.s;
    for (int j = 0; j < g.d; ++j) {
        const std::int64_t st = static_cast<std::int64_t>(g.stride(j)), nj = g.n[j];
        double* o = out.comp(j);
#pragma omp parallel for schedule(static) if (Par)
        for (std::int64_t idx = 0; idx < N; ++idx) {
            std::int64_t ij = (idx / st) % nj;
            double up = ij + 1 < nj ? a[idx + st] : 0.0;
            o[idx] = (up - a[idx]) * inv;
        }
    }
    return out;
}

template <bool Par>
GridField divergence_impl(const GridField& v) {
    const Grid& g = v.grid;
    if (v.components != g.d) throw std::invalid_argument("divergence needs d components");
    GridField out(g, 1);
    const std::int64_t N = static_cast<std::int64_t>(g.nodes());
    const double inv = 1.0 / g.s;
    double* o = out.comp(0);
#pragma omp parallel for schedule(static) if (Par)
    for (std::int64_t idx = 0; idx < N; ++idx) {
        double acc = 0.0;
        for (int j = 0; j < g.d; ++j) {
            const std::int64_t st = static_cast<std::int64_t>(g.stride(j)), nj = g.n[j];
            const double* a = v.comp(j);
            std::int64_t ij = (idx / st) % nj;
            double up = ij + 1 < nj ? a[idx + st] : 0.0;
            acc += (up - a[idx]) * inv;
        }
        o[idx] = acc;
    }
    return out;
}

}  // namespace

GridField forward_gradient(const GridField& f, int c) { return gradient_impl<true>(f, c); }
GridField forward_gradient_serial(const GridField& f, int c) { return gradient_impl<false>(f, c); }
GridField forward_divergence(const GridField& v) { return divergence_impl<true>(v); }
GridField forward_divergence_serial(const GridField& v) { return divergence_impl<false>(v); }

GridField curl_field(const GridField& psi) {
    if (psi.grid.d != 2 || psi.components != 1) throw std::invalid_argument("curl_field needs a scalar d=2 field");
    GridField g = forward_gradient(psi);
    GridField v(psi.grid, 2);
    const std::size_t N = psi.N();
    for (std::size_t i = 0; i < N; ++i) {
        v.comp(0)[i] = g.comp(1)[i];
        v.comp(1)[i] = -g.comp(0)[i];
    }
    return v;
}

GridField magnitude_sq(const GridField& f) {
    GridField out(f.grid, 1);
    const std::size_t N = f.N();
    for (int c = 0; c < f.components; ++c) {
        const double* a = f.comp(c);
        for (std::size_t i = 0; i < N; ++i) out.v[i] += a[i] * a[i];
    }
    return out;
}

double l2_norm_sq(const GridField& f) {
    const double* a = f.v.data();
    return f.grid.cell_volume() * det_sum(f.v.size(), [a](std::size_t i) { return a[i] * a[i]; });
}

double l2_norm_sq_serial(const GridField& f) {
    const double* a = f.v.data();
    return f.grid.cell_volume() * det_sum_serial(f.v.size(), [a](std::size_t i) { return a[i] * a[i]; });
}

double dot(const GridField& a, const GridField& b) {
    if (a.v.size() != b.v.size()) throw std::invalid_argument("field size mismatch");
    const double *x = a.v.data(), *y = b.v.data();
    return a.grid.cell_volume() * det_sum(a.v.size(), [x, y](std::size_t i) { return x[i] * y[i]; });
}

double lp_norm(const GridField& f, double p) {
    GridField m = magnitude_sq(f);
    const double* a = m.v.data();
    double s = det_sum(m.v.size(), [a, p](std::size_t i) { return std::pow(a[i], p / 2); });
    return std::pow(f.grid.cell_volume() * s, 1.0 / p);
}

double max_abs(const GridField& f) {
    double m = 0;
    for (double x : f.v) m = std::max(m, std::abs(x));
    return m;
}

double dirichlet_grad_norm_sq(const GridField& f) {
    const Grid& g = f.grid;
    const std::size_t N = g.nodes();
    const double inv2 = 1.0 / (g.s * g.s);
    double total = 0.0;
    for (int c = 0; c < f.components; ++c) {
        const double* a = f.comp(c);
        total += det_sum(N, [&](std::size_t idx) {
            double acc = 0.0;
            for (int j = 0; j < g.d; ++j) {
                const std::size_t st = g.stride(j), nj = static_cast<std::size_t>(g.n[j]);
                std::size_t ij = (idx / st) % nj;
                double up = ij + 1 < nj ? a[idx + st] : 0.0;
                double df = up - a[idx];
                acc += df * df;
                if (ij == 0) acc += a[idx] * a[idx];  // jump from the zero extension below
            }
            return acc * inv2;
        });
    }
    return total * g.cell_volume();
}

double support_measure(const GridField& f) {
    GridField m = magnitude_sq(f);
    double mx = 0;
    for (double x : m.v) mx = std::max(mx, x);
    if (mx == 0) return 0.0;
    std::size_t cnt = 0;
    for (double x : m.v)
        if (x > kSupportThreshold * mx) ++cnt;
    return static_cast<double>(cnt) * f.grid.cell_volume();
}

CellLayout cell_layout(const Grid& g, double tau) {
    CellLayout L;
    double rr = tau / g.s;
    L.r = static_cast<int>(std::llround(rr));
    if (L.r < 1 || std::abs(rr - L.r) > 1e-9 * rr) throw std::invalid_argument("tau is not a multiple of the grid spacing");
    for (int j = 0; j < g.d; ++j) {
        double q = g.x0[j] / g.s + L.r / 2.0;
        if (std::abs(q - std::round(q)) > 1e-7) throw std::invalid_argument("cells do not align with grid nodes");
        double xc = g.coord(j, 0) / tau;
        L.zlo[j] = static_cast<std::int64_t>(std::floor(xc + 0.5));
        double top = tau * (static_cast<double>(L.zlo[j]) + 0.5);
        L.first[j] = static_cast<int>(std::llround((top - g.x0[j]) / g.s));
        double xl = g.coord(j, g.n[j] - 1) / tau;
        L.ncells[j] = static_cast<std::int64_t>(std::floor(xl + 0.5)) - L.zlo[j] + 1;
    }
    return L;
}

namespace {
std::int64_t node_cell(const CellLayout& L, int j, int i) {
    if (i < L.first[j]) return L.zlo[j];
    return L.zlo[j] + 1 + (i - L.first[j]) / L.r;
}
}  // namespace

std::vector<double> cell_averages(const GridField& f, double tau, CellLayout* out) {
    if (f.components != 1) throw std::invalid_argument("cell averages need a scalar field");
    const Grid& g = f.grid;
    CellLayout L = cell_layout(g, tau);
    std::size_t total = 1;
    for (int j = 0; j < g.d; ++j) total *= static_cast<std::size_t>(L.ncells[j]);
    std::vector<double> acc(total, 0.0);
    const std::size_t N = g.nodes();
    int i[4];
    for (std::size_t idx = 0; idx < N; ++idx) {
        g.unravel(idx, i);
        std::size_t off = 0, st = 1;
        for (int j = 0; j < g.d; ++j) {
            off += static_cast<std::size_t>(node_cell(L, j, i[j]) - L.zlo[j]) * st;
            st *= static_cast<std::size_t>(L.ncells[j]);
        }
        acc[off] += f.v[idx];
    }
    double scale = g.cell_volume() / std::pow(tau, g.d);
    for (double& a : acc) a *= scale;
    if (out) *out = L;
    return acc;
}

double cell_average(const GridField& f, double tau, const Index& z) {
    if (f.components != 1) throw std::invalid_argument("cell averages need a scalar field");
    const Grid& g = f.grid;
    if (static_cast<int>(z.size()) != g.d) throw std::invalid_argument("index dimension mismatch");
    CellLayout L = cell_layout(g, tau);
    std::array<int, 4> lo{}, hi{};
    for (int j = 0; j < g.d; ++j) {
        std::int64_t k = z[j] - L.zlo[j];
        if (k < 0 || k >= L.ncells[j]) return 0.0;
        lo[j] = k == 0 ? 0 : L.first[j] + static_cast<int>(k - 1) * L.r;
        hi[j] = std::min(g.n[j], k == 0 ? L.first[j] : lo[j] + L.r);
    }
    double acc = 0.0;
    const std::size_t N = g.nodes();
    int i[4];
    for (std::size_t idx = 0; idx < N; ++idx) {
        g.unravel(idx, i);
        bool in = true;
        for (int j = 0; j < g.d && in; ++j) in = i[j] >= lo[j] && i[j] < hi[j];
        if (in) acc += f.v[idx];
    }
    return acc * g.cell_volume() / std::pow(tau, g.d);
}

GridField mollify(const GridField& f, double delta) {
    const Grid& g = f.grid;
    if (delta < g.s) throw std::invalid_argument("mollifier radius below grid spacing");
    const int R = static_cast<int>(std::floor(delta / g.s));
    struct Tap {
        std::array<int, 4> k;
        double w;
    };
    std::vector<Tap> taps;
    const int width = 2 * R + 1;
    std::size_t cnt = 1;
    for (int j = 0; j < g.d; ++j) cnt *= width;
    double wsum = 0;
    for (std::size_t c = 0; c < cnt; ++c) {
        Tap t{};
        std::size_t q = c;
        double r2 = 0;
        for (int j = 0; j < g.d; ++j) {
            t.k[j] = static_cast<int>(q % width) - R;
            q /= width;
            double y = t.k[j] * g.s / delta;
            r2 += y * y;
        }
        if (r2 >= 1.0) continue;
        t.w = (1 - r2) * (1 - r2);
        wsum += t.w;
        taps.push_back(t);
    }
    for (auto& t : taps) t.w /= wsum;
    GridField out(g, f.components);
    const std::int64_t N = static_cast<std::int64_t>(g.nodes());
    for (int c = 0; c < f.components; ++c) {
        const double* a = f.comp(c);
        double* o = out.comp(c);
#pragma omp parallel for schedule(static)
        for (std::int64_t idx = 0; idx < N; ++idx) {
            int i[4];
            g.unravel(static_cast<std::size_t>(idx), i);
            double acc = 0;
            for (const auto& t : taps) {
                std::size_t off = 0;
                bool in = true;
                for (int j = 0; j < g.d; ++j) {
                    int ij = i[j] + t.k[j];
                    if (ij < 0 || ij >= g.n[j]) {
                        in = false;
                        break;
                    }
                    off += static_cast<std::size_t>(ij) * g.stride(j);
                }
                if (in) acc += t.w * a[off];
            }
            o[idx] = acc;
        }
    }
    return out;
}

GridField truncate_eps(const GridField& f, double eps_sqrt) {
    GridField m = magnitude_sq(f);
    for (double& x : m.v) x = std::min(std::sqrt(x), std::max(eps_sqrt, 0.0));
    return m;
}

GridField truncate_r(const GridField& f, double r) {
    if (!(r > 0)) throw std::invalid_argument("r must be positive");
    GridField out = f;
    for (double& x : out.v) x = std::clamp(x, -r, r);
    return out;
}

SobolevReport check_sobolev(const GridField& f, double q) {
    const int d = f.grid.d;
    if (f.components != 1) throw std::invalid_argument("Sobolev check takes a scalar field");
    SobolevReport r;
    double grad = std::sqrt(dirichlet_grad_norm_sq(f));
    if (d == 2) {
        if (!(q > 2)) throw std::invalid_argument("d=2 needs q > 2");
        r.lhs = lp_norm(f, q);
        r.base = std::pow(std::sqrt(l2_norm_sq(f)), 2.0 / q) * std::pow(grad, 1.0 - 2.0 / q);
    } else if (d >= 3) {
        double qs = 2.0 / (1.0 - 2.0 / d);
        if (std::abs(q - qs) > 1e-12) throw std::invalid_argument("d>=3 needs the critical exponent");
        r.lhs = lp_norm(f, q);
        r.base = grad;
    } else {
        throw std::invalid_argument("unsupported dimension");
    }
    r.ratio = r.base > 0 ? r.lhs / r.base : 0.0;
    return r;
}

PoincareReport check_poincare(const GridField& f, const NodeBox& qp, const std::vector<std::uint8_t>& q0,
                              const std::vector<std::uint8_t>& q1, double alpha_star) {
    const Grid& g = f.grid;
    const std::size_t N = g.nodes();
    if (q0.size() != N || q1.size() != N) throw std::invalid_argument("mask size mismatch");
    auto inside = [&](const int* i) {
        for (int j = 0; j < g.d; ++j)
            if (i[j] < qp.lo[j] || i[j] > qp.hi[j]) return false;
        return true;
    };
    std::size_t n0 = 0, n1 = 0;
    int i[4];
    for (std::size_t idx = 0; idx < N; ++idx) {
        if (!q0[idx] && !q1[idx]) continue;
        g.unravel(idx, i);
        if (!inside(i)) throw std::invalid_argument("subsets must lie in Q+");
        n0 += q0[idx];
        n1 += q1[idx];
    }
    if (n0 == 0) throw std::invalid_argument("Q0 is empty");
    double ad = std::pow(alpha_star, g.d);
    if (static_cast<double>(n1) / static_cast<double>(n0) > ad * (1 + 1e-12))
        throw std::invalid_argument("volume ratio exceeds alpha_*^d");
    GridField m = magnitude_sq(f);
    const double vol = g.cell_volume();
    double s0 = 0, s1 = 0, sg = 0;
    for (std::size_t idx = 0; idx < N; ++idx) {
        s0 += q0[idx] ? m.v[idx] : 0.0;
        s1 += q1[idx] ? m.v[idx] : 0.0;
        g.unravel(idx, i);
        if (!inside(i)) continue;
        for (int j = 0; j < g.d; ++j) {
            if (i[j] + 1 > qp.hi[j]) continue;
            std::size_t nb = idx + g.stride(j);
            for (int c = 0; c < f.components; ++c) {
                double df = (f.comp(c)[nb] - f.comp(c)[idx]) / g.s;
                sg += df * df;
            }
        }
    }
    double rho2 = 0;
    for (int j = 0; j < g.d; ++j) {
        double e = (qp.hi[j] - qp.lo[j] + 1) * g.s;
        rho2 += e * e;
    }
    PoincareReport r;
    r.lhs = s1 * vol;
    r.mass_term = 2 * ad * s0 * vol;
    r.grad_term = rho2 * sg * vol;
    double excess = std::max(0.0, r.lhs - r.mass_term);
    if (excess == 0)
        r.C_required = 0;
    else
        r.C_required = r.grad_term > 0 ? excess / r.grad_term : std::numeric_limits<double>::infinity();
    r.c_fit = r.C_required / std::max(alpha_star, std::pow(alpha_star, g.d - 1));
    return r;
}

std::vector<std::uint8_t> sample_potential(const SkeletonField& sk, const Grid& g, double tau) {
    if (sk.dim() != g.d) throw std::invalid_argument("skeleton/grid dimension mismatch");
    const std::int64_t N = static_cast<std::int64_t>(g.nodes());
    std::vector<std::uint8_t> V(static_cast<std::size_t>(N));
    const double half = sk.shape().side / 2;
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < N; ++idx) {
        int i[4];
        g.unravel(static_cast<std::size_t>(idx), i);
        std::int64_t z[4];
        bool in = true;
        for (int j = 0; j < g.d; ++j) {
            double xh = g.coord(j, i[j]) / tau;
            z[j] = std::llround(xh);
            if (std::abs(xh - static_cast<double>(z[j])) > half) in = false;
        }
        V[idx] = in ? static_cast<std::uint8_t>(sk.eps(z)) : 0;
    }
    return V;
}

namespace {
nlohmann::json grid_header(const GridField& f) {
    nlohmann::json h;
    h["d"] = f.grid.d;
    h["side"] = f.grid.side(0);
    std::vector<int> n(f.grid.n.begin(), f.grid.n.begin() + f.grid.d);
    std::vector<double> x0(f.grid.x0.begin(), f.grid.x0.begin() + f.grid.d);
    h["n"] = n;
    h["spacing"] = f.grid.s;
    h["origin"] = x0;
    h["components"] = f.components;
    return h;
}
}  // namespace

void write_snapshot(const GridField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << grid_header(f).dump() << '\n';
    os.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(f.v.size() * sizeof(double)));
}

GridField read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(is, line);
    auto h = nlohmann::json::parse(line);
    Grid g;
    g.d = h.at("d");
    g.s = h.at("spacing");
    auto n = h.at("n").get<std::vector<int>>();
    auto x0 = h.at("origin").get<std::vector<double>>();
    if (static_cast<int>(n.size()) != g.d || static_cast<int>(x0.size()) != g.d)
        throw std::runtime_error("snapshot header inconsistent");
    for (int j = 0; j < g.d; ++j) {
        g.n[j] = n[j];
        g.x0[j] = x0[j];
    }
    GridField f(g, h.at("components").get<int>());
    is.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(f.v.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(f.v.size() * sizeof(double)))
        throw std::runtime_error("snapshot truncated");
    return f;
}

void write_csv(const GridField& f, const std::string& path) {
    const Grid& g = f.grid;
    if (g.nodes() > 1000000) throw std::invalid_argument("CSV export is for small grids");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (int j = 0; j < g.d; ++j) os << "x" << j << ',';
    for (int c = 0; c < f.components; ++c) os << "v" << c << (c + 1 < f.components ? "," : "\n");
    os.precision(17);
    int i[4];
    for (std::size_t idx = 0; idx < g.nodes(); ++idx) {
        g.unravel(idx, i);
        for (int j = 0; j < g.d; ++j) os << g.coord(j, i[j]) << ',';
        for (int c = 0; c < f.components; ++c) os << f.comp(c)[idx] << (c + 1 < f.components ? "," : "\n");
    }
}

}  // namespace pelab
