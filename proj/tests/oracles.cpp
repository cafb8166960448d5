#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

double at(const Box& b, const std::vector<double>& x, int c, const int* y) {
    std::size_t idx = 0, st = 1;
    for (int j = 0; j < b.d; ++j) {
        if (y[j] < 0 || y[j] >= b.n[j]) return 0.0;
        idx += static_cast<std::size_t>(y[j]) * st;
        st *= b.n[j];
    }
    return x[c * b.nodes() + idx];
}

}  // namespace

double energy(const Box& b, double alpha, double beta, const std::vector<std::uint8_t>& V, int comps,
              const std::vector<double>& x) {
    const double vol = std::pow(b.s, b.d);
    double e = 0;
    // every y with y_j in [-1, n_j - 1]
    int lo[4] = {0, 0, 0, 0}, hi[4] = {0, 0, 0, 0};
    for (int j = 0; j < b.d; ++j) {
        lo[j] = -1;
        hi[j] = b.n[j] - 1;
    }
    int y[4];
    for (y[3] = lo[3]; y[3] <= hi[3]; ++y[3])
        for (y[2] = lo[2]; y[2] <= hi[2]; ++y[2])
            for (y[1] = lo[1]; y[1] <= hi[1]; ++y[1])
                for (y[0] = lo[0]; y[0] <= hi[0]; ++y[0]) {
                    double div = 0;
                    for (int c = 0; c < comps; ++c) {
                        double here = at(b, x, c, y);
                        for (int j = 0; j < b.d; ++j) {
                            int z[4] = {y[0], y[1], y[2], y[3]};
                            ++z[j];
                            double g = (at(b, x, c, z) - here) / b.s;
                            e += g * g;
                            if (j == c) div += g;
                        }
                    }
                    if (comps > 1) e += div * div / alpha;
                }
    e *= vol;
    for (std::size_t i = 0; i < b.nodes(); ++i)
        if (V[i])
            for (int c = 0; c < comps; ++c) e += vol * beta * x[c * b.nodes() + i] * x[c * b.nodes() + i];
    return e;
}

Eigen::MatrixXd dense_matrix(const Box& b, double alpha, double beta, const std::vector<std::uint8_t>& V, int comps) {
    const std::size_t n = b.nodes() * comps;
    const double vol = std::pow(b.s, b.d);
    std::vector<double> ei(n, 0.0);
    Eigen::VectorXd diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        ei[i] = 1;
        diag[i] = energy(b, alpha, beta, V, comps, ei);
        ei[i] = 0;
    }
    Eigen::MatrixXd A(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        A(i, i) = diag[i] / vol;
        for (std::size_t j = i + 1; j < n; ++j) {
            ei[i] = ei[j] = 1;
            double eij = energy(b, alpha, beta, V, comps, ei);
            ei[i] = ei[j] = 0;
            A(i, j) = A(j, i) = 0.5 * (eij - diag[i] - diag[j]) / vol;
        }
    }
    return A;
}

double dense_smallest(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

double dirichlet_1d(int m, double s) {
    double q = std::sin(M_PI / (2.0 * (m + 1)));
    return 4.0 * q * q / (s * s);
}

double bessel_j0(double x) {
    // Σ (-1)^k (x/2)^{2k} / (k!)²
    double term = 1, sum = 1, q = x * x / 4;
    for (int k = 1; k < 200; ++k) {
        term *= -q / (static_cast<double>(k) * k);
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

double j01() {
    double a = 2.0, b = 3.0;
    for (int i = 0; i < 200; ++i) {
        double m = 0.5 * (a + b);
        if (bessel_j0(a) * bessel_j0(m) <= 0)
            b = m;
        else
            a = m;
    }
    return 0.5 * (a + b);
}

double cumulant_two_atom(double p, double a, double u) { return -std::log(p + (1 - p) * std::exp(-u * a)); }

double cumulant_two_atom_prime(double p, double a, double u) {
    double e = (1 - p) * std::exp(-u * a);
    return a * e / (p + e);
}

double binomial_cdf(int n, double q, int k) {
    if (k < 0) return 0;
    if (k >= n) return 1;
    double s = 0;
    for (int i = 0; i <= k; ++i) {
        double lg = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
        s += std::exp(lg + i * std::log(q) + (n - i) * std::log1p(-q));
    }
    return std::min(1.0, s);
}

double log_grid_sup(const std::function<double(double)>& f, double lo, double hi, int points, double* arg) {
    double best = -INFINITY, ab = lo;
    for (int i = 0; i < points; ++i) {
        double h = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
        double v = f(h);
        if (v > best) {
            best = v;
            ab = h;
        }
    }
    if (arg) *arg = ab;
    return best;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs matched samples");
    double mx = 0, my = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::log(x[i]) - mx;
        sxy += a * (std::log(y[i]) - my);
        sxx += a * a;
    }
    return sxy / sxx;
}

std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace oracle
