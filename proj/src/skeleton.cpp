#include "pelab/skeleton.hpp"

#include <cmath>

#include "pelab/rng.hpp"

namespace pelab {

double ObstacleShape::volume(int d) const { return std::pow(side, d); }

double scaling_tau(double t, int d) {
    if (!(t > 1.0)) throw std::invalid_argument("t must exceed 1");
    return std::pow(std::log(t), -1.0 / d);
}

int bernoulli_occupancy(std::uint64_t seed, const std::int64_t* z, int d, double p) {
    double u = to_unit(cell_hash(seed, std::span<const std::int64_t>(z, d)));
    return u >= p ? 1 : 0;
}

SkeletonField::SkeletonField(int d, double t, double p, ObstacleShape shape, std::uint64_t seed,
                             bool rng_backed)
    : d_(d), t_(t), p_(p), shape_(shape), seed_(seed), rng_backed_(rng_backed) {
    if (d < 1 || d > 4) throw std::invalid_argument("unsupported dimension");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
    if (!(shape.side > 0.0 && shape.side < 1.0)) throw std::invalid_argument("obstacle must fit strictly inside the unit cell");
    if (!(t >= 1.0)) throw std::invalid_argument("box too small to contain a cell");
    zmin_ = static_cast<std::int64_t>(std::floor(-t / 2 - 0.5)) + 1;
    zmax_ = static_cast<std::int64_t>(std::ceil(t / 2 + 0.5)) - 1;
    std::size_t n = 1;
    for (int j = 0; j < d; ++j) n *= static_cast<std::size_t>(extent());
    occ_.assign(n, 0);
}

bool SkeletonField::stored(const std::int64_t* z) const {
    for (int j = 0; j < d_; ++j)
        if (z[j] < zmin_ || z[j] > zmax_) return false;
    return true;
}

std::size_t SkeletonField::stored_offset(const std::int64_t* z) const {
    std::size_t off = 0, stride = 1;
    for (int j = 0; j < d_; ++j) {
        off += static_cast<std::size_t>(z[j] - zmin_) * stride;
        stride *= static_cast<std::size_t>(extent());
    }
    return off;
}

int SkeletonField::eps(const std::int64_t* z) const {
    if (stored(z)) return occ_[stored_offset(z)];
    return rng_backed_ ? bernoulli_occupancy(seed_, z, d_, p_) : 0;
}

int SkeletonField::indicator_at(const std::vector<double>& point, bool scaled, double tau) const {
    if (static_cast<int>(point.size()) != d_) throw std::invalid_argument("point dimension mismatch");
    std::int64_t z[4];
    double half = shape_.side / 2;
    bool inside = true;
    for (int j = 0; j < d_; ++j) {
        double xh = scaled ? point[j] / tau : point[j];
        if (!(std::abs(xh) <= t_ / 2)) throw std::out_of_range("point outside the box");
        z[j] = static_cast<std::int64_t>(std::llround(xh));
        if (std::abs(xh - static_cast<double>(z[j])) > half) inside = false;
    }
    return inside ? eps(z) : 0;
}

SkeletonField generate_skeleton(int d, double t, double p, ObstacleShape shape, std::uint64_t seed) {
    if (!(t >= 4.0)) throw std::invalid_argument("t must be at least 4");
    if (d != 2 && d != 3) throw std::invalid_argument("generation supports d in {2,3}");
    SkeletonField sk(d, t, p, shape, seed, true);
    auto& occ = sk.occupancy();
    const std::int64_t e = sk.extent(), lo = sk.zmin();
    const std::int64_t n = static_cast<std::int64_t>(occ.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t z[3], r = i;
        for (int j = 0; j < d; ++j) {
            z[j] = lo + r % e;
            r /= e;
        }
        occ[i] = static_cast<std::uint8_t>(bernoulli_occupancy(seed, z, d, p));
    }
    return sk;
}

SkeletonField make_skeleton(int d, double t, double p, ObstacleShape shape, std::vector<std::uint8_t> occ) {
    SkeletonField sk(d, t, p, shape, 0, false);
    if (occ.size() != sk.occupancy().size()) throw std::invalid_argument("occupancy size mismatch");
    for (auto b : occ)
        if (b > 1) throw std::invalid_argument("occupancy must be 0/1");
    sk.occupancy() = std::move(occ);
    return sk;
}

std::vector<Index> low_occupancy_blocks(const SkeletonField& sk, double H1, double tau, double mu) {
    const int d = sk.dim();
    double Tr = H1 / tau;
    std::int64_t T = std::llround(Tr);
    if (std::abs(Tr - static_cast<double>(T)) > 1e-9 * Tr || T < 1 || T % 2 == 0)
        throw std::invalid_argument("H1 must be an odd multiple of tau");
    const double t = sk.box_side();
    std::int64_t bmin = static_cast<std::int64_t>(std::floor(-t / (2.0 * T) - 0.5)) + 1;
    std::int64_t bmax = static_cast<std::int64_t>(std::ceil(t / (2.0 * T) + 0.5)) - 1;
    const std::int64_t nb = bmax - bmin + 1, half = (T - 1) / 2;
    std::int64_t total = 1, cells = 1;
    for (int j = 0; j < d; ++j) {
        total *= nb;
        cells *= T;
    }
    const double wv = sk.shape().volume(d);
    std::vector<std::uint8_t> flag(static_cast<std::size_t>(total), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < total; ++b) {
        std::int64_t zeta[4], r = b;
        for (int j = 0; j < d; ++j) {
            zeta[j] = bmin + r % nb;
            r /= nb;
        }
        std::int64_t count = 0;
        for (std::int64_t c = 0; c < cells; ++c) {
            std::int64_t z[4], q = c;
            for (int j = 0; j < d; ++j) {
                z[j] = T * zeta[j] - half + q % T;
                q /= T;
            }
            count += sk.eps(z);
        }
        double frac = static_cast<double>(count) * wv / static_cast<double>(cells);
        flag[b] = frac <= mu / 2 ? 1 : 0;
    }
    std::vector<Index> out;
    for (std::int64_t b = 0; b < total; ++b) {
        if (!flag[b]) continue;
        Index zeta(d);
        std::int64_t r = b;
        for (int j = 0; j < d; ++j) {
            zeta[j] = bmin + r % nb;
            r /= nb;
        }
        out.push_back(zeta);
    }
    return out;
}

}  // namespace pelab
