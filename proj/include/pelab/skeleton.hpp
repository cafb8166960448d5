#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pelab {

using Index = std::vector<std::int64_t>;

struct ObstacleShape {
    double side = 0.5;
    double volume(int d) const;
};

// Binary obstacle field on the integer lattice. Cells z + Q, Q = (-1/2, 1/2]^d.
// Occupancy is stored for every cell meeting the open box (-t/2, t/2)^d; outside
// that range it is regenerated from the seed (rng_backed) or taken as empty.
class SkeletonField {
public:
    SkeletonField() = default;
    SkeletonField(int d, double t, double p, ObstacleShape shape, std::uint64_t seed, bool rng_backed);

    int dim() const { return d_; }
    double box_side() const { return t_; }
    double p() const { return p_; }
    const ObstacleShape& shape() const { return shape_; }
    std::uint64_t seed() const { return seed_; }
    bool rng_backed() const { return rng_backed_; }
    double mu() const { return (1.0 - p_) * shape_.volume(d_); }

    std::int64_t zmin() const { return zmin_; }
    std::int64_t zmax() const { return zmax_; }
    std::int64_t extent() const { return zmax_ - zmin_ + 1; }
    std::size_t cell_count() const { return occ_.size(); }

    int eps(const std::int64_t* z) const;
    int eps(const Index& z) const { return eps(z.data()); }
    double xi(const Index& z) const { return eps(z) * shape_.volume(d_); }

    // 1 iff the original-coordinate point lies in an occupied cube z + W
    int indicator_at(const std::vector<double>& point, bool scaled, double tau) const;

    const std::vector<std::uint8_t>& occupancy() const { return occ_; }
    std::vector<std::uint8_t>& occupancy() { return occ_; }
    std::size_t stored_offset(const std::int64_t* z) const;
    bool stored(const std::int64_t* z) const;

private:
    int d_ = 2;
    double t_ = 0;
    double p_ = 0.5;
    ObstacleShape shape_;
    std::uint64_t seed_ = 0;
    bool rng_backed_ = false;
    std::int64_t zmin_ = 0, zmax_ = -1;
    std::vector<std::uint8_t> occ_;
};

int bernoulli_occupancy(std::uint64_t seed, const std::int64_t* z, int d, double p);

SkeletonField generate_skeleton(int d, double t, double p, ObstacleShape shape, std::uint64_t seed);

// explicit occupancy (row-major over the stored range, dimension 0 fastest); empty outside
SkeletonField make_skeleton(int d, double t, double p, ObstacleShape shape, std::vector<std::uint8_t> occ);

// blocks H1(z + Q) meeting the scaled box whose obstacle volume fraction is <= mu/2
std::vector<Index> low_occupancy_blocks(const SkeletonField& sk, double H1, double tau, double mu);

double scaling_tau(double t, int d);

}  // namespace pelab
