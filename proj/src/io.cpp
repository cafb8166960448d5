#include "pelab/io.hpp"

#include <fstream>
#include <stdexcept>

#include "pelab/blocks.hpp"

namespace pelab {

nlohmann::json skeleton_to_json(const SkeletonField& sk) {
    nlohmann::json j;
    j["d"] = sk.dim();
    j["t"] = sk.box_side();
    j["p"] = sk.p();
    j["w"] = sk.shape().side;
    j["seed"] = sk.seed();
    j["rng_backed"] = sk.rng_backed();
    j["occupancy_run_length_encoding"] = rle_encode(sk.occupancy());
    return j;
}

SkeletonField skeleton_from_json(const nlohmann::json& j) {
    try {
        int d = j.at("d");
        double t = j.at("t"), p = j.at("p"), w = j.at("w");
        std::uint64_t seed = j.at("seed");
        bool rng = j.value("rng_backed", true);
        SkeletonField sk(d, t, p, ObstacleShape{w}, seed, rng);
        auto runs = j.at("occupancy_run_length_encoding").get<std::vector<std::uint32_t>>();
        sk.occupancy() = rle_decode(runs, sk.occupancy().size());
        return sk;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed skeleton descriptor: ") + e.what());
    }
}

void save_skeleton(const SkeletonField& sk, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << skeleton_to_json(sk).dump() << '\n';
}

SkeletonField load_skeleton(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed skeleton file: ") + e.what());
    }
    return skeleton_from_json(j);
}

}  // namespace pelab
