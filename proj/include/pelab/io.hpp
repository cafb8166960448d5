#pragma once
#include <string>

#include "json.hpp"
#include "pelab/skeleton.hpp"

namespace pelab {

nlohmann::json skeleton_to_json(const SkeletonField& sk);
SkeletonField skeleton_from_json(const nlohmann::json& j);
void save_skeleton(const SkeletonField& sk, const std::string& path);
SkeletonField load_skeleton(const std::string& path);

}  // namespace pelab
