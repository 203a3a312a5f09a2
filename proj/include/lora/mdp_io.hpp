#pragma once

// JSON layout ("format": "lora-mdp/1"):
//   {
//     "format": "lora-mdp/1",
//     "states": S, "actions": A, "gamma": g, "r_max": r,
//     "noise": {"kind": "none" | "gaussian" | "bounded_uniform", "scale": x},
//     "rewards": [S*A values, index s*A + a],
//     "transitions": [S*A*S values, index (s*A + a)*S + s']
//   }

#include <filesystem>
#include <json.hpp>

#include "lora/mdp.hpp"

namespace lora::mdp {

nlohmann::json to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RewardNoise& noise);
RewardNoise noise_from_json(const nlohmann::json& j);

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp load_mdp(const std::filesystem::path& path);

}  // namespace lora::mdp
