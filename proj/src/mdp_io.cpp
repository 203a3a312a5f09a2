#include "lora/mdp_io.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "lora/error.hpp"

namespace lora::mdp {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "lora-mdp/1";
}

json to_json(const RewardNoise& noise) {
    const char* kind = "none";
    if (noise.kind == RewardNoise::Kind::gaussian) kind = "gaussian";
    if (noise.kind == RewardNoise::Kind::bounded_uniform) kind = "bounded_uniform";
    return json{{"kind", kind}, {"scale", noise.scale}};
}

RewardNoise noise_from_json(const json& j) {
    const std::string kind = j.value("kind", "none");
    const double scale = j.value("scale", 0.0);
    if (kind == "none") return RewardNoise::none();
    if (kind == "gaussian") return RewardNoise::gaussian(scale);
    if (kind == "bounded_uniform") return RewardNoise::bounded_uniform(scale);
    throw ConfigError("unknown reward noise kind '" + kind + "'");
}

json to_json(const TabularMdp& mdp) {
    const int S = mdp.states(), A = mdp.actions();
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) rewards.push_back(mdp.mean_rewards()(s, a));
    const auto& p = mdp.transitions();
    std::vector<double> transitions(p.data(), p.data() + p.size());
    return json{{"format", kFormat},    {"states", S},
                {"actions", A},         {"gamma", mdp.gamma()},
                {"r_max", mdp.r_max()}, {"noise", to_json(mdp.noise())},
                {"rewards", rewards},   {"transitions", transitions}};
}

TabularMdp mdp_from_json(const json& j) {
    try {
        if (j.value("format", std::string{}) != kFormat)
            throw ConfigError(std::string("mdp json: expected format '") + kFormat + "'");
        const int S = j.at("states").get<int>();
        const int A = j.at("actions").get<int>();
        if (S < 1 || A < 1) throw ConfigError("mdp json: states and actions must be >= 1");
        const auto rewards = j.at("rewards").get<std::vector<double>>();
        const auto transitions = j.at("transitions").get<std::vector<double>>();
        if (rewards.size() != static_cast<std::size_t>(S) * A)
            throw ConfigError("mdp json: rewards must have S*A entries");
        if (transitions.size() != static_cast<std::size_t>(S) * A * S)
            throw ConfigError("mdp json: transitions must have S*A*S entries");
        DenseMatrix r(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) r(s, a) = rewards[static_cast<std::size_t>(s) * A + a];
        TransitionMatrix p = Eigen::Map<const TransitionMatrix>(transitions.data(), static_cast<Eigen::Index>(S) * A, S);
        const RewardNoise noise = j.contains("noise") ? noise_from_json(j.at("noise")) : RewardNoise::none();
        return TabularMdp(std::move(p), std::move(r), noise, j.at("gamma").get<double>(),
                          j.at("r_max").get<double>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mdp json: ") + e.what());
    }
}

void save_mdp(const TabularMdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << to_json(mdp).dump() << '\n';
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("mdp json parse error in " + path.string() + ": " + e.what());
    }
    return mdp_from_json(j);
}

}  // namespace lora::mdp
