#pragma once

// Experiment configuration (JSON). Keys:
//   id           string, names the output directory and the CSV experiment column
//   kind         matrix_completion | lme_mdp | lora_pi | lora_vi | cond_landscape | toy_golden
//   seeds        [uint, ...], at least one
//   budgets      [uint, ...], strictly increasing (not used by cond_landscape / toy_golden)
//   mdp          {"toy": true} | {"file": path} | {"generator": {...GeneratorSpec fields}}
//   matrix       {...MatrixSpec fields, "noise": {...}} for matrix_completion
//   vary_instance  regenerate the MDP / matrix from each seed (default true)
//   evaluators   [name | {"kind": name, "top_k": bool}, ...]
//   lme          {"beta_scale", "anchor_mode": bernoulli | fixed_k, "anchor_count", "pinv_rtol"}
//   rank, anchors  rank and anchor count handed to the baselines
//   delta, eps, eps_fraction (of V_max), schedule {"kind", "base", "ratio"}, max_epochs
//   policy       zero | random, target policy for lme_mdp
//   grid, v0     cond_landscape resolution; VI starting point for toy_golden

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lora/algorithms.hpp"
#include "lora/generators.hpp"

namespace lora::harness {

enum class ExperimentKind { matrix_completion, lme_mdp, lora_pi, lora_vi, cond_landscape, toy_golden };

std::string_view kind_name(ExperimentKind kind);

struct MdpSource {
    enum class Kind { toy, generator, file };
    Kind kind = Kind::toy;
    mdp::GeneratorSpec generator;
    std::filesystem::path file;
};

struct ExperimentConfig {
    std::string id = "experiment";
    ExperimentKind kind = ExperimentKind::lme_mdp;
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> budgets;
    MdpSource mdp;
    mdp::MatrixSpec matrix;
    mdp::RewardNoise matrix_noise = mdp::RewardNoise::gaussian(0.01);
    bool vary_instance = true;
    std::vector<algo::EvaluatorSpec> evaluators;
    double delta = 0.1;
    std::optional<double> eps;
    std::optional<double> eps_fraction;
    algo::BudgetSchedule schedule;
    int max_epochs = 500;
    std::string policy = "zero";
    int grid = 64;
    std::vector<double> v0{2.86, 2.98};
    nlohmann::json raw;

    bool uses_cells() const noexcept {
        return kind != ExperimentKind::cond_landscape && kind != ExperimentKind::toy_golden;
    }
};

/// Throws ConfigError with the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// "1,2,3" -> {1, 2, 3}; throws ConfigError.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace lora::harness
