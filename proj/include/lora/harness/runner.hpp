#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "lora/harness/config.hpp"
#include "lora/harness/records.hpp"

namespace lora::harness {

/// Worker count from LORA_THREADS, else the hardware concurrency (at least 1).
int thread_count();

struct RunOptions {
    std::filesystem::path out_dir;
    std::optional<std::vector<std::uint64_t>> seeds;  // overrides config seeds
    int threads = 0;                                  // 0: thread_count()
};

struct RunOutcome {
    std::filesystem::path records;
    std::filesystem::path summary;
    std::size_t cells = 0;
    std::size_t skipped = 0;  // already present in the CSV
    std::size_t infeasible = 0;
    std::size_t failed = 0;
};

/// The MDP a seed runs on (regenerated per seed when vary_instance is set).
mdp::TabularMdp load_instance(const ExperimentConfig& config, std::uint64_t seed);

/// Rows for one (seed, budget) cell. Infeasible budgets and evaluator errors
/// become rows with status "infeasible" / "failed".
std::vector<ExperimentRecord> run_cell(const ExperimentConfig& config, std::uint64_t seed, std::uint64_t budget);

/// Runs every cell, appending to <out>/records.csv in cell order and skipping
/// cells already present; writes <out>/config.json and <out>/summary.json.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options);

struct GoldenToy {
    std::array<double, 4> policy_conditions{};
    double v_max = 0.0;
    double vi_max_condition = 0.0;
    int vi_iterations = 0;
};

GoldenToy golden_toy(std::span<const double> v0);
nlohmann::json to_json(const GoldenToy& golden);

/// cond(F(V)) on a grid x grid lattice over [-V_max, V_max]^2 for a 2-state
/// MDP; rows are (v1, v2, condition number), v2 fastest.
std::vector<std::array<double, 3>> cond_landscape(const mdp::TabularMdp& mdp, int grid);

}  // namespace lora::harness
