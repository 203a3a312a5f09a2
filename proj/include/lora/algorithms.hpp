#pragma once

// Approximate policy and value iteration driven by a matrix estimator.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lora/evaluators.hpp"
#include "lora/mdp.hpp"

namespace lora::algo {

struct BudgetSchedule {
    enum class Kind { uniform, geometric };
    Kind kind = Kind::uniform;
    // geometric: epoch t gets floor(base * ratio^t) (t = 1, 2, ...), scaled down
    // to fit the total; base = 0 splits the total in proportion to ratio^t.
    double base = 0.0;
    double ratio = 1.1;
};

struct LoraConfig {
    std::uint64_t budget = 0;
    double eps = 0.1;
    double delta = 0.1;
    // Defaults to action 0 everywhere (PI) and the zero vector (VI).
    std::optional<mdp::DeterministicPolicy> initial_policy;
    std::optional<Vector> initial_value;
    EvaluatorSpec evaluator;
    BudgetSchedule schedule;
    int max_epochs = 500;
};

/// ceil((1 / (1 - gamma)) log(4 r_max / ((1 - gamma) eps))), clamped to [1, cap].
int n_epochs(double gamma, double r_max, double eps, int cap = 500);

/// Per-epoch budgets; their sum never exceeds `total`.
std::vector<std::uint64_t> epoch_budgets(std::uint64_t total, int epochs, const BudgetSchedule& schedule);

struct EpochLog {
    int epoch = 0;                   // 1-based
    mdp::DeterministicPolicy policy;  // policy evaluated at this epoch (PI) or greedy policy of V (VI)
    double q_error = 0.0;            // ||Q_hat - Q||_inf against the exact target
    double q_frobenius = 0.0;
    double value_gap = 0.0;          // ||V* - V^policy||_inf
    double condition_number = 0.0;   // of the exact target matrix
    std::uint64_t budget = 0;
    std::uint64_t consumed = 0;
    int rank = 0;
    int anchor_rows = 0;
    int anchor_cols = 0;
    std::vector<std::string> warnings;
};

struct LoraResult {
    mdp::DeterministicPolicy policy;  // returned policy
    Vector value;                     // final V (VI) or V^policy (PI)
    double value_gap = 0.0;           // ||V* - V^policy||_inf
    std::vector<EpochLog> logs;
    std::uint64_t consumed = 0;
};

/// LoRa-PI: evaluate the current policy with truncated rollouts, act greedily on
/// the estimate. Evaluator failures are rethrown with the epoch index.
LoraResult lora_pi(const mdp::TabularMdp& mdp, const LoraConfig& config, const Rng& rng);

/// LoRa-VI: estimate F(V) from one-step lookahead samples, V <- row max.
LoraResult lora_vi(const mdp::TabularMdp& mdp, const LoraConfig& config, const Rng& rng);

struct ConditionTrace {
    std::vector<double> condition_numbers;  // cond(F(V^(t))), t = 0, 1, ...
    Vector value;
    int iterations = 0;
    double max_condition() const;
};

/// Exact VI from `v0` until the sup-norm update is below `tol`.
ConditionTrace vi_condition_trace(const mdp::TabularMdp& mdp, const Vector& v0, double tol = 1e-10,
                                  int max_iterations = 100000);

struct BoundReport {
    double eps = 0.0;  // max over epochs of ||Q_hat - Q||_inf
    int api_checks = 0;
    int api_violations = 0;
    int improvement_checks = 0;
    int improvement_violations = 0;
    std::vector<std::string> violations;
    bool ok() const noexcept { return api_violations == 0 && improvement_violations == 0; }
};

/// Checks ||V* - V^(t+1)|| <= gamma^t ||V* - V^(1)|| + 2 eps / (1 - gamma)^2 and
/// V^pi <= T* V^pi <= V^pi' + 2 eps_t / (1 - gamma) along a LoRa-PI run.
BoundReport check_api_bound(const mdp::TabularMdp& mdp, const LoraResult& run, double slack = 1e-9);

}  // namespace lora::algo
