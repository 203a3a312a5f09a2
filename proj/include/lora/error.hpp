#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lora {

/// Invalid input or violated precondition.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (non-convergence, singular system).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The sampling budget cannot fund the requested estimator.
class InfeasibleBudget : public std::runtime_error {
public:
    InfeasibleBudget(const std::string& what, std::uint64_t budget, std::uint64_t minimal_budget)
        : std::runtime_error(what + " (budget " + std::to_string(budget) +
                             ", minimal feasible budget " + std::to_string(minimal_budget) + ")"),
          budget_(budget),
          minimal_budget_(minimal_budget) {}

    std::uint64_t budget() const noexcept { return budget_; }
    std::uint64_t minimal_budget() const noexcept { return minimal_budget_; }

private:
    std::uint64_t budget_;
    std::uint64_t minimal_budget_;
};

}  // namespace lora
