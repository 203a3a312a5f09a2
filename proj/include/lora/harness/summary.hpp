#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lora/harness/records.hpp"

namespace lora::harness {

/// Linear-interpolation quantile of the finite values; NaN when none.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// One-sided sign-test p-value P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
/// Ties are excluded by the caller. Returns 1 when there are no untied pairs.
double sign_test_p(int wins, int losses);

struct MetricStats {
    std::size_t count = 0;
    double median = ExperimentRecord::nan;
    double iqr = ExperimentRecord::nan;
};

struct CellSummary {
    std::string experiment;
    std::string evaluator;
    std::uint64_t budget = 0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    MetricStats entrywise;
    MetricStats frobenius;
    MetricStats value_gap;
};

/// Paired comparison of `first` against `second` on the final entrywise error
/// (value suboptimality when entrywise is undefined); a win is a strictly
/// smaller error for `first`.
struct SignTest {
    std::string experiment;
    std::string first;
    std::string second;
    std::uint64_t budget = 0;
    int wins = 0;
    int losses = 0;
    int ties = 0;
    double p_value = 1.0;
};

struct Summary {
    std::vector<CellSummary> cells;
    std::vector<SignTest> tests;
};

/// Groups by (experiment, evaluator, budget) using the last epoch of each run,
/// and sign-tests lme_leveraged against every other evaluator. Throws
/// ConfigError on an empty record set.
Summary summarize(std::span<const ExperimentRecord> records);

nlohmann::json to_json(const Summary& summary);

}  // namespace lora::harness
