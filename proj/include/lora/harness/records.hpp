#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace lora::harness {

inline constexpr const char* kRecordsVersion = "# lora-records/1";

/// One CSV row. Undefined metrics are NaN and serialize as empty fields.
struct ExperimentRecord {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    std::string experiment;
    std::string evaluator;
    std::uint64_t seed = 0;
    std::uint64_t budget = 0;
    int epoch = 0;
    std::string status = "ok";  // ok | infeasible | failed
    double entrywise_error = nan;
    double frobenius_error = nan;
    double value_suboptimality = nan;
    double condition_number = nan;
    std::uint64_t consumed = 0;
    int d_hat = 0;
    int anchor_rows = 0;
    int anchor_cols = 0;
    std::string warnings;  // ';'-separated, commas stripped
};

/// Version comment line plus the column header, each newline-terminated.
std::string csv_preamble();

std::string to_csv_row(const ExperimentRecord& r);

/// Throws ConfigError on a malformed row.
ExperimentRecord parse_csv_row(const std::string& line);

/// Reads every complete row; a trailing line without newline is ignored.
std::vector<ExperimentRecord> read_records(const std::filesystem::path& path);

/// Fixed-format number used in every artifact ("%.10g", empty for NaN).
std::string format_number(double v);

/// Joins warnings with ';' and removes characters that would break the CSV.
std::string join_warnings(const std::vector<std::string>& warnings);

}  // namespace lora::harness
