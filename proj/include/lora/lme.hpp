#pragma once

// Leveraged matrix estimation: a spectral pass over uniformly sampled entries
// estimates leverage scores, which pick anchor rows and columns; the sampled
// skeleton is then completed with an inverse-leverage-weighted CUR formula.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lora/linalg.hpp"
#include "lora/oracle.hpp"
#include "lora/rng.hpp"

namespace lora::lme {

using linalg::LeverageProfile;

enum class AnchorMode {
    bernoulli,  // row i kept independently with probability min(1, K l_i)
    fixed_k,    // exactly K rows, weighted sampling without replacement
};

struct LmeOptions {
    // Multiplier on the spectral threshold beta.
    double beta_scale = 1.0;
    AnchorMode anchor_mode = AnchorMode::bernoulli;
    // Replaces K = ceil(64 d log(64 d / delta)) when set.
    std::optional<int> anchor_count;
    double pinv_rtol = 1e-10;
};

/// Rollout horizon tau = ceil((1 / (1 - gamma)) log(T / (1 - gamma))).
int horizon_for_budget(std::uint64_t budget, double gamma);

/// K = ceil(64 d log(64 d / delta)) before clamping.
int anchor_formula(int rank, double delta);

struct SamplingPlan {
    std::uint64_t budget = 0;       // T, in transitions
    int tau = 0;
    double eps_trunc = 0.0;         // r_max / T
    std::uint64_t cost = 1;         // transitions per observation
    std::uint64_t phase1_samples = 0;  // N = floor(T / (2 cost))
    double delta = 0.1;
    double gamma = 0.0;
    double r_max = 1.0;
    int rows = 0;
    int cols = 0;
    // Filled once the rank is known (assign_rank).
    int rank = 0;
    int anchors_formula = 0;
    int anchors = 0;                // K after clamping to min(S, A)
    bool anchors_clamped = false;
    std::uint64_t n_square = 0;     // N1, per entry of I x J
    std::uint64_t n_plus = 0;       // N2, per entry of the cross arms
};

/// Builds the Phase-1 part of the plan and, when `rank` is given, the Phase-2
/// counts. Throws InfeasibleBudget (with the minimal feasible T) when Phase 1
/// cannot observe every entry once on average or N2 would be zero.
SamplingPlan build_plan(const EntryOracle& oracle, std::uint64_t budget, double delta, double gamma,
                        double r_max, std::optional<int> rank = std::nullopt,
                        std::optional<int> anchor_override = std::nullopt);

/// Sets rank, K, N1 = floor(T / (4 cost K^2)) and N2 = floor(T / (4 cost (K(S+A) - 2K^2))),
/// capped at N1. Throws InfeasibleBudget when N2 (or N1) would be zero.
void assign_rank(SamplingPlan& plan, int rank, std::optional<int> anchor_override = std::nullopt);

/// Smallest budget for which build_plan succeeds with the given rank.
std::uint64_t minimal_budget(const EntryOracle& oracle, double delta, double gamma, double r_max,
                             std::optional<int> rank, std::optional<int> anchor_override = std::nullopt);

/// beta = sqrt(r^2 S A (S + A) / ((1 - gamma)^3 T) log^4((S + A) T / ((1 - gamma) delta))) + r sqrt(SA) / T.
double spectral_threshold(int rows, int cols, std::uint64_t budget, double gamma, double r_max, double delta);

struct Phase1Result {
    DenseMatrix q_tilde;
    std::vector<std::uint64_t> counts;  // column-major entry order s + S a
    double beta = 0.0;
    int rank = 0;
    bool rank_fallback = false;
    Vector singular_values;
    DenseMatrix left;
    DenseMatrix right;
    Vector left_raw;   // before normalization, floored at d/S
    Vector right_raw;  // floored at d/A
    LeverageProfile profile;
    std::uint64_t consumed = 0;
};

Phase1Result phase1_estimate(const EntryOracle& oracle, const SamplingPlan& plan, const LmeOptions& options,
                             const Rng& rng);

/// Leverage estimates from a truncated SVD: l~_s = max(||U_s||^2, d / S), normalized.
void estimate_leverage(Phase1Result& result);

struct AnchorSet {
    std::vector<int> rows;
    std::vector<int> cols;
    int redraws = 0;
};

AnchorSet sample_anchors(const LeverageProfile& profile, int anchors, AnchorMode mode, Rng& rng);

/// Draws exactly k distinct indices with probability proportional to `weights`
/// (Efraimidis-Spirakis keys). Zero weights are chosen only after positive ones.
std::vector<int> weighted_sample_without_replacement(std::span<const double> weights, int k, Rng& rng);

/// Uniform k-subset of [0, n), sorted.
std::vector<int> uniform_subset(int n, int k, Rng& rng);

struct AnchorPlan {
    std::vector<int> rows;  // I
    std::vector<int> cols;  // J
    Vector row_weights;     // L_ii = 1 / min(1, sqrt(K l_i))
    Vector col_weights;     // R_jj = 1 / min(1, sqrt(K r_j))
    std::uint64_t square_size() const noexcept { return rows.size() * cols.size(); }
    std::uint64_t plus_size(int S, int A) const noexcept {
        return (static_cast<std::uint64_t>(S) - rows.size()) * cols.size() +
               rows.size() * (static_cast<std::uint64_t>(A) - cols.size());
    }
};

AnchorPlan make_anchor_plan(AnchorSet anchors, const LeverageProfile& profile, int anchors_k);

/// Identity weights.
AnchorPlan unweighted_anchor_plan(std::vector<int> rows, std::vector<int> cols);

/// Q(s, a) = Q(s, J) R (L Q(I, J) R)^+ L Q(I, a) using only skeleton entries of
/// `observed`. With `keep_skeleton`, rows I and columns J are copied from `observed`.
DenseMatrix cur_complete(const DenseMatrix& observed, const AnchorPlan& plan, std::optional<int> rank_cap,
                         double rtol = 1e-10, bool keep_skeleton = true);

struct Phase2Result {
    DenseMatrix q_hat;
    DenseMatrix skeleton;  // per-entry means on the skeleton, zero elsewhere
    std::uint64_t n_square = 0;
    std::uint64_t n_plus = 0;
    std::uint64_t consumed = 0;
    int anchor_rank = 0;
    bool anchor_rank_deficient = false;
};

/// Samples the skeleton within `budget` transitions (half to I x J, half to the
/// cross arms) and completes it. Phase-2 draws use streams keyed by entry.
Phase2Result phase2_complete(const EntryOracle& oracle, const SamplingPlan& plan, const AnchorPlan& anchors,
                             std::uint64_t budget, std::optional<int> rank_cap, double rtol, const Rng& rng);

struct LmeReport {
    SamplingPlan plan;
    Phase1Result phase1;
    AnchorPlan anchors;
    std::uint64_t n_square = 0;
    std::uint64_t n_plus = 0;
    std::uint64_t consumed = 0;
    int anchor_redraws = 0;
    int anchor_rank = 0;
    std::vector<std::string> warnings;
};

struct LmeResult {
    DenseMatrix q_hat;
    LmeReport report;
};

LmeResult lme(const EntryOracle& oracle, std::uint64_t budget, double delta, double gamma, double r_max,
              const LmeOptions& options, const Rng& rng);

/// Report as JSON; error metrics are added when `truth` is given.
nlohmann::json to_json(const LmeReport& report, const DenseMatrix* q_hat = nullptr,
                       const DenseMatrix* truth = nullptr);

}  // namespace lora::lme
