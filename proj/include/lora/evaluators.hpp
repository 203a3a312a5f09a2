#pragma once

// Matrix estimators behind a common interface: leveraged LME and the
// baselines it is compared against. All of them spend an epoch budget on an
// EntryOracle and return an S x A estimate.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lora/lme.hpp"

namespace lora::algo {

using linalg::DenseMatrix;
using linalg::Vector;

enum class EvaluatorKind {
    exact,                // returns the ground truth, consumes nothing
    lme_leveraged,
    cur_uniform_anchors,  // uniform anchors, no spectral phase
    cur_oracle_anchors,   // anchors and weights from the true leverage scores
    full_matrix_mc,       // every entry sampled equally
    svd_denoise,          // full_matrix_mc followed by a rank-d truncation
};

std::string_view evaluator_name(EvaluatorKind kind);

/// Throws ConfigError on an unknown name.
EvaluatorKind parse_evaluator(std::string_view name);

struct EvaluatorSpec {
    EvaluatorKind kind = EvaluatorKind::lme_leveraged;
    lme::LmeOptions lme;
    // Rank given to the baselines; LME estimates its own.
    std::optional<int> rank;
    // Anchor count for the CUR baselines; defaults to lme.anchor_count, then
    // to the K formula clamped at min(S, A).
    std::optional<int> anchors;
    // cur_oracle_anchors: take the K largest true scores instead of sampling.
    bool oracle_top_k = false;
};

struct Evaluation {
    DenseMatrix q_hat;
    std::uint64_t consumed = 0;
    int rank = 0;
    int anchor_rows = 0;
    int anchor_cols = 0;
    std::optional<lme::LmeReport> report;
    std::vector<std::string> warnings;
};

/// Runs the configured estimator. `truth` is required by `exact` and
/// `cur_oracle_anchors` (and supplies the rank when spec.rank is unset).
/// Throws InfeasibleBudget when the budget cannot fund one observation per
/// required entry.
Evaluation evaluate(const lme::EntryOracle& oracle, const EvaluatorSpec& spec, std::uint64_t budget,
                    double delta, double gamma, double r_max, const DenseMatrix* truth, const Rng& rng);

}  // namespace lora::algo
