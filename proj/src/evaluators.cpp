#include "lora/evaluators.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "lora/error.hpp"

namespace lora::algo {

namespace {

constexpr std::array<std::pair<EvaluatorKind, std::string_view>, 6> kNames{{
    {EvaluatorKind::exact, "exact"},
    {EvaluatorKind::lme_leveraged, "lme_leveraged"},
    {EvaluatorKind::cur_uniform_anchors, "cur_uniform_anchors"},
    {EvaluatorKind::cur_oracle_anchors, "cur_oracle_anchors"},
    {EvaluatorKind::full_matrix_mc, "full_matrix_mc"},
    {EvaluatorKind::svd_denoise, "svd_denoise"},
}};

constexpr std::uint64_t kBaselineAnchors = 5;

lme::SamplingPlan rollout_plan(const lme::EntryOracle& oracle, std::uint64_t budget, double delta, double gamma,
                               double r_max) {
    lme::SamplingPlan plan;
    plan.budget = budget;
    plan.delta = delta;
    plan.gamma = gamma;
    plan.r_max = r_max;
    plan.rows = oracle.rows();
    plan.cols = oracle.cols();
    plan.tau = lme::horizon_for_budget(budget, gamma);
    plan.eps_trunc = r_max / static_cast<double>(budget);
    plan.cost = oracle.cost_per_sample(plan.tau);
    return plan;
}

int resolve_rank(const EvaluatorSpec& spec, const DenseMatrix* truth) {
    if (spec.rank) return *spec.rank;
    if (truth) return std::max(1, linalg::numeric_rank(linalg::svd(*truth)));
    throw ConfigError(std::string(evaluator_name(spec.kind)) + ": rank must be given without ground truth");
}

int resolve_anchors(const EvaluatorSpec& spec, int rank, double delta, int rows, int cols) {
    const int k = spec.anchors.value_or(spec.lme.anchor_count.value_or(lme::anchor_formula(rank, delta)));
    if (k < 1) throw ConfigError("evaluator: anchor count must be >= 1");
    return std::min({k, rows, cols});
}

// Smallest budget at which `per_entry(T)` reaches one.
template <class F>
std::uint64_t smallest_feasible(F per_entry) {
    std::uint64_t hi = 1;
    while (per_entry(hi) == 0) hi *= 2;
    std::uint64_t lo = hi / 2;
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (per_entry(mid) > 0 ? hi : lo) = mid;
    }
    return hi;
}

DenseMatrix sample_all_entries(const lme::EntryOracle& oracle, std::uint64_t budget, double gamma,
                               const Rng& rng, std::uint64_t& consumed) {
    const int S = oracle.rows(), A = oracle.cols();
    const std::uint64_t entries = static_cast<std::uint64_t>(S) * A;
    auto per_entry = [&](std::uint64_t t) {
        return t / (oracle.cost_per_sample(lme::horizon_for_budget(t, gamma)) * entries);
    };
    const std::uint64_t n = per_entry(budget);
    if (n == 0)
        throw InfeasibleBudget("full-matrix sampling: budget below one observation per entry", budget,
                               smallest_feasible(per_entry));
    const int tau = lme::horizon_for_budget(budget, gamma);
    DenseMatrix out(S, A);
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            const std::uint64_t e = static_cast<std::uint64_t>(s) + static_cast<std::uint64_t>(S) * a;
            Rng entry_rng = rng.child({e});
            out(s, a) = oracle.sample_sum(s, a, n, tau, entry_rng) / static_cast<double>(n);
        }
    }
    consumed = n * entries * oracle.cost_per_sample(tau);
    return out;
}

std::vector<int> top_k(const Vector& scores, int k) {
    std::vector<int> idx(static_cast<std::size_t>(scores.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores(a) > scores(b); });
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Evaluation cur_baseline(const lme::EntryOracle& oracle, const EvaluatorSpec& spec, std::uint64_t budget,
                        double delta, double gamma, double r_max, const DenseMatrix* truth, const Rng& rng) {
    const int S = oracle.rows(), A = oracle.cols();
    Evaluation out;
    out.rank = resolve_rank(spec, truth);
    const int k = resolve_anchors(spec, out.rank, delta, S, A);
    Rng anchor_rng = rng.child({kBaselineAnchors});

    lme::AnchorPlan anchors;
    if (spec.kind == EvaluatorKind::cur_uniform_anchors) {
        anchors = lme::unweighted_anchor_plan(lme::uniform_subset(S, k, anchor_rng),
                                              lme::uniform_subset(A, k, anchor_rng));
    } else {
        if (!truth) throw ConfigError("cur_oracle_anchors: requires the ground-truth matrix");
        const auto profile = linalg::leverage_scores_exact(*truth, out.rank);
        if (spec.oracle_top_k) {
            anchors = lme::make_anchor_plan({top_k(profile.left, k), top_k(profile.right, k), 0}, profile, k);
        } else {
            anchors = lme::make_anchor_plan(lme::sample_anchors(profile, k, spec.lme.anchor_mode, anchor_rng),
                                           profile, k);
        }
    }
    const auto plan = rollout_plan(oracle, budget, delta, gamma, r_max);
    auto p2 = lme::phase2_complete(oracle, plan, anchors, budget, out.rank, spec.lme.pinv_rtol, rng);
    out.q_hat = std::move(p2.q_hat);
    out.consumed = p2.consumed;
    out.anchor_rows = static_cast<int>(anchors.rows.size());
    out.anchor_cols = static_cast<int>(anchors.cols.size());
    if (p2.anchor_rank_deficient)
        out.warnings.push_back("anchor_rank_deficient: anchor submatrix rank " + std::to_string(p2.anchor_rank));
    return out;
}

}  // namespace

std::string_view evaluator_name(EvaluatorKind kind) {
    for (const auto& [k, name] : kNames)
        if (k == kind) return name;
    return "unknown";
}

EvaluatorKind parse_evaluator(std::string_view name) {
    for (const auto& [k, n] : kNames)
        if (n == name) return k;
    throw ConfigError("unknown evaluator '" + std::string(name) + "'");
}

Evaluation evaluate(const lme::EntryOracle& oracle, const EvaluatorSpec& spec, std::uint64_t budget,
                    double delta, double gamma, double r_max, const DenseMatrix* truth, const Rng& rng) {
    switch (spec.kind) {
        case EvaluatorKind::exact: {
            if (!truth) throw ConfigError("exact evaluator: requires the ground-truth matrix");
            Evaluation out;
            out.q_hat = *truth;
            out.rank = linalg::numeric_rank(linalg::svd(*truth));
            return out;
        }
        case EvaluatorKind::lme_leveraged: {
            auto result = lme::lme(oracle, budget, delta, gamma, r_max, spec.lme, rng);
            Evaluation out;
            out.q_hat = std::move(result.q_hat);
            out.consumed = result.report.consumed;
            out.rank = result.report.phase1.rank;
            out.anchor_rows = static_cast<int>(result.report.anchors.rows.size());
            out.anchor_cols = static_cast<int>(result.report.anchors.cols.size());
            out.warnings = result.report.warnings;
            out.report = std::move(result.report);
            return out;
        }
        case EvaluatorKind::cur_uniform_anchors:
        case EvaluatorKind::cur_oracle_anchors:
            return cur_baseline(oracle, spec, budget, delta, gamma, r_max, truth, rng);
        case EvaluatorKind::full_matrix_mc:
        case EvaluatorKind::svd_denoise: {
            Evaluation out;
            out.q_hat = sample_all_entries(oracle, budget, gamma, rng, out.consumed);
            out.anchor_rows = oracle.rows();
            out.anchor_cols = oracle.cols();
            if (spec.kind == EvaluatorKind::svd_denoise) {
                out.rank = resolve_rank(spec, truth);
                out.q_hat = linalg::reconstruct(linalg::svd(out.q_hat), out.rank);
            } else {
                out.rank = std::min(oracle.rows(), oracle.cols());
            }
            return out;
        }
    }
    throw ConfigError("evaluate: unhandled evaluator kind");
}

}  // namespace lora::algo
