#include "lora/lme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lora/error.hpp"

namespace lora::lme {

namespace {

// Stream tags.
constexpr std::uint64_t kPhase1Counts = 1;
constexpr std::uint64_t kPhase1Entry = 2;
constexpr std::uint64_t kPhase2Entry = 3;
constexpr std::uint64_t kAnchors = 4;

std::uint64_t phase1_samples(std::uint64_t budget, std::uint64_t cost) { return budget / (2 * cost); }

void validate_common(std::uint64_t budget, double delta, double gamma, double r_max) {
    if (budget == 0) throw ConfigError("lme: budget must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("lme: delta must lie in (0, 1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("lme: gamma must lie in [0, 1)");
    if (!(r_max > 0.0)) throw ConfigError("lme: r_max must be positive");
}

}  // namespace

int horizon_for_budget(std::uint64_t budget, double gamma) {
    const double t = std::ceil(std::log(static_cast<double>(budget) / (1.0 - gamma)) / (1.0 - gamma));
    return t > 0.0 ? static_cast<int>(t) : 0;
}

int anchor_formula(int rank, double delta) {
    const double d = rank;
    return static_cast<int>(std::ceil(64.0 * d * std::log(64.0 * d / delta)));
}

double spectral_threshold(int rows, int cols, std::uint64_t budget, double gamma, double r_max, double delta) {
    const double S = rows, A = cols, T = static_cast<double>(budget);
    const double g = 1.0 - gamma;
    const double L = std::log((S + A) * T / (g * delta));
    const double main = std::sqrt(r_max * r_max * S * A * (S + A) / (g * g * g * T) * L * L * L * L);
    return main + r_max * std::sqrt(S * A) / T;
}

void assign_rank(SamplingPlan& plan, int rank, std::optional<int> anchor_override) {
    if (rank < 1) throw ConfigError("lme: rank must be >= 1");
    plan.rank = rank;
    plan.anchors_formula = anchor_override.value_or(anchor_formula(rank, plan.delta));
    if (plan.anchors_formula < 1) throw ConfigError("lme: anchor count must be >= 1");
    const int cap = std::min(plan.rows, plan.cols);
    plan.anchors_clamped = plan.anchors_formula > cap;
    plan.anchors = std::min(plan.anchors_formula, cap);

    const std::uint64_t K = static_cast<std::uint64_t>(plan.anchors);
    const std::uint64_t square = K * K;
    const std::uint64_t arms_signed = K * static_cast<std::uint64_t>(plan.rows + plan.cols);
    const std::uint64_t plus = arms_signed > 2 * square ? arms_signed - 2 * square : 0;
    plan.n_square = plan.budget / (4 * plan.cost * square);
    plan.n_plus = plus > 0 ? std::min(plan.n_square, plan.budget / (4 * plan.cost * plus)) : plan.n_square;
    if (plan.n_square == 0 || plan.n_plus == 0) {
        const std::uint64_t needed = 4 * plan.cost * std::max(square, plus);
        throw InfeasibleBudget("lme: budget cannot fund one rollout per skeleton entry", plan.budget, needed);
    }
}

SamplingPlan build_plan(const EntryOracle& oracle, std::uint64_t budget, double delta, double gamma,
                        double r_max, std::optional<int> rank, std::optional<int> anchor_override) {
    validate_common(budget, delta, gamma, r_max);
    SamplingPlan plan;
    plan.budget = budget;
    plan.delta = delta;
    plan.gamma = gamma;
    plan.r_max = r_max;
    plan.rows = oracle.rows();
    plan.cols = oracle.cols();
    plan.tau = horizon_for_budget(budget, gamma);
    plan.eps_trunc = r_max / static_cast<double>(budget);
    plan.cost = oracle.cost_per_sample(plan.tau);
    plan.phase1_samples = phase1_samples(budget, plan.cost);
    const std::uint64_t entries = static_cast<std::uint64_t>(plan.rows) * plan.cols;
    if (plan.phase1_samples < entries)
        throw InfeasibleBudget("lme: phase-1 budget below one rollout per entry", budget,
                               minimal_budget(oracle, delta, gamma, r_max, std::nullopt));
    if (rank) {
        try {
            assign_rank(plan, *rank, anchor_override);
        } catch (const InfeasibleBudget&) {
            throw InfeasibleBudget("lme: phase-2 budget below one rollout per skeleton entry", budget,
                                   minimal_budget(oracle, delta, gamma, r_max, rank, anchor_override));
        }
    }
    return plan;
}

std::uint64_t minimal_budget(const EntryOracle& oracle, double delta, double gamma, double r_max,
                             std::optional<int> rank, std::optional<int> anchor_override) {
    auto feasible = [&](std::uint64_t t) {
        SamplingPlan plan;
        plan.budget = t;
        plan.delta = delta;
        plan.gamma = gamma;
        plan.r_max = r_max;
        plan.rows = oracle.rows();
        plan.cols = oracle.cols();
        plan.tau = horizon_for_budget(t, gamma);
        plan.cost = oracle.cost_per_sample(plan.tau);
        if (phase1_samples(t, plan.cost) < static_cast<std::uint64_t>(plan.rows) * plan.cols) return false;
        if (!rank) return true;
        try {
            assign_rank(plan, *rank, anchor_override);
        } catch (const InfeasibleBudget&) {
            return false;
        }
        return true;
    };
    std::uint64_t hi = 2;
    while (!feasible(hi)) {
        if (hi > std::numeric_limits<std::uint64_t>::max() / 4) return hi;
        hi *= 2;
    }
    std::uint64_t lo = hi / 2;  // infeasible (or 1)
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (feasible(mid) ? hi : lo) = mid;
    }
    return hi;
}

void estimate_leverage(Phase1Result& r) {
    const auto S = static_cast<double>(r.left.rows());
    const auto A = static_cast<double>(r.right.rows());
    const double d = r.rank;
    r.left_raw = linalg::row_squared_norms(r.left).cwiseMax(d / S);
    r.right_raw = linalg::row_squared_norms(r.right).cwiseMax(d / A);
    r.profile.left = r.left_raw / r.left_raw.sum();
    r.profile.right = r.right_raw / r.right_raw.sum();
    r.profile.rank = r.rank;
    r.profile.source = linalg::ScoreSource::estimated;
}

Phase1Result phase1_estimate(const EntryOracle& oracle, const SamplingPlan& plan, const LmeOptions& options,
                             const Rng& rng) {
    const int S = oracle.rows(), A = oracle.cols();
    const std::uint64_t entries = static_cast<std::uint64_t>(S) * A;
    const std::uint64_t n = plan.phase1_samples;
    if (n == 0) throw ConfigError("phase1: plan has no phase-1 samples");

    Phase1Result out;
    // Uniform start pairs: multinomial counts via conditional binomials.
    out.counts.assign(entries, 0);
    {
        Rng counts_rng = rng.child({kPhase1Counts});
        std::uint64_t remaining = n;
        for (std::uint64_t e = 0; e + 1 < entries && remaining > 0; ++e) {
            const double p = 1.0 / static_cast<double>(entries - e);
            std::binomial_distribution<std::uint64_t> bin(remaining, p);
            out.counts[e] = bin(counts_rng);
            remaining -= out.counts[e];
        }
        out.counts[entries - 1] += remaining;
    }

    out.q_tilde = DenseMatrix::Zero(S, A);
    const double scale = static_cast<double>(entries) / static_cast<double>(n);
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            const std::uint64_t e = static_cast<std::uint64_t>(s) + static_cast<std::uint64_t>(S) * a;
            if (out.counts[e] == 0) continue;
            Rng entry_rng = rng.child({kPhase1Entry, e});
            out.q_tilde(s, a) = scale * oracle.sample_sum(s, a, out.counts[e], plan.tau, entry_rng);
        }
    }
    out.consumed = n * plan.cost;

    out.beta = options.beta_scale *
               spectral_threshold(S, A, plan.budget, plan.gamma, plan.r_max, plan.delta);
    const linalg::SvdResult f = linalg::svd(out.q_tilde);
    out.singular_values = f.singular_values;
    linalg::Truncation t = linalg::threshold_truncate(f, out.beta);
    if (t.empty()) {
        out.rank_fallback = true;
        t.rank = 1;
        t.left = f.left.leftCols(1);
        t.right = f.right.leftCols(1);
    }
    out.rank = t.rank;
    out.left = std::move(t.left);
    out.right = std::move(t.right);
    estimate_leverage(out);
    return out;
}

std::vector<int> weighted_sample_without_replacement(std::span<const double> weights, int k, Rng& rng) {
    const int n = static_cast<int>(weights.size());
    if (k < 0 || k > n) throw ConfigError("weighted sampling: k out of range");
    // key = log(u) / w; larger is better. Zero weights get -inf and are ordered by a uniform tiebreak.
    std::vector<std::pair<double, double>> keys(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        if (w < 0.0 || !std::isfinite(w)) throw ConfigError("weighted sampling: weights must be finite and >= 0");
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        const double key = w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity();
        keys[static_cast<std::size_t>(i)] = {key, rng.uniform()};
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        return keys[static_cast<std::size_t>(a)] > keys[static_cast<std::size_t>(b)];
    });
    std::vector<int> out(idx.begin(), idx.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> uniform_subset(int n, int k, Rng& rng) {
    if (k < 0 || k > n) throw ConfigError("uniform subset: k out of range");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    std::vector<int> out(idx.begin(), idx.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::vector<int> bernoulli_side(const Vector& scores, int k, Rng& rng) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const double p = std::min(1.0, k * scores(i));
        if (p >= 1.0 || rng.uniform() < p) out.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace

AnchorSet sample_anchors(const LeverageProfile& profile, int anchors, AnchorMode mode, Rng& rng) {
    if (anchors < 1) throw ConfigError("sample_anchors: K must be >= 1");
    AnchorSet out;
    if (mode == AnchorMode::fixed_k) {
        const int kr = std::min<int>(anchors, static_cast<int>(profile.left.size()));
        const int kc = std::min<int>(anchors, static_cast<int>(profile.right.size()));
        out.rows = weighted_sample_without_replacement({profile.left.data(), static_cast<std::size_t>(profile.left.size())}, kr, rng);
        out.cols = weighted_sample_without_replacement({profile.right.data(), static_cast<std::size_t>(profile.right.size())}, kc, rng);
        return out;
    }
    constexpr int kMaxRedraws = 16;
    out.rows = bernoulli_side(profile.left, anchors, rng);
    while (out.rows.empty() && out.redraws < kMaxRedraws) {
        ++out.redraws;
        out.rows = bernoulli_side(profile.left, anchors, rng);
    }
    int col_redraws = 0;
    out.cols = bernoulli_side(profile.right, anchors, rng);
    while (out.cols.empty() && col_redraws < kMaxRedraws) {
        ++col_redraws;
        out.cols = bernoulli_side(profile.right, anchors, rng);
    }
    out.redraws += col_redraws;
    if (out.rows.empty() || out.cols.empty())
        throw NumericalError("sample_anchors: empty anchor set after 16 redraws");
    return out;
}

AnchorPlan make_anchor_plan(AnchorSet anchors, const LeverageProfile& profile, int anchors_k) {
    AnchorPlan plan;
    plan.rows = std::move(anchors.rows);
    plan.cols = std::move(anchors.cols);
    plan.row_weights.resize(static_cast<Eigen::Index>(plan.rows.size()));
    plan.col_weights.resize(static_cast<Eigen::Index>(plan.cols.size()));
    for (std::size_t i = 0; i < plan.rows.size(); ++i)
        plan.row_weights(static_cast<Eigen::Index>(i)) =
            1.0 / std::min(1.0, std::sqrt(anchors_k * profile.left(plan.rows[i])));
    for (std::size_t j = 0; j < plan.cols.size(); ++j)
        plan.col_weights(static_cast<Eigen::Index>(j)) =
            1.0 / std::min(1.0, std::sqrt(anchors_k * profile.right(plan.cols[j])));
    return plan;
}

AnchorPlan unweighted_anchor_plan(std::vector<int> rows, std::vector<int> cols) {
    AnchorPlan plan;
    plan.rows = std::move(rows);
    plan.cols = std::move(cols);
    plan.row_weights = Vector::Ones(static_cast<Eigen::Index>(plan.rows.size()));
    plan.col_weights = Vector::Ones(static_cast<Eigen::Index>(plan.cols.size()));
    return plan;
}

DenseMatrix cur_complete(const DenseMatrix& observed, const AnchorPlan& plan, std::optional<int> rank_cap,
                         double rtol, bool keep_skeleton) {
    const auto S = observed.rows(), A = observed.cols();
    const auto nI = static_cast<Eigen::Index>(plan.rows.size());
    const auto nJ = static_cast<Eigen::Index>(plan.cols.size());
    if (nI == 0 || nJ == 0) throw ConfigError("cur_complete: anchor sets must be non-empty");

    DenseMatrix c(S, nJ), r(nI, A), core(nI, nJ);
    for (Eigen::Index j = 0; j < nJ; ++j) c.col(j) = observed.col(plan.cols[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < nI; ++i) r.row(i) = observed.row(plan.rows[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < nI; ++i)
        for (Eigen::Index j = 0; j < nJ; ++j)
            core(i, j) = plan.row_weights(i) * r(i, plan.cols[static_cast<std::size_t>(j)]) * plan.col_weights(j);

    const DenseMatrix middle = plan.col_weights.asDiagonal() * linalg::pseudo_inverse(core, rank_cap, rtol) *
                               plan.row_weights.asDiagonal();
    DenseMatrix out = c * middle * r;
    if (keep_skeleton) {
        for (Eigen::Index j = 0; j < nJ; ++j) out.col(plan.cols[static_cast<std::size_t>(j)]) = c.col(j);
        for (Eigen::Index i = 0; i < nI; ++i) out.row(plan.rows[static_cast<std::size_t>(i)]) = r.row(i);
    }
    return out;
}

Phase2Result phase2_complete(const EntryOracle& oracle, const SamplingPlan& plan, const AnchorPlan& anchors,
                             std::uint64_t budget, std::optional<int> rank_cap, double rtol, const Rng& rng) {
    const int S = oracle.rows(), A = oracle.cols();
    if (anchors.rows.empty() || anchors.cols.empty()) throw ConfigError("phase2: anchors must be non-empty");
    const std::uint64_t square = anchors.square_size();
    const std::uint64_t plus = anchors.plus_size(S, A);

    Phase2Result out;
    if (plus == 0) {
        out.n_square = budget / (plan.cost * square);
        out.n_plus = 0;
    } else {
        out.n_square = budget / (2 * plan.cost * square);
        out.n_plus = std::min(out.n_square, budget / (2 * plan.cost * plus));
    }
    if (out.n_square == 0 || (plus > 0 && out.n_plus == 0)) {
        const std::uint64_t needed = plus == 0 ? plan.cost * square : 2 * plan.cost * std::max(square, plus);
        throw InfeasibleBudget("phase2: budget below one rollout per skeleton entry", budget, needed);
    }

    std::vector<char> in_rows(static_cast<std::size_t>(S), 0), in_cols(static_cast<std::size_t>(A), 0);
    for (int i : anchors.rows) in_rows[static_cast<std::size_t>(i)] = 1;
    for (int j : anchors.cols) in_cols[static_cast<std::size_t>(j)] = 1;

    out.skeleton = DenseMatrix::Zero(S, A);
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            const bool row_anchor = in_rows[static_cast<std::size_t>(s)] != 0;
            const bool col_anchor = in_cols[static_cast<std::size_t>(a)] != 0;
            if (!row_anchor && !col_anchor) continue;
            const std::uint64_t count = (row_anchor && col_anchor) ? out.n_square : out.n_plus;
            const std::uint64_t e = static_cast<std::uint64_t>(s) + static_cast<std::uint64_t>(S) * a;
            Rng entry_rng = rng.child({kPhase2Entry, e});
            out.skeleton(s, a) = oracle.sample_sum(s, a, count, plan.tau, entry_rng) / static_cast<double>(count);
        }
    }
    out.consumed = plan.cost * (out.n_square * square + out.n_plus * plus);

    DenseMatrix core(static_cast<Eigen::Index>(anchors.rows.size()), static_cast<Eigen::Index>(anchors.cols.size()));
    for (std::size_t i = 0; i < anchors.rows.size(); ++i)
        for (std::size_t j = 0; j < anchors.cols.size(); ++j)
            core(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                anchors.row_weights(static_cast<Eigen::Index>(i)) * out.skeleton(anchors.rows[i], anchors.cols[j]) *
                anchors.col_weights(static_cast<Eigen::Index>(j));
    const linalg::SvdResult cf = linalg::svd(core);
    out.anchor_rank = cf.singular_values(0) > 0.0 ? linalg::numeric_rank(cf, rtol * cf.singular_values(0)) : 0;
    if (rank_cap && out.anchor_rank < *rank_cap) out.anchor_rank_deficient = true;

    out.q_hat = cur_complete(out.skeleton, anchors, rank_cap, rtol, true);
    return out;
}

LmeResult lme(const EntryOracle& oracle, std::uint64_t budget, double delta, double gamma, double r_max,
              const LmeOptions& options, const Rng& rng) {
    LmeResult result;
    LmeReport& rep = result.report;
    rep.plan = build_plan(oracle, budget, delta, gamma, r_max);
    rep.phase1 = phase1_estimate(oracle, rep.plan, options, rng);
    if (rep.phase1.rank_fallback)
        rep.warnings.push_back("rank_fallback: no singular value reached beta; kept the top component");

    assign_rank(rep.plan, rep.phase1.rank, options.anchor_count);
    if (rep.plan.anchors_clamped)
        rep.warnings.push_back("anchors_clamped: K formula " + std::to_string(rep.plan.anchors_formula) +
                               " exceeds min(S, A)");

    Rng anchor_rng = rng.child({kAnchors});
    AnchorSet set = sample_anchors(rep.phase1.profile, rep.plan.anchors, options.anchor_mode, anchor_rng);
    rep.anchor_redraws = set.redraws;
    rep.anchors = make_anchor_plan(std::move(set), rep.phase1.profile, rep.plan.anchors);

    const std::uint64_t phase2_budget = budget - budget / 2;
    Phase2Result p2 = phase2_complete(oracle, rep.plan, rep.anchors, phase2_budget, rep.phase1.rank,
                                      options.pinv_rtol, rng);
    rep.n_square = p2.n_square;
    rep.n_plus = p2.n_plus;
    rep.anchor_rank = p2.anchor_rank;
    if (p2.anchor_rank_deficient)
        rep.warnings.push_back("anchor_rank_deficient: anchor submatrix rank " + std::to_string(p2.anchor_rank) +
                               " below estimated rank " + std::to_string(rep.phase1.rank));
    rep.consumed = rep.phase1.consumed + p2.consumed;
    result.q_hat = std::move(p2.q_hat);
    return result;
}

nlohmann::json to_json(const LmeReport& r, const DenseMatrix* q_hat, const DenseMatrix* truth) {
    using nlohmann::json;
    const auto& p = r.plan;
    json sv = json::array();
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(r.phase1.singular_values.size(), 16); ++i)
        sv.push_back(r.phase1.singular_values(i));
    json j{
        {"plan",
         {{"budget", p.budget},
          {"tau", p.tau},
          {"eps_trunc", p.eps_trunc},
          {"cost_per_sample", p.cost},
          {"phase1_samples", p.phase1_samples},
          {"delta", p.delta},
          {"gamma", p.gamma},
          {"r_max", p.r_max},
          {"anchors_formula", p.anchors_formula},
          {"anchors", p.anchors},
          {"anchors_clamped", p.anchors_clamped},
          {"n_square_nominal", p.n_square},
          {"n_plus_nominal", p.n_plus}}},
        {"beta", r.phase1.beta},
        {"d_hat", r.phase1.rank},
        {"rank_fallback", r.phase1.rank_fallback},
        {"singular_values", sv},
        {"anchor_rows", r.anchors.rows},
        {"anchor_cols", r.anchors.cols},
        {"anchor_redraws", r.anchor_redraws},
        {"anchor_rank", r.anchor_rank},
        {"n_square", r.n_square},
        {"n_plus", r.n_plus},
        {"consumed", r.consumed},
        {"warnings", r.warnings},
    };
    if (q_hat && truth) {
        const DenseMatrix diff = *q_hat - *truth;
        j["errors"] = {{"entrywise", linalg::max_abs(diff)}, {"frobenius", linalg::frobenius(diff)}};
    }
    return j;
}

}  // namespace lora::lme
