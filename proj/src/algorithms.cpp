#include "lora/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lora/error.hpp"

namespace lora::algo {

namespace {

void validate(const mdp::TabularMdp& mdp, const LoraConfig& c) {
    if (!(c.eps > 0.0)) throw ConfigError("lora: eps must be positive");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("lora: delta must lie in (0, 1)");
    if (c.max_epochs < 1) throw ConfigError("lora: max_epochs must be >= 1");
    if (c.initial_policy) mdp.validate(*c.initial_policy);
    if (c.initial_value && c.initial_value->size() != mdp.states())
        throw ConfigError("lora: initial value has the wrong length");
    const int epochs = n_epochs(mdp.gamma(), mdp.r_max(), c.eps, c.max_epochs);
    if (c.budget < static_cast<std::uint64_t>(epochs))
        throw ConfigError("lora: budget smaller than the number of epochs");
}

[[noreturn]] void rethrow_with_epoch(int epoch) {
    try {
        throw;
    } catch (const InfeasibleBudget& e) {
        throw InfeasibleBudget("epoch " + std::to_string(epoch) + ": " + e.what(), e.budget(), e.minimal_budget());
    } catch (const ConfigError& e) {
        throw ConfigError("epoch " + std::to_string(epoch) + ": " + e.what());
    } catch (const std::exception& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
}

void fill_errors(EpochLog& log, const Evaluation& ev, const DenseMatrix& truth) {
    const DenseMatrix diff = ev.q_hat - truth;
    log.q_error = linalg::max_abs(diff);
    log.q_frobenius = linalg::frobenius(diff);
    log.consumed = ev.consumed;
    log.rank = ev.rank;
    log.anchor_rows = ev.anchor_rows;
    log.anchor_cols = ev.anchor_cols;
    log.warnings = ev.warnings;
}

double gap(const Vector& v_star, const Vector& v) { return (v_star - v).cwiseAbs().maxCoeff(); }

}  // namespace

int n_epochs(double gamma, double r_max, double eps, int cap) {
    if (!(eps > 0.0)) throw ConfigError("n_epochs: eps must be positive");
    const double n = std::ceil(std::log(4.0 * r_max / ((1.0 - gamma) * eps)) / (1.0 - gamma));
    return std::clamp(n >= 1.0 ? static_cast<int>(std::min(n, 1e9)) : 1, 1, cap);
}

std::vector<std::uint64_t> epoch_budgets(std::uint64_t total, int epochs, const BudgetSchedule& schedule) {
    if (epochs < 1) throw ConfigError("epoch_budgets: epochs must be >= 1");
    std::vector<std::uint64_t> out(static_cast<std::size_t>(epochs));
    if (schedule.kind == BudgetSchedule::Kind::uniform) {
        std::fill(out.begin(), out.end(), total / static_cast<std::uint64_t>(epochs));
        return out;
    }
    if (!(schedule.ratio > 0.0) || schedule.base < 0.0)
        throw ConfigError("epoch_budgets: geometric schedule needs ratio > 0 and base >= 0");
    std::vector<double> w(static_cast<std::size_t>(epochs));
    for (int t = 1; t <= epochs; ++t)
        w[static_cast<std::size_t>(t - 1)] =
            (schedule.base > 0.0 ? schedule.base : 1.0) * std::pow(schedule.ratio, t);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    const double scale =
        schedule.base > 0.0 && sum <= static_cast<double>(total) ? 1.0 : static_cast<double>(total) / sum;
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = static_cast<std::uint64_t>(std::floor(w[i] * scale));
    // Guard against rounding up past the total.
    std::uint64_t spent = std::accumulate(out.begin(), out.end(), std::uint64_t{0});
    for (auto it = out.rbegin(); spent > total && it != out.rend(); ++it) {
        const std::uint64_t cut = std::min(*it, spent - total);
        *it -= cut;
        spent -= cut;
    }
    return out;
}

LoraResult lora_pi(const mdp::TabularMdp& mdp, const LoraConfig& config, const Rng& rng) {
    validate(mdp, config);
    const int S = mdp.states();
    const int epochs = n_epochs(mdp.gamma(), mdp.r_max(), config.eps, config.max_epochs);
    const auto budgets = epoch_budgets(config.budget, epochs, config.schedule);
    const Vector v_star = mdp::exact_optimal(mdp).value;

    LoraResult out;
    mdp::DeterministicPolicy policy =
        config.initial_policy.value_or(mdp::DeterministicPolicy{std::vector<int>(static_cast<std::size_t>(S), 0)});
    for (int t = 1; t <= epochs; ++t) {
        EpochLog log;
        log.epoch = t;
        log.policy = policy;
        log.budget = budgets[static_cast<std::size_t>(t - 1)];
        const DenseMatrix truth = mdp::exact_policy_q(mdp, policy);
        log.value_gap = gap(v_star, mdp::policy_value(mdp, policy));
        log.condition_number = linalg::condition_number(truth);
        Evaluation ev;
        try {
            const lme::RolloutOracle oracle(mdp, policy);
            ev = evaluate(oracle, config.evaluator, log.budget, config.delta, mdp.gamma(), mdp.r_max(), &truth,
                          rng.child({static_cast<std::uint64_t>(t)}));
        } catch (...) {
            rethrow_with_epoch(t);
        }
        fill_errors(log, ev, truth);
        out.consumed += ev.consumed;
        policy = mdp::greedy_policy(ev.q_hat);
        out.logs.push_back(std::move(log));
    }
    out.policy = policy;
    out.value = mdp::policy_value(mdp, policy);
    out.value_gap = gap(v_star, out.value);
    return out;
}

LoraResult lora_vi(const mdp::TabularMdp& mdp, const LoraConfig& config, const Rng& rng) {
    validate(mdp, config);
    const int epochs = n_epochs(mdp.gamma(), mdp.r_max(), config.eps, config.max_epochs);
    const auto budgets = epoch_budgets(config.budget, epochs, config.schedule);
    const Vector v_star = mdp::exact_optimal(mdp).value;

    LoraResult out;
    Vector value = config.initial_value.value_or(Vector::Zero(mdp.states()));
    mdp::DeterministicPolicy policy;
    for (int t = 1; t <= epochs; ++t) {
        EpochLog log;
        log.epoch = t;
        log.budget = budgets[static_cast<std::size_t>(t - 1)];
        const DenseMatrix truth = mdp::f_operator(mdp, value);
        log.condition_number = linalg::condition_number(truth);
        Evaluation ev;
        try {
            const lme::LookaheadOracle oracle(mdp, value);
            ev = evaluate(oracle, config.evaluator, log.budget, config.delta, mdp.gamma(), mdp.r_max(), &truth,
                          rng.child({static_cast<std::uint64_t>(t)}));
        } catch (...) {
            rethrow_with_epoch(t);
        }
        fill_errors(log, ev, truth);
        out.consumed += ev.consumed;
        value = mdp::row_max(ev.q_hat);
        policy = mdp::greedy_policy(ev.q_hat);
        log.policy = policy;
        log.value_gap = gap(v_star, mdp::policy_value(mdp, policy));
        out.logs.push_back(std::move(log));
    }
    out.policy = policy;
    out.value = value;
    out.value_gap = gap(v_star, mdp::policy_value(mdp, policy));
    return out;
}

double ConditionTrace::max_condition() const {
    return condition_numbers.empty() ? 0.0 : *std::max_element(condition_numbers.begin(), condition_numbers.end());
}

ConditionTrace vi_condition_trace(const mdp::TabularMdp& mdp, const Vector& v0, double tol, int max_iterations) {
    if (v0.size() != mdp.states()) throw ConfigError("vi_condition_trace: initial value has the wrong length");
    ConditionTrace out;
    Vector v = v0;
    for (int it = 0; it < max_iterations; ++it) {
        const DenseMatrix f = mdp::f_operator(mdp, v);
        out.condition_numbers.push_back(linalg::condition_number(f));
        const Vector next = mdp::row_max(f);
        const double step = (next - v).cwiseAbs().maxCoeff();
        v = next;
        out.iterations = it + 1;
        if (step < tol) break;
    }
    out.value = v;
    return out;
}

BoundReport check_api_bound(const mdp::TabularMdp& mdp, const LoraResult& run, double slack) {
    BoundReport rep;
    if (run.logs.empty()) return rep;
    const double g = mdp.gamma();
    const Vector v_star = mdp::exact_optimal(mdp).value;
    for (const auto& log : run.logs) rep.eps = std::max(rep.eps, log.q_error);

    std::vector<Vector> values;
    for (const auto& log : run.logs) values.push_back(mdp::policy_value(mdp, log.policy));
    values.push_back(mdp::policy_value(mdp, run.policy));

    const double first_gap = gap(v_star, values.front());
    const double floor = 2.0 * rep.eps / ((1.0 - g) * (1.0 - g));
    for (std::size_t t = 1; t < values.size(); ++t) {
        ++rep.api_checks;
        const double lhs = gap(v_star, values[t]);
        const double rhs = std::pow(g, static_cast<double>(t)) * first_gap + floor;
        if (lhs > rhs + slack) {
            ++rep.api_violations;
            rep.violations.push_back("api epoch " + std::to_string(t) + ": " + std::to_string(lhs) + " > " +
                                     std::to_string(rhs));
        }
    }
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        ++rep.improvement_checks;
        const Vector tv = mdp::bellman_optimal(mdp, values[t]);
        const double margin = 2.0 * run.logs[t].q_error / (1.0 - g);
        const bool lower = ((values[t] - tv).array() <= slack).all();
        const bool upper = ((tv - values[t + 1]).array() <= margin + slack).all();
        if (!lower || !upper) {
            ++rep.improvement_violations;
            rep.violations.push_back("improvement epoch " + std::to_string(t + 1) +
                                     (lower ? ": upper side" : ": lower side"));
        }
    }
    return rep;
}

}  // namespace lora::algo
