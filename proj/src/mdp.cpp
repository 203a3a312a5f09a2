#include "lora/mdp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "lora/error.hpp"
#include "lora/simd/kernels.hpp"

namespace lora::mdp {

double RewardNoise::variance() const noexcept {
    switch (kind) {
        case Kind::none: return 0.0;
        case Kind::gaussian: return scale * scale;
        case Kind::bounded_uniform: return scale * scale / 3.0;
    }
    return 0.0;
}

double RewardNoise::draw(Rng& rng) const {
    switch (kind) {
        case Kind::none: return 0.0;
        case Kind::gaussian: return std::normal_distribution<double>(0.0, scale)(rng);
        case Kind::bounded_uniform: return scale * (2.0 * rng.uniform() - 1.0);
    }
    return 0.0;
}

TabularMdp::TabularMdp(TransitionMatrix transitions, DenseMatrix mean_rewards, RewardNoise noise,
                       double gamma, double r_max)
    : states_(static_cast<int>(mean_rewards.rows())),
      actions_(static_cast<int>(mean_rewards.cols())),
      transitions_(std::move(transitions)),
      rewards_(std::move(mean_rewards)),
      noise_(noise),
      gamma_(gamma),
      r_max_(r_max) {
    if (states_ < 1 || actions_ < 1) throw ConfigError("mdp: need at least one state and one action");
    if (transitions_.rows() != static_cast<Eigen::Index>(states_) * actions_ ||
        transitions_.cols() != states_)
        throw ConfigError("mdp: transition matrix must be (S*A) x S");
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw ConfigError("mdp: gamma must lie in (0, 1)");
    if (!(r_max_ > 0.0) || !std::isfinite(r_max_)) throw ConfigError("mdp: r_max must be positive");
    if (!(noise_.scale >= 0.0)) throw ConfigError("mdp: noise scale must be >= 0");
    linalg::require_finite(rewards_, "mdp rewards");
    if (!transitions_.allFinite()) throw ConfigError("mdp: transitions have non-finite entries");

    for (Eigen::Index row = 0; row < transitions_.rows(); ++row) {
        if (transitions_.row(row).minCoeff() < 0.0)
            throw ConfigError("mdp: negative transition probability in row " + std::to_string(row));
        const double sum = transitions_.row(row).sum();
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("mdp: transition row " + std::to_string(row) + " sums to " +
                              std::to_string(sum));
    }
    const double bound = rewards_.cwiseAbs().maxCoeff() +
                         (noise_.kind == RewardNoise::Kind::bounded_uniform ? noise_.scale : 0.0);
    if (bound > r_max_ * (1.0 + 1e-12))
        throw ConfigError("mdp: reward magnitude " + std::to_string(bound) + " exceeds r_max " +
                          std::to_string(r_max_));
    build_alias_tables();
}

void TabularMdp::build_alias_tables() {
    // Vose's alias method, one table per (s, a) row.
    const std::size_t n = static_cast<std::size_t>(states_);
    alias_prob_.assign(transitions_.size(), 1.0);
    alias_index_.assign(transitions_.size(), 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (Eigen::Index row = 0; row < transitions_.rows(); ++row) {
        const std::size_t base = static_cast<std::size_t>(row) * n;
        small.clear();
        large.clear();
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = transitions_(row, static_cast<Eigen::Index>(i)) * static_cast<double>(n);
            alias_index_[base + i] = static_cast<int>(i);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t lo = small.back();
            small.pop_back();
            const std::size_t hi = large.back();
            alias_prob_[base + lo] = scaled[lo];
            alias_index_[base + lo] = static_cast<int>(hi);
            scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0;
            if (scaled[hi] < 1.0) {
                large.pop_back();
                small.push_back(hi);
            }
        }
        for (std::size_t i : large) alias_prob_[base + i] = 1.0;
        // Leftovers from rounding: keep themselves.
        for (std::size_t i : small) alias_prob_[base + i] = 1.0;
    }
}

void TabularMdp::validate(const DeterministicPolicy& policy) const {
    if (policy.actions.size() != static_cast<std::size_t>(states_))
        throw ConfigError("policy has " + std::to_string(policy.actions.size()) + " entries, expected " +
                          std::to_string(states_));
    for (int a : policy.actions)
        if (a < 0 || a >= actions_) throw ConfigError("policy action " + std::to_string(a) + " out of range");
}

Vector policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    mdp.validate(policy);
    const int S = mdp.states();
    DenseMatrix system = DenseMatrix::Identity(S, S);
    Vector rhs(S);
    for (int s = 0; s < S; ++s) {
        const int a = policy(s);
        const auto row = mdp.transition_row(s, a);
        for (int t = 0; t < S; ++t) system(s, t) -= mdp.gamma() * row[static_cast<std::size_t>(t)];
        rhs(s) = mdp.mean_rewards()(s, a);
    }
    Eigen::FullPivLU<DenseMatrix> lu(system);
    if (!lu.isInvertible()) throw NumericalError("policy evaluation: singular system I - gamma P_pi");
    return lu.solve(rhs);
}

DenseMatrix f_operator(const TabularMdp& mdp, const Vector& value) {
    if (value.size() != mdp.states()) throw ConfigError("f_operator: value has wrong length");
    const std::span<const double> v{value.data(), static_cast<std::size_t>(value.size())};
    DenseMatrix out(mdp.states(), mdp.actions());
    for (int s = 0; s < mdp.states(); ++s)
        for (int a = 0; a < mdp.actions(); ++a)
            out(s, a) = mdp.mean_rewards()(s, a) + mdp.gamma() * simd::dot(mdp.transition_row(s, a), v);
    return out;
}

DenseMatrix exact_policy_q(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    return f_operator(mdp, policy_value(mdp, policy));
}

Vector row_max(const DenseMatrix& q) { return q.rowwise().maxCoeff(); }

Vector bellman_optimal(const TabularMdp& mdp, const Vector& value) {
    return row_max(f_operator(mdp, value));
}

DeterministicPolicy greedy_policy(const DenseMatrix& q) {
    DeterministicPolicy p;
    p.actions.resize(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = static_cast<int>(a);
        p.actions[static_cast<std::size_t>(s)] = best;
    }
    return p;
}

OptimalSolution exact_optimal(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw ConfigError("exact_optimal: tol must be > 0");
    const double stop = tol * (1.0 - mdp.gamma()) / (2.0 * mdp.gamma());
    OptimalSolution out;
    Vector v = Vector::Zero(mdp.states());
    for (;;) {
        Vector next = bellman_optimal(mdp, v);
        const double residual = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        ++out.value_iterations;
        if (residual <= stop || out.value_iterations > 1000000) break;
    }
    out.policy = greedy_policy(f_operator(mdp, v));
    // Exact improvement steps; normally confirms optimality with zero changes.
    for (;;) {
        out.value = policy_value(mdp, out.policy);
        ++out.policy_checks;
        const DenseMatrix q = f_operator(mdp, out.value);
        DeterministicPolicy improved = out.policy;
        bool changed = false;
        for (int s = 0; s < mdp.states(); ++s) {
            const int current = out.policy(s);
            const int best = greedy_policy(q.row(s)).actions[0];
            if (q(s, best) > q(s, current) + 1e-12 * (1.0 + std::abs(q(s, current)))) {
                improved.actions[static_cast<std::size_t>(s)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        out.policy = std::move(improved);
    }
    return out;
}

PolicyIterationTrace exact_policy_iteration(const TabularMdp& mdp, const DeterministicPolicy& initial,
                                            int max_iterations) {
    mdp.validate(initial);
    PolicyIterationTrace trace;
    DeterministicPolicy current = initial;
    for (int it = 0; it < max_iterations; ++it) {
        Vector v = policy_value(mdp, current);
        trace.policies.push_back(current);
        trace.values.push_back(v);
        DeterministicPolicy next = greedy_policy(f_operator(mdp, v));
        if (next == current) break;
        current = std::move(next);
    }
    return trace;
}

RolloutSampler::RolloutSampler(const TabularMdp& mdp, DeterministicPolicy policy)
    : mdp_(&mdp), policy_(std::move(policy)) {
    mdp.validate(policy_);
    policy_reward_.resize(static_cast<std::size_t>(mdp.states()));
    for (int s = 0; s < mdp.states(); ++s)
        policy_reward_[static_cast<std::size_t>(s)] = mdp.mean_rewards()(s, policy_(s));
}

double RolloutSampler::sample(int s, int a, int tau, Rng& rng) const {
    const TabularMdp& m = *mdp_;
    double ret = m.sample_reward(s, a, rng);
    double discount = 1.0;
    int state = m.next_state(s, a, rng);
    for (int t = 1; t <= tau; ++t) {
        discount *= m.gamma();
        ret += discount * m.sample_reward(state, policy_(state), rng);
        if (t < tau) state = m.next_state(state, policy_(state), rng);
    }
    return ret;
}

double RolloutSampler::sample_sum(int s, int a, int tau, std::uint64_t count, Rng& rng) const {
    const TabularMdp& m = *mdp_;
    const bool aggregate_noise = m.noise().kind != RewardNoise::Kind::bounded_uniform;
    if (!aggregate_noise) {
        double total = 0.0;
        for (std::uint64_t k = 0; k < count; ++k) total += sample(s, a, tau, rng);
        return total;
    }
    const double gamma = m.gamma();
    const double r0 = m.mean_rewards()(s, a);
    double total = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) {
        double ret = r0;
        if (tau > 0) {
            double discount = gamma;
            int state = m.next_state(s, a, rng);
            for (int t = 1;; ++t) {
                ret += discount * policy_reward_[static_cast<std::size_t>(state)];
                if (t == tau) break;
                discount *= gamma;
                state = m.next_state(state, policy_(state), rng);
            }
        }
        total += ret;
    }
    if (m.noise().kind == RewardNoise::Kind::gaussian && count > 0 && m.noise().scale > 0.0) {
        // sum over k, t of gamma^t eps_{k,t} ~ N(0, count * sigma^2 * sum_t gamma^{2t})
        const double g2 = gamma * gamma;
        const double geometric = (1.0 - std::pow(g2, tau + 1)) / (1.0 - g2);
        const double sd = m.noise().scale * std::sqrt(static_cast<double>(count) * geometric);
        total += std::normal_distribution<double>(0.0, sd)(rng);
    }
    return total;
}

double sample_return(const TabularMdp& mdp, const DeterministicPolicy& policy, int s, int a, int tau,
                     Rng& rng) {
    if (tau < 0) throw ConfigError("sample_return: tau must be >= 0");
    return RolloutSampler(mdp, policy).sample(s, a, tau, rng);
}

int truncation_horizon(double gamma, double r_max, double eps) {
    if (!(eps > 0.0)) throw ConfigError("truncation_horizon: eps must be > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("truncation_horizon: gamma must lie in (0, 1)");
    const double tau = std::ceil(std::log(r_max / ((1.0 - gamma) * eps)) / (1.0 - gamma));
    return tau > 0.0 ? static_cast<int>(tau) : 0;
}

TabularMdp load_toy_mdp(RewardNoise noise) {
    TransitionMatrix p(4, 2);
    // rows (s, a) in order (0,0), (0,1), (1,0), (1,1)
    p << 0.40, 0.60,
         0.25, 0.75,
         0.15, 0.85,
         0.29, 0.71;
    DenseMatrix r(2, 2);
    r << -0.46, -0.48,
         -0.14, 0.28;
    return TabularMdp(std::move(p), std::move(r), noise, 0.87, 0.48);
}

std::vector<DeterministicPolicy> all_policies(int states, int actions) {
    std::vector<DeterministicPolicy> out;
    DeterministicPolicy p;
    p.actions.assign(static_cast<std::size_t>(states), 0);
    for (;;) {
        out.push_back(p);
        int s = states - 1;
        while (s >= 0 && ++p.actions[static_cast<std::size_t>(s)] == actions) {
            p.actions[static_cast<std::size_t>(s)] = 0;
            --s;
        }
        if (s < 0) break;
    }
    return out;
}

}  // namespace lora::mdp
