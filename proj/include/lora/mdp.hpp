#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "lora/linalg.hpp"
#include "lora/rng.hpp"

namespace lora::mdp {

using linalg::DenseMatrix;
using linalg::Vector;

/// Flattened kernel: row s * A + a holds p(. | s, a).
using TransitionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Additive noise on each observed reward.
struct RewardNoise {
    enum class Kind { none, gaussian, bounded_uniform };
    Kind kind = Kind::none;
    // gaussian: standard deviation; bounded_uniform: half-width w of U[-w, w].
    double scale = 0.0;

    static RewardNoise none() { return {}; }
    static RewardNoise gaussian(double sigma) { return {Kind::gaussian, sigma}; }
    static RewardNoise bounded_uniform(double half_width) { return {Kind::bounded_uniform, half_width}; }

    bool bounded() const noexcept { return kind != Kind::gaussian; }
    /// Variance of one noise draw.
    double variance() const noexcept;
    double draw(Rng& rng) const;
};

struct DeterministicPolicy {
    std::vector<int> actions;

    int operator()(int s) const { return actions[static_cast<std::size_t>(s)]; }
    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

/// Discounted tabular MDP. Immutable after construction; safe to share across threads.
class TabularMdp {
public:
    /// Validates stochasticity, |r| <= r_max and 0 < gamma < 1; throws ConfigError.
    TabularMdp(TransitionMatrix transitions, DenseMatrix mean_rewards, RewardNoise noise, double gamma,
               double r_max);

    int states() const noexcept { return states_; }
    int actions() const noexcept { return actions_; }
    double gamma() const noexcept { return gamma_; }
    double r_max() const noexcept { return r_max_; }
    const RewardNoise& noise() const noexcept { return noise_; }
    const DenseMatrix& mean_rewards() const noexcept { return rewards_; }
    const TransitionMatrix& transitions() const noexcept { return transitions_; }

    std::span<const double> transition_row(int s, int a) const noexcept {
        return {transitions_.row(static_cast<Eigen::Index>(s) * actions_ + a).data(),
                static_cast<std::size_t>(states_)};
    }

    /// Draws s' ~ p(. | s, a) in O(1) via a per-row alias table.
    int next_state(int s, int a, Rng& rng) const noexcept {
        const std::size_t base = (static_cast<std::size_t>(s) * actions_ + a) * states_;
        const double u = rng.uniform() * states_;
        auto i = static_cast<std::size_t>(u);
        if (i >= static_cast<std::size_t>(states_)) i = states_ - 1;
        return (u - static_cast<double>(i)) < alias_prob_[base + i] ? static_cast<int>(i)
                                                                      : alias_index_[base + i];
    }

    /// Mean reward plus one noise draw.
    double sample_reward(int s, int a, Rng& rng) const { return rewards_(s, a) + noise_.draw(rng); }

    /// V_max = r_max / (1 - gamma).
    double value_bound() const noexcept { return r_max_ / (1.0 - gamma_); }

    void validate(const DeterministicPolicy& policy) const;

private:
    void build_alias_tables();

    int states_;
    int actions_;
    TransitionMatrix transitions_;
    DenseMatrix rewards_;
    RewardNoise noise_;
    double gamma_;
    double r_max_;
    std::vector<double> alias_prob_;
    std::vector<int> alias_index_;
};

/// V^pi from the direct solve (I - gamma P_pi) V = r_pi.
Vector policy_value(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// Q^pi(s, a) = r(s, a) + gamma sum_s' p(s'|s, a) V^pi(s').
DenseMatrix exact_policy_q(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// One-step lookahead F(V)(s, a) = r(s, a) + gamma sum_s' p(s'|s, a) V(s').
DenseMatrix f_operator(const TabularMdp& mdp, const Vector& value);

/// (T* V)(s) = max_a F(V)(s, a).
Vector bellman_optimal(const TabularMdp& mdp, const Vector& value);

/// Row-wise argmax, lowest action index on ties.
DeterministicPolicy greedy_policy(const DenseMatrix& q);

/// Row-wise maximum.
Vector row_max(const DenseMatrix& q);

struct OptimalSolution {
    Vector value;
    DeterministicPolicy policy;
    int value_iterations = 0;
    int policy_checks = 0;
};

/// Value iteration to residual <= tol (1 - gamma) / (2 gamma), greedy extraction,
/// then exact policy-improvement steps until no action changes.
OptimalSolution exact_optimal(const TabularMdp& mdp, double tol = 1e-10);

struct PolicyIterationTrace {
    std::vector<DeterministicPolicy> policies;
    std::vector<Vector> values;
};

/// Exact policy iteration from `initial` until the greedy policy repeats.
PolicyIterationTrace exact_policy_iteration(const TabularMdp& mdp, const DeterministicPolicy& initial,
                                            int max_iterations = 10000);

/// Truncated rollouts: s_0 = s, a_0 = a, a_t = pi(s_t), return sum_{t<=tau} gamma^t r_t.
class RolloutSampler {
public:
    RolloutSampler(const TabularMdp& mdp, DeterministicPolicy policy);

    double sample(int s, int a, int tau, Rng& rng) const;

    /// Sum of `count` independent returns. Gaussian reward noise is drawn in
    /// aggregate, which has the same distribution as per-step draws.
    double sample_sum(int s, int a, int tau, std::uint64_t count, Rng& rng) const;

    const TabularMdp& mdp() const noexcept { return *mdp_; }
    const DeterministicPolicy& policy() const noexcept { return policy_; }

private:
    const TabularMdp* mdp_;
    DeterministicPolicy policy_;
    std::vector<double> policy_reward_;
};

double sample_return(const TabularMdp& mdp, const DeterministicPolicy& policy, int s, int a, int tau,
                     Rng& rng);

/// ceil((1 / (1 - gamma)) log(r_max / ((1 - gamma) eps))), floored at zero.
int truncation_horizon(double gamma, double r_max, double eps);

/// The 2-state, 2-action MDP used for the condition-number illustration.
TabularMdp load_toy_mdp(RewardNoise noise = RewardNoise::none());

/// Enumerates every deterministic policy in lexicographic order (state 0 slowest).
std::vector<DeterministicPolicy> all_policies(int states, int actions);

}  // namespace lora::mdp
