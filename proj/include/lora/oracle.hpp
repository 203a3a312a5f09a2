#pragma once

#include <cstdint>
#include <vector>

#include "lora/mdp.hpp"

namespace lora::lme {

using linalg::DenseMatrix;
using linalg::Vector;

/// Noisy, unbiased access to the entries of an unknown S x A matrix.
class EntryOracle {
public:
    virtual ~EntryOracle() = default;

    virtual int rows() const = 0;
    virtual int cols() const = 0;

    /// Transitions charged for one observation when rollouts are truncated at `tau`.
    virtual std::uint64_t cost_per_sample(int tau) const = 0;

    /// Sum of `count` independent observations of entry (s, a).
    virtual double sample_sum(int s, int a, std::uint64_t count, int tau, Rng& rng) const = 0;

    /// `count` individual observations.
    std::vector<double> sample(int s, int a, std::uint64_t count, int tau, Rng& rng) const;
};

/// Observations are truncated discounted returns of a fixed policy; the
/// target is Q^pi_tau. Costs tau + 1 transitions each.
class RolloutOracle final : public EntryOracle {
public:
    RolloutOracle(const mdp::TabularMdp& mdp, mdp::DeterministicPolicy policy);

    int rows() const override { return sampler_.mdp().states(); }
    int cols() const override { return sampler_.mdp().actions(); }
    std::uint64_t cost_per_sample(int tau) const override { return static_cast<std::uint64_t>(tau) + 1; }
    double sample_sum(int s, int a, std::uint64_t count, int tau, Rng& rng) const override {
        return sampler_.sample_sum(s, a, tau, count, rng);
    }

    const mdp::RolloutSampler& sampler() const noexcept { return sampler_; }

private:
    mdp::RolloutSampler sampler_;
};

/// Observations are target(s, a) plus reward-style noise; cost 1 each.
class MatrixOracle final : public EntryOracle {
public:
    MatrixOracle(DenseMatrix target, mdp::RewardNoise noise);

    int rows() const override { return static_cast<int>(target_.rows()); }
    int cols() const override { return static_cast<int>(target_.cols()); }
    std::uint64_t cost_per_sample(int) const override { return 1; }
    double sample_sum(int s, int a, std::uint64_t count, int tau, Rng& rng) const override;

    const DenseMatrix& target() const noexcept { return target_; }

private:
    DenseMatrix target_;
    mdp::RewardNoise noise_;
};

/// One-step lookahead samples r~(s, a) + gamma V(s'), s' ~ p(.|s, a): an
/// unbiased single-transition estimate of F(V)(s, a). Cost 1 each.
class LookaheadOracle final : public EntryOracle {
public:
    LookaheadOracle(const mdp::TabularMdp& mdp, Vector value);

    int rows() const override { return mdp_->states(); }
    int cols() const override { return mdp_->actions(); }
    std::uint64_t cost_per_sample(int) const override { return 1; }
    double sample_sum(int s, int a, std::uint64_t count, int tau, Rng& rng) const override;

private:
    const mdp::TabularMdp* mdp_;
    Vector value_;
};

/// Sum of `count` draws of the noise model.
double noise_sum(const mdp::RewardNoise& noise, std::uint64_t count, Rng& rng);

}  // namespace lora::lme
