#include "lora/oracle.hpp"

#include <cmath>
#include <random>

#include "lora/error.hpp"

namespace lora::lme {

std::vector<double> EntryOracle::sample(int s, int a, std::uint64_t count, int tau, Rng& rng) const {
    std::vector<double> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(sample_sum(s, a, 1, tau, rng));
    return out;
}

double noise_sum(const mdp::RewardNoise& noise, std::uint64_t count, Rng& rng) {
    using Kind = mdp::RewardNoise::Kind;
    if (count == 0 || noise.kind == Kind::none || noise.scale == 0.0) return 0.0;
    if (noise.kind == Kind::gaussian)
        return std::normal_distribution<double>(0.0, noise.scale * std::sqrt(static_cast<double>(count)))(rng);
    double total = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) total += noise.draw(rng);
    return total;
}

RolloutOracle::RolloutOracle(const mdp::TabularMdp& mdp, mdp::DeterministicPolicy policy)
    : sampler_(mdp, std::move(policy)) {}

MatrixOracle::MatrixOracle(DenseMatrix target, mdp::RewardNoise noise)
    : target_(std::move(target)), noise_(noise) {
    linalg::require_finite(target_, "matrix oracle");
}

double MatrixOracle::sample_sum(int s, int a, std::uint64_t count, int, Rng& rng) const {
    return static_cast<double>(count) * target_(s, a) + noise_sum(noise_, count, rng);
}

LookaheadOracle::LookaheadOracle(const mdp::TabularMdp& mdp, Vector value)
    : mdp_(&mdp), value_(std::move(value)) {
    if (value_.size() != mdp.states()) throw ConfigError("lookahead oracle: value has wrong length");
}

double LookaheadOracle::sample_sum(int s, int a, std::uint64_t count, int, Rng& rng) const {
    double next = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) next += value_(mdp_->next_state(s, a, rng));
    return static_cast<double>(count) * mdp_->mean_rewards()(s, a) + mdp_->gamma() * next +
           noise_sum(mdp_->noise(), count, rng);
}

}  // namespace lora::lme
