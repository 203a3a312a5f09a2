#pragma once

#include <cstdint>

#include "lora/mdp.hpp"

namespace lora::mdp {

/// Synthetic low-rank MDP.
///
/// States and actions carry mixture weights x(s), y(a) on the d-simplex. The
/// kernel is p(.|s,a) = sum_k w_k(s,a) q_k with d base distributions q_k and
/// weights w_k(s,a) = sum_ij x_i(s) y_j(a) B_ij,k, so the (S*A) x S kernel has
/// rank <= d. Rewards are X Theta Y^T with Gaussian Theta. Every value matrix
/// Q^pi = X (Theta + gamma C^pi) Y^T then has rank <= d.
struct GeneratorSpec {
    int states = 30;
    int actions = 30;
    int rank = 4;
    double gamma = 0.9;
    double r_max = 1.0;
    RewardNoise noise = RewardNoise::gaussian(0.01);
    // Dirichlet concentrations; small values push x(s) / y(a) toward simplex
    // vertices and make the value matrices coherent.
    double state_concentration = 1.0;
    double action_concentration = 1.0;
    double base_concentration = 1.0;
    // Entrywise magnitude of a full-rank reward perturbation (0 = exactly low rank).
    double approx_noise = 0.0;
    std::uint64_t seed = 0;
};

/// Throws ConfigError when rank > min(S, A) or a field is out of range.
TabularMdp generate_lowrank_mdp(const GeneratorSpec& spec);

/// Synthetic low-rank matrix for completion experiments: M = U V^T with
/// Gaussian factors; `spike_rows` rows of U (and columns of V) are scaled by
/// `spike_scale`, which concentrates leverage on them. Rescaled to ||M||_inf = 1.
struct MatrixSpec {
    int rows = 300;
    int cols = 300;
    int rank = 5;
    int spike_rows = 0;
    double spike_scale = 1.0;
    std::uint64_t seed = 0;
};

DenseMatrix generate_lowrank_matrix(const MatrixSpec& spec);

}  // namespace lora::mdp
