#include "lora/generators.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lora/error.hpp"

namespace lora::mdp {

namespace {

Vector dirichlet(int n, double concentration, Rng& rng) {
    std::gamma_distribution<double> g(concentration, 1.0);
    Vector out(n);
    for (;;) {
        for (int i = 0; i < n; ++i) out(i) = g(rng);
        const double sum = out.sum();
        if (sum > 0.0) return out / sum;
    }
}

DenseMatrix gaussian(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    DenseMatrix out(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) out(i, j) = n(rng);
    return out;
}

}  // namespace

TabularMdp generate_lowrank_mdp(const GeneratorSpec& spec) {
    const int S = spec.states, A = spec.actions, d = spec.rank;
    if (S < 1 || A < 1) throw ConfigError("generator: need S, A >= 1");
    if (d < 1 || d > std::min(S, A))
        throw ConfigError("generator: rank " + std::to_string(d) + " must lie in [1, min(S, A)]");
    if (!(spec.state_concentration > 0.0 && spec.action_concentration > 0.0 &&
          spec.base_concentration > 0.0))
        throw ConfigError("generator: Dirichlet concentrations must be > 0");
    if (!(spec.approx_noise >= 0.0)) throw ConfigError("generator: approx_noise must be >= 0");

    Rng rng(spec.seed);
    DenseMatrix x(S, d), y(A, d);
    for (int s = 0; s < S; ++s) x.row(s) = dirichlet(d, spec.state_concentration, rng).transpose();
    for (int a = 0; a < A; ++a) y.row(a) = dirichlet(d, spec.action_concentration, rng).transpose();
    // mix[i * d + j] is the distribution over base components for the (i, j) cell.
    std::vector<Vector> mix;
    mix.reserve(static_cast<std::size_t>(d) * d);
    for (int c = 0; c < d * d; ++c) mix.push_back(dirichlet(d, 1.0, rng));
    DenseMatrix base(d, S);
    for (int k = 0; k < d; ++k) base.row(k) = dirichlet(S, spec.base_concentration, rng).transpose();

    TransitionMatrix p(static_cast<Eigen::Index>(S) * A, S);
    Vector w(d);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            w.setZero();
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) w += x(s, i) * y(a, j) * mix[static_cast<std::size_t>(i * d + j)];
            Eigen::RowVectorXd row = w.transpose() * base;
            row /= row.sum();
            p.row(static_cast<Eigen::Index>(s) * A + a) = row;
        }
    }

    DenseMatrix rewards = x * gaussian(d, d, rng) * y.transpose();
    if (spec.approx_noise > 0.0) {
        const double scale = rewards.cwiseAbs().maxCoeff();
        for (int a = 0; a < A; ++a)
            for (int s = 0; s < S; ++s) rewards(s, a) += spec.approx_noise * scale * (2.0 * rng.uniform() - 1.0);
    }
    const double peak = rewards.cwiseAbs().maxCoeff();
    if (peak > 0.0) rewards *= spec.r_max / peak;
    if (spec.noise.kind == RewardNoise::Kind::bounded_uniform) rewards *= 1.0 - spec.noise.scale / spec.r_max;

    return TabularMdp(std::move(p), std::move(rewards), spec.noise, spec.gamma, spec.r_max);
}

DenseMatrix generate_lowrank_matrix(const MatrixSpec& spec) {
    if (spec.rows < 1 || spec.cols < 1) throw ConfigError("matrix generator: need rows, cols >= 1");
    if (spec.rank < 1 || spec.rank > std::min(spec.rows, spec.cols))
        throw ConfigError("matrix generator: rank must lie in [1, min(rows, cols)]");
    if (spec.spike_rows < 0 || spec.spike_rows > std::min(spec.rows, spec.cols))
        throw ConfigError("matrix generator: spike_rows out of range");
    Rng rng(spec.seed);
    DenseMatrix u = gaussian(spec.rows, spec.rank, rng);
    DenseMatrix v = gaussian(spec.cols, spec.rank, rng);
    auto spike = [&](DenseMatrix& f) {
        std::vector<int> idx(static_cast<std::size_t>(f.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        for (int k = 0; k < spec.spike_rows; ++k) {
            const auto pick = static_cast<std::size_t>(k) + rng.below(idx.size() - static_cast<std::size_t>(k));
            std::swap(idx[static_cast<std::size_t>(k)], idx[pick]);
            f.row(idx[static_cast<std::size_t>(k)]) *= spec.spike_scale;
        }
    };
    spike(u);
    spike(v);
    DenseMatrix m = u * v.transpose();
    return m / m.cwiseAbs().maxCoeff();
}

}  // namespace lora::mdp
