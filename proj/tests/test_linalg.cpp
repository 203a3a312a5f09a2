#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lora/error.hpp"
#include "lora/linalg.hpp"
#include "oracles.hpp"

using namespace lora;
using namespace lora::linalg;

TEST_CASE("svd of the identity and of a rank-1 outer product") {
    const auto f = svd(DenseMatrix::Identity(3, 3));
    CHECK(f.singular_values.isApproxToConstant(1.0, 1e-14));

    Vector u = Vector::Random(5).normalized(), v = Vector::Random(4).normalized();
    const auto g = svd(u * v.transpose());
    CHECK(g.singular_values(0) == doctest::Approx(1.0));
    CHECK(g.singular_values.tail(3).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("svd reconstructs a random 20x15 matrix with orthonormal factors") {
    std::srand(3);
    const DenseMatrix m = DenseMatrix::Random(20, 15);
    const auto f = svd(m);
    const DenseMatrix back = f.left * f.singular_values.asDiagonal() * f.right.transpose();
    CHECK((back - m).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.left.transpose() * f.left - DenseMatrix::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((f.right.transpose() * f.right - DenseMatrix::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index i = 1; i < f.singular_values.size(); ++i)
        CHECK(f.singular_values(i) <= f.singular_values(i - 1));
}

TEST_CASE("svd rejects non-finite input") {
    DenseMatrix m = DenseMatrix::Ones(3, 3);
    m(1, 1) = std::nan("");
    CHECK_THROWS_AS(svd(m), ConfigError);
}

TEST_CASE("threshold_truncate counts sigma >= beta") {
    const DenseMatrix m = Eigen::Vector3d(5.0, 3.0, 1.0).asDiagonal();
    const auto f = svd(m);
    const auto t = threshold_truncate(f, 2.0);
    CHECK(t.rank == 2);
    CHECK(t.left.cols() == 2);
    CHECK(t.right.cols() == 2);
    CHECK(threshold_truncate(f, 3.0).rank == 2);
    CHECK((threshold_truncate(f, 0.0).estimate - m).cwiseAbs().maxCoeff() < 1e-12);
    const auto empty = threshold_truncate(f, 10.0);
    CHECK(empty.empty());
    CHECK(empty.estimate.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(threshold_truncate(f, -1.0), ConfigError);
}

TEST_CASE("threshold_truncate recovers a noiseless rank-3 matrix") {
    // sigma_3 = 0.5 exactly.
    const DenseMatrix q = oracle::random_lowrank(12, 9, 3, 5);
    auto f = svd(q);
    const DenseMatrix scaled = q * (0.5 / f.singular_values(2));
    f = svd(scaled);
    const auto t = threshold_truncate(f, 0.25);
    CHECK(t.rank == 3);
    CHECK(oracle::sup(t.estimate - scaled) < 1e-10);
}

TEST_CASE("beta strictly between sigma_{d+1} and sigma_d gives d") {
    for (int d = 1; d <= 6; ++d) {
        const DenseMatrix q = oracle::random_lowrank(20, 15, d, 100 + d);
        const auto f = svd(q);
        const double beta = 0.5 * (f.singular_values(d - 1) + f.singular_values(d));
        CHECK(threshold_truncate(f, beta).rank == d);
    }
}

TEST_CASE("exact leverage scores") {
    const auto id = leverage_scores_exact(DenseMatrix::Identity(4, 4), 4);
    CHECK(id.left.isApproxToConstant(0.25, 1e-12));
    CHECK(id.right.isApproxToConstant(0.25, 1e-12));
    CHECK(id.source == ScoreSource::exact);

    DenseMatrix row = DenseMatrix::Zero(6, 5);
    row.row(2) << 1.0, -2.0, 0.5, 3.0, 1.0;
    const auto one = leverage_scores_exact(row, 1);
    CHECK(one.left(2) == doctest::Approx(1.0));
    CHECK(one.left.sum() == doctest::Approx(1.0));

    const DenseMatrix q = oracle::random_lowrank(50, 40, 3, 7);
    const auto prof = leverage_scores_exact(q, 3);
    CHECK(std::abs(prof.left.sum() - 1.0) < 1e-12);
    CHECK(std::abs(prof.right.sum() - 1.0) < 1e-12);
    CHECK((prof.left.array() >= 0.0).all());

    CHECK_THROWS_AS(leverage_scores_exact(q, 4), ConfigError);
    CHECK_THROWS_AS(leverage_scores_exact(q, 0), ConfigError);
}

TEST_CASE("diagnostics: spikiness extremes and toy bounds") {
    const auto ones = diagnostics(DenseMatrix::Ones(4, 4));
    CHECK(ones.spikiness == doctest::Approx(1.0));
    CHECK(ones.rank_numeric == 1);

    DenseMatrix spike = DenseMatrix::Zero(10, 10);
    spike(0, 0) = 1.0;
    const auto sp = diagnostics(spike);
    CHECK(sp.spikiness == doctest::Approx(10.0));
    CHECK(sp.coherence == doctest::Approx(std::sqrt(10.0)));

    CHECK_THROWS_AS(diagnostics(DenseMatrix::Zero(3, 3)), ConfigError);
}

TEST_CASE("diagnostics invariants on random matrices") {
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + trial % 5;
        const DenseMatrix q = oracle::random_lowrank(15 + trial, 12, d, 300 + trial);
        const auto diag = diagnostics(q);
        CAPTURE(trial);
        CHECK(diag.rank_numeric == d);
        CHECK(diag.spikiness >= 1.0 - 1e-12);
        CHECK(diag.spikiness <= std::sqrt(double(q.size())) + 1e-12);
        CHECK(diag.spikiness <= diag.coherence * diag.coherence * d + 1e-9);

        // Approximate-rank residual bracket, on a full-rank perturbation.
        DenseMatrix noisy = q + 0.01 * DenseMatrix::Random(q.rows(), q.cols());
        const auto f = svd(noisy);
        for (int k = 1; k < std::min<int>(6, f.singular_values.size()); ++k) {
            const auto dk = diagnostics(noisy, k);
            const double sigma_next = f.singular_values(k);
            CHECK(dk.approx_residual <= sigma_next + 1e-12);
            CHECK(sigma_next <= std::sqrt(double(q.size())) * dk.approx_residual + 1e-12);
        }
    }
}

TEST_CASE("condition number of a diagonal matrix") {
    const DenseMatrix m = Eigen::Vector3d(8.0, 2.0, 0.5).asDiagonal();
    CHECK(condition_number(m) == doctest::Approx(16.0));
}

TEST_CASE("pseudo-inverse") {
    DenseMatrix m(2, 2);
    m << 2.0, 1.0, 1.0, 3.0;
    CHECK((pseudo_inverse(m) - m.inverse()).cwiseAbs().maxCoeff() < 1e-12);

    const DenseMatrix d = Eigen::Vector2d(2.0, 1e-14).asDiagonal();
    const DenseMatrix di = pseudo_inverse(d, std::nullopt, 1e-10);
    CHECK(di(0, 0) == doctest::Approx(0.5));
    CHECK(di(1, 1) == 0.0);

    const DenseMatrix r2 = oracle::random_lowrank(5, 5, 2, 9);
    const DenseMatrix r2i = pseudo_inverse(r2);
    CHECK(oracle::sup(r2 * r2i * r2 - r2) < 1e-8);

    CHECK(pseudo_inverse(DenseMatrix::Zero(3, 2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pseudo_inverse(DenseMatrix::Zero(3, 2)).rows() == 2);
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identities") {
    std::srand(11);
    for (int t = 0; t < 10; ++t) {
        const DenseMatrix a = DenseMatrix::Random(6 + t, 4 + t % 3);
        const DenseMatrix x = pseudo_inverse(a);
        CHECK(oracle::sup(a * x * a - a) < 1e-8);
        CHECK(oracle::sup(x * a * x - x) < 1e-8);
        CHECK(oracle::sup((a * x).transpose() - a * x) < 1e-8);
        CHECK(oracle::sup((x * a).transpose() - x * a) < 1e-8);
    }
}

TEST_CASE("rank cap drops trailing components") {
    const DenseMatrix m = Eigen::Vector3d(4.0, 2.0, 1.0).asDiagonal();
    const DenseMatrix x = pseudo_inverse(m, 2);
    CHECK(x(0, 0) == doctest::Approx(0.25));
    CHECK(x(1, 1) == doctest::Approx(0.5));
    CHECK(x(2, 2) == 0.0);
}

TEST_CASE("row squared norms") {
    DenseMatrix m(2, 3);
    m << 1, 2, 2, 0, 3, 4;
    const Vector n = row_squared_norms(m);
    CHECK(n(0) == doctest::Approx(9.0));
    CHECK(n(1) == doctest::Approx(25.0));
}
