#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string_view>

namespace lora::linalg {

/// S x A real matrix; rows index states, columns index actions.
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Throws ConfigError when the matrix is empty or has a non-finite entry.
void require_finite(const DenseMatrix& m, std::string_view what);

double max_abs(const DenseMatrix& m);
double frobenius(const DenseMatrix& m);

/// Thin SVD m = U diag(sigma) W^T with min(S, A) components, sigma descending.
struct SvdResult {
    Vector singular_values;
    DenseMatrix left;   // S x r
    DenseMatrix right;  // A x r
};

SvdResult svd(const DenseMatrix& m);

DenseMatrix reconstruct(const SvdResult& f, int rank);

/// Default numeric-rank cut: max(S, A) * eps * sigma_1.
double default_rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma1);

/// Number of singular values strictly above `tol` (default cut when absent).
int numeric_rank(const SvdResult& f, std::optional<double> tol = std::nullopt);

/// Hard singular-value thresholding at beta: keeps every component with sigma >= beta.
struct Truncation {
    int rank = 0;
    DenseMatrix estimate;
    DenseMatrix left;   // S x rank
    DenseMatrix right;  // A x rank
    bool empty() const noexcept { return rank == 0; }
};

Truncation threshold_truncate(const SvdResult& f, double beta);

enum class ScoreSource { exact, estimated };

/// Left/right leverage scores, each side normalized to sum to one.
struct LeverageProfile {
    Vector left;
    Vector right;
    int rank = 0;
    ScoreSource source = ScoreSource::exact;
};

/// l_s = ||U_{s,:}||^2 / d and r_a = ||W_{a,:}||^2 / d from the top-d singular blocks.
LeverageProfile leverage_scores_exact(const DenseMatrix& m, int d);
LeverageProfile leverage_scores_exact(const SvdResult& f, int d);

/// Squared Euclidean norm of every row.
Vector row_squared_norms(const DenseMatrix& m);

struct MatrixDiagnostics {
    int rank_numeric = 0;
    int rank_used = 0;
    double condition_number = 0.0;
    double spikiness = 0.0;
    double coherence = 0.0;
    // ||m - m_d||_inf for the rank used; zero when that rank is full.
    double approx_residual = 0.0;
    Vector singular_values;
};

MatrixDiagnostics diagnostics(const DenseMatrix& m, std::optional<int> d = std::nullopt,
                              std::optional<double> tol = std::nullopt);

/// sigma_1 / sigma_d with d the numeric rank.
double condition_number(const DenseMatrix& m);

/// Moore-Penrose pseudo-inverse. Components with sigma <= rtol * sigma_1, or
/// past `rank_cap`, are dropped before inversion.
DenseMatrix pseudo_inverse(const DenseMatrix& m, std::optional<int> rank_cap = std::nullopt,
                           double rtol = 1e-10);

}  // namespace lora::linalg
