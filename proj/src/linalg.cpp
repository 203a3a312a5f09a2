#include "lora/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lora/error.hpp"
#include "lora/simd/kernels.hpp"

namespace lora::linalg {

namespace {

std::string dims(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void require_finite(const DenseMatrix& m, std::string_view what) {
    if (m.rows() < 1 || m.cols() < 1)
        throw ConfigError(std::string(what) + ": matrix must be non-empty, got " + dims(m));
    if (!m.allFinite()) throw ConfigError(std::string(what) + ": matrix has non-finite entries");
}

double max_abs(const DenseMatrix& m) {
    return simd::max_abs({m.data(), static_cast<std::size_t>(m.size())});
}

double frobenius(const DenseMatrix& m) {
    return std::sqrt(simd::sum_squares({m.data(), static_cast<std::size_t>(m.size())}));
}

SvdResult svd(const DenseMatrix& m) {
    require_finite(m, "svd");
    Eigen::BDCSVD<DenseMatrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("svd did not converge for " + dims(m) + " matrix");
    return SvdResult{dec.singularValues(), dec.matrixU(), dec.matrixV()};
}

DenseMatrix reconstruct(const SvdResult& f, int rank) {
    rank = std::clamp(rank, 0, static_cast<int>(f.singular_values.size()));
    return f.left.leftCols(rank) * f.singular_values.head(rank).asDiagonal() *
           f.right.leftCols(rank).transpose();
}

double default_rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma1) {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
           sigma1;
}

int numeric_rank(const SvdResult& f, std::optional<double> tol) {
    if (f.singular_values.size() == 0) return 0;
    const double cut =
        tol.value_or(default_rank_tolerance(f.left.rows(), f.right.rows(), f.singular_values(0)));
    int r = 0;
    for (Eigen::Index i = 0; i < f.singular_values.size(); ++i)
        if (f.singular_values(i) > cut) ++r;
    return r;
}

Truncation threshold_truncate(const SvdResult& f, double beta) {
    if (!(beta >= 0.0)) throw ConfigError("threshold_truncate: beta must be >= 0");
    int kept = 0;
    for (Eigen::Index i = 0; i < f.singular_values.size(); ++i)
        if (f.singular_values(i) >= beta) ++kept;
    Truncation t;
    t.rank = kept;
    t.left = f.left.leftCols(kept);
    t.right = f.right.leftCols(kept);
    t.estimate = reconstruct(f, kept);
    return t;
}

Vector row_squared_norms(const DenseMatrix& m) {
    // Row-major copy so each row is contiguous for the kernel.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    Vector out(m.rows());
    const auto cols = static_cast<std::size_t>(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = simd::sum_squares({rm.row(i).data(), cols});
    return out;
}

LeverageProfile leverage_scores_exact(const SvdResult& f, int d) {
    const int rank = numeric_rank(f);
    if (d < 1 || d > rank)
        throw ConfigError("leverage_scores_exact: rank " + std::to_string(d) +
                          " outside [1, numeric rank " + std::to_string(rank) + "]");
    LeverageProfile p;
    p.rank = d;
    p.source = ScoreSource::exact;
    p.left = row_squared_norms(f.left.leftCols(d)) / static_cast<double>(d);
    p.right = row_squared_norms(f.right.leftCols(d)) / static_cast<double>(d);
    return p;
}

LeverageProfile leverage_scores_exact(const DenseMatrix& m, int d) {
    return leverage_scores_exact(svd(m), d);
}

MatrixDiagnostics diagnostics(const DenseMatrix& m, std::optional<int> d, std::optional<double> tol) {
    require_finite(m, "diagnostics");
    const double fro = frobenius(m);
    if (fro == 0.0) throw ConfigError("diagnostics: zero matrix has undefined spikiness");

    const SvdResult f = svd(m);
    MatrixDiagnostics out;
    out.singular_values = f.singular_values;
    out.rank_numeric = numeric_rank(f, tol);
    const int full = static_cast<int>(f.singular_values.size());
    const int used = d.value_or(out.rank_numeric);
    if (used < 1 || used > full)
        throw ConfigError("diagnostics: rank " + std::to_string(used) + " outside [1, " +
                          std::to_string(full) + "]");
    out.rank_used = used;
    out.condition_number = f.singular_values(0) / f.singular_values(used - 1);

    const auto S = static_cast<double>(m.rows());
    const auto A = static_cast<double>(m.cols());
    out.spikiness = std::sqrt(S * A) * max_abs(m) / fro;

    const double u_max = row_squared_norms(f.left.leftCols(used)).maxCoeff();
    const double w_max = row_squared_norms(f.right.leftCols(used)).maxCoeff();
    out.coherence = std::max(std::sqrt(S / used * u_max), std::sqrt(A / used * w_max));

    out.approx_residual = used < full ? max_abs(m - reconstruct(f, used)) : 0.0;
    return out;
}

double condition_number(const DenseMatrix& m) {
    const SvdResult f = svd(m);
    const int r = numeric_rank(f);
    if (r == 0) return std::numeric_limits<double>::infinity();
    return f.singular_values(0) / f.singular_values(r - 1);
}

DenseMatrix pseudo_inverse(const DenseMatrix& m, std::optional<int> rank_cap, double rtol) {
    if (!(rtol > 0.0)) throw ConfigError("pseudo_inverse: rtol must be > 0");
    require_finite(m, "pseudo_inverse");
    const SvdResult f = svd(m);
    DenseMatrix out = DenseMatrix::Zero(m.cols(), m.rows());
    if (f.singular_values.size() == 0 || f.singular_values(0) == 0.0) return out;
    const double cut = rtol * f.singular_values(0);
    int keep = 0;
    const int cap = rank_cap.value_or(static_cast<int>(f.singular_values.size()));
    while (keep < cap && keep < f.singular_values.size() && f.singular_values(keep) > cut) ++keep;
    if (keep == 0) return out;
    out = f.right.leftCols(keep) * f.singular_values.head(keep).cwiseInverse().asDiagonal() *
          f.left.leftCols(keep).transpose();
    return out;
}

}  // namespace lora::linalg
