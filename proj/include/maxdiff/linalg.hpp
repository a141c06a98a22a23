#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "maxdiff/error.hpp"

namespace maxdiff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<std::size_t>;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdTol = 1e-8;
inline constexpr double kRankTol = 1e-10;

inline double max_abs_asymmetry(const Matrix& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline double max_diagonal(const Matrix& m) {
    return m.rows() == 0 ? 0.0 : m.diagonal().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& sigma) {
    require(sigma.rows() == sigma.cols() && sigma.rows() > 0, ErrorCode::DimensionMismatch,
            "min_eigenvalue needs a nonempty square matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma, Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

/// Eigendecomposition-based square-root factor L (p x r) with L L^T = sigma.
///
/// Eigenvalues below kRankTol * max(1, lambda_max) are treated as zero and their
/// eigenvectors dropped, so r is the numerical rank. A genuinely negative spectrum
/// (lambda_min < -kPsdTol * max diag) is rejected.
inline Matrix sqrt_factor(const Matrix& sigma) {
    require(sigma.rows() == sigma.cols() && sigma.rows() > 0, ErrorCode::DimensionMismatch,
            "sqrt_factor needs a nonempty square matrix");
    require(all_finite(sigma), ErrorCode::NonFinite, "covariance has non-finite entries");
    require(max_abs_asymmetry(sigma) <= kSymmetryTol, ErrorCode::NotSymmetric,
            "covariance is not symmetric");
    const Matrix sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    require(solver.info() == Eigen::Success, ErrorCode::NotPSD, "eigensolver did not converge");
    const Vector& lambda = solver.eigenvalues();
    const double scale = std::max(1.0, max_diagonal(sym));
    if (lambda(0) < -kPsdTol * scale) {
        fail(ErrorCode::NotPSD, "smallest eigenvalue " + std::to_string(lambda(0)) +
                                    " below tolerance");
    }
    const double cutoff = kRankTol * std::max(1.0, lambda(lambda.size() - 1));
    std::vector<Eigen::Index> kept;
    for (Eigen::Index k = lambda.size() - 1; k >= 0; --k) {
        if (lambda(k) > cutoff) kept.push_back(k);
    }
    Matrix factor(sym.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
        const auto k = kept[c];
        factor.col(static_cast<Eigen::Index>(c)) = solver.eigenvectors().col(k) * std::sqrt(lambda(k));
    }
    return factor;
}

inline Matrix submatrix(const Matrix& m, const IndexSet& rows, const IndexSet& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                m(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
        }
    }
    return out;
}

inline Matrix select_rows(const Matrix& m, const IndexSet& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

}  // namespace maxdiff
