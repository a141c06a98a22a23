#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/linalg.hpp"

namespace maxdiff {

inline constexpr double kPerfectCorrTol = 1e-9;
inline constexpr double kConditionTol = 1e-10;
inline constexpr double kBlockRcondMin = 1e-12;

inline const Matrix& explicit_cov(const CovSpec& spec) { return spec.sigma(); }

inline double correlation(const CovSpec& spec, std::size_t i, std::size_t j) {
    return spec.cov(i, j) / (spec.sd(i) * spec.sd(j));
}

/// Correlation matrix with an exactly unit diagonal.
inline Matrix correlation_matrix(const CovSpec& spec) {
    const auto p = static_cast<Eigen::Index>(spec.dim());
    Matrix r(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            r(i, j) = i == j ? 1.0 : correlation(spec, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return r;
}

inline void check_dims(const CovSpec& spec, const Partition& part) {
    require(spec.dim() == part.dim(), ErrorCode::DimensionMismatch,
            "partition dimension " + std::to_string(part.dim()) + " vs spec dimension " +
                std::to_string(spec.dim()));
}

/// Largest correlation between a coordinate of A and a coordinate of B, clamped to [-1, 1].
inline double rho_bar(const CovSpec& spec, const Partition& part) {
    check_dims(spec, part);
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : part.a())
        for (auto j : part.b()) best = std::max(best, correlation(spec, i, j));
    return std::clamp(best, -1.0, 1.0);
}

struct ConditionReport {
    bool cond_a_holds = false;
    bool cond_b_holds = false;
    double c_a = 0.0;  // min_{j in B, i in A} (sigma_j - sigma_ij / sigma_j)
    double c_b = 0.0;  // min_{i in A, j in B} (sigma_i - sigma_ij / sigma_i)
    double c_ab = std::numeric_limits<double>::quiet_NaN();
    std::string s_set;  // "B", "A", "A,B" or ""
    double rho_bar = 0.0;
    bool has_perfect_cross_corr = false;

    bool any() const noexcept { return cond_a_holds || cond_b_holds; }
};

inline ConditionReport check_conditions(const CovSpec& spec, const Partition& part) {
    check_dims(spec, part);
    const auto& a = part.a();
    const auto& b = part.b();

    auto within_ok = [&](const IndexSet& side) {
        double worst = -std::numeric_limits<double>::infinity();
        for (auto j : side) {
            const double var = spec.cov(j, j);
            for (auto k : side) worst = std::max(worst, spec.cov(j, k) / var);
        }
        return worst <= 1.0 + kConditionTol;
    };
    // min over (own in side, other in opposite) of sigma_own - sigma_{own,other} / sigma_own
    auto gap = [&](const IndexSet& side, const IndexSet& other) {
        double best = std::numeric_limits<double>::infinity();
        for (auto j : side) {
            const double sd = spec.sd(j);
            for (auto i : other) best = std::min(best, sd - spec.cov(i, j) / sd);
        }
        return best;
    };

    ConditionReport r;
    r.c_a = gap(b, a);
    r.c_b = gap(a, b);
    r.cond_a_holds = within_ok(b) && r.c_a > 0.0;
    r.cond_b_holds = within_ok(a) && r.c_b > 0.0;
    if (r.cond_a_holds && r.cond_b_holds) {
        r.c_ab = std::max(r.c_a, r.c_b);
        r.s_set = "A,B";
    } else if (r.cond_a_holds) {
        r.c_ab = r.c_a;
        r.s_set = "B";
    } else if (r.cond_b_holds) {
        r.c_ab = r.c_b;
        r.s_set = "A";
    }
    r.rho_bar = rho_bar(spec, part);
    double max_abs = 0.0;
    for (auto i : a)
        for (auto j : b) max_abs = std::max(max_abs, std::abs(correlation(spec, i, j)));
    r.has_perfect_cross_corr = max_abs >= 1.0 - kPerfectCorrTol;
    return r;
}

struct ViolationStats {
    IndexSet v_a;
    IndexSet v_b;
    double nu_a = 0.0;
    double nu_b = 0.0;
    double m_a = std::numeric_limits<double>::quiet_NaN();
    double m_b = std::numeric_limits<double>::quiet_NaN();
};

/// Coordinates whose own gap sigma_i - max_{other} sigma_{i,other} / sigma_i is <= 0.
inline ViolationStats violation_stats(const CovSpec& spec, const Partition& part) {
    check_dims(spec, part);
    auto scan = [&](const IndexSet& side, const IndexSet& other, IndexSet& v, double& nu, double& m) {
        double total = 0.0;
        for (auto i : side) {
            const double sd = spec.sd(i);
            double worst = -std::numeric_limits<double>::infinity();
            for (auto j : other) worst = std::max(worst, spec.cov(i, j) / sd);
            const double q = sd - worst;
            if (q <= 0.0) {
                v.push_back(i);
                total += q;
            }
        }
        nu = static_cast<double>(v.size()) / static_cast<double>(side.size());
        if (!v.empty()) m = total / static_cast<double>(v.size());
    };
    ViolationStats s;
    scan(part.a(), part.b(), s.v_a, s.nu_a, s.m_a);
    scan(part.b(), part.a(), s.v_b, s.nu_b, s.m_b);
    return s;
}

struct ResidualCov {
    Matrix a;  // Sigma_A - Sigma_AB Sigma_B^{-1} Sigma_BA
    Matrix b;  // Sigma_B - Sigma_BA Sigma_A^{-1} Sigma_AB
};

/// Schur complements of each block. Requires both diagonal blocks to be invertible
/// (reciprocal condition number and LDLT pivot ratio >= 1e-12); no pseudo-inverse fallback.
inline ResidualCov residual_cov(const CovSpec& spec, const Partition& part) {
    check_dims(spec, part);
    const Matrix& sigma = spec.sigma();
    const Matrix saa = submatrix(sigma, part.a(), part.a());
    const Matrix sbb = submatrix(sigma, part.b(), part.b());
    const Matrix sab = submatrix(sigma, part.a(), part.b());

    auto schur = [](const Matrix& own, const Matrix& cross, const Matrix& other, const char* which) {
        Eigen::LDLT<Matrix> ldlt(other);
        // rcond() alone misses exact singularity (zero pivots are solved as pseudo-inverse),
        // so the pivot ratio of D is checked too
        const Vector d = ldlt.vectorD().cwiseAbs();
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() >= kBlockRcondMin) ||
            !(d.minCoeff() >= kBlockRcondMin * d.maxCoeff())) {
            fail(ErrorCode::SingularBlock, std::string("block ") + which + " is not invertible");
        }
        Matrix s = own - cross * ldlt.solve(cross.transpose());
        return Matrix(0.5 * (s + s.transpose()));
    };
    ResidualCov out;
    out.a = schur(saa, sab, sbb, "B");
    out.b = schur(sbb, sab.transpose(), saa, "A");
    return out;
}

}  // namespace maxdiff
