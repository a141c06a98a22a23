#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maxdiff/error.hpp"
#include "maxdiff/linalg.hpp"

namespace maxdiff {

enum class CovForm { Factor, Explicit };

/// A Gaussian law N(mu, Sigma), given either through a factor Gamma
/// (Sigma = Gamma Gamma^T, possibly rank deficient) or an explicit PSD Sigma.
///
/// Construction validates the law and precomputes the covariance and the
/// sampling factor; the object is immutable afterwards.
class CovSpec {
public:
    static CovSpec factor(Matrix gamma, Vector mu) {
        require(gamma.rows() >= 1 && gamma.cols() >= 1, ErrorCode::InvalidArgument,
                "factor matrix must be nonempty");
        require(mu.size() == gamma.rows(), ErrorCode::DimensionMismatch,
                "mean length does not match factor rows");
        require(all_finite(gamma) && mu.allFinite(), ErrorCode::NonFinite,
                "factor or mean has non-finite entries");
        CovSpec spec;
        spec.form_ = CovForm::Factor;
        spec.sigma_ = gamma * gamma.transpose();
        spec.factor_ = std::move(gamma);
        spec.mu_ = std::move(mu);
        spec.check_variances();
        return spec;
    }

    static CovSpec factor(Matrix gamma) {
        const auto p = gamma.rows();
        return factor(std::move(gamma), Vector::Zero(p));
    }

    static CovSpec explicit_cov(Matrix sigma, Vector mu) {
        require(sigma.rows() >= 1 && sigma.rows() == sigma.cols(), ErrorCode::DimensionMismatch,
                "covariance must be a nonempty square matrix");
        require(mu.size() == sigma.rows(), ErrorCode::DimensionMismatch,
                "mean length does not match covariance");
        require(all_finite(sigma) && mu.allFinite(), ErrorCode::NonFinite,
                "covariance or mean has non-finite entries");
        require(max_abs_asymmetry(sigma) <= kSymmetryTol, ErrorCode::NotSymmetric,
                "covariance is not symmetric within 1e-10");
        CovSpec spec;
        spec.form_ = CovForm::Explicit;
        spec.sigma_ = std::move(sigma);
        spec.mu_ = std::move(mu);
        spec.check_variances();
        spec.factor_ = sqrt_factor(spec.sigma_);
        return spec;
    }

    static CovSpec explicit_cov(Matrix sigma) {
        const auto p = sigma.rows();
        return explicit_cov(std::move(sigma), Vector::Zero(p));
    }

    CovForm form() const noexcept { return form_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma_.rows()); }
    /// Columns of the sampling factor (d for Factor form, numerical rank for Explicit).
    std::size_t rank_dim() const noexcept { return static_cast<std::size_t>(factor_.cols()); }

    const Matrix& sigma() const noexcept { return sigma_; }
    const Matrix& sampling_factor() const noexcept { return factor_; }
    const Vector& mu() const noexcept { return mu_; }
    double sd(std::size_t i) const { return std::sqrt(sigma_(idx(i), idx(i))); }
    double cov(std::size_t i, std::size_t j) const { return sigma_(idx(i), idx(j)); }

    /// Same covariance, means moved by a constant.
    CovSpec shifted(double c) const {
        CovSpec out = *this;
        out.mu_.array() += c;
        return out;
    }

    CovSpec with_mean(Vector mu) const {
        require(mu.size() == mu_.size(), ErrorCode::DimensionMismatch, "mean length mismatch");
        CovSpec out = *this;
        out.mu_ = std::move(mu);
        return out;
    }

    /// 64-bit FNV-1a digest of the defining data, as 16 hex digits.
    std::string hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const void* data, std::size_t n) {
            const auto* bytes = static_cast<const unsigned char*>(data);
            for (std::size_t k = 0; k < n; ++k) {
                h ^= bytes[k];
                h *= 1099511628211ULL;
            }
        };
        const int form = form_ == CovForm::Factor ? 1 : 2;
        mix(&form, sizeof form);
        const Matrix& def = form_ == CovForm::Factor ? factor_ : sigma_;
        const std::int64_t rows = def.rows(), cols = def.cols();
        mix(&rows, sizeof rows);
        mix(&cols, sizeof cols);
        for (Eigen::Index r = 0; r < def.rows(); ++r)
            for (Eigen::Index c = 0; c < def.cols(); ++c) {
                const double v = def(r, c);
                mix(&v, sizeof v);
            }
        mix(mu_.data(), sizeof(double) * static_cast<std::size_t>(mu_.size()));
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    CovSpec() = default;

    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    void check_variances() const {
        for (Eigen::Index i = 0; i < sigma_.rows(); ++i) {
            if (!(sigma_(i, i) > 0.0)) {
                fail(ErrorCode::ZeroVariance, "coordinate " + std::to_string(i) + " has variance " +
                                                  std::to_string(sigma_(i, i)));
            }
        }
    }

    CovForm form_ = CovForm::Explicit;
    Matrix sigma_;
    Matrix factor_;
    Vector mu_;
};

/// Two disjoint nonempty index sets covering [0, p).
class Partition {
public:
    Partition(IndexSet a, IndexSet b, std::size_t p) : a_(std::move(a)), b_(std::move(b)), p_(p) {
        require(!a_.empty() && !b_.empty(), ErrorCode::BadPartition, "both sides must be nonempty");
        require(a_.size() + b_.size() == p_, ErrorCode::BadPartition,
                "sides must cover [0, p) exactly once");
        std::vector<char> seen(p_, 0);
        for (const auto* side : {&a_, &b_}) {
            for (auto i : *side) {
                require(i < p_, ErrorCode::BadPartition, "index " + std::to_string(i) + " out of range");
                require(!seen[i], ErrorCode::BadPartition, "index " + std::to_string(i) + " repeated");
                seen[i] = 1;
            }
        }
    }

    /// A = [0, k), B = [k, p).
    static Partition split_at(std::size_t p, std::size_t k) {
        require(k >= 1 && k < p, ErrorCode::BadPartition, "split point must lie in [1, p)");
        IndexSet a(k), b(p - k);
        std::iota(a.begin(), a.end(), std::size_t{0});
        std::iota(b.begin(), b.end(), k);
        return Partition(std::move(a), std::move(b), p);
    }

    static Partition halves(std::size_t p) { return split_at(p, p / 2); }

    const IndexSet& a() const noexcept { return a_; }
    const IndexSet& b() const noexcept { return b_; }
    std::size_t dim() const noexcept { return p_; }
    Partition swapped() const { return Partition(b_, a_, p_); }

private:
    IndexSet a_;
    IndexSet b_;
    std::size_t p_;
};

// JSON document: {"form":"factor"|"explicit", "gamma":[[...]], "sigma":[[...]], "mu":[...]}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& field) {
    require(j.is_array() && !j.empty(), ErrorCode::ParseError, field + " must be a nonempty array");
    const auto rows = j.size();
    const auto cols = j.at(0).size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        require(j[r].is_array() && j[r].size() == cols, ErrorCode::ParseError,
                field + " row " + std::to_string(r) + " has wrong length");
        for (std::size_t c = 0; c < cols; ++c) {
            require(j[r][c].is_number(), ErrorCode::ParseError,
                    field + "[" + std::to_string(r) + "][" + std::to_string(c) + "] is not a number");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

inline nlohmann::json to_json(const CovSpec& spec) {
    nlohmann::json j;
    if (spec.form() == CovForm::Factor) {
        j["form"] = "factor";
        j["gamma"] = matrix_to_json(spec.sampling_factor());
    } else {
        j["form"] = "explicit";
        j["sigma"] = matrix_to_json(spec.sigma());
    }
    j["mu"] = std::vector<double>(spec.mu().data(), spec.mu().data() + spec.mu().size());
    return j;
}

inline CovSpec cov_spec_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("form"), ErrorCode::ParseError, "missing \"form\"");
    const auto form = j.at("form").get<std::string>();
    Matrix m;
    if (form == "factor") {
        require(j.contains("gamma"), ErrorCode::ParseError, "factor form needs \"gamma\"");
        m = matrix_from_json(j.at("gamma"), "gamma");
    } else if (form == "explicit") {
        require(j.contains("sigma"), ErrorCode::ParseError, "explicit form needs \"sigma\"");
        m = matrix_from_json(j.at("sigma"), "sigma");
    } else {
        fail(ErrorCode::ParseError, "unknown form \"" + form + "\"");
    }
    Vector mu = Vector::Zero(m.rows());
    if (j.contains("mu")) {
        const auto values = j.at("mu").get<std::vector<double>>();
        require(values.size() == static_cast<std::size_t>(m.rows()), ErrorCode::DimensionMismatch,
                "\"mu\" length does not match dimension");
        mu = Eigen::Map<const Vector>(values.data(), m.rows());
    }
    return form == "factor" ? CovSpec::factor(std::move(m), std::move(mu))
                            : CovSpec::explicit_cov(std::move(m), std::move(mu));
}

}  // namespace maxdiff
