#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff {

enum class DesignKind {
    HomogLowrank,       // unit-norm random factor rows, A = first half
    HomogOverlap,       // as above with K rows of Gamma_B copied from Gamma_A
    HeterogCondA,       // Gamma_B rows unit norm, Gamma_A scaled by 1 / max row norm
    HeterogViolation,   // equicorrelated (rho) with a per-side standard-deviation profile
    FullrankEquicorr,   // unit variances, all correlations rho
    Table1,             // diag-normalized Gamma Gamma^T + I with Gamma p x p/10
    ExchangeableOverlap,// exchangeable law, sides [m] and [p] \ [m - k] via duplicated coordinates
    K0Split,            // unit variances, A = [k0], B = rest
};

inline DesignKind design_kind_from_string(const std::string& s) {
    static const std::pair<const char*, DesignKind> names[] = {
        {"homog_lowrank", DesignKind::HomogLowrank},
        {"homog_overlap", DesignKind::HomogOverlap},
        {"heterog_condA", DesignKind::HeterogCondA},
        {"heterog_violation", DesignKind::HeterogViolation},
        {"fullrank_equicorr", DesignKind::FullrankEquicorr},
        {"table1", DesignKind::Table1},
        {"exchangeable_overlap", DesignKind::ExchangeableOverlap},
        {"k0_split", DesignKind::K0Split},
    };
    for (const auto& [name, kind] : names)
        if (s == name) return kind;
    fail(ErrorCode::BadConfig, "unknown design kind \"" + s + "\"");
}

inline std::string to_string(DesignKind kind) {
    switch (kind) {
        case DesignKind::HomogLowrank: return "homog_lowrank";
        case DesignKind::HomogOverlap: return "homog_overlap";
        case DesignKind::HeterogCondA: return "heterog_condA";
        case DesignKind::HeterogViolation: return "heterog_violation";
        case DesignKind::FullrankEquicorr: return "fullrank_equicorr";
        case DesignKind::Table1: return "table1";
        case DesignKind::ExchangeableOverlap: return "exchangeable_overlap";
        case DesignKind::K0Split: return "k0_split";
    }
    return "unknown";
}

struct DesignConfig {
    DesignKind kind = DesignKind::HomogLowrank;
    std::size_t p = 400;
    std::size_t d = 40;          // factor dimension for low-rank kinds; 0 means independent coordinates
    std::size_t overlap_k = 0;   // K for homog_overlap, k for exchangeable_overlap
    std::size_t k0 = 0;
    double rho = 0.9;
    int variance_profile = 0;    // heterog_violation: 0 benchmark, 1 (nu = 0.75), 2 (nu = 0.875)
    bool exponential_mean = false;
    std::uint64_t seed = 1;
};

inline nlohmann::json to_json(const DesignConfig& c) {
    return {{"kind", to_string(c.kind)}, {"p", c.p},   {"d", c.d},
            {"overlap_k", c.overlap_k},  {"k0", c.k0}, {"rho", c.rho},
            {"variance_profile", c.variance_profile},
            {"mean", c.exponential_mean ? "exponential" : "zero"},
            {"seed", c.seed}};
}

/// Fields absent from the document keep the values already in `base`.
inline DesignConfig design_config_from_json(const nlohmann::json& j, DesignConfig base = {}) {
    try {
        if (j.contains("kind")) base.kind = design_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("p")) base.p = j.at("p").get<std::size_t>();
        if (j.contains("d")) base.d = j.at("d").get<std::size_t>();
        if (j.contains("overlap_k")) base.overlap_k = j.at("overlap_k").get<std::size_t>();
        if (j.contains("k0")) base.k0 = j.at("k0").get<std::size_t>();
        if (j.contains("rho")) base.rho = j.at("rho").get<double>();
        if (j.contains("variance_profile")) base.variance_profile = j.at("variance_profile").get<int>();
        if (j.contains("mean")) {
            const auto m = j.at("mean").get<std::string>();
            require(m == "zero" || m == "exponential", ErrorCode::BadConfig, "mean must be zero|exponential");
            base.exponential_mean = m == "exponential";
        }
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::BadConfig, e.what());
    }
    return base;
}

struct Design {
    std::string id;
    DesignConfig config;
    CovSpec spec;
    Partition part;
    std::optional<double> exchangeable_rho;  // set for exchangeable_overlap
};

namespace detail {

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Xoshiro256& rng) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
    return m;
}

inline void normalize_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).norm();
}

/// Row i is sd_i (sqrt(rho) Z_0 + sqrt(1 - rho) Z_{i+1}); correlation rho >= 0 between all rows.
inline Matrix equicorr_factor(const std::vector<double>& sd, double rho) {
    const auto p = static_cast<Eigen::Index>(sd.size());
    Matrix f = Matrix::Zero(p, p + 1);
    for (Eigen::Index i = 0; i < p; ++i) {
        f(i, 0) = sd[static_cast<std::size_t>(i)] * std::sqrt(rho);
        f(i, i + 1) = sd[static_cast<std::size_t>(i)] * std::sqrt(1.0 - rho);
    }
    return f;
}

inline Vector design_mean(const DesignConfig& c, std::size_t p, Xoshiro256& rng) {
    Vector mu = Vector::Zero(static_cast<Eigen::Index>(p));
    if (c.exponential_mean)
        for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = -std::log(rng.uniform());
    return mu;
}

/// Per-side standard deviations of the violation designs.
inline std::vector<double> violation_profile(std::size_t half, int profile) {
    std::vector<double> sd(half, 1.0);
    if (profile == 0) return sd;
    const std::size_t p = 2 * half;
    const std::size_t low = profile == 1 ? p / 4 : 3 * p / 8;
    const std::size_t mid = profile == 1 ? p / 8 : p / 16;
    const double high = profile == 1 ? 10.0 : 15.0;
    for (std::size_t i = 0; i < half; ++i) sd[i] = i < low ? 0.9 : (i < low + mid ? 1.0 : high);
    return sd;
}

}  // namespace detail

inline void validate(const DesignConfig& c) {
    auto need = [](bool ok, const std::string& what) { require(ok, ErrorCode::BadConfig, what); };
    switch (c.kind) {
        case DesignKind::HomogLowrank:
        case DesignKind::HeterogCondA:
            need(c.p >= 2 && c.p % 2 == 0, "p must be even and >= 2");
            need(c.d >= 1 && c.d <= c.p, "d must lie in [1, p]");
            break;
        case DesignKind::HomogOverlap:
            need(c.p >= 2 && c.p % 2 == 0, "p must be even and >= 2");
            need(c.d >= 1 && c.d <= c.p, "d must lie in [1, p]");
            need(c.overlap_k <= c.p / 2, "overlap_k must be <= p/2");
            break;
        case DesignKind::HeterogViolation:
            need(c.p >= 2 && c.p % 2 == 0, "p must be even and >= 2");
            need(c.variance_profile >= 0 && c.variance_profile <= 2, "variance_profile must be 0, 1 or 2");
            need(c.variance_profile == 0 || c.p % 16 == 0, "variance profiles need p divisible by 16");
            need(c.rho >= 0.0 && c.rho < 1.0, "rho must lie in [0, 1)");
            break;
        case DesignKind::FullrankEquicorr:
            need(c.p >= 2, "p must be >= 2");
            need(c.rho < 1.0 && c.rho > -1.0 / static_cast<double>(c.p - 1),
                 "rho must lie in (-1/(p-1), 1)");
            break;
        case DesignKind::Table1:
            need(c.p >= 20 && c.p % 2 == 0, "p must be even and >= 20 (Gamma has p/10 columns)");
            break;
        case DesignKind::ExchangeableOverlap: {
            const std::size_t k = c.overlap_k;
            need(k >= 1 && (c.p + k) % 2 == 0 && k < (c.p + k) / 2, "need p = 2m - k with 1 <= k < m");
            need(c.rho >= 0.0 && c.rho < 1.0, "rho must lie in [0, 1)");
            break;
        }
        case DesignKind::K0Split:
            need(c.k0 >= 1 && c.k0 < c.p, "k0 must lie in [1, p)");
            need(c.d <= c.p, "d must be <= p (0 = independent)");
            break;
    }
}

inline std::string design_id(const DesignConfig& c) {
    std::string id = to_string(c.kind) + "_p" + std::to_string(c.p);
    switch (c.kind) {
        case DesignKind::HomogLowrank:
        case DesignKind::HeterogCondA: id += "_d" + std::to_string(c.d); break;
        case DesignKind::HomogOverlap: id += "_d" + std::to_string(c.d) + "_K" + std::to_string(c.overlap_k); break;
        case DesignKind::HeterogViolation: id += "_v" + std::to_string(c.variance_profile); break;
        case DesignKind::FullrankEquicorr: id += "_rho" + std::to_string(c.rho); break;
        case DesignKind::Table1: break;
        case DesignKind::ExchangeableOverlap: id += "_k" + std::to_string(c.overlap_k); break;
        case DesignKind::K0Split: id += "_k0" + std::to_string(c.k0) + "_d" + std::to_string(c.d); break;
    }
    if (c.exponential_mean) id += "_expmean";
    return id;
}

/// Builds the Gaussian law and partition of a design. Deterministic in cfg.seed.
inline Design gen_design(const DesignConfig& cfg) {
    validate(cfg);
    Xoshiro256 rng(split_seed(cfg.seed, 0xde5167));
    const std::size_t p = cfg.p;
    const std::size_t half = p / 2;
    std::optional<CovSpec> spec;
    std::optional<Partition> part;
    std::optional<double> ex_rho;
    switch (cfg.kind) {
        case DesignKind::HomogLowrank: {
            Matrix g = detail::gaussian_matrix(p, cfg.d, rng);
            detail::normalize_rows(g);
            spec = CovSpec::factor(std::move(g), detail::design_mean(cfg, p, rng));
            part = Partition::halves(p);
            break;
        }
        case DesignKind::HomogOverlap: {
            Matrix g = detail::gaussian_matrix(p, cfg.d, rng);
            detail::normalize_rows(g);
            // the first K rows of Gamma_B repeat the last K rows of Gamma_A
            for (std::size_t k = 0; k < cfg.overlap_k; ++k)
                g.row(static_cast<Eigen::Index>(half + k)) = g.row(static_cast<Eigen::Index>(half - cfg.overlap_k + k));
            spec = CovSpec::factor(std::move(g), detail::design_mean(cfg, p, rng));
            part = Partition::halves(p);
            break;
        }
        case DesignKind::HeterogCondA: {
            Matrix g = detail::gaussian_matrix(p, cfg.d, rng);
            auto top = g.topRows(static_cast<Eigen::Index>(half));
            const double max_norm = top.rowwise().norm().maxCoeff();
            top /= max_norm;
            for (Eigen::Index r = static_cast<Eigen::Index>(half); r < g.rows(); ++r) g.row(r) /= g.row(r).norm();
            spec = CovSpec::factor(std::move(g), detail::design_mean(cfg, p, rng));
            part = Partition::halves(p);
            break;
        }
        case DesignKind::HeterogViolation: {
            std::vector<double> sd = detail::violation_profile(half, cfg.variance_profile);
            sd.insert(sd.end(), sd.begin(), sd.end());
            spec = CovSpec::factor(detail::equicorr_factor(sd, cfg.rho), detail::design_mean(cfg, p, rng));
            part = Partition::halves(p);
            break;
        }
        case DesignKind::FullrankEquicorr: {
            if (cfg.rho >= 0.0) {
                spec = CovSpec::factor(detail::equicorr_factor(std::vector<double>(p, 1.0), cfg.rho),
                                       detail::design_mean(cfg, p, rng));
            } else {
                Matrix s = Matrix::Constant(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p), cfg.rho);
                s.diagonal().setOnes();
                spec = CovSpec::explicit_cov(std::move(s), detail::design_mean(cfg, p, rng));
            }
            part = Partition::halves(p);
            break;
        }
        case DesignKind::Table1: {
            const std::size_t q = p / 10;
            Matrix g = detail::gaussian_matrix(p, q, rng);
            Matrix f = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p + q));
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(p); ++i) {
                const double scale = 1.0 / std::sqrt(g.row(i).squaredNorm() + 1.0);
                f.row(i).head(static_cast<Eigen::Index>(q)) = g.row(i) * scale;
                f(i, static_cast<Eigen::Index>(q) + i) = scale;
            }
            spec = CovSpec::factor(std::move(f), detail::design_mean(cfg, p, rng));
            part = Partition::halves(p);
            break;
        }
        case DesignKind::ExchangeableOverlap: {
            const std::size_t k = cfg.overlap_k;
            const std::size_t m = (p + k) / 2;
            // distinct variables 0..p-1; coordinates 0..m-1 form A, m..2m-1 form B,
            // and B's first k coordinates repeat variables m-k..m-1
            const Matrix base = detail::equicorr_factor(std::vector<double>(p, 1.0), cfg.rho);
            Matrix f(static_cast<Eigen::Index>(2 * m), base.cols());
            for (std::size_t c = 0; c < 2 * m; ++c) {
                const std::size_t var = c < m ? c : c - k;
                f.row(static_cast<Eigen::Index>(c)) = base.row(static_cast<Eigen::Index>(var));
            }
            spec = CovSpec::factor(std::move(f), detail::design_mean(cfg, 2 * m, rng));
            part = Partition::split_at(2 * m, m);
            ex_rho = cfg.rho;
            break;
        }
        case DesignKind::K0Split: {
            Matrix g;
            if (cfg.d == 0) {
                g = Matrix::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
            } else {
                g = detail::gaussian_matrix(p, cfg.d, rng);
                detail::normalize_rows(g);
            }
            spec = CovSpec::factor(std::move(g), detail::design_mean(cfg, p, rng));
            part = Partition::split_at(p, cfg.k0);
            break;
        }
    }
    return Design{design_id(cfg), cfg, std::move(*spec), std::move(*part), ex_rho};
}

/// The four-coordinate degenerate example: X = (xi1, xi2, (xi1 - xi2)/sqrt2, (xi1 + xi2)/sqrt2),
/// A = {0, 1}, B = {2, 3}. Unit variances and lambda_min(Sigma) = 0.
inline Design degenerate_design() {
    Matrix g(4, 2);
    const double r = 1.0 / std::sqrt(2.0);
    g << 1.0, 0.0, 0.0, 1.0, r, -r, r, r;
    DesignConfig cfg;
    cfg.p = 4;
    cfg.d = 2;
    return Design{"degenerate_four", cfg, CovSpec::factor(std::move(g)), Partition::halves(4), std::nullopt};
}

}  // namespace maxdiff
