#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/gaussian_core.hpp"
#include "maxdiff/levy.hpp"

namespace maxdiff {

/// Monte Carlo settings shared by every expected-maximum term of a report.
struct McConfig {
    std::size_t n_mc = 200000;
    std::uint64_t seed = 20240521;
};

/// A bound of the form constant * rate * eps. Computing value as (constant * rate) * eps
/// makes it exactly linear in eps: bound(2 eps) == 2 * bound(eps).
struct BoundTerm {
    double constant = 0.0;
    double rate = 0.0;  // expected-max term divided by the bound's denominator
    double epsilon = 0.0;
    std::string detail;

    double slope() const { return constant * rate; }
    double value() const { return slope() * epsilon; }
};

inline constexpr double kHomogeneousTol = 1e-9;

/// Common marginal standard deviation; throws HeterogeneousVariances otherwise.
inline double common_sd(const CovSpec& spec) {
    double lo = spec.sd(0), hi = spec.sd(0);
    for (std::size_t i = 1; i < spec.dim(); ++i) {
        lo = std::min(lo, spec.sd(i));
        hi = std::max(hi, spec.sd(i));
    }
    require((hi - lo) <= kHomogeneousTol * hi, ErrorCode::HeterogeneousVariances,
            "marginal standard deviations range over [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
    return hi;
}

/// Homogeneous-variance bound: min{E max_A |X-mu|/sigma, E max_B |X-mu|/sigma} * 7 eps / ((1 - rho_bar) sigma).
inline BoundTerm bound_thm21(const CovSpec& spec, const Partition& part, double epsilon, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    check_dims(spec, part);
    const double sigma = common_sd(spec);
    const double rho = rho_bar(spec, part);
    require(rho < 1.0 - kPerfectCorrTol, ErrorCode::PerfectCrossCorrelation,
            "rho_bar = " + std::to_string(rho) + "; the bound diverges");
    const auto e = expected_max_many(spec, {part.a(), part.b()}, mc.n_mc, mc.seed, MaxKind::AbsStandardized);
    const double emin = std::min(e[0].value, e[1].value);
    return BoundTerm{7.0, emin / ((1.0 - rho) * sigma), epsilon,
                     e[0].value <= e[1].value ? "min at A" : "min at B"};
}

struct Cor22Result {
    double value = 0.0;
    double best_delta = 0.0;
    double omega_delta = 0.0;
    double d_delta = 0.0;
    double first_term = 0.0;  // slope * eps, exactly linear in eps for a fixed delta
    double slope = 0.0;
    bool swapped = false;  // true when the minimum came from the B-side construction
    std::size_t n_delta_size = 0;
};

/// 50 log-spaced thresholds in [1e-3, 1 - 1e-3].
inline std::vector<double> default_delta_grid(std::size_t points = 50) {
    std::vector<double> grid(points);
    const double lo = std::log(1e-3), hi = std::log(1.0 - 1e-3);
    for (std::size_t k = 0; k < points; ++k)
        grid[k] = points == 1 ? std::exp(lo)
                              : std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
    return grid;
}

/// Bound allowing perfectly correlated cross pairs: infimum over delta of
/// min{E max_{A\N_delta}, E max_B} * 7 eps / (delta sigma) + 2 omega_delta,
/// evaluated for both orientations (A, B) and (B, A).
inline Cor22Result bound_cor22(const CovSpec& spec, const Partition& part, double epsilon,
                               const std::vector<double>& delta_grid, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    check_dims(spec, part);
    const double sigma = common_sd(spec);

    struct Candidate {
        double delta;
        bool swapped;
        IndexSet rest, near, other;
    };
    std::vector<Candidate> candidates;
    for (bool swapped : {false, true}) {
        const IndexSet& side = swapped ? part.b() : part.a();
        const IndexSet& other = swapped ? part.a() : part.b();
        std::vector<double> best_corr(side.size());
        for (std::size_t s = 0; s < side.size(); ++s) {
            double m = -1.0;
            for (auto j : other) m = std::max(m, correlation(spec, side[s], j));
            best_corr[s] = m;
        }
        for (double delta : delta_grid) {
            require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
            Candidate c{delta, swapped, {}, {}, other};
            for (std::size_t s = 0; s < side.size(); ++s)
                (best_corr[s] >= 1.0 - delta ? c.near : c.rest).push_back(side[s]);
            if (!c.rest.empty()) candidates.push_back(std::move(c));
        }
    }
    require(!candidates.empty(), ErrorCode::NoAdmissibleDelta,
            "every delta in the grid has N_delta equal to the whole side");

    std::map<IndexSet, std::size_t> abs_index, signed_index;
    std::vector<IndexSet> abs_sets, signed_sets;
    auto intern = [](std::map<IndexSet, std::size_t>& index, std::vector<IndexSet>& sets, const IndexSet& s) {
        auto [it, inserted] = index.emplace(s, sets.size());
        if (inserted) sets.push_back(s);
        return it->second;
    };
    for (const auto& c : candidates) {
        intern(abs_index, abs_sets, c.rest);
        intern(abs_index, abs_sets, c.other);
        if (!c.near.empty()) {
            intern(signed_index, signed_sets, c.rest);
            intern(signed_index, signed_sets, c.near);
        }
    }
    const auto abs_e = expected_max_many(spec, abs_sets, mc.n_mc, mc.seed, MaxKind::AbsStandardized);
    std::vector<ExpectedMax> signed_e;
    if (!signed_sets.empty()) signed_e = expected_max_many(spec, signed_sets, mc.n_mc, mc.seed, MaxKind::Signed);

    std::optional<Cor22Result> best;
    for (const auto& c : candidates) {
        const double e_rest = abs_e[abs_index.at(c.rest)].value;
        const double e_other = abs_e[abs_index.at(c.other)].value;
        Cor22Result r;
        r.best_delta = c.delta;
        r.swapped = c.swapped;
        r.n_delta_size = c.near.size();
        if (!c.near.empty()) {
            r.d_delta = signed_e[signed_index.at(c.rest)].value - signed_e[signed_index.at(c.near)].value;
            const double pos = std::max(0.0, r.d_delta);
            r.omega_delta = std::exp(-pos * pos / (8.0 * sigma * sigma));
        }
        r.slope = 7.0 * (std::min(e_rest, e_other) / (c.delta * sigma));
        r.first_term = r.slope * epsilon;
        r.value = r.first_term + 2.0 * r.omega_delta;
        if (!best || r.value < best->value) best = r;
    }
    return *best;
}

/// Heterogeneous-variance bound 2 E(max_{l in S} |X_l - mu_l| / sigma_l) eps / C_{A,B}.
/// When both covariance conditions hold the smaller of the two bounds is returned.
inline BoundTerm bound_thm31(const CovSpec& spec, const Partition& part, double epsilon, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    const ConditionReport cond = check_conditions(spec, part);
    require(!cond.has_perfect_cross_corr, ErrorCode::PerfectCrossCorrelation,
            "a cross pair has |Corr| = 1");
    require(cond.any(), ErrorCode::ConditionFails, "neither covariance condition (A) nor (B) holds");
    const auto e = expected_max_many(spec, {part.a(), part.b()}, mc.n_mc, mc.seed, MaxKind::AbsStandardized);
    BoundTerm best{2.0, std::numeric_limits<double>::infinity(), epsilon, ""};
    if (cond.cond_a_holds) {
        const double rate = e[1].value / cond.c_a;
        if (rate < best.rate) best = BoundTerm{2.0, rate, epsilon, "S=B"};
    }
    if (cond.cond_b_holds) {
        const double rate = e[0].value / cond.c_b;
        if (rate < best.rate) best = BoundTerm{2.0, rate, epsilon, "S=A"};
    }
    return best;
}

/// Conditioning bound 2 (min_j sigma~_j)^{-1} min{E max_A |X~|/sigma~, E max_B |X~|/sigma~} eps
/// with X~ drawn from the residual (Schur complement) laws.
inline BoundTerm bound_prop24(const CovSpec& spec, const Partition& part, double epsilon, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    const ResidualCov res = residual_cov(spec, part);
    const double floor = kRankTol * std::max(1.0, max_diagonal(spec.sigma()));
    const double min_var = std::min(res.a.diagonal().minCoeff(), res.b.diagonal().minCoeff());
    require(min_var > floor, ErrorCode::ZeroResidualVariance,
            "smallest residual variance " + std::to_string(min_var) + " is numerically zero");
    const CovSpec law_a = CovSpec::explicit_cov(res.a);
    const CovSpec law_b = CovSpec::explicit_cov(res.b);
    auto all = [](std::size_t n) {
        IndexSet s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = i;
        return s;
    };
    const double e_a = expected_max_abs(law_a, all(law_a.dim()), mc.n_mc, mc.seed).value;
    const double e_b = expected_max_abs(law_b, all(law_b.dim()), mc.n_mc, mc.seed).value;
    const double min_sd = std::sqrt(min_var);
    return BoundTerm{2.0, std::min(e_a, e_b) / min_sd, epsilon, e_a <= e_b ? "min at A" : "min at B"};
}

/// Minimal-eigenvalue baseline 2 eps (sqrt(2 log p) + 2) / sqrt(lambda_min(Sigma)).
inline BoundTerm bound_baseline_lambda_min(const CovSpec& spec, double epsilon) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    const double lambda = min_eigenvalue(spec.sigma());
    require(lambda > kRankTol * std::max(1.0, max_diagonal(spec.sigma())), ErrorCode::SingularCovariance,
            "lambda_min(Sigma) = " + std::to_string(lambda));
    const double p = static_cast<double>(spec.dim());
    return BoundTerm{2.0, (std::sqrt(2.0 * std::log(p)) + 2.0) / std::sqrt(lambda), epsilon,
                     "lambda_min=" + std::to_string(lambda)};
}

/// Single-maximum bound 2 E(max_j |X_j - mu_j| / sigma_j) eps / min_j sigma_j.
inline BoundTerm bound_cor23_single(const CovSpec& spec, double epsilon, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    IndexSet all(spec.dim());
    double min_sd = spec.sd(0);
    for (std::size_t i = 0; i < spec.dim(); ++i) {
        all[i] = i;
        min_sd = std::min(min_sd, spec.sd(i));
    }
    const double e = expected_max_abs(spec, all, mc.n_mc, mc.seed).value;
    return BoundTerm{2.0, e / min_sd, epsilon, ""};
}

struct ExchangeableLower {
    double lower = 0.0;     // k / p
    double residual = 0.0;  // 4k / (p + k)
    std::size_t m = 0;
};

/// Lower bound k/p for the exchangeable overlap geometry p = 2m - k, 1 <= k < m.
inline ExchangeableLower lower_bound_exchangeable(std::size_t k, std::size_t p) {
    require(k >= 1 && (p + k) % 2 == 0, ErrorCode::BadGeometry,
            "need k >= 1 and p + k even (p = 2m - k)");
    const std::size_t m = (p + k) / 2;
    require(k < m, ErrorCode::BadGeometry, "need k < m");
    return ExchangeableLower{static_cast<double>(k) / static_cast<double>(p),
                             4.0 * static_cast<double>(k) / static_cast<double>(p + k), m};
}

struct ExchangeableBounds {
    double lower = 0.0;            // k / p
    double upper_first_term = 0.0; // min{E max_{A\N}, E max_{B\N}} * 7 eps / ((1 - rho) sigma)
    double residual = 0.0;         // 4k / (p + k)
    double upper = 0.0;
    double offcenter = 0.0;        // bound on sup_{|t| > eps} P(|M_B - M_A - t| <= eps)
    std::size_t k = 0;
    std::size_t p = 0;
};

/// Both sides of the exchangeable-overlap sandwich. The overlap is encoded by duplicated
/// coordinates: N collects the coordinates of each side that are perfectly correlated with
/// the other side, k = |N within A|, and p = dim - k counts distinct variables.
/// `rho` is the largest correlation between distinct underlying variables.
inline ExchangeableBounds exchangeable_bounds(const CovSpec& spec, const Partition& part, double rho,
                                              double epsilon, const McConfig& mc) {
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    require(rho < 1.0, ErrorCode::PerfectCrossCorrelation, "rho must be below 1");
    const double sigma = common_sd(spec);
    auto split = [&](const IndexSet& side, const IndexSet& other, IndexSet& rest, IndexSet& near) {
        for (auto i : side) {
            bool dup = false;
            for (auto j : other) dup = dup || correlation(spec, i, j) >= 1.0 - kPerfectCorrTol;
            (dup ? near : rest).push_back(i);
        }
    };
    IndexSet rest_a, near_a, rest_b, near_b;
    split(part.a(), part.b(), rest_a, near_a);
    split(part.b(), part.a(), rest_b, near_b);
    require(!rest_a.empty() && !rest_b.empty(), ErrorCode::BadGeometry, "overlap covers a whole side");
    const std::size_t k = near_a.size();
    const auto geo = lower_bound_exchangeable(k, spec.dim() - k);
    const auto e = expected_max_many(spec, {rest_a, rest_b, part.a(), part.b()}, mc.n_mc, mc.seed,
                                     MaxKind::AbsStandardized);
    ExchangeableBounds out;
    out.k = k;
    out.p = spec.dim() - k;
    out.lower = geo.lower;
    out.residual = geo.residual;
    out.upper_first_term = 7.0 * (std::min(e[0].value, e[1].value) / ((1.0 - rho) * sigma)) * epsilon;
    out.upper = out.upper_first_term + out.residual;
    out.offcenter = 14.0 * (std::min(e[2].value, e[3].value) / ((1.0 - rho) * sigma)) * epsilon;
    return out;
}

/// Either a computed value or the machine-readable reason it does not apply.
struct BoundOutcome {
    std::optional<double> value;
    std::optional<ErrorCode> reason;
    std::string detail;

    bool applicable() const noexcept { return value.has_value(); }

    template <class Fn>
    static BoundOutcome capture(Fn&& fn) {
        try {
            return BoundOutcome{fn(), std::nullopt, ""};
        } catch (const Error& e) {
            return BoundOutcome{std::nullopt, e.code(), e.what()};
        }
    }
};

struct BoundReport {
    double epsilon = 0.0;
    BoundOutcome thm21;
    BoundOutcome cor22;
    std::optional<Cor22Result> cor22_detail;
    BoundOutcome thm31;
    BoundOutcome prop24;
    BoundOutcome baseline;
    BoundOutcome cor23_single;
    BoundOutcome lower_bound_exchangeable;  // filled by callers that know the design geometry
    McConfig mc;

    bool any_applicable() const {
        return thm21.applicable() || cor22.applicable() || thm31.applicable() || prop24.applicable() ||
               baseline.applicable();
    }
};

/// Every bound at one eps; all expected-max terms on X share mc.seed (common random numbers).
inline BoundReport evaluate_bounds(const CovSpec& spec, const Partition& part, double epsilon,
                                   const McConfig& mc, const std::vector<double>& delta_grid = default_delta_grid()) {
    BoundReport r;
    r.epsilon = epsilon;
    r.mc = mc;
    r.thm21 = BoundOutcome::capture([&] { return bound_thm21(spec, part, epsilon, mc).value(); });
    r.cor22 = BoundOutcome::capture([&] {
        const auto c = bound_cor22(spec, part, epsilon, delta_grid, mc);
        r.cor22_detail = c;
        return c.value;
    });
    r.thm31 = BoundOutcome::capture([&] { return bound_thm31(spec, part, epsilon, mc).value(); });
    r.prop24 = BoundOutcome::capture([&] { return bound_prop24(spec, part, epsilon, mc).value(); });
    r.baseline = BoundOutcome::capture([&] { return bound_baseline_lambda_min(spec, epsilon).value(); });
    r.cor23_single = BoundOutcome::capture([&] { return bound_cor23_single(spec, epsilon, mc).value(); });
    r.lower_bound_exchangeable = BoundOutcome{std::nullopt, ErrorCode::BadGeometry, "not an exchangeable design"};
    return r;
}

inline nlohmann::json to_json(const BoundOutcome& b) {
    if (b.applicable()) return *b.value;
    return nlohmann::json{{"inapplicable", std::string(to_string(*b.reason))}, {"detail", b.detail}};
}

inline nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j = {{"epsilon", r.epsilon},
                        {"thm21_homogeneous", to_json(r.thm21)},
                        {"cor22_delta", to_json(r.cor22)},
                        {"thm31_heterogeneous", to_json(r.thm31)},
                        {"prop24_conditional", to_json(r.prop24)},
                        {"baseline_lambda_min", to_json(r.baseline)},
                        {"cor23_single_max", to_json(r.cor23_single)},
                        {"lower_bound_exchangeable", to_json(r.lower_bound_exchangeable)},
                        {"mc_meta", {{"n_mc", r.mc.n_mc}, {"seed", r.mc.seed}}}};
    if (r.cor22_detail) {
        const auto& c = *r.cor22_detail;
        j["cor22_detail"] = {{"value", c.value},       {"best_delta", c.best_delta},
                             {"omega_delta", c.omega_delta}, {"d_delta", c.d_delta},
                             {"swapped", c.swapped},   {"n_delta_size", c.n_delta_size}};
    }
    return j;
}

}  // namespace maxdiff
