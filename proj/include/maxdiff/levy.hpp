#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/parallel.hpp"
#include "maxdiff/sampler.hpp"

namespace maxdiff {

/// Empirical Levy concentration sup_t P(|Y - t| <= eps) at one eps.
struct LevyEstimate {
    double epsilon = 0.0;
    double value = 0.0;
    double argmax_t = 0.0;
    std::size_t argmax_index = 0;  // grid index of argmax_t (sample index for the exact scan)
    std::size_t grid_points = 0;
    std::size_t n_rep = 0;
    double se_hint = 0.0;  // binomial SE at value; ignores the max-over-grid selection bias
};

namespace detail {

inline double binomial_se(double v, std::size_t n) {
    return std::sqrt(std::max(0.0, v * (1.0 - v)) / static_cast<double>(n));
}

/// Equidistant t-grid from the minimum to the maximum realization, both endpoints
/// included. Counts are taken on offsets u = y - min so that a common shift of the
/// sample (when exactly representable) changes nothing but argmax_t.
class GridScan {
public:
    GridScan(std::span<const double> values, std::size_t grid_points) : n_(values.size()) {
        require(!values.empty(), ErrorCode::EmptySample, "no realizations");
        require(grid_points >= 1, ErrorCode::InvalidArgument, "grid needs at least one point");
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        lo_ = *lo_it;
        const double range = *hi_it - lo_;
        sorted_.reserve(values.size());
        for (double v : values) sorted_.push_back(v - lo_);
        std::sort(sorted_.begin(), sorted_.end());
        grid_.resize(grid_points);
        const double step = grid_points > 1 ? range / static_cast<double>(grid_points - 1) : 0.0;
        for (std::size_t i = 0; i < grid_points; ++i) grid_[i] = static_cast<double>(i) * step;
        if (grid_points > 1) grid_.back() = range;
    }

    std::size_t count(std::size_t i, double eps) const {
        const double o = grid_[i];
        const auto first = std::partition_point(sorted_.begin(), sorted_.end(),
                                                [&](double u) { return o - u > eps; });
        const auto last = std::partition_point(first, sorted_.end(),
                                               [&](double u) { return u - o <= eps; });
        return static_cast<std::size_t>(last - first);
    }

    double t(std::size_t i) const { return lo_ + grid_[i]; }
    std::size_t size() const { return grid_.size(); }
    std::size_t n() const { return n_; }

    template <class Keep>
    LevyEstimate scan(double eps, Keep keep) const {
        require(eps > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
        std::size_t best = 0, best_i = 0;
        bool any = false;
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            if (!keep(t(i))) continue;
            const std::size_t c = count(i, eps);
            if (!any || c > best) {
                best = c;
                best_i = i;
                any = true;
            }
        }
        LevyEstimate e;
        e.epsilon = eps;
        e.grid_points = grid_.size();
        e.n_rep = n_;
        if (any) {
            e.value = static_cast<double>(best) / static_cast<double>(n_);
            e.argmax_t = t(best_i);
            e.argmax_index = best_i;
        } else {
            e.argmax_t = std::numeric_limits<double>::quiet_NaN();
        }
        e.se_hint = binomial_se(e.value, n_);
        return e;
    }

private:
    std::size_t n_;
    double lo_ = 0.0;
    std::vector<double> sorted_;
    std::vector<double> grid_;
};

}  // namespace detail

/// Grid estimate over a raw statistic vector (e.g. a single maximum).
inline LevyEstimate levy_hat_single(std::span<const double> values, double epsilon,
                                    std::size_t grid_points = 1000) {
    const detail::GridScan scan(values, grid_points);
    return scan.scan(epsilon, [](double) { return true; });
}

inline LevyEstimate levy_hat(const DiffSample& diffs, double epsilon, std::size_t grid_points = 1000) {
    require(diffs.size() > 0, ErrorCode::EmptySample, "empty difference sample");
    return levy_hat_single(diffs.values, epsilon, grid_points);
}

/// One estimate per eps, all on the same t-grid, so the values are nondecreasing in eps.
inline std::vector<LevyEstimate> levy_curve(std::span<const double> values,
                                            std::span<const double> epsilons,
                                            std::size_t grid_points = 1000) {
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        require(epsilons[k] > 0.0, ErrorCode::InvalidArgument, "epsilons must be positive");
        require(k == 0 || epsilons[k] > epsilons[k - 1], ErrorCode::InvalidArgument,
                "epsilons must be strictly increasing");
    }
    const detail::GridScan scan(values, grid_points);
    std::vector<LevyEstimate> out;
    out.reserve(epsilons.size());
    for (double eps : epsilons) out.push_back(scan.scan(eps, [](double) { return true; }));
    return out;
}

inline std::vector<LevyEstimate> levy_curve(const DiffSample& diffs, std::span<const double> epsilons,
                                            std::size_t grid_points = 1000) {
    return levy_curve(std::span<const double>(diffs.values), epsilons, grid_points);
}

/// Grid estimate restricted to centers with |t - center| > exclusion.
inline LevyEstimate levy_hat_offcenter(std::span<const double> values, double epsilon,
                                       double exclusion, double center = 0.0,
                                       std::size_t grid_points = 1000) {
    const detail::GridScan scan(values, grid_points);
    return scan.scan(epsilon, [&](double t) { return std::abs(t - center) > exclusion; });
}

/// Exact sup_t (1/n) #{k : |y_k - t| <= eps} by a sliding window over the sorted sample.
/// Upper-bounds the grid estimate on the same data.
inline LevyEstimate levy_exact(std::span<const double> values, double epsilon) {
    require(!values.empty(), ErrorCode::EmptySample, "no realizations");
    require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    std::size_t best = 0, best_k = 0, j = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        j = std::max(j, k);
        while (j + 1 < v.size() && v[j + 1] - v[k] <= 2.0 * epsilon) ++j;
        if (j - k + 1 > best) {
            best = j - k + 1;
            best_k = k;
        }
    }
    LevyEstimate e;
    e.epsilon = epsilon;
    e.n_rep = v.size();
    e.value = static_cast<double>(best) / static_cast<double>(v.size());
    e.argmax_t = v[best_k] + epsilon;
    e.argmax_index = best_k;
    e.se_hint = detail::binomial_se(e.value, v.size());
    return e;
}

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
    bool normalized = false;

    double integral() const {
        double s = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            s += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        return s;
    }
};

/// Gaussian-kernel density with Silverman's bandwidth 1.06 sd n^{-1/5}.
inline DensityCurve density_curve(std::span<const double> values, bool normalize,
                                  std::size_t grid_points = 512) {
    require(values.size() >= 30, ErrorCode::InvalidArgument, "density needs at least 30 realizations");
    require(grid_points >= 2, ErrorCode::InvalidArgument, "density grid needs two points");
    const DiffSample stats{std::vector<double>(values.begin(), values.end())};
    require(stats.sd > 0.0, ErrorCode::DegenerateSample, "sample has zero spread (point mass)");
    std::vector<double> x = stats.values;
    double sd = stats.sd;
    if (normalize) {
        for (double& v : x) v = (v - stats.mean) / stats.sd;
        sd = 1.0;
    }
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    const double h = 1.06 * sd * std::pow(n, -0.2);
    DensityCurve out;
    out.bandwidth = h;
    out.normalized = normalize;
    const double lo = x.front() - 3.0 * h;
    const double hi = x.back() + 3.0 * h;
    out.grid.resize(grid_points);
    out.density.resize(grid_points);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double g = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
        const auto first = std::lower_bound(x.begin(), x.end(), g - 8.0 * h);
        const auto last = std::upper_bound(first, x.end(), g + 8.0 * h);
        double s = 0.0;
        for (auto it = first; it != last; ++it) {
            const double z = (g - *it) / h;
            s += std::exp(-0.5 * z * z);
        }
        out.grid[i] = g;
        out.density[i] = s * norm;
    }
    return out;
}

/// Local maxima of the curve whose height exceeds `rel_floor` times the global maximum.
inline std::size_t count_modes(const DensityCurve& curve, double rel_floor = 0.05) {
    const auto& d = curve.density;
    if (d.size() < 3) return d.empty() ? 0 : 1;
    const double top = *std::max_element(d.begin(), d.end());
    std::size_t modes = 0;
    for (std::size_t i = 1; i + 1 < d.size(); ++i)
        if (d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > rel_floor * top) ++modes;
    return modes;
}

struct ExpectedMax {
    IndexSet subset;
    double value = 0.0;
    double se = 0.0;
    std::size_t n_mc = 0;
    bool standardized = true;
};

enum class MaxKind {
    AbsStandardized,  // E max |X_l - mu_l| / sigma_l
    Abs,              // E max |X_l - mu_l|
    Signed,           // E max X_l
};

/// Monte Carlo expected maxima of several subsets from one shared stream of draws
/// (common random numbers): every subset sees the same replicates of X, and each
/// estimate is reduced in fixed chunk order. Hence S ⊆ S' gives estimate(S) <= estimate(S').
inline std::vector<ExpectedMax> expected_max_many(const CovSpec& spec, const std::vector<IndexSet>& subsets,
                                                  std::size_t n_mc, std::uint64_t seed, MaxKind kind,
                                                  unsigned threads = default_threads()) {
    require(n_mc >= 2, ErrorCode::InvalidArgument, "n_mc must be at least 2");
    std::vector<char> used(spec.dim(), 0);
    for (const auto& s : subsets) {
        require(!s.empty(), ErrorCode::EmptySubset, "expected maximum over an empty subset");
        for (auto i : s) {
            require(i < spec.dim(), ErrorCode::DimensionMismatch, "subset index out of range");
            used[i] = 1;
        }
    }
    IndexSet rows;
    std::vector<std::size_t> slot(spec.dim(), 0);
    for (std::size_t i = 0; i < spec.dim(); ++i)
        if (used[i]) {
            slot[i] = rows.size();
            rows.push_back(i);
        }
    std::vector<double> offsets(rows.size(), 0.0), scale(rows.size(), 1.0);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (kind == MaxKind::Signed) offsets[k] = spec.mu()(static_cast<Eigen::Index>(rows[k]));
        if (kind == MaxKind::AbsStandardized) scale[k] = 1.0 / spec.sd(rows[k]);
    }
    std::vector<std::vector<std::size_t>> local(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s)
        for (auto i : subsets[s]) local[s].push_back(slot[i]);

    const DrawEngine engine(spec, rows, offsets);
    const std::size_t m = rows.size();
    const std::size_t chunks = chunk_count(n_mc);
    std::vector<double> sums(chunks * subsets.size(), 0.0), squares(chunks * subsets.size(), 0.0);
    engine.for_each_chunk(n_mc, seed, threads,
                          [&](std::size_t c, std::size_t, std::size_t count, const double* block) {
                              for (std::size_t s = 0; s < subsets.size(); ++s) {
                                  double sum = 0.0, sq = 0.0;
                                  for (std::size_t r = 0; r < count; ++r) {
                                      const double* row = block + r * m;
                                      double best = -std::numeric_limits<double>::infinity();
                                      for (auto k : local[s]) {
                                          const double v = kind == MaxKind::Signed ? row[k]
                                                                                   : std::abs(row[k]) * scale[k];
                                          best = std::max(best, v);
                                      }
                                      sum += best;
                                      sq += best * best;
                                  }
                                  sums[c * subsets.size() + s] = sum;
                                  squares[c * subsets.size() + s] = sq;
                              }
                          });
    std::vector<ExpectedMax> out(subsets.size());
    const double n = static_cast<double>(n_mc);
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            sum += sums[c * subsets.size() + s];
            sq += squares[c * subsets.size() + s];
        }
        const double mean = sum / n;
        const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
        out[s] = ExpectedMax{subsets[s], mean, std::sqrt(var / n), n_mc, kind == MaxKind::AbsStandardized};
    }
    return out;
}

inline ExpectedMax expected_max_abs(const CovSpec& spec, const IndexSet& subset, std::size_t n_mc,
                                    std::uint64_t seed, bool standardized = true,
                                    unsigned threads = default_threads()) {
    return expected_max_many(spec, {subset}, n_mc, seed,
                             standardized ? MaxKind::AbsStandardized : MaxKind::Abs, threads)
        .front();
}

inline ExpectedMax expected_max_signed(const CovSpec& spec, const IndexSet& subset, std::size_t n_mc,
                                       std::uint64_t seed, unsigned threads = default_threads()) {
    return expected_max_many(spec, {subset}, n_mc, seed, MaxKind::Signed, threads).front();
}

}  // namespace maxdiff
