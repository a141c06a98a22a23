#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/parallel.hpp"
#include "maxdiff/rng.hpp"
#include "maxdiff/sampler.hpp"

namespace maxdiff {

/// Observations xi_1..xi_n (rows) and the known shift vector a.
class DataMatrix {
public:
    DataMatrix(Matrix xi, Vector shift) : xi_(std::move(xi)), shift_(std::move(shift)) {
        require(xi_.rows() >= 2, ErrorCode::InvalidArgument, "need at least two observations");
        require(xi_.cols() >= 1, ErrorCode::InvalidArgument, "need at least one coordinate");
        require(shift_.size() == xi_.cols(), ErrorCode::DimensionMismatch, "shift length must equal p");
        require(xi_.allFinite() && shift_.allFinite(), ErrorCode::NonFinite, "data must be finite");
    }
    explicit DataMatrix(Matrix xi) : DataMatrix(xi, Vector::Zero(xi.cols())) {}

    const Matrix& xi() const noexcept { return xi_; }
    const Vector& shift() const noexcept { return shift_; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(xi_.rows()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(xi_.cols()); }

private:
    Matrix xi_;
    Vector shift_;
};

/// Y_j = n^{-1/2} sum_i (xi_ij + a_j).
inline Vector observed_process(const DataMatrix& data) {
    const auto n = data.xi().rows();
    Vector y(data.xi().cols());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += data.xi()(i, j) + data.shift()(j);
        y(j) = s / std::sqrt(static_cast<double>(n));
    }
    return y;
}

enum class Multiplier { Gaussian, Beta };

inline std::string to_string(Multiplier m) { return m == Multiplier::Gaussian ? "gaussian" : "beta"; }

inline Multiplier multiplier_from_string(const std::string& s) {
    if (s == "gaussian") return Multiplier::Gaussian;
    if (s == "beta") return Multiplier::Beta;
    fail(ErrorCode::BadConfig, "multiplier must be gaussian|beta, got \"" + s + "\"");
}

inline constexpr double kBetaHalfThreeHalvesMean = 0.25;
inline constexpr double kBetaHalfThreeHalvesVar = 1.0 / 16.0;

/// Beta(1/2, 3/2) draw: the squared first coordinate of a uniform point in the unit disk.
inline double beta_half_three_halves(Xoshiro256& rng) {
    const double r2 = rng.uniform();
    const double c = std::cos(2.0 * std::numbers::pi * rng.uniform());
    return r2 * c * c;
}

/// Mean-zero, variance-one multiplier weight.
inline double multiplier_weight(Multiplier kind, Xoshiro256& rng) {
    if (kind == Multiplier::Gaussian) return rng.normal();
    return (beta_half_three_halves(rng) - kBetaHalfThreeHalvesMean) / std::sqrt(kBetaHalfThreeHalvesVar);
}

/// B x p replicates of n^{-1/2} sum_i [w_i (xi_i - xibar) + a]. Replicate b draws its n
/// weights from child stream split(seed, b).
inline RowMatrix multiplier_replicates(const DataMatrix& data, std::size_t b_reps, std::uint64_t seed,
                                       Multiplier kind = Multiplier::Gaussian,
                                       unsigned threads = default_threads()) {
    require(b_reps >= 1, ErrorCode::InvalidArgument, "b_reps must be at least 1");
    const auto n = data.xi().rows();
    const auto p = data.xi().cols();
    const Eigen::RowVectorXd xbar = data.xi().colwise().mean();
    const Matrix centered = data.xi().rowwise() - xbar;
    const double root_n = std::sqrt(static_cast<double>(n));
    const Eigen::RowVectorXd level = root_n * data.shift().transpose();
    RowMatrix out(static_cast<Eigen::Index>(b_reps), p);
    for_each_chunk(chunk_count(b_reps), threads, [&](std::size_t c) {
        const std::size_t first = c * kChunk;
        const auto count = static_cast<Eigen::Index>(std::min(kChunk, b_reps - first));
        Matrix w(count, n);
        for (Eigen::Index r = 0; r < count; ++r) {
            Xoshiro256 rng(split_seed(seed, first + static_cast<std::size_t>(r)));
            for (Eigen::Index i = 0; i < n; ++i) w(r, i) = multiplier_weight(kind, rng);
        }
        const Matrix sums = w * centered;
        for (Eigen::Index r = 0; r < count; ++r)
            out.row(static_cast<Eigen::Index>(first) + r) = sums.row(r) / root_n + level;
    });
    return out;
}

struct BootstrapResult {
    std::vector<double> diffs;  // M_A - M_B per replicate
    double prob_argmax_in_a = 0.0;
    std::map<double, double> quantiles;
    Multiplier multiplier = Multiplier::Gaussian;
    std::size_t b_reps = 0;
    std::uint64_t seed = 0;
};

/// Linear-interpolation quantile of sorted values (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double level) {
    require(!sorted.empty(), ErrorCode::EmptySample, "quantile of an empty sample");
    require(level >= 0.0 && level <= 1.0, ErrorCode::InvalidArgument, "quantile level outside [0, 1]");
    const double h = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// P(M_A - M_B > 0) over replicate rows; exact zeros count as "not in A".
inline BootstrapResult argmax_prob(const RowMatrix& replicates, const Partition& part,
                                   const std::vector<double>& levels = {0.05, 0.5, 0.95}) {
    require(static_cast<std::size_t>(replicates.cols()) == part.dim(), ErrorCode::DimensionMismatch,
            "partition dimension does not match replicate width");
    require(replicates.rows() >= 1, ErrorCode::EmptySample, "no replicates");
    BootstrapResult r;
    const auto b = static_cast<std::size_t>(replicates.rows());
    const auto p = part.dim();
    r.diffs.resize(b);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < b; ++k) {
        const double* row = replicates.data() + k * p;
        r.diffs[k] = detail::max_over(row, part.a()) - detail::max_over(row, part.b());
        hits += r.diffs[k] > 0.0;
    }
    r.prob_argmax_in_a = static_cast<double>(hits) / static_cast<double>(b);
    std::vector<double> sorted = r.diffs;
    std::sort(sorted.begin(), sorted.end());
    for (double level : levels) r.quantiles[level] = quantile_sorted(sorted, level);
    r.b_reps = b;
    return r;
}

inline BootstrapResult run_multiplier_bootstrap(const DataMatrix& data, const Partition& part, std::size_t b_reps,
                                                std::uint64_t seed, Multiplier kind = Multiplier::Gaussian,
                                                unsigned threads = default_threads()) {
    auto r = argmax_prob(multiplier_replicates(data, b_reps, seed, kind, threads), part);
    r.multiplier = kind;
    r.seed = seed;
    return r;
}

struct CltRateInputs {
    double b_n = 1.0;
    double b0 = 1.0;
    std::size_t n = 0;
    std::size_t p = 0;
    double c_ab = 1.0;
    double emax_s = 1.0;
};

struct CltRate {
    double value = 0.0;            // emax_s / c_ab * (b_n^2 log^3(pn) / n)^{1/4}, unknown constant set to 1
    bool small_sample_warning = false;  // b_n^2 log^5(pn) > n
    double event_probability = 0.0;    // 1 - 1/(2 n^4) - 1/n - 3 (b_n^2 log^3(pn) / n)^{1/2}
    std::string label = "modulo constant";
};

inline CltRate clt_rate(const CltRateInputs& in) {
    require(in.b_n >= 1.0, ErrorCode::InvalidArgument, "B_n must be >= 1");
    require(in.n >= 1 && in.p >= 1, ErrorCode::InvalidArgument, "n and p must be positive");
    require(in.c_ab > 0.0, ErrorCode::InvalidArgument, "C_{A,B} must be positive");
    const double n = static_cast<double>(in.n);
    const double lg = std::log(static_cast<double>(in.p) * n);
    const double core = in.b_n * in.b_n * lg * lg * lg / n;
    CltRate r;
    r.value = in.emax_s / in.c_ab * std::pow(core, 0.25);
    r.small_sample_warning = in.b_n * in.b_n * std::pow(lg, 5.0) > n;
    r.event_probability = 1.0 - 1.0 / (2.0 * std::pow(n, 4.0)) - 1.0 / n - 3.0 * std::sqrt(core);
    return r;
}

/// Numeric CSV, one observation per line. A first line that does not parse as numbers
/// is taken as a header. Errors name the 1-based line and column.
inline Matrix read_data_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    auto parse = [](const std::string& cell, double& out) {
        std::size_t a = cell.find_first_not_of(" \t\r");
        std::size_t b = cell.find_last_not_of(" \t\r");
        if (a == std::string::npos) return false;
        const char* first = cell.data() + a;
        const char* last = cell.data() + b + 1;
        auto [ptr, ec] = std::from_chars(first, last, out);
        return ec == std::errc() && ptr == last;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        bool ok = true;
        while (std::getline(ss, cell, ',')) {
            ++col;
            double v = 0.0;
            if (!parse(cell, v)) {
                if (rows.empty() && line_no == 1) {
                    ok = false;
                    break;
                }
                fail(ErrorCode::ParseError, path.string() + ": line " + std::to_string(line_no) + ", column " +
                                                std::to_string(col) + ": not a number: \"" + cell + "\"");
            }
            row.push_back(v);
        }
        if (!ok) continue;  // header
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail(ErrorCode::ParseError, path.string() + ": line " + std::to_string(line_no) + ": expected " +
                                            std::to_string(rows.front().size()) + " columns, found " +
                                            std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorCode::ParseError, path.string() + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

inline Matrix data_from_batch(const SampleBatch& batch) { return Matrix(batch.data); }

inline nlohmann::json to_json(const BootstrapResult& r) {
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [level, value] : r.quantiles) {
        std::ostringstream key;
        key << level;
        q[key.str()] = value;
    }
    return {{"prob", r.prob_argmax_in_a},
            {"quantiles", q},
            {"b_reps", r.b_reps},
            {"multiplier", to_string(r.multiplier)},
            {"seed", r.seed}};
}

}  // namespace maxdiff
