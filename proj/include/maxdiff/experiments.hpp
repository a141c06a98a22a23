#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "maxdiff/bootstrap.hpp"
#include "maxdiff/bounds.hpp"
#include "maxdiff/designs.hpp"
#include "maxdiff/gaussian_core.hpp"
#include "maxdiff/levy.hpp"
#include "maxdiff/sampler.hpp"

namespace maxdiff {

using Cell = std::variant<std::string, double, std::int64_t>;

/// Doubles are written with 17 significant digits so the text round-trips exactly.
inline std::string format_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    const double v = std::get<double>(c);
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        fail(ErrorCode::InvalidArgument, "no column \"" + name + "\"");
    }

    /// Numeric cell; NaN for text cells.
    double number(std::size_t row, const std::string& name) const {
        const Cell& c = rows.at(row).at(column(name));
        if (const auto* d = std::get_if<double>(&c)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
        return std::numeric_limits<double>::quiet_NaN();
    }

    std::string to_csv() const {
        std::ostringstream out;
        for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_cell(row[c]);
            out << '\n';
        }
        return out.str();
    }
};

inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

/// Hash of the canonical (sorted-key) JSON text.
inline std::string config_hash(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    return std::filesystem::path(csv.string() + ".meta.json");
}

/// Writes the table and a metadata sidecar {seed, config, config_hash, columns, n_rows}.
inline void write_csv(const CsvTable& table, const std::filesystem::path& path, std::uint64_t seed,
                      const nlohmann::json& config) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary);
        require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
        out << table.to_csv();
        require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
    }
    const nlohmann::json meta = {{"seed", seed},
                                 {"config", config},
                                 {"config_hash", config_hash(config)},
                                 {"columns", table.header},
                                 {"n_rows", table.rows.size()}};
    std::ofstream side(sidecar_path(path));
    require(static_cast<bool>(side), ErrorCode::IoError, "cannot write " + sidecar_path(path).string());
    side << meta.dump(2) << '\n';
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Everything needed to re-run a command. Timestamps live here, never in the CSV payload.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;

    std::string hash() const { return config_hash({{"command", command}, {"config", config}, {"seed", seed}}); }

    nlohmann::json to_json() const {
        return {{"command", command},   {"config", config},          {"config_hash", hash()},
                {"seed", seed},         {"started_at", started_at},  {"finished_at", finished_at},
                {"outputs", outputs}};
    }

    void write(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path);
        require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
        out << to_json().dump(2) << '\n';
    }
};

inline double mean_sd(const CovSpec& spec) {
    double s = 0.0;
    for (std::size_t i = 0; i < spec.dim(); ++i) s += spec.sd(i);
    return s / static_cast<double>(spec.dim());
}

/// 2 Phi(eps / s) - 1 for a two-coordinate law, s^2 = Var(X_1 - X_0); NaN otherwise.
inline double analytic_levy_p2(const CovSpec& spec, double epsilon) {
    if (spec.dim() != 2) return std::numeric_limits<double>::quiet_NaN();
    const double v = spec.cov(0, 0) + spec.cov(1, 1) - 2.0 * spec.cov(0, 1);
    if (v <= 0.0) return 1.0;
    return 2.0 * normal_cdf(epsilon / std::sqrt(v)) - 1.0;
}

struct LevyOptions {
    std::size_t n_rep = 2000;
    std::size_t grid = 1000;
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
};

/// Rows (design_id, p, epsilon, norm_eps, levy_hat, se, n_rep, rho_bar, analytic); norm_eps uses
/// sigma_hat = mean marginal sd, and analytic is filled only for two-coordinate laws.
inline CsvTable run_levy_experiment(const Design& design, std::vector<double> epsilons, const LevyOptions& opt = {}) {
    std::sort(epsilons.begin(), epsilons.end());
    epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());
    const DiffSample diffs = sample_max_diff(design.spec, design.part, opt.n_rep, opt.seed, opt.threads);
    const auto curve = levy_curve(diffs, epsilons, opt.grid);
    const double p = static_cast<double>(design.spec.dim());
    const double sigma_hat = mean_sd(design.spec);
    const double rho = rho_bar(design.spec, design.part);
    CsvTable t;
    t.header = {"design_id", "p", "epsilon", "norm_eps", "levy_hat", "se", "n_rep", "rho_bar", "analytic"};
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
        const double eps = epsilons[k];
        t.rows.push_back({design.id, static_cast<std::int64_t>(design.spec.dim()), eps,
                          std::sqrt(std::log(p)) * eps / sigma_hat, curve[k].value, curve[k].se_hint,
                          static_cast<std::int64_t>(opt.n_rep), rho, analytic_levy_p2(design.spec, eps)});
    }
    return t;
}

struct BoundsCompareOptions {
    std::size_t n_rep = 2000;
    std::size_t grid = 1000;
    std::uint64_t seed = 1;
    McConfig mc{};
    bool include_cor22 = true;
    unsigned threads = default_threads();
};

struct BoundsCompare {
    CsvTable table;
    BoundReport report;
    LevyEstimate levy;
};

/// Empirical L(M_B - M_A, eps) against every bound. Inapplicable bounds are NA with the
/// reason listed in `flags`.
inline BoundsCompare run_bounds_compare(const Design& design, double epsilon = 0.05,
                                        const BoundsCompareOptions& opt = {}) {
    BoundsCompare out;
    const DiffSample diffs = sample_max_diff(design.spec, design.part, opt.n_rep, opt.seed, opt.threads);
    out.levy = levy_hat(diffs, epsilon, opt.grid);

    BoundReport& r = out.report;
    r.epsilon = epsilon;
    r.mc = opt.mc;
    const auto& spec = design.spec;
    const auto& part = design.part;
    r.thm21 = BoundOutcome::capture([&] { return bound_thm21(spec, part, epsilon, opt.mc).value(); });
    if (opt.include_cor22) {
        r.cor22 = BoundOutcome::capture([&] {
            const auto c = bound_cor22(spec, part, epsilon, default_delta_grid(), opt.mc);
            r.cor22_detail = c;
            return c.value;
        });
    } else {
        r.cor22 = BoundOutcome{std::nullopt, ErrorCode::InvalidArgument, "skipped"};
    }
    r.thm31 = BoundOutcome::capture([&] { return bound_thm31(spec, part, epsilon, opt.mc).value(); });
    r.prop24 = BoundOutcome::capture([&] { return bound_prop24(spec, part, epsilon, opt.mc).value(); });
    r.baseline = BoundOutcome::capture([&] { return bound_baseline_lambda_min(spec, epsilon).value(); });
    r.cor23_single = BoundOutcome{std::nullopt, ErrorCode::InvalidArgument, "not requested"};
    r.lower_bound_exchangeable = BoundOutcome{std::nullopt, ErrorCode::BadGeometry, "not requested"};

    std::string flags;
    auto cell = [&](const char* name, const BoundOutcome& b) -> Cell {
        if (b.applicable()) return *b.value;
        if (!flags.empty()) flags += ';';
        flags += std::string(name) + ":" + (b.detail == "skipped" ? std::string("Skipped") : std::string(to_string(*b.reason)));
        return std::numeric_limits<double>::quiet_NaN();
    };
    CsvTable& t = out.table;
    t.header = {"design_id", "p",     "epsilon", "empirical_levy", "empirical_ratio", "se",
                "thm21",     "cor22", "thm31",   "prop24",         "baseline",        "flags"};
    std::vector<Cell> row = {design.id,
                             static_cast<std::int64_t>(spec.dim()),
                             epsilon,
                             out.levy.value,
                             out.levy.value / epsilon,
                             out.levy.se_hint,
                             cell("thm21", r.thm21),
                             cell("cor22", r.cor22),
                             cell("thm31", r.thm31),
                             cell("prop24", r.prop24),
                             cell("baseline", r.baseline)};
    row.push_back(flags.empty() ? std::string("ok") : flags);
    t.rows.push_back(std::move(row));
    return out;
}

enum class ScalingKind { RhoSweepFullrank, RhoSweepLowrank, K0Sweep };

inline ScalingKind scaling_kind_from_string(const std::string& s) {
    if (s == "rho_sweep_fullrank") return ScalingKind::RhoSweepFullrank;
    if (s == "rho_sweep_lowrank") return ScalingKind::RhoSweepLowrank;
    if (s == "k0_sweep") return ScalingKind::K0Sweep;
    fail(ErrorCode::BadConfig, "scaling kind must be rho_sweep_fullrank|rho_sweep_lowrank|k0_sweep");
}

inline std::string to_string(ScalingKind k) {
    switch (k) {
        case ScalingKind::RhoSweepFullrank: return "rho_sweep_fullrank";
        case ScalingKind::RhoSweepLowrank: return "rho_sweep_lowrank";
        case ScalingKind::K0Sweep: return "k0_sweep";
    }
    return "unknown";
}

struct ScalingParams {
    std::size_t p = 2;                 // rho sweeps
    std::size_t d = 40;                // low-rank factor dimension; k0_sweep: 0 = independent
    std::size_t points = 10;           // rho grid size or number of random factors
    double rho_lo = 0.9;
    double rho_hi = 0.99;
    std::size_t k0 = 20;
    std::vector<std::size_t> p_values = {25, 30, 40, 60, 80, 120};
    double epsilon = 0.05;
    std::size_t n_rep = 500;
    std::size_t grid = 1000;
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
};

/// Rows (study, point, p, rho_bar, inv_sqrt_gap, inv_gap, levy_hat, se, n_rep, analytic).
/// The k0 sweep reuses one seed for every p, so shared coordinates see the same draws.
inline CsvTable run_scaling_study(ScalingKind kind, const ScalingParams& sp) {
    require(sp.points >= 1 || kind == ScalingKind::K0Sweep, ErrorCode::BadConfig, "points must be >= 1");
    CsvTable t;
    t.header = {"study", "point", "p", "rho_bar", "inv_sqrt_gap", "inv_gap", "levy_hat", "se", "n_rep", "analytic"};
    auto add = [&](std::size_t point, const Design& d) {
        const DiffSample diffs = sample_max_diff(d.spec, d.part, sp.n_rep, sp.seed, sp.threads);
        const auto est = levy_hat(diffs, sp.epsilon, sp.grid);
        const double rho = rho_bar(d.spec, d.part);
        t.rows.push_back({to_string(kind), static_cast<std::int64_t>(point),
                          static_cast<std::int64_t>(d.spec.dim()), rho, 1.0 / std::sqrt(1.0 - rho),
                          1.0 / (1.0 - rho), est.value, est.se_hint, static_cast<std::int64_t>(sp.n_rep),
                          analytic_levy_p2(d.spec, sp.epsilon)});
    };
    switch (kind) {
        case ScalingKind::RhoSweepFullrank:
            for (std::size_t k = 0; k < sp.points; ++k) {
                DesignConfig c;
                c.kind = DesignKind::FullrankEquicorr;
                c.p = sp.p;
                c.rho = sp.points == 1 ? sp.rho_lo
                                       : sp.rho_lo + (sp.rho_hi - sp.rho_lo) * static_cast<double>(k) /
                                                         static_cast<double>(sp.points - 1);
                c.seed = sp.seed;
                add(k, gen_design(c));
            }
            break;
        case ScalingKind::RhoSweepLowrank:
            for (std::size_t k = 0; k < sp.points; ++k) {
                DesignConfig c;
                c.kind = DesignKind::HomogLowrank;
                c.p = sp.p;
                c.d = sp.d;
                c.seed = split_seed(sp.seed, k);
                add(k, gen_design(c));
            }
            break;
        case ScalingKind::K0Sweep:
            for (std::size_t k = 0; k < sp.p_values.size(); ++k) {
                DesignConfig c;
                c.kind = DesignKind::K0Split;
                c.p = sp.p_values[k];
                c.k0 = sp.k0;
                c.d = sp.d;
                c.seed = sp.seed;
                add(k, gen_design(c));
            }
            break;
    }
    return t;
}

struct BootstrapDemoOptions {
    std::size_t b_reps = 5000;
    std::uint64_t seed = 1;
    Multiplier multiplier = Multiplier::Gaussian;
    double b_n = 1.0;
    unsigned threads = default_threads();
};

/// Multiplier bootstrap on CSV data with a known shift (zero when absent), plus the
/// convergence-rate diagnostic with the sample covariance standing in for Sigma.
inline nlohmann::json run_bootstrap_demo(const std::filesystem::path& data_path, const Partition& part,
                                         const BootstrapDemoOptions& opt = {},
                                         const std::optional<Vector>& shift = std::nullopt) {
    Matrix xi = read_data_csv(data_path);
    require(static_cast<std::size_t>(xi.cols()) == part.dim(), ErrorCode::DimensionMismatch,
            "data has " + std::to_string(xi.cols()) + " columns but the partition covers " +
                std::to_string(part.dim()));
    const DataMatrix data(xi, shift.value_or(Vector::Zero(xi.cols())));
    const BootstrapResult res = run_multiplier_bootstrap(data, part, opt.b_reps, opt.seed, opt.multiplier, opt.threads);
    nlohmann::json j = to_json(res);

    const Matrix centered = xi.rowwise() - xi.colwise().mean();
    const Matrix s = (centered.transpose() * centered) / static_cast<double>(xi.rows() - 1);
    nlohmann::json diag;
    try {
        const CovSpec est = CovSpec::explicit_cov(0.5 * (s + s.transpose()));
        const ConditionReport cond = check_conditions(est, part);
        require(cond.any(), ErrorCode::ConditionFails, "neither condition holds for the sample covariance");
        // condition (A) standardizes by the B side, condition (B) by the A side
        const bool use_b = cond.cond_a_holds && (!cond.cond_b_holds || cond.c_a >= cond.c_b);
        const ExpectedMax em = expected_max_abs(est, use_b ? part.b() : part.a(), 20000, opt.seed, true, opt.threads);
        const CltRate rate = clt_rate({opt.b_n, 1.0, data.n(), data.p(), cond.c_ab, em.value});
        diag = {{"value", rate.value},
                {"label", rate.label},
                {"small_sample_warning", rate.small_sample_warning},
                {"event_probability", rate.event_probability},
                {"c_ab", cond.c_ab},
                {"emax_s", em.value},
                {"s_set", use_b ? "B" : "A"}};
    } catch (const Error& e) {
        diag = {{"inapplicable", std::string(to_string(e.code()))}, {"detail", e.what()}};
    }
    j["clt_rate"] = diag;
    j["n"] = data.n();
    j["p"] = data.p();
    return j;
}

}  // namespace maxdiff
