#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "maxdiff/maxdiff.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maxdiff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInapplicable = 3;
constexpr int kExitIo = 4;

// Values given on the command line. Unset optionals fall back to the config file, then defaults.
struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<std::size_t> reps;
    std::vector<double> eps;
    std::optional<std::size_t> grid;
    std::optional<unsigned> threads;
    std::optional<std::size_t> mc;
    // design overrides
    std::optional<std::string> kind;
    std::optional<std::size_t> p, d, overlap_k, k0;
    std::optional<double> rho;
    std::optional<int> profile;
    std::optional<std::uint64_t> design_seed;
    // command specific
    bool no_cor22 = false;
    std::string study = "k0_sweep";
    std::optional<std::size_t> points;
    std::vector<std::size_t> p_values;
    std::string data_path;
    std::optional<std::size_t> split;
    std::string multiplier = "gaussian";
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::BadConfig, path + ": " + e.what());
    }
    require(doc.is_object(), ErrorCode::BadConfig, path + ": top level must be an object");
    // a run manifest carries the resolved config of the run it describes
    if (doc.contains("command") && doc.contains("config")) return doc.at("config");
    return doc;
}

template <class T>
T pick(const std::optional<T>& flag, const json& file, const char* key, T fallback) {
    if (flag) return *flag;
    if (file.contains(key)) {
        try {
            return file.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(ErrorCode::BadConfig, std::string("config field \"") + key + "\": " + e.what());
        }
    }
    return fallback;
}

DesignConfig resolve_design(const Flags& f, const json& file) {
    DesignConfig c;
    if (file.contains("design")) c = design_config_from_json(file.at("design"), c);
    if (f.kind) c.kind = design_kind_from_string(*f.kind);
    if (f.p) c.p = *f.p;
    if (f.d) c.d = *f.d;
    if (f.overlap_k) c.overlap_k = *f.overlap_k;
    if (f.k0) c.k0 = *f.k0;
    if (f.rho) c.rho = *f.rho;
    if (f.profile) c.variance_profile = *f.profile;
    if (f.design_seed) c.seed = *f.design_seed;
    validate(c);
    return c;
}

std::vector<double> resolve_eps(const Flags& f, const json& file, std::vector<double> fallback) {
    if (!f.eps.empty()) return f.eps;
    if (file.contains("epsilons")) {
        try {
            return file.at("epsilons").get<std::vector<double>>();
        } catch (const json::exception& e) {
            fail(ErrorCode::BadConfig, std::string("config field \"epsilons\": ") + e.what());
        }
    }
    return fallback;
}

void finish(RunManifest& m, const fs::path& out_dir) {
    m.finished_at = utc_timestamp();
    m.write(out_dir / "manifest.json");
    std::cout << "wrote";
    for (const auto& o : m.outputs) std::cout << ' ' << o;
    std::cout << '\n';
}

int cmd_gen_design(const Flags& f) {
    const json file = load_config(f.config_path);
    const DesignConfig cfg = resolve_design(f, file);
    RunManifest m{"gen-design", {{"design", to_json(cfg)}}, cfg.seed, utc_timestamp(), "", {}};
    const Design d = gen_design(cfg);
    const json out = {{"id", d.id},
                      {"config", to_json(cfg)},
                      {"spec", to_json(d.spec)},
                      {"spec_hash", d.spec.hash()},
                      {"partition", {{"a", d.part.a()}, {"b", d.part.b()}}}};
    const fs::path path = fs::path(f.out_dir) / (d.id + ".json");
    fs::create_directories(f.out_dir);
    std::ofstream o(path);
    require(static_cast<bool>(o), ErrorCode::IoError, "cannot write " + path.string());
    o << out.dump(1) << '\n';
    m.outputs.push_back(path.string());
    finish(m, f.out_dir);
    return kExitOk;
}

int cmd_levy(const Flags& f) {
    const json file = load_config(f.config_path);
    const DesignConfig cfg = resolve_design(f, file);
    LevyOptions opt;
    opt.n_rep = pick(f.reps, file, "n_rep", std::size_t{2000});
    opt.grid = pick(f.grid, file, "grid", std::size_t{1000});
    opt.seed = pick(f.seed, file, "seed", std::uint64_t{1});
    opt.threads = pick(f.threads, file, "threads", default_threads());
    const auto eps = resolve_eps(f, file, {0.01, 0.02, 0.05, 0.1, 0.2});
    const json resolved = {{"design", to_json(cfg)}, {"n_rep", opt.n_rep}, {"grid", opt.grid},
                           {"seed", opt.seed},       {"epsilons", eps}};
    RunManifest m{"levy", resolved, opt.seed, utc_timestamp(), "", {}};
    const CsvTable t = run_levy_experiment(gen_design(cfg), eps, opt);
    const fs::path path = fs::path(f.out_dir) / "levy.csv";
    write_csv(t, path, opt.seed, resolved);
    m.outputs = {path.string(), sidecar_path(path).string()};
    finish(m, f.out_dir);
    return kExitOk;
}

int cmd_bounds(const Flags& f) {
    const json file = load_config(f.config_path);
    DesignConfig base;
    base.kind = DesignKind::Table1;
    json design_file = file;
    if (!file.contains("design") && !f.kind) design_file["design"] = to_json(base);
    const DesignConfig cfg = resolve_design(f, design_file);
    BoundsCompareOptions opt;
    opt.n_rep = pick(f.reps, file, "n_rep", std::size_t{2000});
    opt.grid = pick(f.grid, file, "grid", std::size_t{1000});
    opt.seed = pick(f.seed, file, "seed", std::uint64_t{1});
    opt.threads = pick(f.threads, file, "threads", default_threads());
    opt.mc.n_mc = pick(f.mc, file, "n_mc", std::size_t{20000});
    opt.include_cor22 = !f.no_cor22 && !(file.contains("skip_cor22") && file.at("skip_cor22").get<bool>());
    const auto eps = resolve_eps(f, file, {0.05});
    require(eps.size() == 1, ErrorCode::BadConfig, "bounds-compare takes a single epsilon");
    const json resolved = {{"design", to_json(cfg)}, {"n_rep", opt.n_rep},  {"grid", opt.grid},
                           {"seed", opt.seed},       {"n_mc", opt.mc.n_mc}, {"epsilons", eps},
                           {"skip_cor22", !opt.include_cor22}};
    RunManifest m{"bounds-compare", resolved, opt.seed, utc_timestamp(), "", {}};
    const BoundsCompare bc = run_bounds_compare(gen_design(cfg), eps.front(), opt);
    const fs::path path = fs::path(f.out_dir) / "bounds.csv";
    write_csv(bc.table, path, opt.seed, resolved);
    std::ofstream(fs::path(f.out_dir) / "bounds_report.json") << to_json(bc.report).dump(2) << '\n';
    m.outputs = {path.string(), sidecar_path(path).string(), (fs::path(f.out_dir) / "bounds_report.json").string()};
    finish(m, f.out_dir);
    const auto& r = bc.report;
    const bool any = r.thm21.applicable() || r.cor22.applicable() || r.thm31.applicable() ||
                     r.prop24.applicable() || r.baseline.applicable();
    if (!any) {
        std::cerr << "every requested bound is inapplicable\n";
        return kExitInapplicable;
    }
    return kExitOk;
}

int cmd_scaling(const Flags& f) {
    const json file = load_config(f.config_path);
    const json sc = file.value("scaling", json::object());
    const ScalingKind kind = scaling_kind_from_string(sc.value("study", f.study));
    ScalingParams sp;
    if (kind != ScalingKind::K0Sweep) sp.p = 2;
    sp.p = pick(f.p, sc, "p", sp.p);
    sp.d = pick(f.d, sc, "d", kind == ScalingKind::K0Sweep ? std::size_t{0} : sp.d);
    sp.points = pick(f.points, sc, "points", sp.points);
    sp.k0 = pick(f.k0, sc, "k0", sp.k0);
    if (!f.p_values.empty()) sp.p_values = f.p_values;
    else if (sc.contains("p_values")) sp.p_values = sc.at("p_values").get<std::vector<std::size_t>>();
    sp.n_rep = pick(f.reps, file, "n_rep", std::size_t{500});
    sp.grid = pick(f.grid, file, "grid", std::size_t{1000});
    sp.seed = pick(f.seed, file, "seed", std::uint64_t{1});
    sp.threads = pick(f.threads, file, "threads", default_threads());
    const auto eps = resolve_eps(f, file, {0.05});
    require(eps.size() == 1, ErrorCode::BadConfig, "scaling takes a single epsilon");
    sp.epsilon = eps.front();
    const json resolved = {{"scaling",
                            {{"study", to_string(kind)},
                             {"p", sp.p},
                             {"d", sp.d},
                             {"points", sp.points},
                             {"k0", sp.k0},
                             {"p_values", sp.p_values}}},
                           {"n_rep", sp.n_rep},
                           {"grid", sp.grid},
                           {"seed", sp.seed},
                           {"epsilons", eps}};
    RunManifest m{"scaling", resolved, sp.seed, utc_timestamp(), "", {}};
    const CsvTable t = run_scaling_study(kind, sp);
    const fs::path path = fs::path(f.out_dir) / ("scaling_" + to_string(kind) + ".csv");
    write_csv(t, path, sp.seed, resolved);
    m.outputs = {path.string(), sidecar_path(path).string()};
    finish(m, f.out_dir);
    return kExitOk;
}

int cmd_bootstrap(const Flags& f) {
    const json file = load_config(f.config_path);
    const json bs = file.value("bootstrap", json::object());
    const std::string data = !f.data_path.empty() ? f.data_path : bs.value("data", std::string());
    require(!data.empty(), ErrorCode::BadConfig, "bootstrap needs --data or bootstrap.data");
    BootstrapDemoOptions opt;
    opt.b_reps = pick(f.reps, file, "n_rep", std::size_t{5000});
    opt.seed = pick(f.seed, file, "seed", std::uint64_t{1});
    opt.threads = pick(f.threads, file, "threads", default_threads());
    opt.multiplier = multiplier_from_string(bs.value("multiplier", f.multiplier));
    const Matrix probe = read_data_csv(data);
    const auto p = static_cast<std::size_t>(probe.cols());
    const std::size_t split = pick(f.split, bs, "split", p / 2);
    const Partition part = Partition::split_at(p, split);
    const json resolved = {{"bootstrap", {{"data", data}, {"split", split}, {"multiplier", to_string(opt.multiplier)}}},
                           {"n_rep", opt.b_reps},
                           {"seed", opt.seed}};
    RunManifest m{"bootstrap", resolved, opt.seed, utc_timestamp(), "", {}};
    const json result = run_bootstrap_demo(data, part, opt);
    fs::create_directories(f.out_dir);
    const fs::path path = fs::path(f.out_dir) / "bootstrap.json";
    std::ofstream o(path);
    require(static_cast<bool>(o), ErrorCode::IoError, "cannot write " + path.string());
    o << result.dump(2) << '\n';
    m.outputs = {path.string()};
    finish(m, f.out_dir);
    return kExitOk;
}

// Runs a two-coordinate levy experiment twice with the same seed on 1 and 8 threads and
// compares the CSV text byte for byte.
int cmd_selftest(const Flags& f) {
    DesignConfig cfg;
    cfg.kind = DesignKind::FullrankEquicorr;
    cfg.p = 2;
    cfg.rho = 0.5;
    cfg.exponential_mean = true;
    cfg.seed = f.seed.value_or(1);
    const Design d = gen_design(cfg);
    LevyOptions opt;
    opt.n_rep = f.reps.value_or(100000);
    opt.grid = f.grid.value_or(1000);
    opt.seed = f.seed.value_or(1);
    const std::vector<double> eps = {0.01, 0.05, 0.2};
    opt.threads = 1;
    const std::string one = run_levy_experiment(d, eps, opt).to_csv();
    opt.threads = 8;
    const std::string eight = run_levy_experiment(d, eps, opt).to_csv();
    const bool same = one == eight;
    std::cout << "selftest determinism (1 vs 8 threads, " << one.size() << " bytes): "
              << (same ? "identical" : "DIFFERENT") << '\n';
    if (!same) std::cout << "--- 1 thread\n" << one << "--- 8 threads\n" << eight;
    return same ? kExitOk : kExitFailure;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadConfig:
        case ErrorCode::InvalidArgument:
        case ErrorCode::BadPartition:
        case ErrorCode::BadGeometry:
            return kExitConfig;
        case ErrorCode::IoError:
        case ErrorCode::ParseError:
            return kExitIo;
        default:
            return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anti-concentration experiments for differences of Gaussian maxima"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config_path, "JSON config or run manifest");
        sub->add_option("--seed", f.seed, "master seed");
        sub->add_option("--out", f.out_dir, "output directory")->capture_default_str();
        sub->add_option("--reps", f.reps, "replicates (n_rep, or B for bootstrap)");
        sub->add_option("--eps", f.eps, "epsilon list")->delimiter(',');
        sub->add_option("--grid", f.grid, "t-grid points");
        sub->add_option("--threads", f.threads, "worker threads");
    };
    auto design = [&](CLI::App* sub) {
        sub->add_option("--kind", f.kind, "design kind");
        sub->add_option("--p", f.p, "dimension");
        sub->add_option("--d", f.d, "factor dimension");
        sub->add_option("--overlap-k", f.overlap_k, "overlap count K / k");
        sub->add_option("--k0", f.k0, "size of A for k0_split");
        sub->add_option("--rho", f.rho, "correlation parameter");
        sub->add_option("--profile", f.profile, "variance profile 0|1|2");
        sub->add_option("--design-seed", f.design_seed, "seed of the random factor");
    };

    auto* gen = app.add_subcommand("gen-design", "generate a design and write its law as JSON");
    common(gen);
    design(gen);
    auto* levy = app.add_subcommand("levy", "empirical Levy concentration over an epsilon sweep");
    common(levy);
    design(levy);
    auto* bounds = app.add_subcommand("bounds-compare", "empirical ratio against every bound");
    common(bounds);
    design(bounds);
    bounds->add_option("--mc", f.mc, "Monte Carlo draws for expected maxima");
    bounds->add_flag("--no-cor22", f.no_cor22, "skip the delta-grid bound");
    auto* scaling = app.add_subcommand("scaling", "rho or p sweeps");
    common(scaling);
    scaling->add_option("--study", f.study, "rho_sweep_fullrank|rho_sweep_lowrank|k0_sweep")->capture_default_str();
    scaling->add_option("--p", f.p, "dimension for rho sweeps");
    scaling->add_option("--d", f.d, "factor dimension");
    scaling->add_option("--points", f.points, "rho grid size or number of random factors");
    scaling->add_option("--k0", f.k0, "size of A for the k0 sweep");
    scaling->add_option("--p-values", f.p_values, "p list for the k0 sweep")->delimiter(',');
    auto* boot = app.add_subcommand("bootstrap", "multiplier bootstrap of P(argmax in A) from CSV data");
    common(boot);
    boot->add_option("--data", f.data_path, "CSV with n rows and p numeric columns");
    boot->add_option("--split", f.split, "A = first SPLIT columns (default p/2)");
    boot->add_option("--multiplier", f.multiplier, "gaussian|beta")->capture_default_str();
    auto* self = app.add_subcommand("selftest", "thread-count determinism check");
    common(self);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (f.threads) set_default_threads(*f.threads);
        if (*gen) return cmd_gen_design(f);
        if (*levy) return cmd_levy(f);
        if (*bounds) return cmd_bounds(f);
        if (*scaling) return cmd_scaling(f);
        if (*boot) return cmd_bootstrap(f);
        if (*self) return cmd_selftest(f);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [IoError]: " << e.what() << '\n';
        return kExitIo;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error [BadConfig]: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitFailure;
}
