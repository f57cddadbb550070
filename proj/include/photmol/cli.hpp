// cli.hpp - command-line front end: config parsing, subcommand dispatch, table output.

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "photmol/experiments.hpp"
#include "photmol/lindblad.hpp"
#include "photmol/model.hpp"
#include "photmol/weak_drive.hpp"

namespace photmol::cli {

// Exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> names{"steady", "g2tau",  "optimal",    "fig1b",   "fig3a",
                                                "fig3b",  "fig3c",  "robustness", "converge"};
    return names;
}

struct GridSpec {
    double start = 0.0;
    double stop = 0.0;
    int count = 1;
    std::string scale = "lin";

    std::vector<double> values() const
    {
        return scale == "log" ? log_grid(start, stop, count) : linear_grid(start, stop, count);
    }
};

// Grid used by each subcommand when no grid key is given.
inline std::optional<GridSpec> default_grid(const std::string& sub)
{
    if (sub == "g2tau")
        return GridSpec{0.0, 10.0, 101, "lin"};
    if (sub == "fig1b")
        return GridSpec{1e-3, 1.0, 40, "log"};
    if (sub == "fig3a" || sub == "fig3b")
        return GridSpec{0.5, 6.0, 23, "lin"};
    if (sub == "fig3c")
        return GridSpec{1e-4, 1.0, 9, "log"};
    if (sub == "robustness")
        return GridSpec{0.0, 1.0, 5, "lin"};
    return std::nullopt;
}

struct RunConfig {
    std::string subcommand;
    SystemParams params;
    int cutoff = 3;
    std::optional<GridSpec> grid;
    std::vector<double> J_list{2.0, 3.0, 5.0};
    std::vector<double> U_list{0.05, 0.1, 0.2};
    std::vector<int> cutoffs{2, 3};
    std::string mode1 = "Bm";
    std::string mode2 = "Bm";
    std::string deviation = "detuning_B";
    std::string out;
    std::string format = "csv";
    bool timing = false;
};

struct KeySpec {
    const char* name;
    const char* help;
};

// Flag names double as config-file keys.
inline const std::vector<KeySpec>& config_keys()
{
    static const std::vector<KeySpec> keys{
        {"gamma", "photon loss rate (energy unit after rescaling), default 1"},
        {"J", "intercavity tunneling, default 5"},
        {"Delta", "polarization splitting parameter, default 2.5"},
        {"deltaE", "mode energy minus pump frequency, default 0.2772"},
        {"U", "same-polarization Kerr strength, default 0.0438"},
        {"U_cross", "cross-polarization Kerr strength, default 0"},
        {"F", "pump amplitude on A+, default 0.01"},
        {"Gamma", "pure dephasing rate of the linear modes, default 0"},
        {"cutoff", "maximal photon number per mode, default 3"},
        {"dE_Ap", "detuning offset of mode A+, default 0"},
        {"dE_Am", "detuning offset of mode A-, default 0"},
        {"dE_Bp", "detuning offset of mode B+, default 0"},
        {"dE_Bm", "detuning offset of mode B-, default 0"},
        {"dDelta_A", "splitting offset of pillar A, default 0"},
        {"dDelta_B", "splitting offset of pillar B, default 0"},
        {"start", "grid start (subcommand default if unset)"},
        {"stop", "grid stop"},
        {"count", "grid point count (>= 1)"},
        {"scale", "grid spacing: lin | log"},
        {"J_list", "comma-separated J values for fig3a/fig3b, default 2,3,5"},
        {"U_list", "comma-separated U values for fig3c, default 0.05,0.1,0.2"},
        {"cutoffs", "comma-separated cutoffs for converge, default 2,3"},
        {"mode1", "first mode for g2tau: Ap | Am | Bp | Bm, default Bm"},
        {"mode2", "second mode for g2tau, default Bm"},
        {"deviation", "robustness deviation: detuning_B | Delta_B, default detuning_B"},
        {"out", "output table path, default <subcommand>.<format>"},
        {"format", "csv | json, default csv"},
    };
    return keys;
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw UsageError("invalid value for " + key + ": '" + text + "' is not a number");
    return v;
}

inline int parse_int(const std::string& key, const std::string& text)
{
    int v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw UsageError("invalid value for " + key + ": '" + text + "' is not an integer");
    return v;
}

inline std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        parts.push_back(item);
    return parts;
}

inline std::string json_to_text(const std::string& key, const nlohmann::json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number())
        return v.dump();
    if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
            if (!out.empty())
                out += ",";
            out += json_to_text(key, item);
        }
        return out;
    }
    throw UsageError("invalid value for " + key + " in config file");
}

inline int mode_from_name(const std::string& key, const std::string& name)
{
    for (int m = 0; m < kNumModes; ++m)
        if (name == kModeNames[m])
            return m;
    throw UsageError("invalid value for " + key + ": '" + name + "' (expected Ap, Am, Bp or Bm)");
}

inline GridSpec& grid_of(RunConfig& cfg)
{
    if (!cfg.grid)
        cfg.grid = default_grid(cfg.subcommand).value_or(GridSpec{});
    return *cfg.grid;
}

} // namespace detail

// Applies one key given as text; shared by flags and the config file.
inline void apply_key(RunConfig& cfg, const std::string& key, const std::string& text)
{
    using detail::parse_double;
    SystemParams& p = cfg.params;
    const std::map<std::string, double*> doubles{
        {"gamma", &p.gamma},
        {"J", &p.J},
        {"Delta", &p.Delta},
        {"deltaE", &p.deltaE},
        {"U", &p.U},
        {"U_cross", &p.U_cross},
        {"F", &p.F},
        {"Gamma", &p.Gamma},
        {"dE_Ap", &p.detuning_offsets[kAp]},
        {"dE_Am", &p.detuning_offsets[kAm]},
        {"dE_Bp", &p.detuning_offsets[kBp]},
        {"dE_Bm", &p.detuning_offsets[kBm]},
        {"dDelta_A", &p.Delta_offsets[0]},
        {"dDelta_B", &p.Delta_offsets[1]},
    };
    if (auto it = doubles.find(key); it != doubles.end()) {
        *it->second = parse_double(key, text);
    } else if (key == "cutoff") {
        cfg.cutoff = detail::parse_int(key, text);
    } else if (key == "start") {
        detail::grid_of(cfg).start = parse_double(key, text);
    } else if (key == "stop") {
        detail::grid_of(cfg).stop = parse_double(key, text);
    } else if (key == "count") {
        detail::grid_of(cfg).count = detail::parse_int(key, text);
    } else if (key == "scale") {
        if (text != "lin" && text != "log")
            throw UsageError("invalid value for scale: '" + text + "' (expected lin or log)");
        detail::grid_of(cfg).scale = text;
    } else if (key == "J_list" || key == "U_list") {
        std::vector<double> values;
        for (const auto& part : detail::split_list(text))
            values.push_back(parse_double(key, part));
        (key == "J_list" ? cfg.J_list : cfg.U_list) = values;
    } else if (key == "cutoffs") {
        cfg.cutoffs.clear();
        for (const auto& part : detail::split_list(text))
            cfg.cutoffs.push_back(detail::parse_int(key, part));
    } else if (key == "mode1" || key == "mode2") {
        detail::mode_from_name(key, text);
        (key == "mode1" ? cfg.mode1 : cfg.mode2) = text;
    } else if (key == "deviation") {
        if (text != "detuning_B" && text != "Delta_B")
            throw UsageError("invalid value for deviation: '" + text + "' (expected detuning_B or Delta_B)");
        cfg.deviation = text;
    } else if (key == "out") {
        cfg.out = text;
    } else if (key == "format") {
        if (text != "csv" && text != "json")
            throw UsageError("invalid value for format: '" + text + "' (expected csv or json)");
        cfg.format = text;
    } else {
        throw UsageError("unknown key: " + key);
    }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot read config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object())
        throw UsageError("config file " + path + " must hold a JSON object");
    for (const auto& [key, value] : j.items())
        apply_key(cfg, key, detail::json_to_text(key, value));
}

// Throws std::invalid_argument naming the offending field.
inline void validate_config(const RunConfig& cfg)
{
    validate_params(cfg.params);
    if (cfg.cutoff < 1)
        throw std::invalid_argument("invalid parameter cutoff: must be >= 1");
    if (cfg.grid) {
        if (cfg.grid->count < 1)
            throw std::invalid_argument("invalid parameter count: must be >= 1");
        if (cfg.grid->scale == "log" && !(cfg.grid->start > 0.0 && cfg.grid->stop > 0.0))
            throw std::invalid_argument("invalid parameter start/stop: logarithmic grid bounds must be > 0");
    }
    for (int c : cfg.cutoffs)
        if (c < 2)
            throw std::invalid_argument("invalid parameter cutoffs: every cutoff must be >= 2");
    if (cfg.J_list.empty())
        throw std::invalid_argument("invalid parameter J_list: empty");
    if (cfg.U_list.empty())
        throw std::invalid_argument("invalid parameter U_list: empty");
}

inline const char* schema_help()
{
    return "Columns (every table ends with a 0/1 converged column):\n"
           "  steady      mode,n,g2_Ap,g2_Am,g2_Bp,g2_Bm,g2_defined\n"
           "  g2tau       tau,g2\n"
           "  optimal     Delta,J,U_opt,deltaE_opt,n_ratio,residual,interference\n"
           "  fig1b       U,g2_Ap,g2_Am,g2_Bp,g2_Bm,g2w_Ap,g2w_Am,g2w_Bp,g2w_Bm,n_total\n"
           "  fig3a       Delta,J,U_opt,deltaE_opt,n_ratio,residual,n_roots\n"
           "  fig3b       U_opt,J,n_ratio,Delta,deltaE_opt\n"
           "  fig3c       Gamma,U,Delta,deltaE,g2_Bm,n_Bm\n"
           "  robustness  deviation,deltaE_retuned,g2_Bm_retuned,g2_Bm_fixed\n"
           "  converge    cutoff,g2_<m>_<n> (16),n_Ap,n_Am,n_Bp,n_Bm,n_total,max_rel_diff_g2,\n"
           "              max_rel_diff_n,within_tolerance\n"
           "Numbers use 12 significant digits in scientific notation; undefined values print as nan.\n"
           "A metadata sidecar <out>.meta.json holds the effective config (usable with --config).\n"
           "Exit codes: 0 success, 1 solver failure or unwritable output, 2 usage or validation error.\n"
           "PHOTMOL_THREADS caps sweep parallelism (0 or unset = all cores).";
}

// Parses argv into a config. Throws CLI::ParseError (including help requests),
// UsageError or std::invalid_argument.
inline RunConfig parse_config(int argc, const char* const* argv)
{
    CLI::App app{"Photon blockade in a polarization-split photonic molecule", "photmol"};
    app.footer(schema_help());

    std::string sub;
    app.add_option("subcommand", sub, "one of: steady g2tau optimal fig1b fig3a fig3b fig3c robustness converge")
        ->required()
        ->check(CLI::IsMember(subcommands()));
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with flat keys named like the flags");
    bool timing = false;
    app.add_flag("--timing", timing, "record wall time in the metadata sidecar");

    std::map<std::string, std::optional<std::string>> flags;
    for (const auto& k : config_keys())
        flags[k.name];
    for (const auto& k : config_keys())
        app.add_option(std::string("--") + k.name, flags[k.name], k.help);

    app.parse(argc, argv);

    RunConfig cfg;
    cfg.subcommand = sub;
    cfg.grid = default_grid(sub);
    cfg.timing = timing;
    if (!config_path.empty())
        apply_config_file(cfg, config_path);
    for (const auto& k : config_keys())
        if (const auto& v = flags[k.name])
            apply_key(cfg, k.name, *v);
    if (cfg.out.empty())
        cfg.out = cfg.subcommand + "." + cfg.format;
    validate_config(cfg);
    return cfg;
}

// Flat-key form of the effective config; valid input for --config.
inline nlohmann::json config_json(const RunConfig& cfg)
{
    const SystemParams& p = cfg.params;
    nlohmann::json j{{"gamma", p.gamma},
                     {"J", p.J},
                     {"Delta", p.Delta},
                     {"deltaE", p.deltaE},
                     {"U", p.U},
                     {"U_cross", p.U_cross},
                     {"F", p.F},
                     {"Gamma", p.Gamma},
                     {"cutoff", cfg.cutoff},
                     {"dE_Ap", p.detuning_offsets[kAp]},
                     {"dE_Am", p.detuning_offsets[kAm]},
                     {"dE_Bp", p.detuning_offsets[kBp]},
                     {"dE_Bm", p.detuning_offsets[kBm]},
                     {"dDelta_A", p.Delta_offsets[0]},
                     {"dDelta_B", p.Delta_offsets[1]},
                     {"J_list", cfg.J_list},
                     {"U_list", cfg.U_list},
                     {"cutoffs", cfg.cutoffs},
                     {"mode1", cfg.mode1},
                     {"mode2", cfg.mode2},
                     {"deviation", cfg.deviation},
                     {"out", cfg.out},
                     {"format", cfg.format}};
    if (cfg.grid) {
        j["start"] = cfg.grid->start;
        j["stop"] = cfg.grid->stop;
        j["count"] = cfg.grid->count;
        j["scale"] = cfg.grid->scale;
    }
    return j;
}

inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

inline std::string to_csv(const SweepTable& t)
{
    std::string out;
    for (const auto& c : t.columns)
        out += c + ",";
    out += "converged\n";
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            out += format_number(t.values[c][r]) + ",";
        out += t.converged[r] ? "1\n" : "0\n";
    }
    return out;
}

inline nlohmann::json number_json(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline std::string to_json(const SweepTable& t)
{
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            row.push_back(number_json(t.values[c][r]));
        row.push_back(t.converged[r] ? 1 : 0);
        rows.push_back(row);
    }
    nlohmann::json columns = t.columns;
    columns.push_back("converged");
    return nlohmann::json{{"axis", t.axis}, {"columns", columns}, {"rows", rows}}.dump(2) + "\n";
}

inline std::string sidecar_path(const std::string& out) { return out + ".meta.json"; }

inline SweepTable steady_table(const RunConfig& cfg)
{
    const FockSpace space(kNumModes, cfg.cutoff);
    const Liouvillian l = system_liouvillian(cfg.params, space);
    const SteadyStateReport ss = solve_steady_state(l);
    const Occupations occ = occupations(ss.rho, space);
    const G2Matrix g2 = g2_matrix(ss.rho, space);
    const auto diag = ss.rho.check();

    SweepTable t("mode", {"mode", "n", "g2_Ap", "g2_Am", "g2_Bp", "g2_Bm", "g2_defined"});
    for (int m = 0; m < kNumModes; ++m) {
        bool defined = true;
        std::vector<double> row{static_cast<double>(m), occ.mode[m]};
        for (int n = 0; n < kNumModes; ++n) {
            row.push_back(g2.value[m][n]);
            defined = defined && g2.defined[m][n];
        }
        row.push_back(defined ? 1.0 : 0.0);
        t.add_row(row, true);
    }
    t.metadata = {{"pipeline", "steady"},
                  {"mode_names", kModeNames},
                  {"n_total", occ.total},
                  {"method", ss.method},
                  {"iterations", ss.iterations},
                  {"residual", ss.residual},
                  {"relative_residual", ss.relative_residual},
                  {"min_eigenvalue", diag.min_eigenvalue},
                  {"occupation_floor", kOccupationFloor}};
    return t;
}

inline SweepTable g2tau_table(const RunConfig& cfg)
{
    const FockSpace space(kNumModes, cfg.cutoff);
    const Liouvillian l = system_liouvillian(cfg.params, space);
    const DensityMatrix rho = steady_state(l);
    const int m1 = detail::mode_from_name("mode1", cfg.mode1);
    const int m2 = detail::mode_from_name("mode2", cfg.mode2);
    const CorrelationResult r = g2_tau(l, rho, space, m1, m2, cfg.grid->values());
    SweepTable t("tau", {"tau", "g2"});
    for (std::size_t k = 0; k < r.tau.size(); ++k)
        t.add_row({r.tau[k], r.g2_tau[k]}, true);
    t.metadata = {{"pipeline", "g2tau"}, {"mode1", cfg.mode1}, {"mode2", cfg.mode2}, {"g2_zero", r.value}};
    return t;
}

inline SweepTable optimal_table(const RunConfig& cfg)
{
    const SystemParams base = validate_params(cfg.params);
    const std::vector<OptimalPoint> roots = optimal_roots(base);
    const OptimalPoint& o = roots.front();
    SystemParams at = base;
    at.U = o.U_opt;
    at.deltaE = o.deltaE_opt;
    const InterferenceTerms terms = interference_terms(manifold_solve(at));

    SweepTable t("Delta", {"Delta", "J", "U_opt", "deltaE_opt", "n_ratio", "residual", "interference"});
    t.add_row({base.Delta, base.J, o.U_opt, o.deltaE_opt, o.n_ratio, o.residual, terms.relative_sum()}, true);
    nlohmann::json others = nlohmann::json::array();
    for (const auto& r : roots)
        others.push_back({{"U_opt", r.U_opt}, {"deltaE_opt", r.deltaE_opt}, {"n_ratio", r.n_ratio}});
    const ScanWindow w = default_optimum_window();
    t.metadata = {{"pipeline", "optimal"},
                  {"all_roots", others},
                  {"scan_window", {{"U", {w.x_min, w.x_max}}, {"deltaE", {w.y_min, w.y_max}}}}};
    return t;
}

inline SweepTable fig3b_table(const SweepTable& curve)
{
    SweepTable t("U_opt", {"U_opt", "J", "n_ratio", "Delta", "deltaE_opt"});
    for (std::size_t r = 0; r < curve.rows(); ++r)
        t.add_row({curve.column("U_opt")[r], curve.column("J")[r], curve.column("n_ratio")[r],
                   curve.column("Delta")[r], curve.column("deltaE_opt")[r]},
                  curve.converged[r]);
    t.metadata = curve.metadata;
    t.metadata["pipeline"] = "fig3b";
    t.wall_time_s = curve.wall_time_s;
    return t;
}

inline SweepTable build_table(const RunConfig& cfg)
{
    const std::string& s = cfg.subcommand;
    if (s == "steady")
        return steady_table(cfg);
    if (s == "g2tau")
        return g2tau_table(cfg);
    if (s == "optimal")
        return optimal_table(cfg);
    if (s == "fig1b")
        return sweep_g2_vs_U(cfg.params, cfg.grid->values(), cfg.cutoff);
    if (s == "fig3a")
        return curve_Uopt_vs_Delta(cfg.J_list, cfg.grid->values(), validate_params(cfg.params));
    if (s == "fig3b")
        return fig3b_table(curve_Uopt_vs_Delta(cfg.J_list, cfg.grid->values(), validate_params(cfg.params)));
    if (s == "fig3c")
        return sweep_g2_vs_dephasing(cfg.U_list, cfg.grid->values(), cfg.params.J, cfg.params, cfg.cutoff);
    if (s == "robustness") {
        const Deviation kind = cfg.deviation == "Delta_B" ? Deviation::Delta_B : Deviation::detuning_B;
        return robustness_scan(cfg.params, kind, cfg.grid->values(), cfg.cutoff);
    }
    if (s == "converge")
        return convergence_report(cfg.params, cfg.cutoffs);
    throw UsageError("unknown subcommand: " + s);
}

inline bool write_file(const std::string& path, const std::string& content, std::ostream& err)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (f)
        f << content;
    if (!f || !f.flush()) {
        err << "error: cannot write output file " << path << "\n";
        return false;
    }
    return true;
}

// Runs a validated config, writing the table and its sidecar.
inline int run_command(const RunConfig& cfg, std::ostream& err = std::cerr)
{
    SweepTable table;
    try {
        table = build_table(cfg);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << cfg.subcommand << " failed: " << e.what() << "\n";
        return kExitFailure;
    }

    const std::string body = cfg.format == "json" ? to_json(table) : to_csv(table);
    nlohmann::json meta{{"subcommand", cfg.subcommand},
                        {"config", config_json(cfg)},
                        {"columns", table.columns},
                        {"rows", table.rows()},
                        {"table", table.metadata}};
    if (cfg.timing)
        meta["wall_time_s"] = table.wall_time_s;
    if (!write_file(cfg.out, body, err) || !write_file(sidecar_path(cfg.out), meta.dump(2) + "\n", err))
        return kExitFailure;
    return kExitOk;
}

// Whole-program entry point; returns the process exit code.
inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr)
{
    RunConfig cfg;
    try {
        cfg = parse_config(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << "usage: photmol <subcommand> [--key value ...] [--config file.json] [--timing]\n\n";
        for (const auto& k : config_keys())
            out << "  --" << k.name << "  " << k.help << "\n";
        out << "\n" << schema_help() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitUsage;
    }
    return run_command(cfg, err);
}

} // namespace photmol::cli
