// experiments.hpp - sweep pipelines composing the master-equation engine and the
// weak-drive hierarchy into tables.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <nlohmann/json.hpp>

#include "photmol/fock.hpp"
#include "photmol/lindblad.hpp"
#include "photmol/model.hpp"
#include "photmol/weak_drive.hpp"

namespace photmol {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SweepTable {
    std::string axis;                         // name of the first column
    std::vector<std::string> columns;         // every column, axis first
    std::vector<std::vector<double>> values;  // values[column][row]
    std::vector<bool> converged;              // one flag per row
    nlohmann::json metadata = nlohmann::json::object();
    double wall_time_s = 0.0;

    SweepTable() = default;
    SweepTable(std::string axis_name, std::vector<std::string> names)
        : axis(std::move(axis_name)), columns(std::move(names)), values(columns.size())
    {
        if (columns.empty() || columns.front() != axis)
            throw std::invalid_argument("SweepTable: the axis must be the first column");
    }

    std::size_t rows() const { return converged.size(); }

    void add_row(const std::vector<double>& row, bool ok)
    {
        if (row.size() != columns.size())
            throw std::invalid_argument("SweepTable::add_row: expected " + std::to_string(columns.size()) +
                                        " values, got " + std::to_string(row.size()));
        for (std::size_t c = 0; c < row.size(); ++c)
            values[c].push_back(row[c]);
        converged.push_back(ok);
    }

    const std::vector<double>& column(std::string_view name) const
    {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name)
                return values[c];
        throw std::out_of_range("SweepTable: no column named " + std::string(name));
    }

    bool consistent() const
    {
        return std::all_of(values.begin(), values.end(),
                           [&](const std::vector<double>& v) { return v.size() == rows(); });
    }
};

inline nlohmann::json params_json(const SystemParams& p)
{
    return {{"deltaE", p.deltaE},
            {"Delta", p.Delta},
            {"J", p.J},
            {"U", p.U},
            {"U_cross", p.U_cross},
            {"F", p.F},
            {"gamma", p.gamma},
            {"Gamma", p.Gamma},
            {"detuning_offsets", p.detuning_offsets},
            {"Delta_offsets", p.Delta_offsets}};
}

// PHOTMOL_THREADS caps sweep parallelism; unset or 0 means hardware concurrency.
inline unsigned sweep_threads()
{
    unsigned n = 0;
    if (const char* env = std::getenv("PHOTMOL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0)
            n = static_cast<unsigned>(v);
    }
    if (n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Evaluates fn(i) for i in [0, count) on up to `threads` workers; results keep input order.
template <typename Result>
std::vector<Result> parallel_map(std::size_t count, const std::function<Result(std::size_t)>& fn,
                                 unsigned threads = sweep_threads())
{
    std::vector<Result> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t)
            pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

inline std::vector<double> linear_grid(double start, double stop, int count)
{
    if (count < 1)
        throw std::invalid_argument("grid count must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        g[static_cast<std::size_t>(k)] = count == 1 ? start : start + (stop - start) * k / (count - 1);
    return g;
}

inline std::vector<double> log_grid(double start, double stop, int count)
{
    if (!(start > 0.0) || !(stop > 0.0))
        throw std::invalid_argument("logarithmic grid bounds must be > 0");
    std::vector<double> g = linear_grid(std::log10(start), std::log10(stop), count);
    for (double& v : g)
        v = std::pow(10.0, v);
    return g;
}

namespace detail {

struct TimedTable {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    void finish(SweepTable& t) const
    {
        t.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct MasterPoint {
    bool ok = false;
    Occupations occ;
    G2Matrix g2;
    double residual = kNaN;
    std::string error;
};

inline MasterPoint master_point(const SystemParams& p, const FockSpace& space)
{
    MasterPoint r;
    try {
        const Liouvillian l = system_liouvillian(p, space);
        const SteadyStateReport ss = solve_steady_state(l);
        r.occ = occupations(ss.rho, space);
        r.g2 = g2_matrix(ss.rho, space);
        r.residual = ss.relative_residual;
        r.ok = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

inline double g2_bm(const SystemParams& p, const FockSpace& space)
{
    const Liouvillian l = system_liouvillian(p, space);
    return g2_zero(steady_state(l), space, kBm, kBm).value;
}

} // namespace detail

// g2_{mm}(0) of all four modes versus U, master equation and weak-drive columns.
inline SweepTable sweep_g2_vs_U(const SystemParams& base, const std::vector<double>& U_grid, int cutoff = 3)
{
    detail::TimedTable timer;
    const FockSpace space(kNumModes, cutoff);
    SweepTable t("U", {"U", "g2_Ap", "g2_Am", "g2_Bp", "g2_Bm", "g2w_Ap", "g2w_Am", "g2w_Bp", "g2w_Bm", "n_total"});

    struct Row {
        std::vector<double> values;
        bool ok = false;
        double residual = kNaN;
        std::string error;
    };
    const auto rows = parallel_map<Row>(U_grid.size(), [&](std::size_t i) {
        SystemParams p = base;
        p.U = U_grid[i];
        Row row;
        row.values.assign(t.columns.size(), kNaN);
        row.values[0] = p.U;
        const auto mp = detail::master_point(p, space);
        row.ok = mp.ok;
        row.error = mp.error;
        row.residual = mp.residual;
        if (mp.ok) {
            for (int m = 0; m < kNumModes; ++m)
                row.values[1 + m] = mp.g2.value[m][m];
            row.values[9] = mp.occ.total;
        }
        try {
            const G2Table w = g2_weak(p);
            for (int m = 0; m < kNumModes; ++m)
                row.values[5 + m] = w[m][m];
        } catch (const std::exception& e) {
            row.ok = false;
            row.error += std::string(row.error.empty() ? "" : "; ") + e.what();
        }
        return row;
    });

    nlohmann::json residuals = nlohmann::json::array();
    nlohmann::json errors = nlohmann::json::object();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.add_row(rows[i].values, rows[i].ok);
        residuals.push_back(rows[i].residual);
        if (!rows[i].error.empty())
            errors[std::to_string(i)] = rows[i].error;
    }
    t.metadata = {{"pipeline", "sweep_g2_vs_U"},
                  {"params", params_json(base)},
                  {"cutoff", cutoff},
                  {"F", base.F},
                  {"solver_relative_residuals", residuals},
                  {"row_errors", errors}};
    timer.finish(t);
    return t;
}

// U_opt, deltaE_opt and n_{B-}/n_total for every (J, Delta).
inline SweepTable curve_Uopt_vs_Delta(const std::vector<double>& J_list, const std::vector<double>& Delta_grid,
                                      const SystemParams& base = {})
{
    if (J_list.empty() || Delta_grid.empty())
        throw std::invalid_argument("curve_Uopt_vs_Delta: empty grid");
    detail::TimedTable timer;
    SweepTable t("Delta", {"Delta", "J", "U_opt", "deltaE_opt", "n_ratio", "residual", "n_roots"});

    struct Task {
        double J;
        double Delta;
    };
    std::vector<Task> tasks;
    for (double J : J_list)
        for (double d : Delta_grid)
            tasks.push_back({J, d});

    const auto points = parallel_map<CurvePoint>(tasks.size(), [&](std::size_t i) {
        SystemParams p = base;
        p.J = tasks[i].J;
        return optimal_curve(p, {tasks[i].Delta}).front();
    });

    nlohmann::json all_roots = nlohmann::json::array();
    nlohmann::json gaps = nlohmann::json::object();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const CurvePoint& c = points[i];
        if (c.optimum) {
            const OptimalPoint& o = *c.optimum;
            t.add_row({tasks[i].Delta, tasks[i].J, o.U_opt, o.deltaE_opt, o.n_ratio, o.residual,
                       static_cast<double>(c.roots.size())},
                      true);
        } else {
            t.add_row({tasks[i].Delta, tasks[i].J, kNaN, kNaN, kNaN, kNaN, 0.0}, false);
            gaps[std::to_string(i)] = c.diagnostics;
        }
        nlohmann::json roots = nlohmann::json::array();
        for (const auto& r : c.roots)
            roots.push_back({{"U_opt", r.U_opt}, {"deltaE_opt", r.deltaE_opt}, {"n_ratio", r.n_ratio}});
        all_roots.push_back({{"J", tasks[i].J}, {"Delta", tasks[i].Delta}, {"roots", roots}});
    }
    const ScanWindow w = default_optimum_window();
    t.metadata = {{"pipeline", "curve_Uopt_vs_Delta"},
                  {"params", params_json(base)},
                  {"J_list", J_list},
                  {"scan_window", {{"U", {w.x_min, w.x_max}}, {"deltaE", {w.y_min, w.y_max}}, {"points", {w.nx, w.ny}}}},
                  {"all_roots", all_roots},
                  {"gaps", gaps}};
    timer.finish(t);
    return t;
}

// Master-equation g2_{B-B-}(0) versus dephasing rate, with (Delta, deltaE) re-optimized at
// Gamma = 0 for every U.
inline SweepTable sweep_g2_vs_dephasing(const std::vector<double>& U_list, const std::vector<double>& Gamma_grid,
                                        double J, const SystemParams& base = {}, int cutoff = 3)
{
    detail::TimedTable timer;
    const FockSpace space(kNumModes, cutoff);
    SweepTable t("Gamma", {"Gamma", "U", "Delta", "deltaE", "g2_Bm", "n_Bm"});

    nlohmann::json skipped = nlohmann::json::object();
    struct Task {
        SystemParams p;
    };
    std::vector<Task> tasks;
    nlohmann::json optima = nlohmann::json::array();
    for (double U : U_list) {
        SystemParams p = base;
        p.J = J;
        p.U = U;
        p.Gamma = 0.0;
        try {
            const SplittingOptimum so = optimal_splitting(p);
            p.Delta = so.Delta;
            p.deltaE = so.deltaE;
            optima.push_back({{"U", U}, {"Delta", so.Delta}, {"deltaE", so.deltaE}, {"residual", so.residual}});
        } catch (const RootNotFound& e) {
            skipped[std::to_string(U)] = e.diagnostics();
            continue;
        }
        for (double G : Gamma_grid) {
            SystemParams q = p;
            q.Gamma = G;
            tasks.push_back({q});
        }
    }

    const auto points = parallel_map<detail::MasterPoint>(
        tasks.size(), [&](std::size_t i) { return detail::master_point(tasks[i].p, space); });
    nlohmann::json residuals = nlohmann::json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const SystemParams& p = tasks[i].p;
        const auto& mp = points[i];
        t.add_row({p.Gamma, p.U, p.Delta, p.deltaE, mp.ok ? mp.g2.value[kBm][kBm] : kNaN,
                   mp.ok ? mp.occ.mode[kBm] : kNaN},
                  mp.ok && mp.g2.defined[kBm][kBm]);
        residuals.push_back(mp.residual);
    }
    t.metadata = {{"pipeline", "sweep_g2_vs_dephasing"},
                  {"params", params_json(base)},
                  {"J", J},
                  {"cutoff", cutoff},
                  {"dephasing", "pure dephasing on the linear modes of each pillar"},
                  {"optima", optima},
                  {"skipped_U", skipped},
                  {"solver_relative_residuals", residuals},
                  {"thresholds", {{"Gamma=1e-3", "g2_Bm < 0.5"}, {"Gamma=1e-2", "g2_Bm < 1"}}}};
    timer.finish(t);
    return t;
}

enum class Deviation { detuning_B, Delta_B };

inline SystemParams apply_deviation(SystemParams p, Deviation kind, double amount)
{
    switch (kind) {
    case Deviation::detuning_B:
        p.detuning_offsets[kBp] += amount;
        p.detuning_offsets[kBm] += amount;
        break;
    case Deviation::Delta_B:
        p.Delta_offsets[1] += amount;
        break;
    }
    return p;
}

struct RetunedPoint {
    double deltaE = kNaN;
    double g2 = kNaN;
};

// Minimizes the master-equation g2_{B-B-} over deltaE. The weak-drive g2 on a coarse
// deltaE scan picks the bracket; Brent's method refines within it.
inline RetunedPoint retune_deltaE(const SystemParams& p, const FockSpace& space, double half_window = 1.0)
{
    const int scan = 401;
    double best_de = p.deltaE;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < scan; ++k) {
        SystemParams q = p;
        q.deltaE = p.deltaE - half_window + 2.0 * half_window * k / (scan - 1);
        const double v = g2_weak(q)[kBm][kBm];
        if (v < best) {
            best = v;
            best_de = q.deltaE;
        }
    }
    const double step = 2.0 * half_window / (scan - 1);
    const auto objective = [&](double de) {
        SystemParams q = p;
        q.deltaE = de;
        return detail::g2_bm(q, space);
    };
    const auto [de, g2] = boost::math::tools::brent_find_minima(objective, best_de - 2.0 * step,
                                                                best_de + 2.0 * step, 30);
    return {de, g2};
}

inline SweepTable robustness_scan(const SystemParams& base, Deviation kind, const std::vector<double>& deviations,
                                  int cutoff = 3)
{
    detail::TimedTable timer;
    const FockSpace space(kNumModes, cutoff);
    SweepTable t("deviation", {"deviation", "deltaE_retuned", "g2_Bm_retuned", "g2_Bm_fixed"});

    struct Row {
        std::vector<double> values;
        bool ok = false;
        std::string error;
    };
    const auto rows = parallel_map<Row>(deviations.size(), [&](std::size_t i) {
        Row row;
        row.values = {deviations[i], kNaN, kNaN, kNaN};
        try {
            const SystemParams p = apply_deviation(base, kind, deviations[i]);
            const RetunedPoint r = retune_deltaE(p, space);
            row.values[1] = r.deltaE;
            row.values[2] = r.g2;
            row.values[3] = detail::g2_bm(p, space);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        return row;
    });
    nlohmann::json errors = nlohmann::json::object();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.add_row(rows[i].values, rows[i].ok);
        if (!rows[i].error.empty())
            errors[std::to_string(i)] = rows[i].error;
    }
    t.metadata = {{"pipeline", "robustness_scan"},
                  {"params", params_json(base)},
                  {"deviation", kind == Deviation::detuning_B ? "detuning_B" : "Delta_B"},
                  {"cutoff", cutoff},
                  {"row_errors", errors},
                  {"thresholds", {{"detuning_B=0.5", "g2_Bm_retuned < 0.2"}}}};
    timer.finish(t);
    return t;
}

inline constexpr double kConvergenceG2Tol = 0.01;
inline constexpr double kConvergenceOccupationTol = 0.001;

// g2 matrix and occupations per cutoff with successive maximal relative differences.
inline SweepTable convergence_report(const SystemParams& point, const std::vector<int>& cutoffs)
{
    detail::TimedTable timer;
    std::vector<std::string> names{"cutoff"};
    for (int m = 0; m < kNumModes; ++m)
        for (int n = 0; n < kNumModes; ++n)
            names.push_back(std::string("g2_") + kModeNames[m] + "_" + kModeNames[n]);
    for (int m = 0; m < kNumModes; ++m)
        names.push_back(std::string("n_") + kModeNames[m]);
    names.insert(names.end(), {"n_total", "max_rel_diff_g2", "max_rel_diff_n", "within_tolerance"});
    SweepTable t("cutoff", names);

    for (int c : cutoffs)
        if (c < 2)
            throw std::invalid_argument("convergence_report: cutoffs must be >= 2");

    const auto points = parallel_map<detail::MasterPoint>(cutoffs.size(), [&](std::size_t i) {
        return detail::master_point(point, FockSpace(kNumModes, cutoffs[i]));
    });

    bool all_within = true;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& mp = points[i];
        std::vector<double> row{static_cast<double>(cutoffs[i])};
        for (int m = 0; m < kNumModes; ++m)
            for (int n = 0; n < kNumModes; ++n)
                row.push_back(mp.ok ? mp.g2.value[m][n] : kNaN);
        for (int m = 0; m < kNumModes; ++m)
            row.push_back(mp.ok ? mp.occ.mode[m] : kNaN);
        row.push_back(mp.ok ? mp.occ.total : kNaN);

        double dg = kNaN;
        double dn = kNaN;
        double within = kNaN;
        if (i > 0 && mp.ok && points[i - 1].ok) {
            const auto& prev = points[i - 1];
            dg = 0.0;
            dn = 0.0;
            for (int m = 0; m < kNumModes; ++m) {
                for (int n = 0; n < kNumModes; ++n) {
                    const double a = prev.g2.value[m][n];
                    const double b = mp.g2.value[m][n];
                    if (std::isfinite(a) && std::isfinite(b))
                        dg = std::max(dg, std::abs(b - a) / std::abs(b));
                    else if (std::isfinite(a) != std::isfinite(b))
                        dg = std::numeric_limits<double>::infinity();
                }
                const double a = prev.occ.mode[m];
                const double b = mp.occ.mode[m];
                if (b != 0.0)
                    dn = std::max(dn, std::abs(b - a) / std::abs(b));
            }
            const bool ok = dg < kConvergenceG2Tol && dn < kConvergenceOccupationTol;
            within = ok ? 1.0 : 0.0;
            all_within = all_within && ok;
        }
        row.insert(row.end(), {dg, dn, within});
        t.add_row(row, mp.ok);
    }
    t.metadata = {{"pipeline", "convergence_report"},
                  {"params", params_json(point)},
                  {"cutoffs", cutoffs},
                  {"tolerances", {{"g2_relative", kConvergenceG2Tol}, {"occupation_relative", kConvergenceOccupationTol}}},
                  {"converged", all_within}};
    timer.finish(t);
    return t;
}

} // namespace photmol
