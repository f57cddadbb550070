// weak_drive.hpp - zero/one/two-photon amplitude hierarchy under weak pumping and the
// root finder for the (U, deltaE) point where the doubly occupied B- amplitude vanishes.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "photmol/fock.hpp"
#include "photmol/model.hpp"

namespace photmol {

inline constexpr int kNumPairs = 10;

using OnePhotonMatrix = Eigen::Matrix<Complex, kNumModes, kNumModes>;
using OnePhotonVector = Eigen::Matrix<Complex, kNumModes, 1>;
using TwoPhotonMatrix = Eigen::Matrix<Complex, kNumPairs, kNumPairs>;
using TwoPhotonVector = Eigen::Matrix<Complex, kNumPairs, 1>;
using G2Table = std::array<std::array<double, kNumModes>, kNumModes>;

// Unordered pairs {m, n}, m <= n, in lexicographic order:
// (0,0) (0,1) (0,2) (0,3) (1,1) (1,2) (1,3) (2,2) (2,3) (3,3)
inline constexpr int pair_index(int m, int n)
{
    if (m > n)
        std::swap(m, n);
    return m * kNumModes - m * (m - 1) / 2 + (n - m);
}

inline constexpr std::pair<int, int> pair_modes(int p)
{
    for (int m = 0; m < kNumModes; ++m)
        for (int n = m; n < kNumModes; ++n)
            if (pair_index(m, n) == p)
                return {m, n};
    return {-1, -1};
}

class WeakDriveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Effective non-Hermitian one-photon block in mode order (A+, A-, B+, B-).
inline OnePhotonMatrix single_photon_block(const SystemParams& p)
{
    OnePhotonMatrix m = OnePhotonMatrix::Zero();
    for (int k = 0; k < kNumModes; ++k)
        m(k, k) = Complex(p.mode_detuning(k), -0.5 * p.gamma);
    for (int j = 0; j < 2; ++j) {
        m(2 * j, 2 * j + 1) = p.pillar_Delta(j);
        m(2 * j + 1, 2 * j) = p.pillar_Delta(j);
    }
    for (int xi = 0; xi < 2; ++xi) {
        m(kAp + xi, kBp + xi) = p.J;
        m(kBp + xi, kAp + xi) = p.J;
    }
    return m;
}

// Two-photon block on normalized pair states |m n>, |m m> = (a_m^dag)^2 |0> / sqrt2.
// The quadratic part is lifted from the one-photon block; Kerr terms are added on top.
inline TwoPhotonMatrix two_photon_block(const SystemParams& p)
{
    const OnePhotonMatrix m1 = single_photon_block(p);
    const auto norm = [](int a, int b) { return a == b ? std::sqrt(2.0) : 1.0; };

    TwoPhotonMatrix m2 = TwoPhotonMatrix::Zero();
    for (int col = 0; col < kNumPairs; ++col) {
        const auto [m, n] = pair_modes(col);
        // sum_kl M_kl a_k^dag a_l acting on a_m^dag a_n^dag |0> / norm(m, n)
        for (int k = 0; k < kNumModes; ++k) {
            // l = m: a_k^dag a_n^dag |0>
            m2(pair_index(k, n), col) += m1(k, m) * norm(k, n) / norm(m, n);
            // l = n: a_m^dag a_k^dag |0>
            m2(pair_index(m, k), col) += m1(k, n) * norm(m, k) / norm(m, n);
        }
    }
    for (int k = 0; k < kNumModes; ++k)
        m2(pair_index(k, k), pair_index(k, k)) += 2.0 * p.U;
    for (int j = 0; j < 2; ++j)
        m2(pair_index(2 * j, 2 * j + 1), pair_index(2 * j, 2 * j + 1)) += p.U_cross;
    return m2;
}

struct WeakDriveSolution {
    OnePhotonVector c1 = OnePhotonVector::Zero();
    TwoPhotonVector c2 = TwoPhotonVector::Zero();
    G2Table g2{};
    SystemParams params;

    Complex two(int m, int n) const { return c2(pair_index(m, n)); }

    double n_total() const { return c1.squaredNorm(); }
    double n_ratio(int m = kBm) const { return std::norm(c1(m)) / n_total(); }
};

namespace detail {

// No parameter validation: the root finders probe U < 0 during Newton steps.
inline WeakDriveSolution solve_amplitudes(const SystemParams& p)
{
    WeakDriveSolution s;
    s.params = p;

    const OnePhotonMatrix m1 = single_photon_block(p);
    Eigen::FullPivLU<OnePhotonMatrix> lu1(m1);
    if (!lu1.isInvertible())
        throw WeakDriveError("manifold_solve: singular one-photon block");
    OnePhotonVector drive = OnePhotonVector::Zero();
    drive(kAp) = -p.F;
    s.c1 = lu1.solve(drive);

    // Source F <p| a_{A+}^dag |psi_1>.
    TwoPhotonVector source = TwoPhotonVector::Zero();
    for (int n = 0; n < kNumModes; ++n)
        source(pair_index(kAp, n)) += p.F * s.c1(n) * (n == kAp ? std::sqrt(2.0) : 1.0);

    const TwoPhotonMatrix m2 = two_photon_block(p);
    Eigen::FullPivLU<TwoPhotonMatrix> lu2(m2);
    if (!lu2.isInvertible())
        throw WeakDriveError("manifold_solve: singular two-photon block");
    s.c2 = lu2.solve(TwoPhotonVector(-source));

    for (int m = 0; m < kNumModes; ++m)
        for (int n = 0; n < kNumModes; ++n) {
            const double denom = std::norm(s.c1(m)) * std::norm(s.c1(n));
            const double num = std::norm(s.two(m, n)) * (m == n ? 2.0 : 1.0);
            s.g2[m][n] = num / denom;
        }
    return s;
}

} // namespace detail

// Steady-state amplitudes with c0 = 1, truncated at the two-photon manifold.
inline WeakDriveSolution manifold_solve(const SystemParams& params)
{
    const SystemParams p = validate_params(params);
    if (!(p.F > 0.0))
        throw std::invalid_argument("manifold_solve: F must be > 0");
    return detail::solve_amplitudes(p);
}

inline G2Table g2_weak(const SystemParams& p) { return manifold_solve(p).g2; }

// The two couplings feeding the |B-, B-> amplitude: tunneling from |A-, B-> and
// polarization mixing from |B+, B->.
struct InterferenceTerms {
    Complex tunneling_path;
    Complex polarization_path;

    double relative_sum() const
    {
        const double scale = std::max(std::abs(tunneling_path), std::abs(polarization_path));
        return scale == 0.0 ? 0.0 : std::abs(tunneling_path + polarization_path) / scale;
    }
};

inline InterferenceTerms interference_terms(const WeakDriveSolution& s)
{
    const TwoPhotonMatrix m2 = two_photon_block(s.params);
    const int target = pair_index(kBm, kBm);
    const int from_j = pair_index(kAm, kBm);
    const int from_delta = pair_index(kBp, kBm);
    return {m2(target, from_j) * s.c2(from_j), m2(target, from_delta) * s.c2(from_delta)};
}

// c2(B-,B-) / c1(B-)^2; its modulus is sqrt(g2_{B-B-} / 2). Independent of F.
inline Complex normalized_bb_amplitude(const SystemParams& p)
{
    SystemParams q = p;
    q.F = 1.0;
    const WeakDriveSolution s = detail::solve_amplitudes(q);
    return s.two(kBm, kBm) / (s.c1(kBm) * s.c1(kBm));
}

struct OptimalPoint {
    double U_opt = 0.0;
    double deltaE_opt = 0.0;
    double residual = 0.0;  // |c2(B-,B-)| / max |c2|
    double n_ratio = 0.0;   // n_{B-} / n_total at the optimum
    int newton_iterations = 0;
};

struct ScanWindow {
    double x_min;
    double x_max;
    double y_min;
    double y_max;
    int nx = 61;
    int ny = 61;
    bool log_x = false;

    double x(int i) const
    {
        const double t = nx > 1 ? static_cast<double>(i) / (nx - 1) : 0.0;
        return log_x ? x_min * std::pow(x_max / x_min, t) : x_min + t * (x_max - x_min);
    }
    double span() const { return std::max(x_max - x_min, y_max - y_min); }

    double y(int j) const
    {
        const double t = ny > 1 ? static_cast<double>(j) / (ny - 1) : 0.0;
        return y_min + t * (y_max - y_min);
    }
};

// U in (0, 2] gamma (logarithmic, the lowest point is 1e-3 gamma), deltaE in [-3, 3] gamma.
inline ScanWindow default_optimum_window() { return {1e-3, 2.0, -3.0, 3.0, 61, 61, true}; }

class RootNotFound : public std::runtime_error {
public:
    RootNotFound(const std::string& what, std::string diagnostics)
        : std::runtime_error(what + "\n" + diagnostics), diagnostics_(std::move(diagnostics))
    {
    }
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

namespace detail {

struct NewtonResult {
    double x = 0.0;
    double y = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Damped Newton for a complex function of two real unknowns, central-difference Jacobian.
template <typename Fn>
NewtonResult newton_2d(Fn&& f, double x, double y, double max_step, int max_iter = 60)
{
    NewtonResult r;
    r.x = x;
    r.y = y;
    Complex fx = f(x, y);
    double norm = std::abs(fx);
    for (int it = 0; it < max_iter; ++it) {
        r.iterations = it;
        if (!std::isfinite(norm))
            return r;
        if (norm < 1e-14) {
            r.converged = true;
            break;
        }
        const double hx = 1e-7 * std::max(std::abs(x), 1e-2);
        const double hy = 1e-7 * std::max(std::abs(y), 1e-2);
        const Complex dfx = (f(x + hx, y) - f(x - hx, y)) / (2.0 * hx);
        const Complex dfy = (f(x, y + hy) - f(x, y - hy)) / (2.0 * hy);
        Eigen::Matrix2d jac;
        jac << dfx.real(), dfy.real(), dfx.imag(), dfy.imag();
        const Eigen::Vector2d rhs(-fx.real(), -fx.imag());
        Eigen::Vector2d step = jac.fullPivLu().solve(rhs);
        if (!step.allFinite())
            return r;
        if (step.norm() > max_step)
            step *= max_step / step.norm();

        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k) {
            const double nx = x + lambda * step(0);
            const double ny = y + lambda * step(1);
            const Complex fn = f(nx, ny);
            if (std::isfinite(std::abs(fn)) && std::abs(fn) < norm) {
                x = nx;
                y = ny;
                fx = fn;
                norm = std::abs(fn);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            // no further decrease possible at double precision
            r.converged = norm < 1e-11;
            break;
        }
        if (std::abs(step(0)) * lambda < 1e-15 * std::max(1.0, std::abs(x)) &&
            std::abs(step(1)) * lambda < 1e-15 * std::max(1.0, std::abs(y))) {
            r.converged = norm < 1e-11;
            break;
        }
    }
    r.x = x;
    r.y = y;
    r.residual = norm;
    if (norm < 1e-14)
        r.converged = true;
    return r;
}

// Evaluates the normalized B-B- amplitude, NaN where the hierarchy cannot be solved.
inline Complex bb_amplitude_or_nan(const SystemParams& p)
{
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    try {
        const Complex r = normalized_bb_amplitude(p);
        return std::isfinite(std::abs(r)) ? r : Complex(nan, nan);
    } catch (const WeakDriveError&) {
        return {nan, nan};
    }
}

struct Seed {
    double x;
    double y;
    double value;
};

// Local minima of |f| on the scan grid, ascending by |f|.
template <typename Fn>
std::vector<Seed> scan_minima(Fn&& f, const ScanWindow& w)
{
    std::vector<double> grid(static_cast<std::size_t>(w.nx * w.ny));
    for (int i = 0; i < w.nx; ++i)
        for (int j = 0; j < w.ny; ++j) {
            const double v = std::abs(f(w.x(i), w.y(j)));
            grid[static_cast<std::size_t>(i * w.ny + j)] = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        }
    std::vector<Seed> seeds;
    for (int i = 0; i < w.nx; ++i)
        for (int j = 0; j < w.ny; ++j) {
            const double v = grid[static_cast<std::size_t>(i * w.ny + j)];
            bool minimum = std::isfinite(v);
            for (int di = -1; di <= 1 && minimum; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0)
                        continue;
                    const int a = i + di;
                    const int b = j + dj;
                    if (a < 0 || a >= w.nx || b < 0 || b >= w.ny)
                        continue;
                    if (grid[static_cast<std::size_t>(a * w.ny + b)] < v) {
                        minimum = false;
                        break;
                    }
                }
            if (minimum)
                seeds.push_back({w.x(i), w.y(j), v});
        }
    std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.value < b.value; });
    return seeds;
}

inline std::string describe_seeds(const std::vector<Seed>& seeds, const char* xname, const char* yname)
{
    std::ostringstream os;
    os << "scan found " << seeds.size() << " local minima of |c2(B-,B-)/c1(B-)^2|";
    for (std::size_t k = 0; k < std::min<std::size_t>(seeds.size(), 5); ++k)
        os << "\n  " << xname << "=" << seeds[k].x << " " << yname << "=" << seeds[k].y << " |r|=" << seeds[k].value;
    return os.str();
}

inline OptimalPoint make_optimal_point(const SystemParams& p, int iterations)
{
    const WeakDriveSolution s = manifold_solve(p);
    OptimalPoint o;
    o.U_opt = p.U;
    o.deltaE_opt = p.deltaE;
    o.residual = std::abs(s.two(kBm, kBm)) / s.c2.cwiseAbs().maxCoeff();
    o.n_ratio = s.n_ratio(kBm);
    o.newton_iterations = iterations;
    return o;
}

// Both source paths into |B-, B-> vanish on their own (at J = Delta, by symmetry), so the
// root is not an interference optimum.
inline bool paths_vanish(const SystemParams& p)
{
    const WeakDriveSolution s = manifold_solve(p);
    const InterferenceTerms t = interference_terms(s);
    const TwoPhotonMatrix m2 = two_photon_block(p);
    const int target = pair_index(kBm, kBm);
    const double coupling = std::max(std::abs(m2(target, pair_index(kAm, kBm))),
                                     std::abs(m2(target, pair_index(kBp, kBm))));
    const double scale = coupling * s.c2.cwiseAbs().maxCoeff();
    return std::max(std::abs(t.tunneling_path), std::abs(t.polarization_path)) < 1e-10 * scale;
}

} // namespace detail

inline constexpr int kMaxNewtonSeeds = 8;

// Every distinct interference root of c2(B-,B-)(U, deltaE) = 0 reachable from the scan minima,
// sorted by U.
inline std::vector<OptimalPoint> optimal_roots(const SystemParams& base,
                                               const ScanWindow& window = default_optimum_window())
{
    SystemParams p = validate_params(base);
    p.F = 1.0;
    const auto f = [&p](double u, double de) {
        SystemParams q = p;
        q.U = u;
        q.deltaE = de;
        return detail::bb_amplitude_or_nan(q);
    };
    const auto seeds = detail::scan_minima(f, window);

    std::vector<OptimalPoint> roots;
    std::string rejected;
    const std::size_t count = std::min<std::size_t>(seeds.size(), kMaxNewtonSeeds);
    for (std::size_t k = 0; k < count; ++k) {
        const auto nr = detail::newton_2d(f, seeds[k].x, seeds[k].y, window.span());
        if (!nr.converged || !(nr.x > 0.0))
            continue;
        const bool duplicate = std::any_of(roots.begin(), roots.end(), [&](const OptimalPoint& o) {
            return std::abs(o.U_opt - nr.x) < 1e-8 * std::max(1.0, nr.x) &&
                   std::abs(o.deltaE_opt - nr.y) < 1e-8 * std::max(1.0, std::abs(nr.y));
        });
        if (duplicate)
            continue;
        SystemParams q = p;
        q.U = nr.x;
        q.deltaE = nr.y;
        if (detail::paths_vanish(q)) {
            std::ostringstream os;
            os << "rejected root U=" << nr.x << " deltaE=" << nr.y << ": both source paths vanish\n";
            rejected += os.str();
            continue;
        }
        roots.push_back(detail::make_optimal_point(q, nr.iterations));
    }
    std::sort(roots.begin(), roots.end(),
              [](const OptimalPoint& a, const OptimalPoint& b) { return a.U_opt < b.U_opt; });
    if (roots.empty())
        throw RootNotFound("optimal_point: no root of c2(B-,B-) in the scanned window",
                           rejected + detail::describe_seeds(seeds, "U", "deltaE"));
    return roots;
}

// Smallest-U root of c2(B-,B-) = 0 for the given J, Delta (and offsets) of base.
inline OptimalPoint optimal_point(const SystemParams& base, const ScanWindow& window = default_optimum_window())
{
    return optimal_roots(base, window).front();
}

inline OptimalPoint optimal_point(double J, double Delta, double gamma = 1.0,
                                  const ScanWindow& window = default_optimum_window())
{
    SystemParams p;
    p.J = J;
    p.Delta = Delta;
    p.gamma = gamma;
    if (!(J > 0.0) || !(Delta > 0.0))
        throw std::invalid_argument("optimal_point: J and Delta must be > 0");
    return optimal_point(p, window);
}

struct CurvePoint {
    double Delta = 0.0;
    std::optional<OptimalPoint> optimum;  // smallest-U root
    std::vector<OptimalPoint> roots;      // every root found in the window
    std::string diagnostics;              // set when no root was found
};

inline std::vector<CurvePoint> optimal_curve(const SystemParams& base, const std::vector<double>& Delta_grid,
                                             const ScanWindow& window = default_optimum_window())
{
    std::vector<CurvePoint> out;
    out.reserve(Delta_grid.size());
    for (double delta : Delta_grid) {
        CurvePoint c;
        c.Delta = delta;
        SystemParams p = base;
        p.Delta = delta;
        try {
            c.roots = optimal_roots(p, window);
            c.optimum = c.roots.front();
        } catch (const RootNotFound& e) {
            c.diagnostics = e.diagnostics();
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<CurvePoint> optimal_curve(double J, const std::vector<double>& Delta_grid,
                                             const ScanWindow& window = default_optimum_window())
{
    SystemParams p;
    p.J = J;
    return optimal_curve(p, Delta_grid, window);
}

struct SplittingOptimum {
    double Delta = 0.0;
    double deltaE = 0.0;
    double residual = 0.0;
    double n_ratio = 0.0;
};

// Inverse problem at fixed U and J: (Delta, deltaE) with c2(B-,B-) = 0. Only roots that lie
// on the smallest-U branch (optimal_point at that Delta returns the same U) are eligible;
// the one with the smallest Delta is returned.
inline SplittingOptimum optimal_splitting(const SystemParams& base,
                                          const ScanWindow& window = {0.05, 10.0, -3.0, 3.0, 61, 61, true})
{
    SystemParams p = validate_params(base);
    p.F = 1.0;
    const auto f = [&p](double delta, double de) {
        SystemParams q = p;
        q.Delta = delta;
        q.deltaE = de;
        return detail::bb_amplitude_or_nan(q);
    };
    const auto seeds = detail::scan_minima(f, window);

    std::vector<detail::NewtonResult> candidates;
    const std::size_t count = std::min<std::size_t>(seeds.size(), kMaxNewtonSeeds);
    for (std::size_t k = 0; k < count; ++k) {
        const auto nr = detail::newton_2d(f, seeds[k].x, seeds[k].y, window.span());
        if (nr.converged && nr.x >= window.x_min && nr.x <= window.x_max)
            candidates.push_back(nr);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const detail::NewtonResult& a, const detail::NewtonResult& b) { return a.x < b.x; });

    for (const auto& nr : candidates) {
        SystemParams q = p;
        q.Delta = nr.x;
        q.deltaE = nr.y;
        try {
            const OptimalPoint branch = optimal_point(q);
            if (std::abs(branch.U_opt - p.U) > 1e-6 * std::max(p.U, 1e-3))
                continue;
        } catch (const RootNotFound&) {
            continue;
        }
        const OptimalPoint o = detail::make_optimal_point(q, nr.iterations);
        return {nr.x, nr.y, o.residual, o.n_ratio};
    }
    throw RootNotFound("optimal_splitting: no (Delta, deltaE) on the smallest-U branch for U = " +
                           std::to_string(p.U),
                       detail::describe_seeds(seeds, "Delta", "deltaE"));
}

} // namespace photmol
