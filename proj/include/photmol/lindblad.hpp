// lindblad.hpp - Liouvillian superoperator, steady states, time evolution, g2 correlations

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>
#include <unsupported/Eigen/KroneckerProduct>

#include <boost/numeric/odeint.hpp>

#include "photmol/fock.hpp"
#include "photmol/model.hpp"

namespace photmol {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual = -1.0)
        : std::runtime_error(what), residual_(residual)
    {
    }
    double residual() const { return residual_; }

private:
    double residual_;
};

class UndefinedCorrelation : public std::domain_error {
public:
    UndefinedCorrelation(const std::string& what, double n1, double n2)
        : std::domain_error(what), n1_(n1), n2_(n2)
    {
    }
    double n1() const { return n1_; }
    double n2() const { return n2_; }

private:
    double n1_;
    double n2_;
};

using SuperMatrix = Eigen::SparseMatrix<Complex>;

// Diagonal Hilbert-space weights d_i = ratio^{N_i} with N_i the total photon number of
// basis state i. The superoperator acts on X = D^{-1} rho D^{-1}, which keeps the
// weakly populated multi-photon elements of rho at O(1) magnitude.
inline Eigen::VectorXd photon_grading(const FockSpace& s, double ratio)
{
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw std::invalid_argument("photon_grading: ratio must be positive and finite");
    Eigen::VectorXd d(s.dim());
    for (Index k = 0; k < s.dim(); ++k)
        d(k) = std::pow(ratio, s.total_photons(k));
    return d;
}

// Generator L(rho) = -i[H, rho] + sum_k D[sqrt(rate_k) c_k] rho, stored in graded,
// column-stacked form: vec(X)_{i + n j} = X_ij.
class Liouvillian {
public:
    Liouvillian(SparseOperator hamiltonian, std::vector<CollapseOperator> collapses,
                Eigen::VectorXd grading)
        : h_(std::move(hamiltonian)), collapses_(std::move(collapses)), d_(std::move(grading))
    {
        const Index n = h_.dim();
        if (d_.size() != n)
            throw std::invalid_argument("build_liouvillian: grading size does not match Hamiltonian");
        for (const auto& c : collapses_) {
            detail::require_same_dim(c.op.dim(), n, "build_liouvillian");
            if (!(c.rate >= 0.0))
                throw std::invalid_argument("build_liouvillian: negative collapse rate for " + c.label);
        }

        SparseOperator::Matrix drift = (-kI * h_.matrix());
        for (const auto& c : collapses_)
            drift -= (0.5 * c.rate) * SparseOperator::Matrix(c.op.matrix().adjoint() * c.op.matrix());
        drift_ = graded(drift);

        SparseOperator::Matrix eye(n, n);
        eye.setIdentity();
        SuperMatrix l = Eigen::kroneckerProduct(eye, drift_);
        l += SuperMatrix(Eigen::kroneckerProduct(SparseOperator::Matrix(drift_.conjugate()), eye));
        for (const auto& c : collapses_) {
            if (c.rate == 0.0)
                continue;
            const SparseOperator::Matrix jump = graded(std::sqrt(c.rate) * c.op.matrix());
            jumps_.push_back(jump);
            l += SuperMatrix(Eigen::kroneckerProduct(SparseOperator::Matrix(jump.conjugate()), jump));
        }
        l.prune([](Index, Index, const Complex& v) { return v != Complex(0.0); });
        l.makeCompressed();
        super_ = std::move(l);
    }

    Index hilbert_dim() const { return h_.dim(); }
    Index dim() const { return super_.rows(); }
    const SparseOperator& hamiltonian() const { return h_; }
    const std::vector<CollapseOperator>& collapses() const { return collapses_; }
    const Eigen::VectorXd& grading() const { return d_; }

    // Graded superoperator.
    const SuperMatrix& matrix() const { return super_; }
    // Graded non-Hermitian drift A = D^{-1}(-iH - 1/2 sum c^dag c)D.
    const SparseOperator::Matrix& drift() const { return drift_; }
    // Graded jump operators sqrt(rate) D^{-1} c D.
    const std::vector<SparseOperator::Matrix>& jumps() const { return jumps_; }

    bool has_dissipation() const { return !jumps_.empty(); }

    // Labels (e.g. total photon number) of basis states; the steady-state preconditioner
    // keeps only drift entries within one label. All zero by default.
    const std::vector<int>& sectors() const { return sectors_; }
    void set_sectors(std::vector<int> labels)
    {
        if (static_cast<Index>(labels.size()) != hilbert_dim())
            throw std::invalid_argument("Liouvillian::set_sectors: one label per basis state required");
        sectors_ = std::move(labels);
    }

    DenseVector to_graded(const DenseMatrix& rho) const
    {
        detail::require_same_dim(rho.rows(), hilbert_dim(), "Liouvillian::to_graded");
        const Index n = hilbert_dim();
        DenseVector x(n * n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i)
                x(i + n * j) = rho(i, j) / (d_(i) * d_(j));
        return x;
    }

    DenseMatrix from_graded(const DenseVector& x) const
    {
        const Index n = hilbert_dim();
        DenseMatrix rho(n, n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i)
                rho(i, j) = x(i + n * j) * (d_(i) * d_(j));
        return rho;
    }

    // L(rho) as a matrix, in ungraded coordinates.
    DenseMatrix apply(const DenseMatrix& rho) const { return from_graded(super_ * to_graded(rho)); }

    // Largest entry magnitude of the ungraded superoperator.
    double max_abs_ungraded() const
    {
        const Index n = hilbert_dim();
        double best = 0.0;
        for (Index k = 0; k < super_.outerSize(); ++k)
            for (SuperMatrix::InnerIterator it(super_, k); it; ++it) {
                const Index r = it.row();
                const Index c = it.col();
                const double w = (d_(r % n) * d_(r / n)) / (d_(c % n) * d_(c / n));
                best = std::max(best, std::abs(it.value()) * w);
            }
        return best;
    }

    double residual_norm(const DensityMatrix& rho) const { return apply(rho.matrix()).norm(); }

private:
    SparseOperator::Matrix graded(const SparseOperator::Matrix& m) const
    {
        SparseOperator::Matrix out = m;
        for (Index k = 0; k < out.outerSize(); ++k)
            for (SparseOperator::Matrix::InnerIterator it(out, k); it; ++it)
                it.valueRef() *= d_(it.col()) / d_(it.row());
        return out;
    }

    SparseOperator h_;
    std::vector<CollapseOperator> collapses_;
    Eigen::VectorXd d_;
    SparseOperator::Matrix drift_;
    std::vector<SparseOperator::Matrix> jumps_;
    SuperMatrix super_;
    std::vector<int> sectors_ = std::vector<int>(static_cast<std::size_t>(h_.dim()), 0);
};

inline Liouvillian build_liouvillian(const SparseOperator& h, const std::vector<CollapseOperator>& collapses)
{
    return Liouvillian(h, collapses, Eigen::VectorXd::Ones(h.dim()));
}

inline Liouvillian build_liouvillian(const SparseOperator& h, const std::vector<CollapseOperator>& collapses,
                                     const Eigen::VectorXd& grading)
{
    return Liouvillian(h, collapses, grading);
}

// Grading ratio used for a driven system: F/gamma, clamped to [1e-4, 1].
inline double default_grading_ratio(const SystemParams& p)
{
    if (!(p.F > 0.0))
        return 1.0;
    return std::clamp(p.F / p.gamma, 1e-4, 1.0);
}

inline Liouvillian system_liouvillian(const SystemParams& params, const FockSpace& s)
{
    const SystemParams p = validate_params(params);
    Liouvillian l(build_hamiltonian(p, s), collapse_operators(p, s), photon_grading(s, default_grading_ratio(p)));
    std::vector<int> photons(static_cast<std::size_t>(s.dim()));
    for (Index i = 0; i < s.dim(); ++i)
        photons[static_cast<std::size_t>(i)] = s.total_photons(i);
    l.set_sectors(std::move(photons));
    return l;
}

namespace detail {

// Solves P Z + Z S^dagger = C in place (C becomes Z) for upper-triangular P and S by
// recursive splitting; off-diagonal couplings become matrix products.
inline void triangular_sylvester(const Eigen::Ref<const DenseMatrix>& p, const Eigen::Ref<const DenseMatrix>& s,
                                 Eigen::Ref<DenseMatrix> c)
{
    constexpr Index leaf = 24;
    const Index m = p.rows();
    const Index n = s.rows();
    if (m > leaf && m >= n) {
        const Index h = m / 2;
        triangular_sylvester(p.bottomRightCorner(m - h, m - h), s, c.bottomRows(m - h));
        c.topRows(h).noalias() -= p.topRightCorner(h, m - h) * c.bottomRows(m - h);
        triangular_sylvester(p.topLeftCorner(h, h), s, c.topRows(h));
        return;
    }
    if (n > leaf) {
        const Index h = n / 2;
        triangular_sylvester(p, s.bottomRightCorner(n - h, n - h), c.rightCols(n - h));
        c.leftCols(h).noalias() -= c.rightCols(n - h) * s.topRightCorner(h, n - h).adjoint();
        triangular_sylvester(p, s.topLeftCorner(h, h), c.leftCols(h));
        return;
    }
    // Column-wise back substitution: (P + conj(S_jj)) z_j = c_j - sum_{k>j} z_k conj(S_jk).
    for (Index j = n - 1; j >= 0; --j) {
        for (Index k = j + 1; k < n; ++k)
            c.col(j) -= c.col(k) * std::conj(s(j, k));
        const Complex shift = std::conj(s(j, j));
        for (Index i = m - 1; i >= 0; --i) {
            Complex acc = c(i, j);
            for (Index k = i + 1; k < m; ++k)
                acc -= p(i, k) * c(k, j);
            // A zero denominator is the undriven vacuum coherence, which the trace row
            // replaces; map it to the identity.
            const Complex den = p(i, i) + shift;
            c(i, j) = acc / (std::abs(den) < 1e-300 ? Complex(1.0) : den);
        }
    }
}

// Approximate inverse of X -> A X + X A^dagger (the no-jump part of a Liouvillian), used
// as a GMRES preconditioner. Drift entries coupling different sectors (for the molecule:
// different total photon numbers, i.e. the pump) are dropped, so A splits into small
// diagonal blocks whose complex Schur forms A_b = Q_b T_b Q_b^dagger give each block
// pair a triangular Sylvester equation.
class BlockSylvesterPreconditioner {
public:
    BlockSylvesterPreconditioner() = default;

    BlockSylvesterPreconditioner(const DenseMatrix& drift, const std::vector<int>& sectors) : n_(drift.rows())
    {
        if (static_cast<Index>(sectors.size()) != n_)
            throw std::invalid_argument("BlockSylvesterPreconditioner: one sector label per state required");
        perm_.resize(static_cast<std::size_t>(n_));
        std::iota(perm_.begin(), perm_.end(), Index{0});
        std::stable_sort(perm_.begin(), perm_.end(), [&](Index x, Index y) {
            return sectors[static_cast<std::size_t>(x)] < sectors[static_cast<std::size_t>(y)];
        });
        Index start = 0;
        while (start < n_) {
            Index end = start;
            const int label = sectors[static_cast<std::size_t>(perm_[static_cast<std::size_t>(start)])];
            while (end < n_ && sectors[static_cast<std::size_t>(perm_[static_cast<std::size_t>(end)])] == label)
                ++end;
            const std::vector<Index> idx(perm_.begin() + start, perm_.begin() + end);
            Eigen::ComplexSchur<DenseMatrix> schur(DenseMatrix(drift(idx, idx)));
            if (schur.info() != Eigen::Success)
                throw SolverError("Schur factorization of a drift block failed");
            blocks_.push_back({start, end - start, schur.matrixU(), schur.matrixT().triangularView<Eigen::Upper>()});
            start = end;
        }
    }

    template <typename M>
    BlockSylvesterPreconditioner& analyzePattern(const M&) { return *this; }
    template <typename M>
    BlockSylvesterPreconditioner& factorize(const M&) { return *this; }
    template <typename M>
    BlockSylvesterPreconditioner& compute(const M&) { return *this; }
    Eigen::ComputationInfo info() const { return Eigen::Success; }

    template <typename Rhs>
    DenseVector solve(const Rhs& b) const
    {
        const Eigen::Map<const DenseMatrix> y(b.derived().data(), n_, n_);
        DenseMatrix w = y(perm_, perm_);
        for (const Block& r : blocks_) {
            for (const Block& c : blocks_) {
                auto wb = w.block(r.start, c.start, r.size, c.size);
                DenseMatrix z = r.q.adjoint() * wb * c.q;
                triangular_sylvester(r.t, c.t, z);
                wb.noalias() = r.q * z * c.q.adjoint();
            }
        }
        DenseVector out(n_ * n_);
        Eigen::Map<DenseMatrix> x(out.data(), n_, n_);
        x(perm_, perm_) = w;
        return out;
    }

private:
    struct Block {
        Index start;
        Index size;
        DenseMatrix q;
        DenseMatrix t;
    };
    std::vector<Index> perm_;
    std::vector<Block> blocks_;
    Index n_ = 0;
};

} // namespace detail

struct SteadyStateOptions {
    Index direct_limit = 0;        // superoperator dimension up to which SparseLU is used
    double gmres_tol = 1e-14;
    Index max_iterations = 400;
    Index restart = 80;
    int refinement_rounds = 2;
    double residual_tol = 1e-10;   // relative to the largest ungraded superoperator entry
    bool evolve_fallback = true;
    double fallback_time = 400.0;  // in units of 1/gamma
};

struct SteadyStateReport {
    DensityMatrix rho;
    double residual = 0.0;           // ||L vec(rho)||_2, ungraded
    double relative_residual = 0.0;  // residual / max |L_ij|
    std::string method;
    Index iterations = 0;
};

// forward declaration; defined below
inline DensityMatrix evolve(const Liouvillian& l, const DensityMatrix& rho0, double t_final);

namespace detail {

// Replace the equation for X_00 with the trace constraint sum_i d_i^2 X_ii = 1.
inline SuperMatrix trace_constrained(const Liouvillian& l)
{
    const Index n = l.hilbert_dim();
    const SuperMatrix& s = l.matrix();
    std::vector<Eigen::Triplet<Complex>> entries;
    entries.reserve(static_cast<std::size_t>(s.nonZeros() + n));
    for (Index k = 0; k < s.outerSize(); ++k)
        for (SuperMatrix::InnerIterator it(s, k); it; ++it)
            if (it.row() != 0)
                entries.emplace_back(it.row(), it.col(), it.value());
    for (Index i = 0; i < n; ++i)
        entries.emplace_back(0, i + n * i, l.grading()(i) * l.grading()(i));
    SuperMatrix out(s.rows(), s.cols());
    out.setFromTriplets(entries.begin(), entries.end());
    out.makeCompressed();
    return out;
}

inline DensityMatrix finish_state(const Liouvillian& l, const DenseVector& x)
{
    DensityMatrix rho(l.from_graded(x));
    return rho.hermitized().normalized();
}

} // namespace detail

inline SteadyStateReport solve_steady_state(const Liouvillian& l, const SteadyStateOptions& opts = {})
{
    if (!l.has_dissipation())
        throw SolverError("steady_state: no dissipation channel, steady state is not unique");

    const SuperMatrix a = detail::trace_constrained(l);
    DenseVector b = DenseVector::Zero(a.rows());
    b(0) = 1.0;
    const double lmax = l.max_abs_ungraded();

    SteadyStateReport report;
    DenseVector x;
    bool solved = false;
    if (a.rows() <= opts.direct_limit) {
        Eigen::SparseLU<SuperMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success)
            throw SolverError("steady_state: trace-constrained Liouvillian is singular "
                              "(multiple steady states?): " + lu.lastErrorMessage());
        x = lu.solve(b);
        // one step of iterative refinement
        x += lu.solve(DenseVector(b - a * x));
        report.method = "sparse-lu";
        solved = x.allFinite();
    } else {
        Eigen::GMRES<SuperMatrix, detail::BlockSylvesterPreconditioner> gmres;
        gmres.preconditioner() = detail::BlockSylvesterPreconditioner(DenseMatrix(l.drift()), l.sectors());
        gmres.compute(a);
        gmres.setTolerance(opts.gmres_tol);
        gmres.setMaxIterations(opts.max_iterations);
        gmres.set_restart(opts.restart);
        x = gmres.solve(b);
        report.iterations = gmres.iterations();
        for (int round = 0; round < opts.refinement_rounds && x.allFinite(); ++round) {
            const DenseVector r = b - a * x;
            if (r.norm() <= 100.0 * opts.gmres_tol)
                break;
            x += gmres.solve(r);
            report.iterations += gmres.iterations();
        }
        report.method = "gmres-sylvester";
        solved = x.allFinite();
    }

    if (solved) {
        report.rho = detail::finish_state(l, x);
        report.residual = l.residual_norm(report.rho);
        report.relative_residual = report.residual / lmax;
        if (report.relative_residual < opts.residual_tol)
            return report;
    }

    if (!opts.evolve_fallback)
        throw SolverError("steady_state: linear solve did not converge", report.relative_residual);

    report.rho = evolve(l, DensityMatrix::vacuum(l.hilbert_dim()), opts.fallback_time)
                     .hermitized()
                     .normalized();
    report.residual = l.residual_norm(report.rho);
    report.relative_residual = report.residual / lmax;
    report.method = "evolve";
    if (!(report.relative_residual < opts.residual_tol))
        throw SolverError("steady_state: no convergence (residual " +
                              std::to_string(report.relative_residual) + ")",
                          report.relative_residual);
    return report;
}

inline DensityMatrix steady_state(const Liouvillian& l) { return solve_steady_state(l).rho; }

struct EvolveOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double initial_dt = 1e-3;
    double min_dt = 1e-12;
};

// Integrates dX/dt = L X in graded coordinates with adaptive Dormand-Prince steps and
// calls observe(k, X) at every requested time (sorted, >= 0).
inline void propagate(const Liouvillian& l, DenseVector x, const std::vector<double>& times,
                      const std::function<void(std::size_t, const DenseVector&)>& observe,
                      const EvolveOptions& opts = {})
{
    namespace odeint = boost::numeric::odeint;
    using State = std::vector<Complex>;

    for (std::size_t k = 1; k < times.size(); ++k)
        if (times[k] < times[k - 1])
            throw std::invalid_argument("propagate: times must be sorted");
    if (!times.empty() && times.front() < 0.0)
        throw std::invalid_argument("propagate: times must be >= 0");

    const SuperMatrix& m = l.matrix();
    const auto rhs = [&m](const State& s, State& ds, double) {
        const Eigen::Map<const DenseVector> in(s.data(), static_cast<Index>(s.size()));
        Eigen::Map<DenseVector> out(ds.data(), static_cast<Index>(ds.size()));
        out.noalias() = m * in;
    };

    State state(x.data(), x.data() + x.size());
    auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol,
                                           odeint::runge_kutta_dopri5<State>());
    double t = 0.0;
    double dt = opts.initial_dt;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double target = times[k];
        while (t < target) {
            const bool clipped = dt >= target - t;
            double step = clipped ? target - t : dt;
            if (stepper.try_step(rhs, state, t, step) == odeint::success) {
                if (clipped || target - t <= 1e-14 * std::max(1.0, target))
                    t = target;
                dt = clipped ? std::max(dt, step) : step;
            } else {
                dt = step;
                if (dt < opts.min_dt)
                    throw SolverError("evolve: step size underflow at t = " + std::to_string(t));
            }
        }
        observe(k, Eigen::Map<const DenseVector>(state.data(), static_cast<Index>(state.size())));
    }
}

inline DensityMatrix evolve(const Liouvillian& l, const DensityMatrix& rho0, double t_final,
                            const EvolveOptions& opts)
{
    if (t_final < 0.0)
        throw std::invalid_argument("evolve: t_final must be >= 0");
    DenseVector out;
    propagate(l, l.to_graded(rho0.matrix()), {t_final},
              [&](std::size_t, const DenseVector& x) { out = x; }, opts);
    return DensityMatrix(l.from_graded(out));
}

inline DensityMatrix evolve(const Liouvillian& l, const DensityMatrix& rho0, double t_final)
{
    return evolve(l, rho0, t_final, EvolveOptions{});
}

struct Occupations {
    std::array<double, kNumModes> mode{};
    double total = 0.0;
};

inline Occupations occupations(const DensityMatrix& rho, const FockSpace& s)
{
    detail::require_molecule_space(s, "occupations");
    Occupations o;
    for (int m = 0; m < kNumModes; ++m) {
        o.mode[static_cast<std::size_t>(m)] = expectation_value(number_operator(s, m), rho).real();
        o.total += o.mode[static_cast<std::size_t>(m)];
    }
    return o;
}

// Total photon number accounted in the linear (x, y) basis.
inline double total_photons_linear(const DensityMatrix& rho, const FockSpace& s)
{
    double total = 0.0;
    for (int j = 0; j < 2; ++j) {
        const LinearModes lin = linear_modes(s, static_cast<Pillar>(j));
        total += expectation_value(adjoint(lin.ax) * lin.ax, rho).real();
        total += expectation_value(adjoint(lin.ay) * lin.ay, rho).real();
    }
    return total;
}

inline constexpr double kOccupationFloor = 1e-20;

struct CorrelationResult {
    int mode = 0;
    int mode2 = 0;
    double value = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    std::vector<double> tau;
    std::vector<double> g2_tau;
};

// <a_m^dag a_m'^dag a_m' a_m> / (n_m n_m').
inline CorrelationResult g2_zero(const DensityMatrix& rho, const FockSpace& s, int m, int m2)
{
    const SparseOperator a1 = annihilator(s, m);
    const SparseOperator a2 = annihilator(s, m2);
    CorrelationResult r;
    r.mode = m;
    r.mode2 = m2;
    r.n1 = expectation_value(adjoint(a1) * a1, rho).real();
    r.n2 = expectation_value(adjoint(a2) * a2, rho).real();
    if (!(r.n1 > kOccupationFloor) || !(r.n2 > kOccupationFloor))
        throw UndefinedCorrelation("g2: vanishing occupation (n1 = " + std::to_string(r.n1) +
                                       ", n2 = " + std::to_string(r.n2) + ")",
                                   r.n1, r.n2);
    const SparseOperator num = adjoint(a1) * adjoint(a2) * a2 * a1;
    r.value = expectation_value(num, rho).real() / (r.n1 * r.n2);
    return r;
}

inline CorrelationResult g2_zero(const DensityMatrix& rho, const FockSpace& s, ModeId m, ModeId m2)
{
    return g2_zero(rho, s, m.index(), m2.index());
}

struct G2Matrix {
    std::array<std::array<double, kNumModes>, kNumModes> value{};
    std::array<std::array<bool, kNumModes>, kNumModes> defined{};
};

inline G2Matrix g2_matrix(const DensityMatrix& rho, const FockSpace& s)
{
    G2Matrix g;
    for (int m = 0; m < kNumModes; ++m)
        for (int n = 0; n < kNumModes; ++n) {
            try {
                g.value[m][n] = g2_zero(rho, s, m, n).value;
                g.defined[m][n] = true;
            } catch (const UndefinedCorrelation&) {
                g.value[m][n] = std::numeric_limits<double>::quiet_NaN();
                g.defined[m][n] = false;
            }
        }
    return g;
}

// Delayed correlation via the quantum regression theorem: evolve a_m rho a_m^dag / n_m
// under the same generator and read out n_m'.
inline CorrelationResult g2_tau(const Liouvillian& l, const DensityMatrix& rho_ss, const FockSpace& s,
                                int m, int m2, const std::vector<double>& taus,
                                const EvolveOptions& opts = {})
{
    CorrelationResult r = g2_zero(rho_ss, s, m, m2);
    const SparseOperator a1 = annihilator(s, m);
    const SparseOperator n2 = number_operator(s, m2);
    const DenseMatrix conditioned =
        (a1.matrix() * rho_ss.matrix() * a1.matrix().adjoint()) / r.n1;

    r.tau = taus;
    r.g2_tau.assign(taus.size(), 0.0);
    propagate(
        l, l.to_graded(conditioned), taus,
        [&](std::size_t k, const DenseVector& x) {
            const DensityMatrix rho(l.from_graded(x));
            r.g2_tau[k] = expectation_value(n2, rho).real() / r.n2;
        },
        opts);
    return r;
}

} // namespace photmol
