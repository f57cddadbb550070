#include <gtest/gtest.h>

#include "photmol/lindblad.hpp"

using namespace photmol;

namespace {

// Direct evaluation of -i[H, rho] + sum_k rate_k (c rho c^dag - {c^dag c, rho}/2).
DenseMatrix lindblad_rhs(const SparseOperator& h, const std::vector<CollapseOperator>& cs, const DenseMatrix& rho)
{
    const DenseMatrix hd = h.to_dense();
    DenseMatrix out = -kI * (hd * rho - rho * hd);
    for (const auto& c : cs) {
        const DenseMatrix cd = c.op.to_dense();
        const DenseMatrix cdc = cd.adjoint() * cd;
        out += c.rate * (cd * rho * cd.adjoint() - 0.5 * (cdc * rho + rho * cdc));
    }
    return out;
}

// Steady state by dense LU on a superoperator assembled column by column from the
// direct right-hand side, with the rho_00 equation replaced by the trace.
DenseMatrix dense_steady_state(const SparseOperator& h, const std::vector<CollapseOperator>& cs)
{
    const Index n = h.dim();
    DenseMatrix l(n * n, n * n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) {
            DenseMatrix e = DenseMatrix::Zero(n, n);
            e(i, j) = 1.0;
            const DenseMatrix col = lindblad_rhs(h, cs, e);
            l.col(i + n * j) = Eigen::Map<const DenseVector>(col.data(), n * n);
        }
    l.row(0).setZero();
    for (Index i = 0; i < n; ++i)
        l(0, i + n * i) = 1.0;
    DenseVector b = DenseVector::Zero(n * n);
    b(0) = 1.0;
    const DenseVector x = l.fullPivLu().solve(b);
    return Eigen::Map<const DenseMatrix>(x.data(), n, n);
}

DenseMatrix random_matrix(Index n, unsigned seed)
{
    std::srand(seed);
    return DenseMatrix::Random(n, n);
}

SystemParams driven(double F, double U = 0.0438)
{
    SystemParams p;
    p.F = F;
    p.U = U;
    return p;
}

// Single-particle coherent amplitudes of the linear (U = 0) system.
Eigen::Vector4cd linear_amplitudes(const SystemParams& p)
{
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    for (int k = 0; k < 4; ++k)
        m(k, k) = p.mode_detuning(k) - 0.5 * kI * p.gamma;
    m(kAp, kAm) = m(kAm, kAp) = p.pillar_Delta(0);
    m(kBp, kBm) = m(kBm, kBp) = p.pillar_Delta(1);
    m(kAp, kBp) = m(kBp, kAp) = p.J;
    m(kAm, kBm) = m(kBm, kAm) = p.J;
    Eigen::Vector4cd f = Eigen::Vector4cd::Zero();
    f(kAp) = -p.F;
    return m.fullPivLu().solve(f);
}

} // namespace

TEST(Liouvillian, MatchesDirectRightHandSide)
{
    SystemParams p = driven(0.3, 0.2);
    p.Gamma = 0.05;
    p.U_cross = 0.1;
    const FockSpace s(kNumModes, 2);
    const auto h = build_hamiltonian(p, s);
    const auto cs = collapse_operators(p, s);
    const DenseMatrix rho = random_matrix(s.dim(), 7);
    const DenseMatrix expected = lindblad_rhs(h, cs, rho);
    for (double ratio : {1.0, 0.3}) {
        const Liouvillian l = build_liouvillian(h, cs, photon_grading(s, ratio));
        EXPECT_LT((l.apply(rho) - expected).cwiseAbs().maxCoeff(), 1e-12) << "grading ratio " << ratio;
    }
    const Liouvillian graded = system_liouvillian(p, s);
    EXPECT_LT((graded.apply(rho) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(std::abs(graded.apply(rho).trace()), 1e-12);
}

TEST(Liouvillian, RejectsInconsistentInput)
{
    const FockSpace s(kNumModes, 1);
    const auto h = build_hamiltonian(SystemParams{}, s);
    EXPECT_THROW(build_liouvillian(h, {}, Eigen::VectorXd::Ones(3)), std::invalid_argument);
    EXPECT_THROW(build_liouvillian(h, {{SparseOperator::identity(3), 1.0, "x"}}), std::invalid_argument);
    EXPECT_THROW(build_liouvillian(h, {{SparseOperator::identity(16), -1.0, "x"}}), std::invalid_argument);
    Liouvillian l = build_liouvillian(h, loss_operators(SystemParams{}, s));
    EXPECT_THROW(l.set_sectors({1, 2}), std::invalid_argument);
    EXPECT_THROW(photon_grading(s, 0.0), std::invalid_argument);
}

TEST(SteadyState, MatchesDenseOracleAtCutoffOne)
{
    SystemParams p = driven(0.3);
    p.Gamma = 0.02;
    const FockSpace s(kNumModes, 1);
    const DenseMatrix expected = dense_steady_state(build_hamiltonian(p, s), collapse_operators(p, s));
    const SteadyStateReport r = solve_steady_state(system_liouvillian(p, s));
    EXPECT_LT((r.rho.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SteadyState, SingularValueGapAtCutoffOne)
{
    const SystemParams p = driven(0.3);
    const FockSpace s(kNumModes, 1);
    const Liouvillian l = build_liouvillian(build_hamiltonian(p, s), collapse_operators(p, s));
    const DenseMatrix dense(l.matrix());
    Eigen::BDCSVD<DenseMatrix> svd(dense);
    const auto& sv = svd.singularValues();
    const Index n = sv.size();
    EXPECT_LT(sv(n - 1), 1e-12);
    EXPECT_GT(sv(n - 2), 1e-3);
}

TEST(SteadyState, DiagnosticsAtTheOptimum)
{
    const FockSpace s(kNumModes, 2);
    const Liouvillian l = system_liouvillian(SystemParams{}, s);
    const SteadyStateReport r = solve_steady_state(l);
    EXPECT_LT(r.relative_residual, 1e-10);
    EXPECT_EQ(r.method, "gmres-sylvester");
    const auto d = r.rho.check();
    EXPECT_TRUE(d.ok(1e-12, 1e-12, 1e-8)) << d.min_eigenvalue;
    EXPECT_NEAR(l.residual_norm(r.rho), r.residual, 1e-20);
}

TEST(SteadyState, LinearSystemIsCoherent)
{
    SystemParams p = driven(0.01, 0.0);
    p.deltaE = 0.4;
    p.Delta = 1.3;
    p.J = 2.2;
    const FockSpace s(kNumModes, 3);
    const DensityMatrix rho = steady_state(system_liouvillian(p, s));
    const Eigen::Vector4cd alpha = linear_amplitudes(p);
    const Occupations occ = occupations(rho, s);
    for (int m = 0; m < kNumModes; ++m) {
        EXPECT_NEAR(occ.mode[m] / std::norm(alpha(m)), 1.0, 1e-8) << kModeNames[m];
        const Complex field = expectation_value(annihilator(s, m), rho);
        EXPECT_LT(std::abs(field - alpha(m)) / std::abs(alpha(m)), 1e-8);
    }
    const G2Matrix g2 = g2_matrix(rho, s);
    for (int m = 0; m < kNumModes; ++m)
        for (int n = 0; n < kNumModes; ++n)
            EXPECT_NEAR(g2.value[m][n], 1.0, 1e-6);
    EXPECT_NEAR(total_photons_linear(rho, s), occ.total, 1e-15);
}

TEST(SteadyState, GradingDoesNotChangeTheAnswer)
{
    const SystemParams p = driven(0.05);
    const FockSpace s(kNumModes, 2);
    const auto h = build_hamiltonian(p, s);
    const auto cs = collapse_operators(p, s);
    const DensityMatrix a = steady_state(build_liouvillian(h, cs));
    const DensityMatrix b = steady_state(system_liouvillian(p, s));
    const Occupations oa = occupations(a, s);
    const Occupations ob = occupations(b, s);
    for (int m = 0; m < kNumModes; ++m)
        EXPECT_NEAR(oa.mode[m] / ob.mode[m], 1.0, 1e-8);
    EXPECT_NEAR(g2_zero(a, s, kAp, kAp).value / g2_zero(b, s, kAp, kAp).value, 1.0, 1e-6);
}

TEST(SteadyState, ThermalStateHasBunchingTwo)
{
    const double nbar = 0.2;
    const FockSpace s(1, 40);
    const SparseOperator a = annihilator(s, 0);
    const Liouvillian l = build_liouvillian(scale(0.7, number_operator(s, 0)),
                                            {{a, nbar + 1.0, "loss"}, {adjoint(a), nbar, "gain"}});
    const DensityMatrix rho = steady_state(l);
    const double n = expectation_value(number_operator(s, 0), rho).real();
    const double g2 = expectation_value(adjoint(a) * adjoint(a) * a * a, rho).real() / (n * n);
    EXPECT_NEAR(n, nbar, 1e-10);
    EXPECT_NEAR(g2, 2.0, 1e-8);
}

TEST(SteadyState, NoDissipationIsAnError)
{
    const FockSpace s(kNumModes, 1);
    const Liouvillian l = build_liouvillian(build_hamiltonian(SystemParams{}, s), {});
    EXPECT_THROW(solve_steady_state(l), SolverError);
}

TEST(SteadyState, DephasingFormsAgreeAtCutoffOne)
{
    SystemParams p = driven(0.2);
    p.Gamma = 0.3;
    const FockSpace s(kNumModes, 1);
    const auto h = build_hamiltonian(p, s);
    auto lin = loss_operators(p, s);
    auto circ = lin;
    for (auto& c : dephasing_operators(p, s))
        lin.push_back(c);
    for (auto& c : dephasing_operators_circular_form(p, s))
        circ.push_back(c);
    const Liouvillian a = build_liouvillian(h, lin);
    const Liouvillian b = build_liouvillian(h, circ);
    EXPECT_LT(DenseMatrix(a.matrix() - b.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((steady_state(a).matrix() - steady_state(b).matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evolve, SingleModeDecay)
{
    const FockSpace s(1, 5);
    const Liouvillian l =
        build_liouvillian(scale(0.7, number_operator(s, 0)), {{annihilator(s, 0), 1.0, "loss"}});
    const SparseOperator n = number_operator(s, 0);
    const std::vector<double> times{0.5, 1.0, 2.0, 4.0};
    std::vector<double> seen(times.size());
    propagate(l, l.to_graded(DensityMatrix::basis_state(s.dim(), 3).matrix()), times,
              [&](std::size_t k, const DenseVector& x) {
                  seen[k] = expectation_value(n, DensityMatrix(l.from_graded(x))).real();
              });
    for (std::size_t k = 0; k < times.size(); ++k)
        EXPECT_NEAR(seen[k] / (3.0 * std::exp(-times[k])), 1.0, 1e-7) << "t=" << times[k];
    EXPECT_THROW(propagate(l, DenseVector::Zero(36), {1.0, 0.5}, [](std::size_t, const DenseVector&) {}),
                 std::invalid_argument);
}

TEST(Evolve, RelaxesToTheSteadyState)
{
    SystemParams p = driven(0.3);
    p.Gamma = 0.1;
    const FockSpace s(kNumModes, 1);
    const Liouvillian l = system_liouvillian(p, s);
    const DensityMatrix late = evolve(l, DensityMatrix::vacuum(s.dim()), 60.0);
    const DensityMatrix ss = steady_state(l);
    EXPECT_NEAR(late.trace().real(), 1.0, 1e-8);
    const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(late.matrix() - ss.matrix());
    EXPECT_LT(es.eigenvalues().cwiseAbs().sum(), 1e-6);  // trace norm
}

TEST(Evolve, UndrivenVacuumStaysVacuum)
{
    const FockSpace s(kNumModes, 2);
    const Liouvillian l = system_liouvillian(driven(0.0), s);
    const DensityMatrix rho = evolve(l, DensityMatrix::vacuum(s.dim()), 5.0);
    EXPECT_LT((rho.matrix() - DensityMatrix::vacuum(s.dim()).matrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Correlations, UndefinedWithoutPhotons)
{
    const FockSpace s(kNumModes, 2);
    const DensityMatrix rho = steady_state(system_liouvillian(driven(0.0), s));
    EXPECT_NEAR(occupations(rho, s).total, 0.0, 1e-30);
    EXPECT_THROW(g2_zero(rho, s, kBm, kBm), UndefinedCorrelation);
    const G2Matrix g = g2_matrix(rho, s);
    for (int m = 0; m < kNumModes; ++m)
        for (int n = 0; n < kNumModes; ++n) {
            EXPECT_FALSE(g.defined[m][n]);
            EXPECT_TRUE(std::isnan(g.value[m][n]));
        }
}

TEST(Correlations, ModeIdOverloadAndSymmetry)
{
    const FockSpace s(kNumModes, 2);
    const DensityMatrix rho = steady_state(system_liouvillian(driven(0.05), s));
    const auto a = g2_zero(rho, s, ModeId{Pillar::A, Polarization::plus}, ModeId{Pillar::B, Polarization::minus});
    EXPECT_DOUBLE_EQ(a.value, g2_zero(rho, s, kAp, kBm).value);
    EXPECT_NEAR(a.value, g2_zero(rho, s, kBm, kAp).value, 1e-12);
}

TEST(Correlations, DelayedCorrelationLimits)
{
    const FockSpace s(kNumModes, 2);
    const Liouvillian l = system_liouvillian(driven(0.05), s);
    const DensityMatrix rho = steady_state(l);
    const auto r = g2_tau(l, rho, s, kAp, kAp, {0.0, 1.0, 30.0});
    EXPECT_NEAR(r.g2_tau[0] / r.value, 1.0, 1e-8);
    EXPECT_GT(std::abs(r.g2_tau[1] - 1.0), 1e-3);
    EXPECT_NEAR(r.g2_tau[2], 1.0, 1e-5);

    // Linear system: coherent state, flat correlation up to truncation effects O(n).
    const Liouvillian lin = system_liouvillian(driven(0.0005, 0.0), s);
    const auto c = g2_tau(lin, steady_state(lin), s, kBm, kAp, {0.0, 0.3, 2.0});
    for (double v : c.g2_tau)
        EXPECT_NEAR(v, 1.0, 1e-4);
}

TEST(Correlations, LinearSystemIsFlatInDelay)
{
    // Cutoff 3 pushes the truncation error of the weakly driven coherent state below 1e-10.
    const FockSpace s(kNumModes, 3);
    const Liouvillian lin = system_liouvillian(driven(0.002, 0.0), s);
    const auto c = g2_tau(lin, steady_state(lin), s, kBm, kBm, {0.0, 0.5, 2.0});
    for (double v : c.g2_tau)
        EXPECT_NEAR(v, 1.0, 1e-6);
}
