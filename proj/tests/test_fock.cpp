#include <gtest/gtest.h>

#include <vector>

#include "photmol/fock.hpp"

using namespace photmol;

namespace {

// Ladder operator built from explicit occupation lists, independent of the stride logic.
DenseMatrix brute_force_annihilator(const FockSpace& s, int mode)
{
    DenseMatrix a = DenseMatrix::Zero(s.dim(), s.dim());
    std::vector<int> occ(static_cast<std::size_t>(s.num_modes()), 0);
    const auto visit = [&](auto&& self, int m) -> void {
        if (m == s.num_modes()) {
            const int n = occ[static_cast<std::size_t>(mode)];
            if (n > 0) {
                std::vector<int> lowered = occ;
                --lowered[static_cast<std::size_t>(mode)];
                a(s.index(lowered), s.index(occ)) = std::sqrt(static_cast<double>(n));
            }
            return;
        }
        for (int n = 0; n <= s.cutoff(); ++n) {
            occ[static_cast<std::size_t>(m)] = n;
            self(self, m + 1);
        }
    };
    visit(visit, 0);
    return a;
}

DenseMatrix random_dense(Index n, unsigned seed)
{
    std::srand(seed);
    return DenseMatrix::Random(n, n);
}

} // namespace

TEST(FockSpace, DimensionAndIndexRoundTrip)
{
    const FockSpace s(4, 3);
    EXPECT_EQ(s.dim(), 256);
    for (Index k = 0; k < s.dim(); ++k) {
        const auto occ = s.occupations(k);
        EXPECT_EQ(s.index(occ), k);
    }
    const std::vector<int> occ{1, 0, 2, 3};
    EXPECT_EQ(s.index(occ), 1 * 64 + 0 * 16 + 2 * 4 + 3);
    EXPECT_EQ(s.total_photons(s.index(occ)), 6);
}

TEST(FockSpace, RejectsInvalidShapes)
{
    EXPECT_THROW(FockSpace(0, 2), std::invalid_argument);
    EXPECT_THROW(FockSpace(2, 0), std::invalid_argument);
    const FockSpace s(2, 2);
    EXPECT_THROW(s.index(std::vector<int>{3, 0}), std::out_of_range);
    EXPECT_THROW(s.index(std::vector<int>{0}), std::invalid_argument);
    EXPECT_THROW(s.occupations(9), std::out_of_range);
}

TEST(Ladder, MatchesBruteForceConstruction)
{
    for (int cutoff : {1, 2, 3}) {
        const FockSpace s(3, cutoff);
        for (int m = 0; m < 3; ++m) {
            const DenseMatrix expected = brute_force_annihilator(s, m);
            EXPECT_EQ((annihilator(s, m).to_dense() - expected).cwiseAbs().maxCoeff(), 0.0);
            EXPECT_EQ((creator(s, m).to_dense() - expected.adjoint()).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Ladder, NumberOperatorAndCanonicalCommutator)
{
    const FockSpace s(2, 4);
    for (int m = 0; m < 2; ++m) {
        const SparseOperator a = annihilator(s, m);
        EXPECT_LT(((adjoint(a) * a) - number_operator(s, m)).max_abs(), 1e-14);
        const DenseMatrix c = commutator(a, adjoint(a)).to_dense();
        for (Index k = 0; k < s.dim(); ++k) {
            // [a, a^dag] = 1 except on the truncation edge.
            const double expected = s.occupation(k, m) < s.cutoff() ? 1.0 : -static_cast<double>(s.cutoff());
            EXPECT_NEAR(c(k, k).real(), expected, 1e-12);
        }
    }
    // Different modes commute.
    EXPECT_EQ(commutator(annihilator(s, 0), creator(s, 1)).max_abs(), 0.0);
}

TEST(Ladder, RejectsBadMode)
{
    const FockSpace s(2, 2);
    EXPECT_THROW(annihilator(s, 2), std::invalid_argument);
    EXPECT_THROW(number_operator(s, -1), std::invalid_argument);
}

TEST(SparseOperator, TripletsSumDuplicatesAndPruneZeros)
{
    const auto op = SparseOperator::from_triplets(
        3, {{0, 1, Complex(1.0, 0.0)}, {0, 1, Complex(2.0, 1.0)}, {2, 2, Complex(1.0)}, {2, 2, Complex(-1.0)}});
    EXPECT_EQ(op.coeff(0, 1), Complex(3.0, 1.0));
    EXPECT_EQ(op.nonzeros(), 1);
    EXPECT_THROW(SparseOperator::from_triplets(2, {{2, 0, Complex(1.0)}}), std::out_of_range);
}

TEST(SparseOperator, AlgebraMatchesDense)
{
    const DenseMatrix a = random_dense(6, 1);
    const DenseMatrix b = random_dense(6, 2);
    const auto sa = SparseOperator::from_dense(a);
    const auto sb = SparseOperator::from_dense(b);
    EXPECT_LT(((sa * sb).to_dense() - a * b).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(((sa + sb).to_dense() - (a + b)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(((sa - sb).to_dense() - (a - b)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((adjoint(sa).to_dense() - a.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((scale(kI, sa).to_dense() - kI * a).cwiseAbs().maxCoeff(), 1e-14);
    const DenseVector v = DenseVector::Random(6);
    EXPECT_LT((photmol::apply(sa, v) - a * v).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(hermiticity_error(sa), (a - a.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SparseOperator, DimensionMismatchThrows)
{
    const auto a = SparseOperator::identity(3);
    const auto b = SparseOperator::identity(4);
    EXPECT_THROW(a + b, std::invalid_argument);
    EXPECT_THROW(a * b, std::invalid_argument);
    EXPECT_THROW(photmol::apply(a, DenseVector(DenseVector::Zero(4))), std::invalid_argument);
    EXPECT_THROW(expectation_value(a, DensityMatrix::vacuum(4)), std::invalid_argument);
}

TEST(DensityMatrix, ExpectationValueIsTraceOfProduct)
{
    const DenseMatrix h = random_dense(5, 3);
    const DenseMatrix psi = random_dense(5, 4).col(0);
    const DensityMatrix rho = DensityMatrix::pure(psi);
    const Complex expected = (h * rho.matrix()).trace();
    EXPECT_LT(std::abs(expectation_value(SparseOperator::from_dense(h), rho) - expected), 1e-13);
}

TEST(DensityMatrix, DiagnosticsDetectInvalidStates)
{
    const DensityMatrix pure = DensityMatrix::pure(DenseVector::Random(4));
    EXPECT_TRUE(pure.check().ok());

    DenseMatrix bad = DenseMatrix::Zero(2, 2);
    bad(0, 0) = 1.5;
    bad(1, 1) = -0.5;
    const auto d = DensityMatrix(bad).check();
    EXPECT_NEAR(d.min_eigenvalue, -0.5, 1e-14);
    EXPECT_FALSE(d.ok());

    DenseMatrix skew = DenseMatrix::Identity(2, 2) * 0.5;
    skew(0, 1) = 0.1;
    EXPECT_NEAR(DensityMatrix(skew).check().hermiticity_error, 0.1, 1e-15);
    EXPECT_NEAR(DensityMatrix(skew).hermitized().check().hermiticity_error, 0.0, 1e-15);
    EXPECT_THROW(DensityMatrix(DenseMatrix::Zero(2, 3)), std::invalid_argument);
}
