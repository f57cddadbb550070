// fock.hpp - truncated multimode Fock space and sparse operator algebra

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace photmol {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

// Product basis |n_0, n_1, ..., n_{M-1}> with every n_m in [0, cutoff].
// Mode 0 is the slowest-varying digit of the flat index.
class FockSpace {
public:
    FockSpace(int num_modes, int cutoff) : num_modes_(num_modes), cutoff_(cutoff)
    {
        if (num_modes < 1)
            throw std::invalid_argument("FockSpace: num_modes must be >= 1, got " +
                                        std::to_string(num_modes));
        if (cutoff < 1)
            throw std::invalid_argument("FockSpace: cutoff must be >= 1, got " +
                                        std::to_string(cutoff));
        dim_ = 1;
        strides_.assign(static_cast<std::size_t>(num_modes), 0);
        for (int m = num_modes - 1; m >= 0; --m) {
            strides_[static_cast<std::size_t>(m)] = dim_;
            dim_ *= static_cast<Index>(cutoff + 1);
        }
    }

    int num_modes() const { return num_modes_; }
    int cutoff() const { return cutoff_; }
    Index dim() const { return dim_; }

    Index index(std::span<const int> occupation) const
    {
        if (static_cast<int>(occupation.size()) != num_modes_)
            throw std::invalid_argument("FockSpace::index: wrong number of occupations");
        Index flat = 0;
        for (int m = 0; m < num_modes_; ++m) {
            const int n = occupation[static_cast<std::size_t>(m)];
            if (n < 0 || n > cutoff_)
                throw std::out_of_range("FockSpace::index: occupation outside [0, cutoff]");
            flat += n * strides_[static_cast<std::size_t>(m)];
        }
        return flat;
    }

    int occupation(Index flat, int mode) const
    {
        return static_cast<int>((flat / strides_[static_cast<std::size_t>(mode)]) % (cutoff_ + 1));
    }

    std::vector<int> occupations(Index flat) const
    {
        if (flat < 0 || flat >= dim_)
            throw std::out_of_range("FockSpace::occupations: flat index out of range");
        std::vector<int> occ(static_cast<std::size_t>(num_modes_));
        for (int m = 0; m < num_modes_; ++m)
            occ[static_cast<std::size_t>(m)] = occupation(flat, m);
        return occ;
    }

    int total_photons(Index flat) const
    {
        int total = 0;
        for (int m = 0; m < num_modes_; ++m)
            total += occupation(flat, m);
        return total;
    }

    Index stride(int mode) const { return strides_[static_cast<std::size_t>(mode)]; }

    bool operator==(const FockSpace& other) const
    {
        return num_modes_ == other.num_modes_ && cutoff_ == other.cutoff_;
    }

private:
    int num_modes_;
    int cutoff_;
    Index dim_ = 0;
    std::vector<Index> strides_;
};

inline FockSpace make_space(int num_modes, int cutoff) { return FockSpace(num_modes, cutoff); }

// Square sparse complex matrix. Exact zeros are never stored.
class SparseOperator {
public:
    using Matrix = Eigen::SparseMatrix<Complex>;
    using Triplet = Eigen::Triplet<Complex>;

    SparseOperator() = default;

    explicit SparseOperator(Matrix m) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols())
            throw std::invalid_argument("SparseOperator: matrix must be square");
        drop_zeros();
    }

    static SparseOperator zero(Index dim) { return SparseOperator(Matrix(dim, dim)); }

    static SparseOperator identity(Index dim)
    {
        Matrix m(dim, dim);
        m.setIdentity();
        return SparseOperator(std::move(m));
    }

    // Duplicate (row, col) entries are summed.
    static SparseOperator from_triplets(Index dim, const std::vector<Triplet>& entries)
    {
        for (const auto& t : entries)
            if (t.row() < 0 || t.row() >= dim || t.col() < 0 || t.col() >= dim)
                throw std::out_of_range("SparseOperator::from_triplets: index out of range");
        Matrix m(dim, dim);
        m.setFromTriplets(entries.begin(), entries.end());
        return SparseOperator(std::move(m));
    }

    static SparseOperator from_dense(const DenseMatrix& d)
    {
        return SparseOperator(Matrix(d.sparseView(1.0, 0.0)));
    }

    Index dim() const { return m_.rows(); }
    Index nonzeros() const { return m_.nonZeros(); }
    const Matrix& matrix() const { return m_; }
    Complex coeff(Index row, Index col) const { return m_.coeff(row, col); }
    DenseMatrix to_dense() const { return DenseMatrix(m_); }

    double max_abs() const
    {
        double best = 0.0;
        for (Index k = 0; k < m_.outerSize(); ++k)
            for (Matrix::InnerIterator it(m_, k); it; ++it)
                best = std::max(best, std::abs(it.value()));
        return best;
    }

private:
    void drop_zeros()
    {
        m_.prune([](Index, Index, const Complex& v) { return v != Complex(0.0); });
        m_.makeCompressed();
    }

    Matrix m_;
};

namespace detail {
inline void require_same_dim(Index a, Index b, const char* what)
{
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
}
} // namespace detail

inline SparseOperator add(const SparseOperator& a, const SparseOperator& b)
{
    detail::require_same_dim(a.dim(), b.dim(), "add");
    return SparseOperator(SparseOperator::Matrix(a.matrix() + b.matrix()));
}

inline SparseOperator scale(Complex c, const SparseOperator& a)
{
    return SparseOperator(SparseOperator::Matrix(c * a.matrix()));
}

inline SparseOperator matmul(const SparseOperator& a, const SparseOperator& b)
{
    detail::require_same_dim(a.dim(), b.dim(), "matmul");
    return SparseOperator(SparseOperator::Matrix(a.matrix() * b.matrix()));
}

inline SparseOperator adjoint(const SparseOperator& a)
{
    return SparseOperator(SparseOperator::Matrix(a.matrix().adjoint()));
}

inline DenseVector apply(const SparseOperator& a, const DenseVector& v)
{
    detail::require_same_dim(a.dim(), v.size(), "apply");
    return a.matrix() * v;
}

inline SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) { return add(a, b); }
inline SparseOperator operator-(const SparseOperator& a, const SparseOperator& b)
{
    return add(a, scale(-1.0, b));
}
inline SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) { return matmul(a, b); }
inline SparseOperator operator*(Complex c, const SparseOperator& a) { return scale(c, a); }

inline SparseOperator commutator(const SparseOperator& a, const SparseOperator& b)
{
    return a * b - b * a;
}

// Largest entry magnitude of A - A^dagger.
inline double hermiticity_error(const SparseOperator& a)
{
    return (a - adjoint(a)).max_abs();
}

inline SparseOperator annihilator(const FockSpace& space, int mode)
{
    if (mode < 0 || mode >= space.num_modes())
        throw std::invalid_argument("annihilator: mode " + std::to_string(mode) + " out of range");
    std::vector<SparseOperator::Triplet> entries;
    entries.reserve(static_cast<std::size_t>(space.dim()));
    const Index stride = space.stride(mode);
    for (Index col = 0; col < space.dim(); ++col) {
        const int n = space.occupation(col, mode);
        if (n > 0)
            entries.emplace_back(col - stride, col, std::sqrt(static_cast<double>(n)));
    }
    return SparseOperator::from_triplets(space.dim(), entries);
}

inline SparseOperator creator(const FockSpace& space, int mode)
{
    return adjoint(annihilator(space, mode));
}

inline SparseOperator number_operator(const FockSpace& space, int mode)
{
    if (mode < 0 || mode >= space.num_modes())
        throw std::invalid_argument("number_operator: mode " + std::to_string(mode) + " out of range");
    std::vector<SparseOperator::Triplet> entries;
    for (Index k = 0; k < space.dim(); ++k) {
        const int n = space.occupation(k, mode);
        if (n > 0)
            entries.emplace_back(k, k, static_cast<double>(n));
    }
    return SparseOperator::from_triplets(space.dim(), entries);
}

// Dense density matrix. Construction does not validate; call check() for that.
class DensityMatrix {
public:
    struct Diagnostics {
        double hermiticity_error = 0.0;
        Complex trace{0.0, 0.0};
        double min_eigenvalue = 0.0;

        bool ok(double herm_tol = 1e-10, double trace_tol = 1e-8, double eig_tol = 1e-8) const
        {
            return hermiticity_error <= herm_tol && std::abs(trace - Complex(1.0)) <= trace_tol &&
                   min_eigenvalue >= -eig_tol;
        }
    };

    DensityMatrix() = default;
    explicit DensityMatrix(DenseMatrix m) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols())
            throw std::invalid_argument("DensityMatrix: matrix must be square");
    }

    static DensityMatrix basis_state(Index dim, Index k)
    {
        DenseMatrix m = DenseMatrix::Zero(dim, dim);
        m(k, k) = 1.0;
        return DensityMatrix(std::move(m));
    }

    static DensityMatrix vacuum(Index dim) { return basis_state(dim, 0); }

    static DensityMatrix pure(const DenseVector& psi)
    {
        const DenseVector v = psi / psi.norm();
        return DensityMatrix(v * v.adjoint());
    }

    Index dim() const { return m_.rows(); }
    const DenseMatrix& matrix() const { return m_; }
    Complex trace() const { return m_.trace(); }

    DensityMatrix normalized() const { return DensityMatrix(m_ / m_.trace()); }

    // Symmetrize away round-off anti-Hermitian parts.
    DensityMatrix hermitized() const { return DensityMatrix(0.5 * (m_ + m_.adjoint())); }

    Diagnostics check() const
    {
        Diagnostics d;
        d.hermiticity_error = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
        d.trace = m_.trace();
        const DenseMatrix h = 0.5 * (m_ + m_.adjoint());
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
        d.min_eigenvalue = es.eigenvalues().minCoeff();
        return d;
    }

private:
    DenseMatrix m_;
};

// Tr(op * rho).
inline Complex expectation_value(const SparseOperator& op, const DensityMatrix& rho)
{
    detail::require_same_dim(op.dim(), rho.dim(), "expectation_value");
    const auto& a = op.matrix();
    const auto& r = rho.matrix();
    Complex sum{0.0, 0.0};
    for (Index col = 0; col < a.outerSize(); ++col)
        for (SparseOperator::Matrix::InnerIterator it(a, col); it; ++it)
            sum += it.value() * r(it.col(), it.row());
    return sum;
}

} // namespace photmol
