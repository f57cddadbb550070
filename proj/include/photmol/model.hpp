// model.hpp - two-pillar, two-polarization photonic molecule in the circular basis

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "photmol/fock.hpp"

namespace photmol {

enum class Pillar : int { A = 0, B = 1 };
enum class Polarization : int { plus = 0, minus = 1, x = 2, y = 3 };

// Canonical circular-basis mode indices.
inline constexpr int kAp = 0;
inline constexpr int kAm = 1;
inline constexpr int kBp = 2;
inline constexpr int kBm = 3;
inline constexpr int kNumModes = 4;

inline constexpr std::array<const char*, kNumModes> kModeNames{"Ap", "Am", "Bp", "Bm"};

struct ModeId {
    Pillar pillar = Pillar::A;
    Polarization polarization = Polarization::plus;

    bool circular() const
    {
        return polarization == Polarization::plus || polarization == Polarization::minus;
    }

    int index() const
    {
        if (!circular())
            throw std::invalid_argument("ModeId::index: linear modes have no circular-basis index");
        return 2 * static_cast<int>(pillar) + static_cast<int>(polarization);
    }

    static ModeId from_index(int m)
    {
        if (m < 0 || m >= kNumModes)
            throw std::invalid_argument("ModeId::from_index: " + std::to_string(m) + " out of range");
        return {static_cast<Pillar>(m / 2), static_cast<Polarization>(m % 2)};
    }

    bool operator==(const ModeId&) const = default;
};

// All energies in units where hbar = 1. After validate_params, gamma = 1.
struct SystemParams {
    double deltaE = 0.2772;  // E - hbar*omega_p
    double Delta = 2.5;      // half of the x/y polarization splitting
    double J = 5.0;          // intercavity tunneling
    double U = 0.0438;       // same-circular-polarization Kerr
    double U_cross = 0.0;    // cross-circular Kerr within a pillar
    double F = 0.01;         // pump amplitude on A+ (real, >= 0)
    double gamma = 1.0;      // photon loss rate of every mode
    double Gamma = 0.0;      // pure dephasing rate of the linear modes
    std::array<double, kNumModes> detuning_offsets{};  // added to deltaE per circular mode
    std::array<double, 2> Delta_offsets{};             // added to Delta per pillar

    double mode_detuning(int m) const { return deltaE + detuning_offsets[static_cast<std::size_t>(m)]; }
    double pillar_Delta(int pillar) const { return Delta + Delta_offsets[static_cast<std::size_t>(pillar)]; }

    bool operator==(const SystemParams&) const = default;
};

// Returns the parameters rescaled so that gamma = 1.
inline SystemParams validate_params(const SystemParams& p)
{
    auto finite = [](double v, const char* name) {
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string("invalid parameter ") + name + ": not finite");
    };
    finite(p.deltaE, "deltaE");
    finite(p.Delta, "Delta");
    finite(p.J, "J");
    finite(p.U, "U");
    finite(p.U_cross, "U_cross");
    finite(p.F, "F");
    finite(p.gamma, "gamma");
    finite(p.Gamma, "Gamma");
    for (double v : p.detuning_offsets)
        finite(v, "detuning_offsets");
    for (double v : p.Delta_offsets)
        finite(v, "Delta_offsets");
    if (p.gamma <= 0.0)
        throw std::invalid_argument("invalid parameter gamma: must be > 0");
    if (p.U < 0.0)
        throw std::invalid_argument("invalid parameter U: must be >= 0");
    if (p.Gamma < 0.0)
        throw std::invalid_argument("invalid parameter Gamma: must be >= 0");
    if (p.F < 0.0)
        throw std::invalid_argument("invalid parameter F: must be >= 0");

    const double g = p.gamma;
    SystemParams q = p;
    q.deltaE /= g;
    q.Delta /= g;
    q.J /= g;
    q.U /= g;
    q.U_cross /= g;
    q.F /= g;
    q.Gamma /= g;
    q.gamma = 1.0;
    for (auto& v : q.detuning_offsets)
        v /= g;
    for (auto& v : q.Delta_offsets)
        v /= g;
    return q;
}

namespace detail {
inline void require_molecule_space(const FockSpace& s, const char* what)
{
    if (s.num_modes() != kNumModes)
        throw std::invalid_argument(std::string(what) + ": Fock space must have 4 modes, got " +
                                    std::to_string(s.num_modes()));
}
} // namespace detail

struct LinearModes {
    SparseOperator ax;
    SparseOperator ay;
};

// a_x = (a_+ + a_-)/sqrt2, a_y = -i (a_+ - a_-)/sqrt2, inverse of a_+- = (a_x +- i a_y)/sqrt2.
inline LinearModes polarization_transform(const SparseOperator& a_plus, const SparseOperator& a_minus)
{
    const double r = 1.0 / std::sqrt(2.0);
    return {scale(r, a_plus + a_minus), scale(-kI * r, a_plus - a_minus)};
}

inline LinearModes linear_modes(const FockSpace& s, Pillar pillar)
{
    detail::require_molecule_space(s, "linear_modes");
    const int base = 2 * static_cast<int>(pillar);
    return polarization_transform(annihilator(s, base), annihilator(s, base + 1));
}

inline SparseOperator build_hamiltonian(const SystemParams& p, const FockSpace& s)
{
    detail::require_molecule_space(s, "build_hamiltonian");
    std::array<SparseOperator, kNumModes> a;
    std::array<SparseOperator, kNumModes> ad;
    for (int m = 0; m < kNumModes; ++m) {
        a[m] = annihilator(s, m);
        ad[m] = adjoint(a[m]);
    }

    SparseOperator h = SparseOperator::zero(s.dim());
    for (int m = 0; m < kNumModes; ++m) {
        h = h + scale(p.mode_detuning(m), number_operator(s, m));
        // U a^dag a^dag a a = U n (n - 1)
        h = h + scale(p.U, ad[m] * ad[m] * a[m] * a[m]);
    }
    for (int j = 0; j < 2; ++j) {
        const int plus = 2 * j;
        const int minus = plus + 1;
        const SparseOperator hop = ad[plus] * a[minus];
        h = h + scale(p.pillar_Delta(j), hop + adjoint(hop));
        if (p.U_cross != 0.0)
            h = h + scale(p.U_cross, ad[plus] * ad[minus] * a[minus] * a[plus]);
    }
    for (int xi = 0; xi < 2; ++xi) {
        const SparseOperator hop = ad[kAp + xi] * a[kBp + xi];
        h = h + scale(p.J, hop + adjoint(hop));
    }
    h = h + scale(p.F, ad[kAp] + a[kAp]);
    return h;
}

struct CollapseOperator {
    SparseOperator op;  // bare operator, without the rate
    double rate = 0.0;
    std::string label;
};

inline std::vector<CollapseOperator> loss_operators(const SystemParams& p, const FockSpace& s)
{
    detail::require_molecule_space(s, "loss_operators");
    std::vector<CollapseOperator> out;
    for (int m = 0; m < kNumModes; ++m)
        out.push_back({annihilator(s, m), p.gamma, std::string("loss_") + kModeNames[m]});
    return out;
}

// Pure dephasing on n_{jx} and n_{jy}; empty when Gamma == 0.
inline std::vector<CollapseOperator> dephasing_operators(const SystemParams& p, const FockSpace& s)
{
    detail::require_molecule_space(s, "dephasing_operators");
    std::vector<CollapseOperator> out;
    if (p.Gamma == 0.0)
        return out;
    for (int j = 0; j < 2; ++j) {
        const LinearModes lin = linear_modes(s, static_cast<Pillar>(j));
        const std::string pillar = j == 0 ? "A" : "B";
        out.push_back({adjoint(lin.ax) * lin.ax, p.Gamma, "dephase_" + pillar + "x"});
        out.push_back({adjoint(lin.ay) * lin.ay, p.Gamma, "dephase_" + pillar + "y"});
    }
    return out;
}

// Same operators as dephasing_operators, written directly in circular-basis terms:
// n_{jx,y} = (n_+ + n_- +- (a_+^dag a_- + h.c.)) / 2.
inline std::vector<CollapseOperator> dephasing_operators_circular_form(const SystemParams& p,
                                                                       const FockSpace& s)
{
    detail::require_molecule_space(s, "dephasing_operators_circular_form");
    std::vector<CollapseOperator> out;
    if (p.Gamma == 0.0)
        return out;
    for (int j = 0; j < 2; ++j) {
        const int plus = 2 * j;
        const int minus = plus + 1;
        const SparseOperator total = number_operator(s, plus) + number_operator(s, minus);
        const SparseOperator hop = creator(s, plus) * annihilator(s, minus);
        const SparseOperator mix = hop + adjoint(hop);
        const std::string pillar = j == 0 ? "A" : "B";
        out.push_back({scale(0.5, total + mix), p.Gamma, "dephase_" + pillar + "x"});
        out.push_back({scale(0.5, total - mix), p.Gamma, "dephase_" + pillar + "y"});
    }
    return out;
}

inline std::vector<CollapseOperator> collapse_operators(const SystemParams& p, const FockSpace& s)
{
    auto out = loss_operators(p, s);
    for (auto& c : dephasing_operators(p, s))
        out.push_back(std::move(c));
    return out;
}

} // namespace photmol
