#pragma once

// Parameter records, operator builders and the Hamiltonians of the
// donor/acceptor dimer with a single vibrational mode.
//
// Dimer basis order is |ee>, |eg>, |ge>, |gg> (donor slot first), with e
// mapped to index 0 and g to index 1 on each site. The full space is
// dimer(4) ⊗ Fock(N), flattened as dimer_index * N + n. All energies are in
// units of J.

#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

#include "vaet/errors.hpp"
#include "vaet/linalg.hpp"

namespace vaet {

namespace detail {

inline void require_finite_value(double v, const char* field) {
    if (!std::isfinite(v)) throw ValidationError("must be finite", field);
}

inline void require_non_negative(double v, const char* field) {
    require_finite_value(v, field);
    if (v < 0.0) throw ValidationError("must be >= 0, got " + std::to_string(v), field);
}

inline void require_positive(double v, const char* field) {
    require_finite_value(v, field);
    if (!(v > 0.0)) throw ValidationError("must be > 0, got " + std::to_string(v), field);
}

}  // namespace detail

struct DimerParams {
    double j_tunnel = 1.0;
    double gamma = 0.0;
    double alpha = 1.0;
    double delta = 8.0;

    void validate() const {
        detail::require_positive(j_tunnel, "j_tunnel");
        detail::require_non_negative(gamma, "gamma");
        detail::require_non_negative(alpha, "alpha");
        detail::require_non_negative(delta, "delta");
    }

    bool operator==(const DimerParams&) const = default;
};

struct VibrationParams {
    double nu = 16.12;
    double kappa = 0.3;
    double kbt = 40.0;
    int fock_dim = 50;

    void validate() const {
        detail::require_positive(nu, "nu");
        detail::require_non_negative(kappa, "kappa");
        detail::require_non_negative(kbt, "kbt");
        if (fock_dim < 2)
            throw ValidationError("must be >= 2, got " + std::to_string(fock_dim), "fock_dim");
    }

    /// Bose-Einstein occupation of the untruncated mode.
    [[nodiscard]] double mean_thermal_occupation() const {
        if (kbt == 0.0) return 0.0;
        return 1.0 / std::expm1(nu / kbt);
    }

    [[nodiscard]] bool truncation_adequate() const {
        return mean_thermal_occupation() < fock_dim / 5.0;
    }

    bool operator==(const VibrationParams&) const = default;
};

struct DissipationParams {
    double gamma_a = 0.0;

    void validate() const { detail::require_non_negative(gamma_a, "gamma_a"); }

    bool operator==(const DissipationParams&) const = default;
};

// ---------------------------------------------------------------------------
// Basis

enum class Level : int { e = 0, g = 1 };

inline constexpr Index kDimerDim = 4;
inline constexpr Index kEE = 0;
inline constexpr Index kEG = 1;
inline constexpr Index kGE = 2;
inline constexpr Index kGG = 3;

struct BasisLabel {
    Level donor = Level::e;
    Level acceptor = Level::g;
    int phonon = 0;

    bool operator==(const BasisLabel&) const = default;
};

inline constexpr Index dimer_index(Level donor, Level acceptor) {
    return 2 * static_cast<Index>(donor) + static_cast<Index>(acceptor);
}

inline Index basis_index(const BasisLabel& b, int fock_dim) {
    if (b.phonon < 0 || b.phonon >= fock_dim)
        throw DomainError("phonon number " + std::to_string(b.phonon) + " outside [0, " +
                          std::to_string(fock_dim) + ")");
    return dimer_index(b.donor, b.acceptor) * fock_dim + b.phonon;
}

inline BasisLabel basis_label(Index index, int fock_dim) {
    if (fock_dim < 1 || index < 0 || index >= kDimerDim * fock_dim)
        throw DomainError("basis index " + std::to_string(index) + " out of range");
    const Index d = index / fock_dim;
    return {static_cast<Level>(d / 2), static_cast<Level>(d % 2),
            static_cast<int>(index % fock_dim)};
}

inline std::string dimer_state_name(Index d) {
    static const char* names[] = {"ee", "eg", "ge", "gg"};
    if (d < 0 || d >= kDimerDim) throw DomainError("dimer index out of range");
    return names[d];
}

// ---------------------------------------------------------------------------
// Operators

namespace ops {

inline ComplexMatrix identity(Index n) { return ComplexMatrix::Identity(n, n); }

inline ComplexMatrix sigma_x() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    return m;
}

inline ComplexMatrix sigma_y() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 1) = cplx(0, -1);
    m(1, 0) = cplx(0, 1);
    return m;
}

/// |e><e| - |g><g|.
inline ComplexMatrix sigma_z() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}

/// Lowering operator |g><e|.
inline ComplexMatrix sigma_minus() {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(1, 0) = 1.0;
    return m;
}

inline ComplexMatrix sigma_plus() { return sigma_minus().adjoint(); }

/// Truncated annihilation operator, a|n> = sqrt(n)|n-1>.
inline ComplexMatrix annihilation(Index n) {
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    for (Index k = 1; k < n; ++k) m(k - 1, k) = std::sqrt(static_cast<double>(k));
    return m;
}

inline ComplexMatrix creation(Index n) { return annihilation(n).adjoint(); }

inline ComplexMatrix number(Index n) {
    ComplexMatrix m = ComplexMatrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
    return m;
}

inline ComplexMatrix donor(const ComplexMatrix& op) { return kron(op, identity(2)); }
inline ComplexMatrix acceptor(const ComplexMatrix& op) { return kron(identity(2), op); }

/// Projector onto one dimer basis state.
inline ComplexMatrix dimer_projector(Index d) {
    ComplexMatrix m = ComplexMatrix::Zero(kDimerDim, kDimerDim);
    m(d, d) = 1.0;
    return m;
}

/// Parity P' = σ_x^(d) ⊗ I^(a).
inline ComplexMatrix pt_parity() { return donor(sigma_x()); }

}  // namespace ops

// ---------------------------------------------------------------------------
// Hamiltonians

/// H_dim = -iγσ_z^(d) + Jσ_x^(d) + Δσ_z^(a) + ασ_x^(d)σ_x^(a).
inline ComplexMatrix dimer_hamiltonian(const DimerParams& p) {
    p.validate();
    using namespace ops;
    return cplx(0, -p.gamma) * donor(sigma_z()) + p.j_tunnel * donor(sigma_x()) +
           p.delta * acceptor(sigma_z()) + p.alpha * kron(sigma_x(), sigma_x());
}

struct VibronicHamiltonian {
    ComplexMatrix matrix;
    int fock_dim = 0;
    std::vector<std::string> warnings;
};

inline std::string fock_warning(const VibrationParams& v) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "Fock truncation inadequate: mean thermal occupation %.4g >= N/5 = %.4g",
                  v.mean_thermal_occupation(), v.fock_dim / 5.0);
    return buf;
}

/// H = H_dim ⊗ I_N + κσ_z^(d) ⊗ (a + a†) + ν I_4 ⊗ a†a.
inline VibronicHamiltonian full_hamiltonian(const DimerParams& p, const VibrationParams& v,
                                            Index max_dim = kMaxDimension) {
    p.validate();
    v.validate();
    const Index n = v.fock_dim;
    if (kDimerDim * n > max_dim)
        throw SizingError("full_hamiltonian: dimension " + std::to_string(kDimerDim * n) +
                          " exceeds maximum " + std::to_string(max_dim));
    using namespace ops;
    const ComplexMatrix a = annihilation(n);
    VibronicHamiltonian out;
    out.fock_dim = v.fock_dim;
    out.matrix = kron(dimer_hamiltonian(p), identity(n), max_dim) +
                 v.kappa * kron(donor(sigma_z()), a + a.adjoint(), max_dim) +
                 v.nu * kron(identity(kDimerDim), number(n), max_dim);
    if (!v.truncation_adequate()) out.warnings.push_back(fock_warning(v));
    return out;
}

/// H_d = -iγσ_z + Jσ_x.
inline ComplexMatrix donor_hamiltonian(double j, double gamma) {
    detail::require_positive(j, "j_tunnel");
    detail::require_non_negative(gamma, "gamma");
    return cplx(0, -gamma) * ops::sigma_z() + j * ops::sigma_x();
}

/// Projection onto span{|eg>, |ge>} ⊗ Fock, in that order:
/// (-Δ - iγ)σ̃_z + ασ̃_x + κσ̃_z(a + a†) + νa†a.
inline ComplexMatrix effective_single_excitation_hamiltonian(const DimerParams& p,
                                                             const VibrationParams& v) {
    p.validate();
    v.validate();
    using namespace ops;
    const Index n = v.fock_dim;
    const ComplexMatrix a = annihilation(n);
    const ComplexMatrix sz = sigma_z();
    return kron(cplx(-p.delta, -p.gamma) * sz + p.alpha * sigma_x(), identity(n)) +
           v.kappa * kron(sz, a + a.adjoint()) + v.nu * kron(identity(2), number(n));
}

/// -iγI + H_d: the passive form with a uniform loss offset.
inline ComplexMatrix passive_pt_offset(const ComplexMatrix& h_d, double gamma) {
    if (h_d.rows() != 2 || h_d.cols() != 2)
        throw ShapeError("passive_pt_offset: expected 2x2 input, got " + detail::dims(h_d));
    return h_d + cplx(0, -gamma) * ops::identity(2);
}

struct UphillCondition {
    bool satisfied = false;
    double margin = 0.0;  // Δ - J - α/2
};

inline UphillCondition uphill_condition(const DimerParams& p) {
    p.validate();
    const double margin = p.delta - p.j_tunnel - 0.5 * p.alpha;
    return {margin > 0.0, margin};
}

}  // namespace vaet
