#pragma once

// Spectrum of the dimer: closed-form eigenvalues and their labelling,
// exceptional points, eigenvector coalescence, σ_z^(d) transition elements and
// the slow-oscillation period.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "vaet/errors.hpp"
#include "vaet/linalg.hpp"
#include "vaet/model.hpp"

namespace vaet {

/// λ₁ = -λ₂ from the "ξ - 2√…" branch, λ₃ = -λ₄ from "ξ + 2√…". Labels are
/// 1-based in accessors to match the usual λ_jk notation.
struct SortedDimerSpectrum {
    std::array<cplx, 4> lambda{};

    [[nodiscard]] cplx operator()(int j) const { return lambda.at(static_cast<std::size_t>(j - 1)); }
    [[nodiscard]] cplx transition(int j, int k) const { return (*this)(j) - (*this)(k); }
    [[nodiscard]] double max_abs_imag() const {
        double m = 0.0;
        for (const auto& l : lambda) m = std::max(m, std::abs(l.imag()));
        return m;
    }
};

/// α²J² + (J² - γ²)Δ², the radicand whose zero is the exceptional point.
inline double inner_radicand(const DimerParams& p) {
    const double j2 = p.j_tunnel * p.j_tunnel;
    return p.alpha * p.alpha * j2 + (j2 - p.gamma * p.gamma) * p.delta * p.delta;
}

inline SortedDimerSpectrum dimer_spectrum_closed_form(const DimerParams& p) {
    p.validate();
    const double xi = p.alpha * p.alpha + p.j_tunnel * p.j_tunnel - p.gamma * p.gamma +
                      p.delta * p.delta;
    const cplx r = std::sqrt(cplx(inner_radicand(p), 0.0));
    SortedDimerSpectrum s;
    s.lambda[0] = -std::sqrt(xi - 2.0 * r);
    s.lambda[1] = -s.lambda[0];
    s.lambda[2] = -std::sqrt(xi + 2.0 * r);
    s.lambda[3] = -s.lambda[2];
    return s;
}

/// Closed-form location of the (Δ > 0) exceptional point, J√(1 + α²/Δ²).
inline double gamma_star_closed_form(const DimerParams& p) {
    if (!(p.delta > 0.0)) throw DomainError("gamma_star_closed_form: requires delta > 0");
    return p.j_tunnel * std::sqrt(1.0 + (p.alpha * p.alpha) / (p.delta * p.delta));
}

/// Numerical eigensystem with columns relabelled to λ₁..λ₄.
struct SpectralDecomposition {
    SortedDimerSpectrum values;
    ComplexMatrix vectors;  // column j-1 is |ψ_j>, unit norm
    Eigen::VectorXd residuals;
    double matrix_norm = 0.0;
    bool certified = false;
};

namespace detail {

inline int sign_key(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace detail

/// Assigns numerical eigenpairs to the closed-form labels by the permutation
/// with the smallest total distance. Among permutations within rounding of
/// the best, the one whose labels follow sign(Re) and then sign(Im) of the
/// closed form is preferred.
inline SpectralDecomposition label_dimer_eigensystem(const EigenSystem& es,
                                                     const SortedDimerSpectrum& reference) {
    if (es.size() != 4) throw ShapeError("label_dimer_eigensystem: expected 4 eigenpairs");
    std::array<int, 4> perm{0, 1, 2, 3};
    std::array<int, 4> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    int best_mismatch = std::numeric_limits<int>::max();
    const double scale = std::max(1.0, es.matrix_norm);
    do {
        double cost = 0.0;
        int mismatch = 0;
        for (int j = 0; j < 4; ++j) {
            const cplx num = es.values(perm[j]);
            const cplx ref = reference.lambda[j];
            cost += std::abs(num - ref);
            mismatch += detail::sign_key(num.real()) != detail::sign_key(ref.real());
            mismatch += detail::sign_key(num.imag()) != detail::sign_key(ref.imag());
        }
        const double tie = 1e-9 * scale;
        if (cost < best_cost - tie || (cost <= best_cost + tie && mismatch < best_mismatch)) {
            best_cost = std::min(cost, best_cost);
            best_mismatch = mismatch;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    SpectralDecomposition out;
    out.vectors.resize(4, 4);
    out.residuals.resize(4);
    for (int j = 0; j < 4; ++j) {
        out.values.lambda[j] = es.values(best[j]);
        out.vectors.col(j) = es.vectors.col(best[j]);
        out.residuals(j) = es.residuals(best[j]);
    }
    out.matrix_norm = es.matrix_norm;
    out.certified = residuals_certified(es);
    return out;
}

/// Residual-certified numerical spectrum of H_dim, labelled like the closed
/// form.
inline SpectralDecomposition dimer_spectrum_numeric(const DimerParams& p) {
    return label_dimer_eigensystem(eig_general(dimer_hamiltonian(p)), dimer_spectrum_closed_form(p));
}

// ---------------------------------------------------------------------------
// Donor monomer

/// Eigenvalues ∓√(J² - γ²) with vectors (-(√(J²-γ²)+iγ)/J, 1) and
/// ((√(J²-γ²)-iγ)/J, 1), normalized.
inline EigenSystem donor_eigensystem(double j, double gamma) {
    const ComplexMatrix h = donor_hamiltonian(j, gamma);
    const cplx s = std::sqrt(cplx(j * j - gamma * gamma, 0.0));
    const cplx ig(0.0, gamma);
    EigenSystem out;
    out.values.resize(2);
    out.values << -s, s;
    out.vectors.resize(2, 2);
    out.vectors << -(s + ig) / j, (s - ig) / j, 1.0, 1.0;
    out.matrix_norm = spectral_norm(h);
    out.residuals.resize(2);
    for (Index c = 0; c < 2; ++c) {
        out.vectors.col(c).normalize();
        out.residuals(c) = (h * out.vectors.col(c) - out.values(c) * out.vectors.col(c)).norm();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exceptional points

/// Principal angle between the spans of two nonzero vectors.
inline double principal_angle(const ComplexVector& u, const ComplexVector& v) {
    const ComplexVector a = u.normalized();
    const ComplexVector b = v.normalized();
    const cplx overlap = a.dot(b);
    return std::atan2((b - overlap * a).norm(), std::abs(overlap));
}

/// Number of simultaneous transitions between s coalescing groups of n
/// eigenvectors in a space of dimension `total`.
inline long simultaneous_transition_count(int s, int n, int total) {
    if (s < 1 || n < 1 || total < 1 || static_cast<long>(s) * n > total)
        throw DomainError("simultaneous_transition_count: need s, n >= 1 and s*n <= total");
    if (s > 1) return static_cast<long>(s) * (s - 1) * n * n / 2;
    return n == total ? 0 : n;
}

struct EPReport {
    double gamma_star = 0.0;
    int order_n = 0;
    int degeneracy_s = 0;
    std::vector<std::vector<int>> coalesced_groups;  // 1-based eigenvalue labels
    double eigvec_min_angle = 0.0;  // largest within-group principal angle at gamma_star
    double min_gap = 0.0;           // smallest within-group eigenvalue gap
    double matrix_norm = 0.0;
    long transition_count = 0;
    bool accepted = false;
    std::string note;
};

inline constexpr double kEigvecAngleTolerance = 1e-3;
inline constexpr double kEPGapTolerance = 1e-6;

namespace detail {

inline void fill_coalescence(EPReport& r, const SpectralDecomposition& sd) {
    double worst_angle = 0.0;
    double worst_gap = 0.0;
    for (const auto& group : r.coalesced_groups)
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b) {
                const int i = group[a] - 1;
                const int k = group[b] - 1;
                worst_angle = std::max(worst_angle,
                                       principal_angle(sd.vectors.col(i), sd.vectors.col(k)));
                worst_gap = std::max(worst_gap,
                                     std::abs(sd.values.lambda[i] - sd.values.lambda[k]));
            }
    r.eigvec_min_angle = worst_angle;
    r.min_gap = worst_gap;
    r.matrix_norm = sd.matrix_norm;
}

}  // namespace detail

/// Locates the Δ > 0 exceptional point by bisection on the sign of the inner
/// radicand (monotone in γ), bracketing around the closed form.
inline EPReport find_ep(const DimerParams& base) {
    base.validate();
    if (!(base.delta > 0.0))
        throw DomainError("find_ep: requires delta > 0 (use classify_delta_zero)");
    DimerParams p = base;
    const double guess = gamma_star_closed_form(p);
    auto f = [&](double g) {
        p.gamma = g;
        return inner_radicand(p);
    };
    double lo = std::max(0.0, guess * 0.5);
    double hi = guess * 1.5;
    for (int expand = 0; expand < 60 && !(f(lo) > 0.0 && f(hi) <= 0.0); ++expand) {
        lo = std::max(0.0, lo * 0.5);
        hi *= 2.0;
    }
    if (!(f(lo) > 0.0 && f(hi) <= 0.0)) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "find_ep: no sign change on [%.17g, %.17g] (f=%.3e, %.3e)",
                      lo, hi, f(lo), f(hi));
        throw RootFindError(buf);
    }
    // Bisect until the bracket cannot shrink further.
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    if (hi - lo > 1e-10) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "find_ep: bracket [%.17g, %.17g] did not converge", lo, hi);
        throw RootFindError(buf);
    }
    EPReport r;
    r.gamma_star = std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
    r.order_n = 2;
    r.degeneracy_s = 2;
    r.coalesced_groups = {{1, 3}, {2, 4}};
    r.transition_count = simultaneous_transition_count(2, 2, 4);
    p.gamma = r.gamma_star;
    const auto sd = label_dimer_eigensystem(eig_general_uncertified(dimer_hamiltonian(p)),
                                            dimer_spectrum_closed_form(p));
    detail::fill_coalescence(r, sd);
    r.accepted = r.eigvec_min_angle <= kEigvecAngleTolerance &&
                 r.min_gap < kEPGapTolerance * r.matrix_norm;
    return r;
}

struct ExceptionalLinePoint {
    double alpha = 0.0;
    double gamma_star = 0.0;
};

struct ExceptionalLine {
    double delta = 0.0;
    std::vector<ExceptionalLinePoint> samples;
};

inline ExceptionalLine trace_exceptional_line(double delta, const std::vector<double>& alpha_grid,
                                              double j = 1.0) {
    if (!(delta > 0.0)) throw DomainError("trace_exceptional_line: requires delta > 0");
    for (std::size_t i = 1; i < alpha_grid.size(); ++i)
        if (!(alpha_grid[i] > alpha_grid[i - 1]))
            throw DomainError("trace_exceptional_line: alpha grid must be strictly increasing");
    ExceptionalLine line;
    line.delta = delta;
    for (double a : alpha_grid) {
        const std::string where = " (alpha=" + std::to_string(a) + ")";
        try {
            line.samples.push_back({a, find_ep({j, 0.0, a, delta}).gamma_star});
        } catch (const NumericError& e) {
            throw RootFindError(e.what() + where);
        } catch (const DomainError& e) {
            throw DomainError(e.what() + where);
        }
    }
    for (std::size_t i = 1; i < line.samples.size(); ++i)
        if (!(line.samples[i].gamma_star > line.samples[i - 1].gamma_star))
            throw NumericError("trace_exceptional_line: gamma_star not increasing at alpha=" +
                               std::to_string(line.samples[i].alpha));
    return line;
}

/// Exceptional points of the Δ = 0 dimer, where σ_x^(a) is conserved and the
/// spectrum is ∓√((α∓J)² - γ²). α = 0 gives one fourfold coalescence at γ = J;
/// otherwise each sector has a second-order EP, at |α - J| and α + J. A
/// Hermitian (γ = 0) degeneracy is reported but not accepted as an EP.
inline std::vector<EPReport> classify_delta_zero(double j, double alpha) {
    DimerParams p{j, 0.0, alpha, 0.0};
    p.validate();
    struct Candidate {
        double gamma;
        std::vector<std::vector<int>> groups;
        int order;
    };
    std::vector<Candidate> cands;
    if (alpha == 0.0) {
        cands.push_back({j, {{1, 2, 3, 4}}, 4});
    } else {
        cands.push_back({std::abs(alpha - j), {{1, 2}}, 2});
        cands.push_back({alpha + j, {{3, 4}}, 2});
    }
    std::vector<EPReport> out;
    for (const auto& c : cands) {
        EPReport r;
        r.gamma_star = c.gamma;
        r.order_n = c.order;
        r.degeneracy_s = 1;
        r.coalesced_groups = c.groups;
        r.transition_count = simultaneous_transition_count(1, c.order, 4);
        p.gamma = c.gamma;
        const auto sd = label_dimer_eigensystem(eig_general_uncertified(dimer_hamiltonian(p)),
                                                dimer_spectrum_closed_form(p));
        detail::fill_coalescence(r, sd);
        if (c.order == 4) {
            // Each σ_x^(a) sector coalesces separately; the fourfold point is
            // an eigenvalue coincidence of two second-order EPs.
            r.eigvec_min_angle = std::max(principal_angle(sd.vectors.col(0), sd.vectors.col(1)),
                                          principal_angle(sd.vectors.col(2), sd.vectors.col(3)));
            r.note = "fourfold eigenvalue coincidence; eigenvectors coalesce pairwise within "
                     "each sigma_x(acceptor) sector";
        }
        if (c.gamma == 0.0) {
            r.accepted = false;
            r.note = "Hermitian degeneracy at gamma=0: eigenvectors stay orthogonal";
        } else {
            r.accepted = r.eigvec_min_angle <= kEigvecAngleTolerance &&
                         r.min_gap < kEPGapTolerance * std::max(1.0, r.matrix_norm);
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coalescence, transition elements, slow period

struct CoalescenceReport {
    SpectralDecomposition decomposition;
    Eigen::Matrix4d angles = Eigen::Matrix4d::Zero();       // angles(j-1, k-1)
    Eigen::Matrix4d projections = Eigen::Matrix4d::Zero();  // |<k|ψ_j>| at (k, j-1)
};

inline CoalescenceReport eigvec_coalescence(const DimerParams& p) {
    CoalescenceReport r;
    r.decomposition = label_dimer_eigensystem(eig_general_uncertified(dimer_hamiltonian(p)),
                                              dimer_spectrum_closed_form(p));
    const auto& v = r.decomposition.vectors;
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
            if (k != j) r.angles(j, k) = principal_angle(v.col(j), v.col(k));
            r.projections(k, j) = std::abs(v(k, j));
        }
    return r;
}

struct TransitionElements {
    Eigen::Matrix4d magnitude = Eigen::Matrix4d::Zero();  // |<ψ_j|σ_z^(d)|ψ_k>| at (j-1, k-1)
    std::vector<std::string> warnings;

    [[nodiscard]] double operator()(int j, int k) const { return magnitude(j - 1, k - 1); }
};

struct TransitionOptions {
    double ep_margin = 1e-5;          // required distance below γ*
    bool accept_ill_conditioned = false;
};

/// Plain inner products between unit right eigenvectors (not biorthogonal).
inline TransitionElements transition_matrix_elements(const DimerParams& p,
                                                     const TransitionOptions& opt = {}) {
    p.validate();
    TransitionElements out;
    if (p.delta > 0.0) {
        const double gs = gamma_star_closed_form(p);
        if (p.gamma > gs - opt.ep_margin) {
            if (!opt.accept_ill_conditioned)
                throw PhaseDomainError("transition_matrix_elements: gamma within " +
                                       std::to_string(opt.ep_margin) +
                                       " of the exceptional point or beyond");
            out.warnings.push_back("gamma at or beyond the exceptional point; eigenvectors "
                                   "are ill-conditioned");
        }
    }
    const auto es = eig_general_uncertified(dimer_hamiltonian(p));
    const auto sd = label_dimer_eigensystem(es, dimer_spectrum_closed_form(p));
    if (!sd.certified) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "eigenvector residual %.3e above tolerance",
                      sd.residuals.maxCoeff());
        out.warnings.push_back(buf);
    }
    const ComplexMatrix sz = ops::donor(ops::sigma_z());
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
            out.magnitude(j, k) = std::abs(sd.vectors.col(j).dot(sz * sd.vectors.col(k)));
    return out;
}

/// T* = 2π / |λ₄ - λ₂| in the unbroken phase.
inline double slow_period(const DimerParams& p) {
    const auto s = dimer_spectrum_closed_form(p);
    const double w = std::abs(s.transition(4, 2));
    if (s.max_abs_imag() > 1e-10 || inner_radicand(p) <= 0.0 || !(w > 0.0))
        throw PhaseDomainError("slow_period: requires the unbroken phase (gamma=" +
                               std::to_string(p.gamma) + ")");
    return 2.0 * std::numbers::pi / w;
}

}  // namespace vaet
