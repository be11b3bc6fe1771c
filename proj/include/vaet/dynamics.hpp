#pragma once

// State preparation, normalized nonunitary evolution, acceptor-decay Lindblad
// evolution, and the transfer observables.

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "vaet/errors.hpp"
#include "vaet/linalg.hpp"
#include "vaet/model.hpp"

namespace vaet {

struct DensityMatrix {
    ComplexMatrix matrix;
    bool normalized = true;
    int fock_dim = 1;  // 1 for a bare 4x4 dimer state

    [[nodiscard]] cplx trace() const { return matrix.trace(); }
};

struct DensityInvariants {
    double trace_error = 0.0;        // |Tr ρ - 1|
    double hermiticity_error = 0.0;  // max |ρ - ρ†|
    double min_eigenvalue = 0.0;

    [[nodiscard]] bool ok(double tol = 1e-10, double positivity = -1e-8) const {
        return trace_error <= tol && hermiticity_error <= tol && min_eigenvalue > positivity;
    }
};

inline DensityInvariants check_density(const ComplexMatrix& rho) {
    require_square(rho, "check_density");
    DensityInvariants r;
    r.trace_error = std::abs(rho.trace() - 1.0);
    r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const ComplexMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    return r;
}

/// Gibbs weights p_n ∝ exp(-nν/k_BT) on the truncated Fock space.
inline Eigen::VectorXd thermal_weights(const VibrationParams& v) {
    v.validate();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(v.fock_dim);
    if (v.kbt == 0.0) {
        p(0) = 1.0;
        return p;
    }
    const double beta_nu = v.nu / v.kbt;
    for (int n = 0; n < v.fock_dim; ++n) p(n) = std::exp(-beta_nu * n);
    return p / p.sum();
}

inline DensityMatrix thermal_vibration_state(const VibrationParams& v) {
    DensityMatrix out;
    out.matrix = thermal_weights(v).cast<cplx>().asDiagonal();
    out.fock_dim = v.fock_dim;
    return out;
}

/// |eg><eg| ⊗ ρ_v.
inline DensityMatrix initial_state(const VibrationParams& v) {
    DensityMatrix out;
    out.matrix = kron(ops::dimer_projector(kEG), thermal_vibration_state(v).matrix);
    out.fock_dim = v.fock_dim;
    return out;
}

/// Which operator is reported as the acceptor population. `excited_acceptor`
/// projects on |e>_a of the acceptor site (|ge> + |ee>); `ge_projector`
/// projects on |ge> only.
enum class AcceptorObservable { excited_acceptor, ge_projector };

inline const char* to_string(AcceptorObservable o) {
    return o == AcceptorObservable::excited_acceptor ? "excited_acceptor" : "ge_projector";
}

/// Dimer-block populations Tr[ρ (|d><d| ⊗ I_N)] for d = ee, eg, ge, gg.
inline std::array<double, 4> dimer_populations(const ComplexMatrix& rho, int fock_dim) {
    require_square(rho, "dimer_populations");
    if (rho.rows() != kDimerDim * fock_dim)
        throw ShapeError("dimer_populations: state dimension " + std::to_string(rho.rows()) +
                         " does not match 4*N with N=" + std::to_string(fock_dim));
    std::array<double, 4> p{};
    for (Index d = 0; d < kDimerDim; ++d)
        p[d] = rho.diagonal().segment(d * fock_dim, fock_dim).real().sum();
    return p;
}

inline double acceptor_population(const DensityMatrix& rho,
                                  AcceptorObservable obs = AcceptorObservable::excited_acceptor) {
    const auto p = dimer_populations(rho.matrix, rho.fock_dim);
    return obs == AcceptorObservable::ge_projector ? p[kGE] : p[kGE] + p[kEE];
}

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<double> p_acceptor;
    std::vector<double> p_donor;  // |eg>
    std::vector<double> p_gg;
    std::vector<double> p_ee;
    std::vector<double> p_ge;
    std::vector<double> raw_trace;
    std::vector<double> mean_phonon;
    std::vector<double> top_fock_weight;
    AcceptorObservable observable = AcceptorObservable::excited_acceptor;
    int substeps = 1;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const { return times.size(); }

    /// Largest |P_ee + P_eg + P_ge + P_gg - 1| over the record.
    [[nodiscard]] double max_population_sum_error() const {
        double m = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i)
            m = std::max(m, std::abs(p_ee[i] + p_donor[i] + p_ge[i] + p_gg[i] - 1.0));
        return m;
    }

    [[nodiscard]] double max_top_fock_weight() const {
        return top_fock_weight.empty()
                   ? 0.0
                   : *std::max_element(top_fock_weight.begin(), top_fock_weight.end());
    }

    [[nodiscard]] bool truncation_flagged() const { return max_top_fock_weight() >= 1e-5; }
};

inline constexpr double kTopFockTolerance = 1e-5;

struct EvolutionOptions {
    AcceptorObservable observable = AcceptorObservable::excited_acceptor;
    /// Called with the normalized state at every `observe_stride`-th record
    /// (0 disables). Used by invariant checks.
    std::function<void(double, const ComplexMatrix&)> observer;
    int observe_stride = 0;
};

/// k * dt for k = 0..round(t_end / dt).
inline std::vector<double> uniform_grid(double t_end, double dt) {
    if (!(dt > 0.0) || !(t_end >= 0.0) || !std::isfinite(t_end))
        throw DomainError("uniform_grid: need dt > 0 and t_end >= 0");
    const auto n = static_cast<long>(std::llround(t_end / dt));
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (long k = 0; k <= n; ++k) t[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
    return t;
}

namespace detail {

inline double grid_step(const std::vector<double>& t) {
    if (t.size() < 2) throw DomainError("time grid needs at least two points");
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw DomainError("time grid must be increasing");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(t[k])))
            throw DomainError("time grid must be uniform");
    return dt;
}

inline int fock_dim_of(const ComplexMatrix& h, const DensityMatrix& rho0) {
    require_square(h, "evolve");
    require_finite(h, "evolve");
    if (rho0.matrix.rows() != h.rows() || rho0.matrix.cols() != h.cols())
        throw ShapeError("evolve: state " + dims(rho0.matrix) + " does not match Hamiltonian " +
                         dims(h));
    if (h.rows() != kDimerDim * rho0.fock_dim)
        throw ShapeError("evolve: dimension is not 4*N for N=" + std::to_string(rho0.fock_dim));
    return rho0.fock_dim;
}

/// Records observables from the diagonal of a normalized state.
inline void record(TrajectoryResult& r, double t, const Eigen::VectorXd& diag, int n,
                   double raw) {
    std::array<double, 4> p{};
    double mean = 0.0;
    double top = 0.0;
    for (Index d = 0; d < kDimerDim; ++d)
        for (int k = 0; k < n; ++k) {
            const double w = diag(d * n + k);
            p[d] += w;
            mean += k * w;
            if (k == n - 1) top += w;
        }
    r.times.push_back(t);
    r.p_ee.push_back(p[kEE]);
    r.p_donor.push_back(p[kEG]);
    r.p_ge.push_back(p[kGE]);
    r.p_gg.push_back(p[kGG]);
    r.p_acceptor.push_back(r.observable == AcceptorObservable::ge_projector ? p[kGE]
                                                                            : p[kGE] + p[kEE]);
    r.raw_trace.push_back(raw);
    r.mean_phonon.push_back(mean);
    r.top_fock_weight.push_back(top);
}

inline void check_range(double raw, double t, const char* who) {
    if (!std::isfinite(raw) || raw < 1e-300 || raw > 1e300) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: trace %.3e left the representable range at t=%.6g",
                      who, raw, t);
        throw DynamicRangeError(buf);
    }
}

inline void finish(TrajectoryResult& r) {
    if (r.truncation_flagged()) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "top Fock weight %.3e exceeds %.0e",
                      r.max_top_fock_weight(), kTopFockTolerance);
        r.warnings.push_back(buf);
    }
}

/// ρ = L L† with L = V √Λ from the Hermitian eigendecomposition.
inline ComplexMatrix factor_state(const ComplexMatrix& rho) {
    const ComplexMatrix herm = 0.5 * (rho + rho.adjoint());
    // Diagonal states (the usual initial condition) factor exactly.
    if ((herm - ComplexMatrix(herm.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0) {
        std::vector<Index> cols;
        for (Index i = 0; i < herm.rows(); ++i)
            if (herm(i, i).real() > 0.0) cols.push_back(i);
        ComplexMatrix l = ComplexMatrix::Zero(herm.rows(), static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c)
            l(cols[c], static_cast<Index>(c)) = std::sqrt(herm(cols[c], cols[c]).real());
        return l;
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<Index> cols;
    for (Index i = 0; i < herm.rows(); ++i)
        if (es.eigenvalues()(i) > 1e-15 * top) cols.push_back(i);
    ComplexMatrix l(herm.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        l.col(static_cast<Index>(c)) =
            es.eigenvectors().col(cols[c]) * std::sqrt(es.eigenvalues()(cols[c]));
    return l;
}

}  // namespace detail

/// ρ(t) = U ρ(0) U† / Tr[U ρ(0) U†] with U = exp(-iHδt) applied once per
/// grid step and the state renormalized after every step. The state is kept
/// as ρ = L L†, which makes positivity and Hermiticity exact. raw_trace is
/// Tr[U ρ(t-δt) U†] before renormalization.
inline TrajectoryResult evolve_nonunitary(const ComplexMatrix& h, const DensityMatrix& rho0,
                                          const std::vector<double>& t_grid,
                                          const EvolutionOptions& opt = {}) {
    const int n = detail::fock_dim_of(h, rho0);
    const double dt = detail::grid_step(t_grid);
    TrajectoryResult r;
    r.observable = opt.observable;
    r.times.reserve(t_grid.size());

    ComplexMatrix l = detail::factor_state(rho0.matrix);
    const double tr0 = l.squaredNorm();
    detail::check_range(tr0, t_grid[0], "evolve_nonunitary");
    l /= std::sqrt(tr0);
    const ComplexMatrix u = expm(cplx(0.0, -dt) * h);
    ComplexMatrix next(l.rows(), l.cols());

    auto observe = [&](std::size_t k) {
        if (opt.observer && opt.observe_stride > 0 && k % opt.observe_stride == 0)
            opt.observer(t_grid[k], l * l.adjoint());
    };
    detail::record(r, t_grid[0], l.rowwise().squaredNorm(), n, 1.0);
    observe(0);
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        next.noalias() = u * l;
        const double raw = next.squaredNorm();
        detail::check_range(raw, t_grid[k], "evolve_nonunitary");
        l = next / std::sqrt(raw);
        detail::record(r, t_grid[k], l.rowwise().squaredNorm(), n, raw);
        observe(k);
    }
    detail::finish(r);
    return r;
}

// ---------------------------------------------------------------------------
// Lindblad

struct LindbladOptions {
    EvolutionOptions evolution;
    int substeps = 0;               // RK4 steps per grid step; 0 picks from the stability bound
    double stability_ratio = 2.0;   // target h * (generator spread bound)
    double check_tolerance = 1e-6;  // halved-step agreement on P_a and the trace ratio
    int max_refinements = 4;
};

namespace detail {

using RowMajorComplex = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Right-hand side of the acceptor-decay master equation in the frame
/// rotating with the real diagonal D of H: ϱ̃ = e^{iDt} ϱ e^{-iDt}. The
/// rotation removes the stiff νa†a and Δ terms, so RK4 is stable at the grid
/// step. Populations are unchanged by the rotation.
class LindbladRhs {
public:
    LindbladRhs(const ComplexMatrix& h, double gamma_a, int fock_dim)
        : dim_(h.rows()), n_(fock_dim), gamma_a_(gamma_a) {
        d_ = h.diagonal().real();
        c_ = h.diagonal().imag().cast<cplx>() * cplx(0.0, 1.0);
        for (Index blk : {kEE, kGE})
            for (int k = 0; k < n_; ++k) c_(blk * n_ + k) -= cplx(0.0, 0.5 * gamma_a);
        row_start_.push_back(0);
        for (Index a = 0; a < dim_; ++a) {
            for (Index b = 0; b < dim_; ++b)
                if (a != b && h(a, b) != cplx(0.0, 0.0)) {
                    col_.push_back(b);
                    base_.push_back(h(a, b));
                    freq_.push_back(d_(a) - d_(b));
                }
            row_start_.push_back(col_.size());
        }
        val_.resize(base_.size());
        // σ₋^(a) maps |ee,n> -> |eg,n> and |ge,n> -> |gg,n>.
        jump_freq_.resize(2 * n_);
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k < n_; ++k) {
                const Index src = kJumpSrc[i] * n_ + k;
                const Index dst = kJumpDst[i] * n_ + k;
                jump_freq_(i * n_ + k) = d_(dst) - d_(src);
            }
        a_.resize(dim_, dim_);
    }

    /// Upper bound on the spread of the rotated generator.
    [[nodiscard]] double spread_bound() const {
        double m = 0.0;
        for (Index a = 0; a < dim_; ++a) {
            double row = std::abs(c_(a));
            for (std::size_t e = row_start_[a]; e < row_start_[a + 1]; ++e) row += std::abs(base_[e]);
            m = std::max(m, row);
        }
        return 2.0 * m + gamma_a_;
    }

    void operator()(double t, const RowMajorComplex& rho, RowMajorComplex& out) {
        for (std::size_t e = 0; e < base_.size(); ++e)
            val_[e] = base_[e] * std::polar(1.0, freq_[e] * t);
        for (Index a = 0; a < dim_; ++a) {
            auto row = a_.row(a);
            row.noalias() = c_(a) * rho.row(a);
            for (std::size_t e = row_start_[a]; e < row_start_[a + 1]; ++e)
                row.noalias() += val_[e] * rho.row(col_[e]);
        }
        out.noalias() = a_;
        out -= a_.adjoint();
        out *= cplx(0.0, -1.0);
        if (gamma_a_ > 0.0) {
            Eigen::VectorXcd z(2 * n_);
            for (int i = 0; i < 2 * n_; ++i) z(i) = std::polar(1.0, jump_freq_(i) * t);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    out.block(kJumpDst[i] * n_, kJumpDst[j] * n_, n_, n_) +=
                        gamma_a_ *
                        ((z.segment(i * n_, n_) * z.segment(j * n_, n_).adjoint()).cwiseProduct(
                            rho.block(kJumpSrc[i] * n_, kJumpSrc[j] * n_, n_, n_)));
        }
    }

    /// ϱ = e^{-iDt} ϱ̃ e^{iDt}.
    [[nodiscard]] ComplexMatrix lab_frame(double t, const RowMajorComplex& rho) const {
        Eigen::VectorXcd z(dim_);
        for (Index a = 0; a < dim_; ++a) z(a) = std::polar(1.0, -d_(a) * t);
        return (z * z.adjoint()).cwiseProduct(ComplexMatrix(rho));
    }

    [[nodiscard]] RowMajorComplex rotating_frame(double t, const ComplexMatrix& rho) const {
        Eigen::VectorXcd z(dim_);
        for (Index a = 0; a < dim_; ++a) z(a) = std::polar(1.0, d_(a) * t);
        return (z * z.adjoint()).cwiseProduct(rho);
    }

private:
    static constexpr Index kJumpSrc[2] = {kEE, kGE};
    static constexpr Index kJumpDst[2] = {kEG, kGG};

    Index dim_;
    int n_;
    double gamma_a_;
    Eigen::VectorXd d_;
    Eigen::VectorXcd c_;
    std::vector<std::size_t> row_start_;
    std::vector<Index> col_;
    std::vector<cplx> base_;
    std::vector<double> freq_;
    std::vector<cplx> val_;
    Eigen::VectorXd jump_freq_;
    RowMajorComplex a_;
};

inline TrajectoryResult lindblad_run(LindbladRhs& rhs, const DensityMatrix& rho0,
                                     const std::vector<double>& t, int substeps,
                                     const EvolutionOptions& opt, int n) {
    TrajectoryResult r;
    r.observable = opt.observable;
    r.substeps = substeps;
    r.times.reserve(t.size());
    const double dt = grid_step(t);
    const double step = dt / substeps;

    const double tr0 = rho0.matrix.trace().real();
    check_range(tr0, t[0], "evolve_lindblad");
    // Frame time is measured from the first grid point.
    RowMajorComplex rho = 0.5 * (rho0.matrix + rho0.matrix.adjoint()) / tr0;
    const Index dim = rho.rows();
    RowMajorComplex k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim);

    auto observe = [&](std::size_t k) {
        if (opt.observer && opt.observe_stride > 0 && k % opt.observe_stride == 0)
            opt.observer(t[k], rhs.lab_frame(t[k] - t[0], rho));
    };
    record(r, t[0], rho.diagonal().real(), n, 1.0);
    observe(0);
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double t_start = (t[k - 1] - t[0]);
        for (int s = 0; s < substeps; ++s) {
            const double tau = t_start + s * step;
            rhs(tau, rho, k1);
            tmp = rho + (0.5 * step) * k1;
            rhs(tau + 0.5 * step, tmp, k2);
            tmp = rho + (0.5 * step) * k2;
            rhs(tau + 0.5 * step, tmp, k3);
            tmp = rho + step * k3;
            rhs(tau + step, tmp, k4);
            rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const double raw = rho.trace().real();
        if (!rho.allFinite() || !std::isfinite(raw) || raw <= 0.0) {
            char buf[120];
            std::snprintf(buf, sizeof buf,
                          "evolve_lindblad: trace blow-up at t=%.6g with %d substeps", t[k],
                          substeps);
            throw IntegrationError(buf);
        }
        check_range(raw, t[k], "evolve_lindblad");
        rho /= raw;
        record(r, t[k], rho.diagonal().real(), n, raw);
        observe(k);
    }
    return r;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-300));
    return m;
}

}  // namespace detail

/// dϱ/dt = -i(Hϱ - ϱH†) + γ_a(σ₋ϱσ₊ - ½{σ₊σ₋, ϱ}) with σ₋ on the acceptor.
/// Classical RK4 on the unnormalized ϱ (in the frame rotating with the real
/// diagonal of H), renormalized at every grid point. Each run is repeated
/// with the step halved and accepted when both agree to check_tolerance;
/// otherwise the step is refined again. The finer run is returned.
inline TrajectoryResult evolve_lindblad(const ComplexMatrix& h, const DissipationParams& d,
                                        const DensityMatrix& rho0,
                                        const std::vector<double>& t_grid,
                                        const LindbladOptions& opt = {}) {
    d.validate();
    const int n = detail::fock_dim_of(h, rho0);
    const double dt = detail::grid_step(t_grid);
    detail::LindbladRhs rhs(h, d.gamma_a, n);
    int m = opt.substeps;
    if (m <= 0)
        m = std::max(1, static_cast<int>(std::ceil(dt * rhs.spread_bound() / opt.stability_ratio)));

    EvolutionOptions quiet = opt.evolution;
    quiet.observer = nullptr;
    auto attempt = [&](int substeps) {
        try {
            return detail::lindblad_run(rhs, rho0, t_grid, substeps, quiet, n);
        } catch (const IntegrationError&) {
            return TrajectoryResult{};
        }
    };
    TrajectoryResult coarse = attempt(m);
    double dp = 0.0, dtr = 0.0;
    for (int refine = 0; refine <= opt.max_refinements; ++refine) {
        TrajectoryResult fine = attempt(2 * m);
        const bool comparable = coarse.size() == t_grid.size() && fine.size() == t_grid.size();
        dp = comparable ? detail::max_abs_diff(coarse.p_acceptor, fine.p_acceptor)
                        : std::numeric_limits<double>::infinity();
        dtr = comparable ? detail::max_rel_diff(coarse.raw_trace, fine.raw_trace)
                         : std::numeric_limits<double>::infinity();
        if (dp <= opt.check_tolerance && dtr <= opt.check_tolerance) {
            if (opt.evolution.observer)
                fine = detail::lindblad_run(rhs, rho0, t_grid, 2 * m, opt.evolution, n);
            detail::finish(fine);
            return fine;
        }
        coarse = std::move(fine);
        m *= 2;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "evolve_lindblad: halved-step check failed at %d substeps per grid step "
                  "(max |dP_a|=%.3e, trace ratio change %.3e)",
                  m, dp, dtr);
    throw IntegrationError(buf);
}

// ---------------------------------------------------------------------------
// Spectral kernel for sweeps

struct SpectralSeries {
    std::vector<double> p_acceptor;
    double rcond = 0.0;             // reciprocal condition estimate of the eigenvector matrix
    double reconstruction_error = 0.0;
    bool accepted = false;
};

struct SpectralKernelOptions {
    AcceptorObservable observable = AcceptorObservable::excited_acceptor;
    double min_rcond = 1e-7;
    double max_reconstruction_error = 1e-9;
};

/// P_a on the grid k*dt (k = 0..steps) for ρ(0) = |eg><eg| ⊗ diag(weights),
/// from one eigendecomposition H = V Λ V⁻¹:
///   Tr[X ρ̃(t)] = Σ_jk (V†XV)_kj G_jk e^{-i(λ_j - λ̄_k)t},  G = V⁻¹ρ(0)V⁻†.
/// The sum is Hermitian in (j, k), so only j <= k is accumulated. Falls back
/// to `accepted = false` when V is too ill-conditioned to trust (near an
/// exceptional point of H); callers then use evolve_nonunitary.
inline SpectralSeries acceptor_series_spectral(const ComplexMatrix& h,
                                               const Eigen::VectorXd& weights, long steps,
                                               double dt, const SpectralKernelOptions& opt = {}) {
    require_square(h, "acceptor_series_spectral");
    const Index n = weights.size();
    const Index dim = h.rows();
    if (dim != kDimerDim * n) throw ShapeError("acceptor_series_spectral: dimension mismatch");
    SpectralSeries out;

    ComplexMatrix v;
    ComplexVector lam;
    if (!detail::raw_eig(h, lam, v)) return out;
    Eigen::PartialPivLU<ComplexMatrix> lu(v);
    out.rcond = lu.rcond();
    if (!(out.rcond >= opt.min_rcond)) return out;
    const ComplexMatrix vinv = lu.inverse();
    out.reconstruction_error =
        (v * lam.asDiagonal() * vinv - h).cwiseAbs().maxCoeff() / std::max(1.0, h.cwiseAbs().maxCoeff());
    if (!(out.reconstruction_error <= opt.max_reconstruction_error)) return out;

    // C = V⁻¹ L0 with L0 = sqrt(w_n) |eg,n>.
    ComplexMatrix c(dim, n);
    for (Index k = 0; k < n; ++k) c.col(k) = vinv.col(kEG * n + k) * std::sqrt(weights(k));
    const ComplexMatrix g = c * c.adjoint();
    ComplexMatrix vx = v;
    for (Index blk = 0; blk < kDimerDim; ++blk) {
        const bool keep = blk == kGE || (blk == kEE && opt.observable ==
                                                           AcceptorObservable::excited_acceptor);
        if (!keep) vx.middleRows(blk * n, n).setZero();
    }
    const ComplexMatrix mx = vx.adjoint() * vx;  // V†XV for a projector X
    const ComplexMatrix mi = v.adjoint() * v;

    const double mu = lam.imag().maxCoeff();
    const Index pairs = dim * (dim + 1) / 2;
    Eigen::ArrayXd wr(pairs), wi(pairs), fxr(pairs), fxi(pairs), fir(pairs), fii(pairs);
    Index q = 0;
    for (Index j = 0; j < dim; ++j)
        for (Index k = j; k < dim; ++k, ++q) {
            const double mult = j == k ? 1.0 : 2.0;
            const cplx fx = mult * mx(k, j) * g(j, k);
            const cplx fi = mult * mi(k, j) * g(j, k);
            const cplx w = std::exp(cplx(0.0, -dt) * (lam(j) - std::conj(lam(k))) - 2.0 * mu * dt);
            wr(q) = w.real();
            wi(q) = w.imag();
            fxr(q) = fx.real();
            fxi(q) = fx.imag();
            fir(q) = fi.real();
            fii(q) = fi.imag();
        }
    Eigen::ArrayXd zr = Eigen::ArrayXd::Ones(pairs), zi = Eigen::ArrayXd::Zero(pairs), tr(pairs);
    out.p_acceptor.resize(static_cast<std::size_t>(steps) + 1);
    for (long s = 0; s <= steps; ++s) {
        const double ax = (fxr * zr - fxi * zi).sum();
        const double ai = (fir * zr - fii * zi).sum();
        if (!(ai > 0.0) || !std::isfinite(ax)) {
            out.p_acceptor.clear();
            return out;
        }
        out.p_acceptor[static_cast<std::size_t>(s)] = ax / ai;
        tr = zr * wr - zi * wi;
        zi = zr * wi + zi * wr;
        zr = tr;
    }
    out.accepted = true;
    return out;
}

// ---------------------------------------------------------------------------
// Observables on a trajectory

/// Linear interpolation of a recorded series at time t.
inline double value_at(const std::vector<double>& times, const std::vector<double>& values,
                       double t) {
    if (times.empty() || t < times.front() - 1e-12 || t > times.back() + 1e-9 * std::max(1.0, t))
        throw DomainError("value_at: t=" + std::to_string(t) + " outside the recorded grid");
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    if (i == 0) return values.front();
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return values[i - 1] + w * (values[i] - values[i - 1]);
}

/// (1/t_f) ∫₀^{t_f} P_a dt by the trapezoidal rule on the recorded grid, with
/// a linearly interpolated last panel when t_f falls between grid points.
inline double averaged_population(const std::vector<double>& times,
                                  const std::vector<double>& values, double t_f) {
    if (times.size() < 2) throw DomainError("averaged_population: need at least two samples");
    const double t0 = times.front();
    if (!(t_f > t0)) throw DomainError("averaged_population: t_f must exceed the start time");
    if (t_f > times.back() + 1e-9 * std::max(1.0, t_f))
        throw DomainError("averaged_population: t_f=" + std::to_string(t_f) +
                          " beyond the recorded grid end " + std::to_string(times.back()));
    double integral = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i - 1] >= t_f) break;
        const double b = std::min(times[i], t_f);
        const double vb = b == times[i] ? values[i] : value_at(times, values, b);
        integral += 0.5 * (values[i - 1] + vb) * (b - times[i - 1]);
    }
    return integral / (t_f - t0);
}

inline double averaged_population(const TrajectoryResult& traj, double t_f) {
    return averaged_population(traj.times, traj.p_acceptor, t_f);
}

struct Peak {
    double time = 0.0;
    double value = 0.0;
    std::size_t index = 0;
};

/// Maximum of the first excursion above `fraction` of the global maximum.
/// Skips fast low-amplitude oscillations that precede the main rise.
inline Peak first_major_peak(const std::vector<double>& times, const std::vector<double>& values,
                             double fraction = 0.5) {
    if (values.empty() || values.size() != times.size())
        throw DomainError("first_major_peak: empty or mismatched series");
    const double top = *std::max_element(values.begin(), values.end());
    const double level = fraction * top;
    std::size_t i = 0;
    while (i < values.size() && values[i] < level) ++i;
    Peak p{times[i], values[i], i};
    for (; i < values.size() && values[i] >= level; ++i)
        if (values[i] > p.value) p = {times[i], values[i], i};
    return p;
}

}  // namespace vaet
