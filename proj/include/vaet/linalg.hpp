#pragma once

// Dense complex linear algebra used throughout: Kronecker products, the
// general (non-Hermitian) eigenproblem with residual certification, and the
// matrix exponential.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <string_view>

#include "vaet/errors.hpp"

#if defined(VAET_HAVE_LAPACKE)
#include <lapacke.h>
#endif

namespace vaet {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Index kMaxDimension = 1024;

namespace detail {

inline std::string dims(const ComplexMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

/// Short identifier for a matrix: shape, Frobenius norm and an FNV-1a hash of
/// the raw entries. Attached to decomposition errors so a failing input can
/// be recognised across runs.
inline std::string fingerprint(const ComplexMatrix& m) {
    std::uint64_t hash = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(cplx);
    for (std::size_t i = 0; i < n; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ull;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s fro=%.6e fnv=%016llx", detail::dims(m).c_str(), m.norm(),
                  static_cast<unsigned long long>(hash));
    return buf;
}

inline void require_square(const ComplexMatrix& m, std::string_view what) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw ShapeError(std::string(what) + ": expected a non-empty square matrix, got " +
                         detail::dims(m));
}

inline void require_finite(const ComplexMatrix& m, std::string_view what) {
    if (!m.allFinite()) throw DomainError(std::string(what) + ": matrix has non-finite entries");
}

/// Largest singular value.
inline double spectral_norm(const ComplexMatrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::BDCSVD<ComplexMatrix> svd(m);
    return svd.singularValues()(0);
}

inline bool is_hermitian(const ComplexMatrix& m, double tol) {
    return m.rows() == m.cols() && (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Kronecker product a ⊗ b. The product dimension is capped at max_dim per
/// side.
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          Index max_dim = kMaxDimension) {
    require_finite(a, "kron");
    require_finite(b, "kron");
    const Index rows = a.rows() * b.rows();
    const Index cols = a.cols() * b.cols();
    if (rows > max_dim || cols > max_dim)
        throw SizingError("kron: product dimension " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " exceeds maximum " + std::to_string(max_dim));
    ComplexMatrix out(rows, cols);
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

struct EigenSystem {
    ComplexVector values;
    ComplexMatrix vectors;      // columns, unit 2-norm
    Eigen::VectorXd residuals;  // ‖H v − λ v‖₂ per pair
    double matrix_norm = 0.0;   // ‖H‖₂

    [[nodiscard]] Index size() const { return values.size(); }
    [[nodiscard]] double max_residual() const {
        return residuals.size() ? residuals.maxCoeff() : 0.0;
    }
};

inline constexpr double kResidualTolerance = 1e-9;

namespace detail {

/// Eigenvalues and right eigenvectors, via LAPACK zgeev when available and
/// Eigen's complex QR otherwise.
inline bool raw_eig(const ComplexMatrix& h, ComplexVector& values, ComplexMatrix& vectors) {
    const Index n = h.rows();
#if defined(VAET_HAVE_LAPACKE)
    ComplexMatrix a = h;
    values.resize(n);
    vectors.resize(n, n);
    const lapack_int ln = static_cast<lapack_int>(n);
    const lapack_int info = LAPACKE_zgeev(
        LAPACK_COL_MAJOR, 'N', 'V', ln, reinterpret_cast<lapack_complex_double*>(a.data()), ln,
        reinterpret_cast<lapack_complex_double*>(values.data()), nullptr, ln,
        reinterpret_cast<lapack_complex_double*>(vectors.data()), ln);
    return info == 0;
#else
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(h, true);
    if (solver.info() != Eigen::Success) return false;
    values = solver.eigenvalues();
    vectors = solver.eigenvectors();
    (void)n;
    return true;
#endif
}

}  // namespace detail

/// Right eigensystem of a general complex matrix with residuals filled in but
/// not checked. No ordering is imposed.
inline EigenSystem eig_general_uncertified(const ComplexMatrix& h) {
    require_square(h, "eig_general");
    require_finite(h, "eig_general");
    EigenSystem out;
    if (!detail::raw_eig(h, out.values, out.vectors))
        throw DecompositionError("eig_general: QR iteration did not converge", fingerprint(h));
    out.matrix_norm = spectral_norm(h);
    out.residuals.resize(out.values.size());
    for (Index j = 0; j < out.values.size(); ++j) {
        const double n = out.vectors.col(j).norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw DecompositionError("eig_general: degenerate eigenvector", fingerprint(h));
        out.vectors.col(j) /= n;
        out.residuals(j) = (h * out.vectors.col(j) - out.values(j) * out.vectors.col(j)).norm();
    }
    return out;
}

inline bool residuals_certified(const EigenSystem& es) {
    return es.max_residual() <= kResidualTolerance * es.matrix_norm;
}

/// Residual-certified right eigensystem: every pair satisfies
/// ‖Hv - λv‖₂ <= 1e-9 ‖H‖₂.
inline EigenSystem eig_general(const ComplexMatrix& h) {
    EigenSystem out = eig_general_uncertified(h);
    if (!residuals_certified(out)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "eig_general: residual %.3e above bound %.3e",
                      out.max_residual(), kResidualTolerance * out.matrix_norm);
        throw DecompositionError(buf, fingerprint(h));
    }
    return out;
}

namespace detail {

// Padé coefficients for degrees 3, 5, 7, 9, 13 and the 1-norm thresholds
// below which each degree meets unit-roundoff backward error in double.
inline constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                                 25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9 = {
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
    2162160.0,     110880.0,     3960.0,       90.0,        1.0};
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

inline constexpr double kTheta3 = 1.495585217958292e-2;
inline constexpr double kTheta5 = 2.539398330063230e-1;
inline constexpr double kTheta7 = 9.504178996162932e-1;
inline constexpr double kTheta9 = 2.097847961257068e0;
inline constexpr double kTheta13 = 5.371920351148152e0;

inline double norm1(const ComplexMatrix& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

template <std::size_t N>
void pade_low(const ComplexMatrix& a, const std::array<double, N>& b, ComplexMatrix& u,
              ComplexMatrix& v) {
    // Odd terms go to U (times A), even terms to V.
    const Index n = a.rows();
    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    const ComplexMatrix a2 = a * a;
    ComplexMatrix power = id;
    ComplexMatrix uo = b[1] * id;
    v = b[0] * id;
    for (std::size_t k = 2; k < N; k += 2) {
        power = power * a2;
        v += b[k] * power;
        if (k + 1 < N) uo += b[k + 1] * power;
    }
    u = a * uo;
}

inline void pade13(const ComplexMatrix& a, ComplexMatrix& u, ComplexMatrix& v) {
    const auto& b = kPade13;
    const Index n = a.rows();
    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix a4 = a2 * a2;
    const ComplexMatrix a6 = a4 * a2;
    ComplexMatrix inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    ComplexMatrix tmp = a6 * inner;
    tmp += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    u = a * tmp;
    inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    v = a6 * inner;
    v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (degree 3..13 chosen from the 1-norm). Works on defective
/// matrices, where exponentiating through an eigenbasis breaks down.
inline ComplexMatrix expm(const ComplexMatrix& a) {
    require_square(a, "expm");
    require_finite(a, "expm");
    const double nrm = detail::norm1(a);
    ComplexMatrix u, v;
    int squarings = 0;
    if (nrm <= detail::kTheta3) {
        detail::pade_low(a, detail::kPade3, u, v);
    } else if (nrm <= detail::kTheta5) {
        detail::pade_low(a, detail::kPade5, u, v);
    } else if (nrm <= detail::kTheta7) {
        detail::pade_low(a, detail::kPade7, u, v);
    } else if (nrm <= detail::kTheta9) {
        detail::pade_low(a, detail::kPade9, u, v);
    } else {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / detail::kTheta13))));
        const ComplexMatrix scaled = a / std::ldexp(1.0, squarings);
        detail::pade13(scaled, u, v);
    }
    const ComplexMatrix q = v - u;
    ComplexMatrix r = Eigen::PartialPivLU<ComplexMatrix>(q).solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    if (!r.allFinite()) throw NumericError("expm: result overflowed for " + fingerprint(a));
    return r;
}

}  // namespace vaet
