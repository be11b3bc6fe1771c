#include <gtest/gtest.h>

#include <cmath>

#include "vaet/dynamics.hpp"
#include "vaet/spectral.hpp"

using namespace vaet;

namespace {

DensityMatrix pure_dimer_state(Index d, int n) {
    DensityMatrix rho;
    rho.fock_dim = n;
    rho.matrix = ComplexMatrix::Zero(4 * n, 4 * n);
    rho.matrix(d * n, d * n) = 1.0;
    return rho;
}

double truncated_mean_occupation(double nu, double kbt, int n) {
    double z = 0.0, m = 0.0;
    for (int k = 0; k < n; ++k) {
        const double w = std::exp(-k * nu / kbt);
        z += w;
        m += k * w;
    }
    return m / z;
}

TrajectoryResult run(const DimerParams& p, const VibrationParams& v, double t_end, double dt,
                     EvolutionOptions opt = {}) {
    return evolve_nonunitary(full_hamiltonian(p, v).matrix, initial_state(v), uniform_grid(t_end, dt),
                             opt);
}

}  // namespace

TEST(ThermalState, GroundStateAtZeroTemperature) {
    const auto rho = thermal_vibration_state({16.12, 0.3, 0.0, 10});
    EXPECT_EQ(rho.matrix(0, 0), cplx(1.0));
    EXPECT_EQ(rho.matrix.cwiseAbs().sum(), 1.0);
}

TEST(ThermalState, MeanOccupation) {
    for (const auto& [nu, expected] : {std::pair{16.12, 2.0}, std::pair{8.06, 4.48}}) {
        const VibrationParams v{nu, 0.3, 40.0, 50};
        const auto rho = thermal_vibration_state(v);
        const ComplexMatrix num = ops::number(50);
        const double mean = (rho.matrix * num).trace().real();
        EXPECT_NEAR(mean, truncated_mean_occupation(nu, 40.0, 50), 1e-12);
        EXPECT_NEAR(mean, expected, 0.02);
        EXPECT_NEAR(rho.matrix.trace().real(), 1.0, 1e-14);
    }
}

TEST(InitialState, DonorExcited) {
    const VibrationParams v;
    const auto rho = initial_state(v);
    EXPECT_NEAR(rho.matrix.trace().real(), 1.0, 1e-14);
    EXPECT_EQ(acceptor_population(rho), 0.0);
    const auto p = dimer_populations(rho.matrix, v.fock_dim);
    EXPECT_NEAR(p[kEG], 1.0, 1e-14);
    const auto inv = check_density(rho.matrix);
    EXPECT_TRUE(inv.ok());
}

TEST(AcceptorPopulation, BasisStates) {
    const auto ge = pure_dimer_state(kGE, 3);
    EXPECT_EQ(acceptor_population(ge), 1.0);
    EXPECT_EQ(acceptor_population(ge, AcceptorObservable::ge_projector), 1.0);
    const auto eg = pure_dimer_state(kEG, 3);
    EXPECT_EQ(acceptor_population(eg), 0.0);
}

TEST(AcceptorPopulation, EqualMixture) {
    DensityMatrix mix;
    mix.fock_dim = 2;
    mix.matrix = ComplexMatrix::Identity(8, 8) / 8.0;
    EXPECT_NEAR(acceptor_population(mix, AcceptorObservable::ge_projector), 0.25, 1e-15);
    // the excited-acceptor observable also counts |ee>
    EXPECT_NEAR(acceptor_population(mix), 0.5, 1e-15);
}

TEST(Evolution, HermitianRabiOscillation) {
    const auto r = run({1.0, 0.0, 1.0, 8.0}, {16.12, 0.0, 40.0, 2}, 3.0, 0.001);
    // fast oscillation at the acceptor-donor detuning, amplitude suppressed by α/Δ
    const double top = *std::max_element(r.p_acceptor.begin(), r.p_acceptor.end());
    EXPECT_LT(top, 0.1);
    std::vector<double> maxima;
    for (std::size_t i = 1; i + 1 < r.size(); ++i)
        if (r.p_acceptor[i] > r.p_acceptor[i - 1] && r.p_acceptor[i] >= r.p_acceptor[i + 1] &&
            r.p_acceptor[i] > 0.5 * top)
            maxima.push_back(r.times[i]);
    ASSERT_GE(maxima.size(), 3u);
    const double period = (maxima.back() - maxima.front()) / static_cast<double>(maxima.size() - 1);
    EXPECT_NEAR(period, 0.39, 0.02);
}

TEST(Evolution, HermitianLimitPreservesRawTrace) {
    const auto r = run({1.0, 0.0, 1.0, 8.0}, {16.12, 0.3, 40.0, 12}, 5.0, 0.005);
    for (double raw : r.raw_trace) EXPECT_NEAR(raw, 1.0, 1e-9);
}

TEST(Evolution, InvariantsOnRecordedStates) {
    for (double gamma : {0.5, 1.00778, 1.05}) {
        EvolutionOptions opt;
        opt.observe_stride = 1;
        DensityInvariants worst;
        int seen = 0;
        opt.observer = [&](double, const ComplexMatrix& rho) {
            const auto d = check_density(rho);
            worst.trace_error = std::max(worst.trace_error, d.trace_error);
            worst.hermiticity_error = std::max(worst.hermiticity_error, d.hermiticity_error);
            worst.min_eigenvalue = std::min(worst.min_eigenvalue, d.min_eigenvalue);
            ++seen;
        };
        const auto r = run({1.0, gamma, 1.0, 8.0}, {16.12, 0.3, 40.0, 10}, 10.0, 0.01, opt);
        EXPECT_EQ(seen, static_cast<int>(r.size()));
        EXPECT_LE(worst.trace_error, 1e-10) << gamma;
        EXPECT_LE(worst.hermiticity_error, 1e-10) << gamma;
        EXPECT_GE(worst.min_eigenvalue, -1e-8) << gamma;
        EXPECT_LE(r.max_population_sum_error(), 1e-9) << gamma;
        for (double p : r.p_acceptor) {
            EXPECT_GE(p, -1e-12);
            EXPECT_LE(p, 1.0 + 1e-12);
        }
    }
}

TEST(Evolution, BrokenPhaseRenormalizationKeepsRange) {
    // raw trace grows every step; per-step renormalization keeps it bounded
    const auto r = run({1.0, 1.5, 1.0, 8.0}, {16.12, 0.0, 40.0, 2}, 400.0, 0.05);
    EXPECT_GT(r.raw_trace.back(), 1.0);
    EXPECT_EQ(r.p_acceptor.size(), r.times.size());
    EXPECT_LE(r.max_population_sum_error(), 1e-9);
}

TEST(Evolution, DtHalvingConvergence) {
    const DimerParams p{1.0, 0.99, 1.0, 8.0};
    const VibrationParams v;
    const auto coarse = run(p, v, 22.5, 0.005);
    const auto fine = run(p, v, 22.5, 0.0025);
    double worst = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i)
        worst = std::max(worst, std::abs(coarse.p_acceptor[i] - fine.p_acceptor[2 * i]));
    EXPECT_LT(worst, 1e-6);
}

TEST(Evolution, FockConvergenceN50VersusN70) {
    const double gs = gamma_star_closed_form({});
    for (double gamma : {0.0, 0.99, 1.0, gs}) {
        const DimerParams p{1.0, gamma, 1.0, 8.0};
        VibrationParams v50, v70;
        v70.fock_dim = 70;
        const long steps = 4500;
        const auto a = acceptor_series_spectral(full_hamiltonian(p, v50).matrix, thermal_weights(v50),
                                                steps, 0.005);
        const auto b = acceptor_series_spectral(full_hamiltonian(p, v70).matrix, thermal_weights(v70),
                                                steps, 0.005);
        ASSERT_TRUE(a.accepted && b.accepted) << gamma;
        EXPECT_LT(std::abs(a.p_acceptor.back() - b.p_acceptor.back()), 1e-4) << gamma;
    }
}

TEST(Evolution, BrokenPhaseSteadyStateGrowsWithGamma) {
    double previous = -1.0;
    for (double gamma : {1.02, 1.04, 1.06, 1.08}) {
        const auto r = run({1.0, gamma, 1.0, 8.0}, {16.12, 0.0, 40.0, 2}, 300.0, 0.01);
        // late-time window: constant plus fast oscillation
        std::vector<double> t(r.times.begin() + 20000, r.times.end());
        std::vector<double> pa(r.p_acceptor.begin() + 20000, r.p_acceptor.end());
        std::vector<double> shifted(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) shifted[i] = t[i] - t.front();
        const double mean = averaged_population(shifted, pa, shifted.back());
        const double first_half = averaged_population(shifted, pa, 0.5 * shifted.back());
        const auto [lo, hi] = std::minmax_element(pa.begin(), pa.end());
        EXPECT_LT(*hi - *lo, 0.5 * mean) << gamma;
        EXPECT_NEAR(first_half, mean, 0.01 * mean) << gamma;
        EXPECT_GT(mean, previous) << gamma;
        previous = mean;
    }
}

TEST(Evolution, ErrorPaths) {
    const VibrationParams v{16.12, 0.3, 40.0, 4};
    const auto h = full_hamiltonian({}, v).matrix;
    const auto rho = initial_state(v);
    EXPECT_THROW(evolve_nonunitary(h, rho, {0.0}), DomainError);
    EXPECT_THROW(evolve_nonunitary(h, rho, {0.0, 0.1, 0.3}), DomainError);
    EXPECT_THROW(evolve_nonunitary(h, initial_state({16.12, 0.3, 40.0, 5}), {0.0, 0.1}), ShapeError);
    EXPECT_THROW(uniform_grid(1.0, 0.0), DomainError);
}

TEST(Evolution, TruncationMonitor) {
    // small ν at high temperature populates the top Fock level
    const auto r = run({}, {1.0, 0.3, 40.0, 10}, 0.1, 0.01);
    EXPECT_TRUE(r.truncation_flagged());
    EXPECT_FALSE(r.warnings.empty());
    const auto ok = run({}, {16.12, 0.3, 40.0, 50}, 0.1, 0.01);
    EXPECT_FALSE(ok.truncation_flagged());
}

TEST(Observables, AveragedPopulation) {
    std::vector<double> t, c, s;
    const double dt = 0.01;
    for (int k = 0; k <= 1000; ++k) {
        t.push_back(k * dt);
        c.push_back(0.3);
        s.push_back(0.5 + 0.25 * std::sin(2 * std::numbers::pi * k * dt));
    }
    EXPECT_NEAR(averaged_population(t, c, 10.0), 0.3, 1e-13);
    EXPECT_NEAR(averaged_population(t, s, 10.0), 0.5, dt * dt);
    EXPECT_NEAR(averaged_population(t, c, 5.005), 0.3, 1e-14);
    EXPECT_THROW(averaged_population(t, c, 10.5), DomainError);
    EXPECT_THROW(value_at(t, c, -1.0), DomainError);
    EXPECT_NEAR(value_at(t, s, 0.005), 0.5 * (s[0] + s[1]), 1e-15);
}

TEST(Observables, FirstMajorPeak) {
    std::vector<double> t, v;
    for (int k = 0; k <= 400; ++k) {
        t.push_back(0.1 * k);
        const double x = 0.1 * k;
        v.push_back(0.05 * std::abs(std::sin(20 * x)) + std::exp(-(x - 10) * (x - 10)) +
                    0.8 * std::exp(-(x - 30) * (x - 30)));
    }
    const auto p = first_major_peak(t, v);
    EXPECT_NEAR(p.time, 10.0, 0.11);
}

TEST(SpectralKernel, MatchesPropagator) {
    for (double gamma : {0.0, 0.7, 1.00778, 1.03}) {
        const DimerParams p{1.0, gamma, 1.0, 8.0};
        const VibrationParams v;
        const auto h = full_hamiltonian(p, v).matrix;
        const auto series = acceptor_series_spectral(h, thermal_weights(v), 4500, 0.005);
        ASSERT_TRUE(series.accepted) << gamma;
        const auto ref = evolve_nonunitary(h, initial_state(v), uniform_grid(22.5, 0.005));
        ASSERT_EQ(series.p_acceptor.size(), ref.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i)
            worst = std::max(worst, std::abs(series.p_acceptor[i] - ref.p_acceptor[i]));
        EXPECT_LT(worst, 1e-8) << gamma;
    }
}

TEST(Lindblad, ReducesToNonunitaryWithoutDecay) {
    const DimerParams p{1.0, 1.0, 1.0, 8.0};
    const VibrationParams v{16.12, 0.3, 40.0, 12};
    const auto h = full_hamiltonian(p, v).matrix;
    const auto grid = uniform_grid(6.0, 0.005);
    const auto a = evolve_nonunitary(h, initial_state(v), grid);
    const auto b = evolve_lindblad(h, {0.0}, initial_state(v), grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.p_acceptor[i] - b.p_acceptor[i]));
    EXPECT_LT(worst, 1e-6);
    EXPECT_LE(b.max_population_sum_error(), 1e-9);
}

TEST(Lindblad, IsolatedAcceptorDecays) {
    const int n = 2;
    const ComplexMatrix h = ComplexMatrix::Zero(4 * n, 4 * n);
    const double gamma_a = 0.3;
    const auto r = evolve_lindblad(h, {gamma_a}, pure_dimer_state(kGE, n), uniform_grid(5.0, 0.01));
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_NEAR(r.p_acceptor[i], std::exp(-gamma_a * r.times[i]), 1e-8);
        EXPECT_NEAR(r.p_gg[i], 1.0 - std::exp(-gamma_a * r.times[i]), 1e-8);
    }
}

TEST(Lindblad, InvariantsUnderDecay) {
    const VibrationParams v{16.12, 0.3, 40.0, 8};
    const auto h = full_hamiltonian({1.0, 0.9, 1.0, 8.0}, v).matrix;
    LindbladOptions lo;
    lo.evolution.observe_stride = 20;
    double worst_trace = 0.0, worst_herm = 0.0, worst_min = 0.0;
    lo.evolution.observer = [&](double, const ComplexMatrix& rho) {
        const auto d = check_density(rho);
        worst_trace = std::max(worst_trace, d.trace_error);
        worst_herm = std::max(worst_herm, d.hermiticity_error);
        worst_min = std::min(worst_min, d.min_eigenvalue);
    };
    const auto r = evolve_lindblad(h, {0.05}, initial_state(v), uniform_grid(4.0, 0.005), lo);
    EXPECT_LE(worst_trace, 1e-10);
    EXPECT_LE(worst_herm, 1e-10);
    EXPECT_GE(worst_min, -1e-8);
    EXPECT_LE(r.max_population_sum_error(), 1e-9);
}

TEST(Lindblad, InstabilityIsReported) {
    const VibrationParams v{16.12, 0.3, 40.0, 10};
    const auto h = full_hamiltonian({}, v).matrix;
    LindbladOptions lo;
    lo.substeps = 1;
    lo.max_refinements = 0;
    EXPECT_THROW(evolve_lindblad(h, {0.01}, initial_state(v), uniform_grid(20.0, 0.5), lo),
                 IntegrationError);
}

TEST(Lindblad, RejectsNegativeRate) {
    const VibrationParams v{16.12, 0.3, 40.0, 4};
    EXPECT_THROW(evolve_lindblad(full_hamiltonian({}, v).matrix, {-0.1}, initial_state(v),
                                 uniform_grid(1.0, 0.01)),
                 ValidationError);
}
