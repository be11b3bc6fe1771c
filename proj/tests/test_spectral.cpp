#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "reference_data.hpp"
#include "vaet/spectral.hpp"

using namespace vaet;

namespace {

// Greedy multiset distance: every closed-form value matched to a distinct
// numerical one.
double multiset_distance(const SortedDimerSpectrum& s, const ComplexVector& v) {
    std::vector<cplx> pool(v.data(), v.data() + v.size());
    double worst = 0.0;
    for (const auto& l : s.lambda) {
        auto it = std::min_element(pool.begin(), pool.end(),
                                   [&](cplx a, cplx b) { return std::abs(a - l) < std::abs(b - l); });
        worst = std::max(worst, std::abs(*it - l));
        pool.erase(it);
    }
    return worst;
}

// Brute-force oracle for γ*: minimum of the smallest eigenvalue gap on a fine scan.
double scanned_gap_minimum(DimerParams p, double lo, double hi) {
    double best_g = lo, best = 1e300;
    for (int pass = 0; pass < 4; ++pass) {
        const double step = (hi - lo) / 400;
        for (int i = 0; i <= 400; ++i) {
            p.gamma = lo + i * step;
            const auto v = eig_general_uncertified(dimer_hamiltonian(p)).values;
            double gap = 1e300;
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b) gap = std::min(gap, std::abs(v(a) - v(b)));
            if (gap < best) best = gap, best_g = p.gamma;
        }
        lo = best_g - 2 * step;
        hi = best_g + 2 * step;
    }
    return best_g;
}

}  // namespace

TEST(ClosedForm, ReferenceEigenvaluesMatchedLabelForLabel) {
    for (const auto& row : testdata::kEigenTable) {
        const DimerParams p{1.0, row.gamma, 1.0, 8.0};
        const auto cf = dimer_spectrum_closed_form(p);
        const auto num = dimer_spectrum_numeric(p);
        for (int j = 1; j <= 4; ++j) {
            const cplx ref = row.lambda[static_cast<std::size_t>(j - 1)];
            EXPECT_NEAR(cf(j).real(), ref.real(), 1e-3) << "gamma " << row.gamma << " j " << j;
            EXPECT_NEAR(cf(j).imag(), ref.imag(), 1e-3) << "gamma " << row.gamma << " j " << j;
            EXPECT_NEAR(num.values(j).real(), ref.real(), 1e-3);
            EXPECT_NEAR(num.values(j).imag(), ref.imag(), 1e-3);
        }
    }
}

TEST(ClosedForm, BareTunneling) {
    const auto s = dimer_spectrum_closed_form({1.0, 0.0, 0.0, 0.0});
    EXPECT_NEAR(std::abs(s(1) + 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(2) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(3) + 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(4) - 1.0), 0.0, 1e-15);
}

TEST(ClosedForm, PairingSymmetry) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const auto s = dimer_spectrum_closed_form({1.0, u(rng), u(rng), 5 * u(rng)});
        EXPECT_LE(std::abs(s(1) + s(2)), 1e-10);
        EXPECT_LE(std::abs(s(3) + s(4)), 1e-10);
    }
}

TEST(ClosedForm, MatchesNumericOverRandomDraws) {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> g(0.0, 2.0), a(0.0, 2.0), d(0.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const DimerParams p{1.0, g(rng), a(rng), d(rng)};
        const auto es = eig_general_uncertified(dimer_hamiltonian(p));
        EXPECT_LE(multiset_distance(dimer_spectrum_closed_form(p), es.values), 1e-8)
            << "gamma " << p.gamma << " alpha " << p.alpha << " delta " << p.delta;
    }
}

TEST(ClosedForm, UnbrokenRealAndBrokenImaginaryTransition) {
    const double gs = gamma_star_closed_form({});
    for (double g : {0.0, 0.5, 0.9, 1.0, gs - 1e-4}) {
        const auto s = dimer_spectrum_closed_form({1.0, g, 1.0, 8.0});
        EXPECT_LT(s.max_abs_imag(), 1e-10) << g;
    }
    for (double g : {1.02, 1.04, 1.06, 1.08}) {
        const cplx l13 = dimer_spectrum_closed_form({1.0, g, 1.0, 8.0}).transition(1, 3);
        EXPECT_LT(std::abs(l13.real()), 1e-10) << g;
        EXPECT_GT(std::abs(l13.imag()), 0.0);
    }
    const cplx l13 = dimer_spectrum_closed_form({1.0, 1.02, 1.0, 8.0}).transition(1, 3);
    EXPECT_NEAR(std::abs(l13.imag()), 0.312, 1e-3);
}

TEST(DonorEigensystem, Examples) {
    auto es = donor_eigensystem(1.0, 0.0);
    EXPECT_NEAR(std::abs(es.values(0) + 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(es.vectors(0, 0) + es.vectors(1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(es.vectors(0, 1) - es.vectors(1, 1)), 0.0, 1e-15);

    es = donor_eigensystem(1.0, 1.0);
    for (int j = 0; j < 2; ++j) {
        const cplx ratio = es.vectors(0, j) / es.vectors(1, j);
        EXPECT_NEAR(std::abs(ratio - cplx(0.0, -1.0)), 0.0, 1e-12);
    }

    es = donor_eigensystem(1.0, 0.6);
    EXPECT_NEAR(es.values(0).real(), -0.8, 1e-15);
    EXPECT_NEAR(es.values(1).real(), 0.8, 1e-15);
    for (int j = 0; j < 2; ++j) {
        EXPECT_NEAR(es.vectors.col(j).norm(), 1.0, 1e-14);
        EXPECT_LE(es.residuals(j), 1e-14);
    }
}

TEST(FindEP, DefaultParameters) {
    const auto r = find_ep({});
    EXPECT_NEAR(r.gamma_star, 1.00778, 1e-5);
    EXPECT_EQ(r.order_n, 2);
    EXPECT_EQ(r.degeneracy_s, 2);
    EXPECT_EQ(r.transition_count, 4);
    EXPECT_TRUE(r.accepted);
    EXPECT_LE(r.eigvec_min_angle, kEigvecAngleTolerance);
    ASSERT_EQ(r.coalesced_groups.size(), 2u);
    EXPECT_EQ(r.coalesced_groups[0], (std::vector<int>{1, 3}));
    EXPECT_EQ(r.coalesced_groups[1], (std::vector<int>{2, 4}));
}

TEST(FindEP, GapCertificateOnTwoDisjointPairs) {
    const auto r = find_ep({});
    DimerParams p;
    p.gamma = r.gamma_star;
    const auto s = dimer_spectrum_numeric(p);
    const double tol = kEPGapTolerance * s.matrix_norm;
    EXPECT_LT(std::abs(s.values(1) - s.values(3)), tol);
    EXPECT_LT(std::abs(s.values(2) - s.values(4)), tol);
    EXPECT_GT(std::abs(s.values(1) - s.values(2)), 1.0);
}

TEST(FindEP, MonomerLimitAndLargerCoupling) {
    EXPECT_NEAR(find_ep({1.0, 0.0, 0.0, 8.0}).gamma_star, 1.0, 1e-10);
    const double expected = std::sqrt(1.0 + 4.0 / 64.0);
    const auto r = find_ep({1.0, 0.0, 2.0, 8.0});
    EXPECT_NEAR(r.gamma_star, expected, 1e-10);
    EXPECT_NEAR(r.gamma_star, 1.03078, 1e-5);
    EXPECT_NEAR(scanned_gap_minimum({1.0, 0.0, 2.0, 8.0}, 0.9, 1.2), expected, 1e-4);
}

TEST(FindEP, RequiresPositiveDelta) {
    EXPECT_THROW(find_ep({1.0, 0.0, 1.0, 0.0}), DomainError);
}

TEST(ExceptionalLine, EndpointsAndMonotonicity) {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
    const auto line = trace_exceptional_line(8.0, grid);
    ASSERT_EQ(line.samples.size(), grid.size());
    EXPECT_NEAR(line.samples.front().gamma_star, 1.0, 1e-10);
    EXPECT_NEAR(line.samples.back().gamma_star, 1.00778, 1e-5);
    for (std::size_t i = 1; i < line.samples.size(); ++i)
        EXPECT_GT(line.samples[i].gamma_star, line.samples[i - 1].gamma_star);
    for (const auto& s : line.samples) EXPECT_LT(std::abs(s.gamma_star - 1.0), 0.01);
}

TEST(ExceptionalLine, SmallerDelta) {
    const auto line = trace_exceptional_line(2.0, {1.0});
    EXPECT_NEAR(line.samples[0].gamma_star, std::sqrt(1.25), 1e-10);
}

TEST(ExceptionalLine, ErrorPaths) {
    EXPECT_THROW(trace_exceptional_line(0.0, {0.0, 1.0}), DomainError);
    EXPECT_THROW(trace_exceptional_line(8.0, {0.5, 0.2}), DomainError);
}

TEST(DeltaZero, FourthOrderAtAlphaZero) {
    const auto reports = classify_delta_zero(1.0, 0.0);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].order_n, 4);
    EXPECT_NEAR(reports[0].gamma_star, 1.0, 1e-15);
    EXPECT_EQ(reports[0].transition_count, 0);
    const auto es = eig_general_uncertified(dimer_hamiltonian({1.0, 1.0, 0.0, 0.0}));
    for (Index j = 0; j < 4; ++j) EXPECT_LT(std::abs(es.values(j)), 1e-6);
}

TEST(DeltaZero, SecondOrderPairs) {
    auto reports = classify_delta_zero(1.0, 1.0);
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_NEAR(reports[0].gamma_star, 0.0, 1e-15);
    EXPECT_FALSE(reports[0].accepted);
    EXPECT_NEAR(reports[1].gamma_star, 2.0, 1e-15);
    EXPECT_TRUE(reports[1].accepted);

    reports = classify_delta_zero(1.0, 0.5);
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_NEAR(reports[0].gamma_star, 0.5, 1e-15);
    EXPECT_NEAR(reports[1].gamma_star, 1.5, 1e-15);
    for (const auto& r : reports) {
        EXPECT_EQ(r.order_n, 2);
        EXPECT_EQ(r.transition_count, 2);
        EXPECT_TRUE(r.accepted);
    }
}

TEST(Coalescence, HermitianVectorsAreOrthogonal) {
    const auto c = eigvec_coalescence({});
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
            if (j != k) EXPECT_GT(c.angles(j, k), 0.1);
        }
}

TEST(Coalescence, PairsCoalesceAtEP) {
    DimerParams p;
    p.gamma = find_ep(p).gamma_star;
    const auto c = eigvec_coalescence(p);
    EXPECT_LT(c.angles(0, 2), 1e-3);
    EXPECT_LT(c.angles(1, 3), 1e-3);
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(c.projections(k, 0), c.projections(k, 2), 1e-3);
        EXPECT_NEAR(c.projections(k, 1), c.projections(k, 3), 1e-3);
    }
}

TEST(TransitionElements, HermitianSelectionRules) {
    const auto t = transition_matrix_elements({});
    EXPECT_LT(t(4, 1), 1e-10);
    EXPECT_LT(t(3, 2), 1e-10);
    EXPECT_GT(t(2, 1), 0.05);
    EXPECT_NEAR(t(2, 1), t(4, 3), 1e-10);
}

// At α -> 0 the eigenstates factorize into donor σ_x states times acceptor
// levels: ψ₁ = |+x,g>, ψ₂ = |-x,e>, ψ₃ = |-x,g>, ψ₄ = |+x,e>. σ_z^(d) flips the
// donor and keeps the acceptor, so only (31) and (42) survive, with value 1.
TEST(TransitionElements, DecoupledLimit) {
    const auto t = transition_matrix_elements({1.0, 0.0, 1e-6, 8.0});
    EXPECT_NEAR(t(2, 1), 0.0, 1e-6);
    EXPECT_NEAR(t(4, 3), 0.0, 1e-6);
    EXPECT_NEAR(t(3, 1), 1.0, 1e-6);
    EXPECT_NEAR(t(4, 2), 1.0, 1e-6);
}

TEST(TransitionElements, HermitianValueAtDefaults) {
    const auto t = transition_matrix_elements({});
    EXPECT_NEAR(t(2, 1), 1.0 / std::sqrt(65.0), 1e-3);
}

TEST(TransitionElements, EqualizeNearEP) {
    DimerParams p;
    p.gamma = gamma_star_closed_form(p) - 1e-4;
    const auto t = transition_matrix_elements(p);
    const double vals[] = {t(2, 1), t(4, 3), t(4, 1), t(3, 2)};
    const double hi = *std::max_element(std::begin(vals), std::end(vals));
    const double lo = *std::min_element(std::begin(vals), std::end(vals));
    EXPECT_LT((hi - lo) / hi, 0.01);
}

TEST(TransitionElements, StableBelowEP) {
    const auto t0 = transition_matrix_elements({});
    for (double g = 0.05; g <= 0.95 + 1e-12; g += 0.05) {
        const auto t = transition_matrix_elements({1.0, g, 1.0, 8.0});
        EXPECT_LT(std::abs(t(2, 1) - t0(2, 1)) / t0(2, 1), 0.02) << g;
        EXPECT_LT(std::abs(t(4, 3) - t0(4, 3)) / t0(4, 3), 0.02) << g;
    }
}

TEST(TransitionElements, EPGuard) {
    DimerParams p;
    p.gamma = 1.02;
    EXPECT_THROW(transition_matrix_elements(p), PhaseDomainError);
    const auto t = transition_matrix_elements(p, {1e-5, true});
    EXPECT_FALSE(t.warnings.empty());
}

TEST(TransitionCount, Formula) {
    EXPECT_EQ(simultaneous_transition_count(2, 2, 4), 4);
    EXPECT_EQ(simultaneous_transition_count(1, 4, 4), 0);
    EXPECT_EQ(simultaneous_transition_count(1, 3, 4), 3);
    EXPECT_EQ(simultaneous_transition_count(3, 2, 8), 12);
    EXPECT_THROW(simultaneous_transition_count(3, 2, 4), DomainError);
}

TEST(SlowPeriod, Examples) {
    const double t08 = slow_period({1.0, 0.8, 1.0, 8.0});
    EXPECT_NEAR(2 * std::numbers::pi / t08, 1.217, 1e-3);
    EXPECT_NEAR(t08, 5.16, 0.01);
    EXPECT_NEAR(slow_period({1.0, 0.0, 1.0, 8.0}), std::numbers::pi, 1e-12);
    const double gs = gamma_star_closed_form({});
    EXPECT_GT(slow_period({1.0, gs - 4e-4, 1.0, 8.0}), 100.0);
    EXPECT_THROW(slow_period({1.0, 1.02, 1.0, 8.0}), PhaseDomainError);
}
