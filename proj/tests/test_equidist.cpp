// Observables, Birkhoff averages, Weyl sums, discrepancy, and decay fits.
//
// The oracles here are independent of the code under test: geometric series
// closed forms for character averages, a split-coefficient direct summation
// for the difference-table Weyl kernel, hand-computable discrepancy
// configurations, synthetic power laws for the fitter, and the Heisenberg
// return map's hand-derived quadratic phase for the section observables.

#include "nilflow/equidist.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace nilflow {
namespace {

const double kGolden = 0.61803398874989485;  // (√5 − 1)/2

FlowSpec<double> heisenberg_flow(const GradedNilAlgebra& alg, double a1, double a2 = 0.0) {
    return make_flow(alg, std::vector<double>{a1, a2});
}

// ---------------------------------------------------------------------------
// Observable construction and pointwise values.

TEST(Observables, FactoriesValidateShapes) {
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    EXPECT_THROW(toral_character(alg, {1}), std::invalid_argument);
    EXPECT_NO_THROW(toral_character(alg, {1, -2}));
    EXPECT_THROW(return_phase(alg, {1}), std::invalid_argument);
    EXPECT_NO_THROW(return_phase(alg, {1, 0}));
    EXPECT_THROW(periodized_bump(lat, {0.5, 0.5}, {0.1, 0.1}), std::invalid_argument);
    EXPECT_THROW(periodized_bump(lat, {0.5, 0.5, 0.5}, {0.1, -0.1, 0.1}), std::invalid_argument);
    // support touching the cell boundary demands an explicit truncation radius
    EXPECT_THROW(periodized_bump(lat, {0.1, 0.5, 0.5}, {0.2, 0.2, 0.2}), std::invalid_argument);
    EXPECT_NO_THROW(periodized_bump(lat, {0.1, 0.5, 0.5}, {0.2, 0.2, 0.2}, 1));
    // section phases have no pointwise value on the manifold
    Observable rp = return_phase(alg, {1, 0});
    EXPECT_THROW(observable_value(lat, rp, group_identity<double>(alg)),
                 std::invalid_argument);
}

TEST(Observables, CharacterIsInvariantUnderLatticeTranslation) {
    GradedNilAlgebra alg = algebra_by_name("triangular:3");
    Lattice lat = make_lattice(alg);
    Observable chi = toral_character(alg, {2, -1, 3});
    std::mt19937_64 rng(20260823);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> c(static_cast<std::size_t>(alg.dim()));
        for (double& v : c) v = U(rng);
        GroupElement<double> g = group_from_second_kind(alg, c);
        std::vector<Int> word{Int(1), Int(-2), Int(0), Int(3), Int(1), Int(-1)};
        GroupElement<double> h = multiply(lattice_element<double>(lat, word), g);
        std::complex<double> a =
            observable_value(lat, chi, reduce_mod_lattice(lat, g).point);
        std::complex<double> b =
            observable_value(lat, chi, reduce_mod_lattice(lat, h).point);
        EXPECT_NEAR(std::abs(a - b), 0.0, 1e-9);
    }
}

TEST(Observables, BumpMeanIsTheProfileIntegralProduct) {
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    Observable f = periodized_bump(lat, {0.5, 0.5, 0.5}, {0.3, 0.25, 0.2});
    EXPECT_TRUE(f.interior);
    double i1 = detail::bump_profile_integral();
    EXPECT_NEAR(f.mean_value, 0.3 * 0.25 * 0.2 * i1 * i1 * i1, 1e-15);

    // certify the 1-D quadrature against an independent midpoint rule
    const int n = 1 << 20;
    const double h = 2.0 / n;
    double mid = 0.0;
    for (int i = 0; i < n; ++i) mid += detail::bump_profile(-1.0 + (i + 0.5) * h);
    mid *= h;
    EXPECT_NEAR(i1, mid, 1e-10);
}

TEST(Observables, WrappedBumpPicksUpTheTranslateExactly) {
    // Support [0.7, 1.1) × [0.1, 0.9)² wraps through the face x₁ = 1.  At the
    // point (0.05, 0.5, 0.5) the only contributing lattice translate is
    // exp(X1)·g, whose first coordinate is exactly 1.05 (left multiplication
    // by the leading factor only shifts the leading slot), so the value must
    // be ψ(0.75)·ψ(0)·ψ(0) on the nose.
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    Observable f = periodized_bump(lat, {0.9, 0.5, 0.5}, {0.2, 0.4, 0.4}, 1,
                                   /*zero_mean=*/false);
    EXPECT_FALSE(f.interior);
    GroupElement<double> g =
        group_from_second_kind(alg, std::vector<double>{0.05, 0.5, 0.5});
    std::complex<double> v = observable_value(lat, f, g);
    EXPECT_NEAR(v.real(), detail::bump_profile(0.75), 1e-12);
    EXPECT_EQ(v.imag(), 0.0);
}

// ---------------------------------------------------------------------------
// Compiled stepping.

TEST(FastFlow, MatchesTheGenericGroupLawStepByStep) {
    for (const char* name : {"heisenberg", "triangular:3"}) {
        GradedNilAlgebra alg = algebra_by_name(name);
        Lattice lat = make_lattice(alg);
        std::vector<double> alpha(static_cast<std::size_t>(alg.dim() - 1), 0.0);
        alpha[0] = kGolden;
        if (alpha.size() > 1) alpha[1] = 0.41421356237309515;
        FlowSpec<double> spec = make_flow(alg, alpha);
        const double dt = 1.0 / 64;
        FastFlow ff = compile_fast_flow(lat, spec, dt);

        std::vector<double> start(static_cast<std::size_t>(alg.dim()), 0.37);
        start[0] = 0.21;
        GroupElement<double> g =
            reduce_mod_lattice(lat, group_from_second_kind(alg, start)).point;
        FastOrbit orbit(ff, g.second);
        for (int n = 0; n < 500; ++n) {
            orbit.advance();
            g = flow_step(lat, g, spec, dt);
            for (int i = 0; i < alg.dim(); ++i) {
                double d = std::abs(orbit.coords()[static_cast<std::size_t>(i)] -
                                    g.second[static_cast<std::size_t>(i)]);
                d = std::min(d, std::abs(1.0 - d));  // cell-boundary wrap
                ASSERT_LE(d, 1e-9) << name << " slot " << i << " at step " << n;
            }
        }
    }
}

TEST(FastFlow, RefusesHighStepAndScaledLattices) {
    // step-4 algebra on its divided-power lattice basis
    GradedNilAlgebra filiform = lattice_adapted(algebra_by_name("filiform:4"));
    Lattice lat4 = make_lattice(filiform);
    std::vector<double> alpha(static_cast<std::size_t>(filiform.dim() - 1), 0.3);
    FlowSpec<double> spec4 = make_flow(filiform, alpha);
    EXPECT_THROW(compile_fast_flow(lat4, spec4, 1.0 / 64), std::invalid_argument);
    EXPECT_FALSE(fast_flow_eligible(lat4));

    GradedNilAlgebra heis = make_heisenberg();
    Lattice lat2 = make_lattice(heis, 2);
    FlowSpec<double> spec2 = heisenberg_flow(heis, kGolden);
    EXPECT_THROW(compile_fast_flow(lat2, spec2, 1.0 / 64), std::invalid_argument);
    EXPECT_FALSE(fast_flow_eligible(lat2));
}

// ---------------------------------------------------------------------------
// Birkhoff averages.

TEST(Average, TrivialCharacterAveragesToOneExactly) {
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    FlowSpec<double> spec = heisenberg_flow(alg, kGolden);
    Observable one = toral_character(alg, {0, 0});
    GroupElement<double> x =
        group_from_second_kind(alg, std::vector<double>{0.2, 0.4, 0.8});
    std::complex<double> avg = birkhoff_average(lat, spec, one, x, 4.0, 0.25);
    EXPECT_NEAR(avg.real(), 1.0, 1e-12);
    EXPECT_NEAR(avg.imag(), 0.0, 1e-12);
}

TEST(Average, CharacterTrapezoidMatchesTheGeometricSeries) {
    // The base-torus projection moves linearly: slot 0 at rate −1, slot 1 at
    // rate α.  For the character with frequencies (m₀, m₁) the sampled values
    // are z^n with z = e^{2πi c dt}, c = −m₀ + m₁α, so the trapezoid average
    // has the closed form dt/T·(Σ₀^N z^n − (1 + z^N)/2).
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    const double a = kGolden;
    FlowSpec<double> spec = heisenberg_flow(alg, a);
    const long long m0 = 2, m1 = -3;
    Observable chi = toral_character(alg, {m0, m1});
    std::vector<double> x0{0.15, 0.65, 0.4};
    GroupElement<double> x = group_from_second_kind(alg, x0);

    const double T = 64.0, dt = 1.0 / 64;
    const long long N = 4096;
    const double c = -double(m0) + double(m1) * a;
    auto unit = [](double t) {
        double f = t - std::floor(t);
        return std::polar(1.0, 2.0 * M_PI * f);
    };
    std::complex<double> z = unit(c * dt);
    std::complex<double> zN1 = unit(c * dt * double(N + 1));
    std::complex<double> zN = unit(c * dt * double(N));
    std::complex<double> base = unit(double(m0) * x0[0] + double(m1) * x0[1]);
    std::complex<double> series = (zN1 - 1.0) / (z - 1.0);
    std::complex<double> want = base * (series - 0.5 * (1.0 + zN)) * (dt / T);

    std::complex<double> generic = birkhoff_average(lat, spec, chi, x, T, dt);
    EXPECT_NEAR(std::abs(generic - want), 0.0, 1e-8);

    // the compiled route must reproduce the generic one
    FastFlow ff = compile_fast_flow(lat, spec, dt);
    std::complex<double> fast = birkhoff_average(lat, spec, chi, x, T, dt, &ff);
    EXPECT_NEAR(std::abs(fast - generic), 0.0, 1e-9);
}

TEST(Average, FastPathEngagesAndAgreesOnLongBumpAverages) {
    // 2^18 steps: above the auto-compile threshold, still cheap enough to
    // cross-check against the generic group-law route.
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    FlowSpec<double> spec = heisenberg_flow(alg, kGolden);
    Observable f = periodized_bump(lat, {0.5, 0.5, 0.5}, {0.3, 0.25, 0.2});
    GroupElement<double> x =
        group_from_second_kind(alg, std::vector<double>{0.13, 0.52, 0.71});
    std::vector<double> T = dyadic_checkpoints(16.0, 4096.0);
    const double dt = 1.0 / 64;

    DecaySeries fast = decay_series(lat, spec, f, x, T, dt);  // auto-compiles
    GroupElement<double> g = reduce_mod_lattice(lat, x).point;
    detail::KahanComplex acc;
    std::vector<std::complex<double>> generic;
    double f0 = observable_value(lat, f, g).real();
    long long Nmax = std::llround(T.back() / dt);
    std::size_t next = 0;
    for (long long n = 0; n <= Nmax; ++n) {
        double v = observable_value(lat, f, g).real();
        acc.add(v, 0.0);
        while (next < T.size() && std::llround(T[next] / dt) == n) {
            generic.push_back((acc.value() - std::complex<double>(0.5 * (f0 + v), 0.0)) *
                              (dt / T[next]));
            ++next;
        }
        if (n < Nmax) g = flow_step(lat, g, spec, dt);
    }
    ASSERT_EQ(generic.size(), fast.T.size());
    for (std::size_t i = 0; i < generic.size(); ++i)
        EXPECT_NEAR(std::abs(fast.value[i] - generic[i]), 0.0, 1e-8) << "T = " << fast.T[i];
    // zero-mean observable along an irrational flow: the long average must
    // sit far below the short one
    EXPECT_LT(fast.magnitude.back(), 0.5 * fast.magnitude.front() + 1e-3);
}

TEST(Average, CheckpointValidation) {
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    FlowSpec<double> spec = heisenberg_flow(alg, kGolden);
    Observable chi = toral_character(alg, {1, 0});
    GroupElement<double> x = group_identity<double>(alg);
    EXPECT_THROW(decay_series(lat, spec, chi, x, {}, 0.25), std::invalid_argument);
    EXPECT_THROW(decay_series(lat, spec, chi, x, {1.0, 2.3}, 0.25), std::invalid_argument);
    EXPECT_THROW(birkhoff_average(lat, spec, chi, x, -1.0, 0.25), std::invalid_argument);
    // unsorted checkpoints come back sorted
    DecaySeries s = decay_series(lat, spec, chi, x, {4.0, 1.0, 2.0}, 0.25);
    ASSERT_EQ(s.T.size(), 3u);
    EXPECT_LT(s.T[0], s.T[1]);
    EXPECT_LT(s.T[1], s.T[2]);
    // compiled flow built for a different dt is rejected
    FastFlow ff = compile_fast_flow(lat, spec, 0.5);
    EXPECT_THROW(decay_series(lat, spec, chi, x, {4.0}, 0.25, &ff), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Weyl sums.

TEST(Weyl, HandComputableCases) {
    // constant phase 1/4: every term is i
    std::complex<double> a = weyl_sum({0.25}, 5);
    EXPECT_NEAR(a.real(), 0.0, 1e-15);
    EXPECT_NEAR(a.imag(), 1.0, 1e-15);
    // linear phase 1/2: alternating ±1 over an even count
    EXPECT_NEAR(std::abs(weyl_sum({0.0, 0.5}, 6)), 0.0, 1e-15);
    // full set of eighth roots of unity
    EXPECT_NEAR(std::abs(weyl_sum({0.0, 0.125}, 8)), 0.0, 1e-15);
    // quadratic phase r²/2 over r = 0..3: values 1, −1, 1, −1
    EXPECT_NEAR(std::abs(weyl_sum({0.0, 0.0, 0.5}, 4)), 0.0, 1e-15);
    EXPECT_THROW(weyl_sum({}, 4), std::invalid_argument);
    EXPECT_THROW(weyl_sum({0.1}, 0), std::invalid_argument);
    EXPECT_THROW(weyl_sum({0.1}, (1ll << 33) + 1), std::invalid_argument);
}

TEST(Weyl, DifferenceTableMatchesTheSplitDirectOracle) {
    std::mt19937_64 rng(20260823);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> c(6);
        for (double& v : c) v = U(rng);
        EXPECT_NEAR(std::abs(weyl_sum(c, 32) - weyl_sum_direct(c, 32)), 0.0, 1e-10);
    }
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> c(3);
        for (double& v : c) v = U(rng);
        EXPECT_NEAR(std::abs(weyl_sum(c, 4096) - weyl_sum_direct(c, 4096)), 0.0, 1e-12);
    }
    // the large-N quadratic regime the decay experiments live in
    std::vector<double> golden{0.0, 0.1, kGolden / 2};
    EXPECT_NEAR(std::abs(weyl_sum(golden, 1ll << 20) - weyl_sum_direct(golden, 1ll << 20)), 0.0,
                1e-10);
    // outside the certified range the direct oracle refuses instead of lying
    EXPECT_THROW(weyl_sum_direct({0.0, 0.0, 0.0, 0.0, 0.0, 0.3}, 1ll << 20), std::domain_error);
}

TEST(Weyl, GoldenQuadraticDecaysAtSquareRootRate) {
    // |S_N| for the quadratic phase with golden leading coefficient follows
    // the square-root law; the fitted slope over dyadic N must land in the
    // same window the long-orbit experiments use.
    std::vector<double> T, A;
    for (int e = 10; e <= 22; ++e) {
        long long N = 1ll << e;
        T.push_back(double(N));
        A.push_back(std::abs(weyl_sum({0.0, 0.1, kGolden / 2}, N)));
    }
    DecayFit fit = fit_decay(T, A);
    EXPECT_GE(fit.slope, -0.55);
    EXPECT_LE(fit.slope, -0.40);
    // frozen magnitude at N = 2^20 (window check at the single endpoint)
    double mag = std::abs(weyl_sum({0.0, 0.1, kGolden / 2}, 1ll << 20));
    EXPECT_NEAR(mag, 1.213092e-3, 2e-9);
}

// ---------------------------------------------------------------------------
// Discrepancy.

TEST(Discrepancy, RegularGridHasZeroDyadicDiscrepancy) {
    std::vector<std::vector<double>> pts;
    for (int k = 0; k < 64; ++k) pts.push_back({k / 64.0});
    EXPECT_NEAR(discrepancy(pts, 6), 0.0, 1e-15);
}

TEST(Discrepancy, PointMassSaturatesTheDeepestLevel) {
    std::vector<std::vector<double>> pts(100, std::vector<double>{0.3, 0.7});
    // all mass in one cell of volume 2^{−2l}: worst deviation 1 − 2^{−2·depth}
    EXPECT_NEAR(discrepancy(pts, 4), 1.0 - std::pow(2.0, -8.0), 1e-15);
}

TEST(Discrepancy, KroneckerGoldenSequenceIsLowDiscrepancy) {
    std::vector<std::vector<double>> pts;
    double x = 0.0;
    for (int n = 0; n < 4096; ++n) {
        pts.push_back({x});
        x += kGolden;
        x -= std::floor(x);
    }
    double d = discrepancy(pts, 8);
    EXPECT_LE(d, 2.0 * std::log(4096.0) / 4096.0);
    EXPECT_GT(d, 1e-6);
}

TEST(Discrepancy, ValidatesInputAndBudget) {
    std::vector<std::vector<double>> pts{{0.5, 0.5, 0.5, 0.5}};
    EXPECT_THROW(discrepancy({}, 3), std::invalid_argument);
    EXPECT_THROW(discrepancy(pts, 0), std::invalid_argument);
    EXPECT_THROW(discrepancy(pts, 9), std::invalid_argument);
    EXPECT_THROW(discrepancy(pts, 7), std::invalid_argument);  // 2^28 cells
    EXPECT_THROW(discrepancy({{0.2}, {1.0}}, 2), std::invalid_argument);
    EXPECT_THROW(discrepancy({{0.2}, {0.3, 0.4}}, 2), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Decay fitting.

TEST(Fit, RecoversAPurePowerLawToMachinePrecision) {
    std::vector<double> T, A;
    for (int e = 10; e <= 24; ++e) {
        double t = std::pow(2.0, e);
        T.push_back(t);
        A.push_back(3.0 * std::pow(t, -1.0 / 3.0));
    }
    DecayFit fit = fit_decay(T, A);
    EXPECT_NEAR(fit.slope, -1.0 / 3.0, 1e-9);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-9);
    EXPECT_LE(fit.residual, 1e-12);
    EXPECT_EQ(fit.excluded, 0);
}

TEST(Fit, FlatSeriesFitsSlopeZero) {
    std::vector<double> T, A;
    for (int e = 10; e <= 20; ++e) {
        T.push_back(std::pow(2.0, e));
        A.push_back(0.5);
    }
    DecayFit fit = fit_decay(T, A);
    EXPECT_NEAR(fit.slope, 0.0, 1e-12);
}

TEST(Fit, RecoversASlowExponentThroughMultiplicativeNoise) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> U(-0.01, 0.01);
    std::vector<double> T, A;
    for (int e = 10; e <= 24; ++e) {
        double t = std::pow(2.0, e);
        T.push_back(t);
        A.push_back(std::pow(t, -1.0 / 12.0) * (1.0 + U(rng)));
    }
    DecayFit fit = fit_decay(T, A);
    EXPECT_NEAR(fit.slope, -1.0 / 12.0, 0.01);
}

TEST(Fit, ExcludesTheNoiseFloorAndTheWindowExterior) {
    std::vector<double> T, A;
    for (int e = 4; e <= 26; ++e) {
        double t = std::pow(2.0, e);
        T.push_back(t);
        A.push_back(e >= 22 ? 1e-16 : std::pow(t, -0.5));
    }
    // points below 2^10, above 2^24, and under the 1e−15 floor all drop out
    DecayFit fit = fit_decay(T, A);
    EXPECT_EQ(fit.excluded, 11);
    EXPECT_NEAR(fit.slope, -0.5, 1e-9);
    EXPECT_FALSE(fit.note.empty());

    EXPECT_THROW(fit_decay({1.0}, {1.0, 2.0}), std::invalid_argument);
    EXPECT_THROW(fit_decay({2048.0, 4096.0, 8192.0}, {0.1, 0.2, 0.3}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Predicted exponents.

TEST(Exponents, MainBoundValuesAreFrozen) {
    EXPECT_EQ(theoretical_exponent(make_heisenberg(), ExponentMode::main), Rational(1, 3));
    EXPECT_EQ(theoretical_exponent(algebra_by_name("triangular:3"), ExponentMode::main),
              Rational(1, 54));
    EXPECT_EQ(theoretical_exponent(algebra_by_name("free:2:3"), ExponentMode::main),
              Rational(1, 9));
    EXPECT_EQ(theoretical_exponent(algebra_by_name("filiform:4"), ExponentMode::main),
              Rational(1, 18));
}

TEST(Exponents, MainBoundRefusesWhenTransversalityFails) {
    // the 14-dimensional free step-3 algebra on three generators misses the
    // joint-span condition, so no exponent may be quoted for it
    EXPECT_THROW(theoretical_exponent(algebra_by_name("free:3:3"), ExponentMode::main),
                 std::domain_error);
}

TEST(Exponents, SpecializedModesGateTheirAlgebras) {
    EXPECT_EQ(theoretical_exponent(algebra_by_name("triangular:3"), ExponentMode::step3_uniform),
              Rational(1, 12));
    EXPECT_THROW(theoretical_exponent(make_heisenberg(), ExponentMode::step3_uniform),
                 std::invalid_argument);
    EXPECT_EQ(theoretical_exponent(algebra_by_name("free:2:3"), ExponentMode::f23_mixing_base),
              Rational(1, 6));
    EXPECT_EQ(theoretical_exponent(lattice_adapted(algebra_by_name("free:2:3")),
                                   ExponentMode::f23_mixing_base),
              Rational(1, 6));
    EXPECT_THROW(theoretical_exponent(algebra_by_name("triangular:3"),
                                      ExponentMode::f23_mixing_base),
                 std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Section observables against the hand-derived Heisenberg phase.

TEST(ReturnPhase, HeisenbergSeriesIsTheQuadraticWeylSum) {
    // At θ = 0 the canonical reduction shifts the section coordinates by
    // integers only, so with P(r) = m₁(s₀ + rα) + m₂(z₀ + r s₀ + α r(r−1)/2)
    // the sampled phases equal e^{2πiP(r)} exactly, term by term.
    GradedNilAlgebra alg = make_heisenberg();
    Lattice lat = make_lattice(alg);
    const double a = kGolden;
    FlowSpec<double> spec = heisenberg_flow(alg, a);
    const double s0 = 0.31, z0 = 0.17;
    const long long m1 = 1, m2 = 1;
    Observable rp = return_phase(alg, {m1, m2});
    GroupElement<double> x = embed_section(
        alg, SectionPoint<double>{0.0, {s0, z0}});

    const long long N = 512;
    DecaySeries s = decay_series(lat, spec, rp, x, {double(N)});
    ASSERT_EQ(s.T.size(), 1u);
    std::vector<double> coef{double(m1) * s0 + double(m2) * z0,
                             double(m1) * a + double(m2) * (s0 - a / 2),
                             double(m2) * a / 2};
    std::complex<double> want = weyl_sum(coef, N);
    EXPECT_NEAR(std::abs(s.value.front() - want), 0.0, 1e-8);
}

// ---------------------------------------------------------------------------
// Serialization.

TEST(Serialize, JsonAndGnuplotCarryTheFit) {
    std::vector<double> T, A;
    for (int e = 10; e <= 16; ++e) {
        T.push_back(std::pow(2.0, e));
        A.push_back(std::pow(2.0, -0.5 * e));
    }
    DecayFit fit = fit_decay(T, A);
    fit.theoretical = Rational(1, 2);
    std::string js = decay_fit_json(fit);
    EXPECT_NE(js.find("\"slope\":"), std::string::npos);
    EXPECT_NE(js.find("\"theoretical_exponent\": \"1/2\""), std::string::npos);
    EXPECT_NE(js.find("\"residual\":"), std::string::npos);

    std::string gp = decay_fit_gnuplot(fit, "test series");
    EXPECT_NE(gp.find("set logscale xy"), std::string::npos);
    EXPECT_NE(gp.find("$series << EOD"), std::string::npos);
    EXPECT_NE(gp.find("predicted slope"), std::string::npos);
    // one data row per fitted point
    std::size_t rows = 0;
    for (std::size_t pos = gp.find("EOD") + 4; pos < gp.rfind("EOD"); ++pos)
        if (gp[pos] == '\n') ++rows;
    EXPECT_EQ(rows, fit.T.size());
}

}  // namespace
}  // namespace nilflow
