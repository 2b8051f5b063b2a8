/*
 * Counting and lower-bound machinery for toral frequencies.  The frozen
 * values below were computed by hand from the nearest-integer distances of
 * r·α (golden and √2 cases) and from the decimal structure of truncated
 * Liouville numbers; the best-approximation checks lean on the classical
 * fact that continued-fraction convergent denominators minimize ‖rα‖ up to
 * the next denominator.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nilflow/diophantine.hpp"

namespace nilflow {
namespace {

FrequencyVector golden1() { return freq_vector({golden_frequency()}); }

// --------------------------------------------------------------------------
// chart distances

TEST(Chart, CapsWholeVectorWhenAnyCoordinateLeavesTheChart) {
    std::vector<double> in = chart_distances({0.2, 0.24});
    EXPECT_DOUBLE_EQ(in[0], 0.2);
    EXPECT_DOUBLE_EQ(in[1], 0.24);

    std::vector<double> out = chart_distances({0.3, 0.1});
    EXPECT_DOUBLE_EQ(out[0], 0.5);
    EXPECT_DOUBLE_EQ(out[1], 0.5);
}

// --------------------------------------------------------------------------
// count_R

TEST(CountR, GoldenSmallCaseMatchesHandCount) {
    // positive r ≤ 13 with ‖r·(√5−1)/2‖ ≤ 0.1 are exactly {5, 8, 13}
    CountReport rep = count_R(golden1(), 13, 0.1);
    EXPECT_EQ(rep.count, 7);
    EXPECT_EQ(rep.uncertain, 0);

    // with an envelope attached the ratio is count / max{N^{1−1/ν}, Nδ}
    CountReport withnu = count_R(golden1(), 13, 0.1, {}, 1.05);
    EXPECT_EQ(withnu.count, 7);
    EXPECT_NEAR(withnu.envelope, 1.3, 1e-12);
    EXPECT_NEAR(withnu.ratio, 7.0 / 1.3, 1e-12);
}

TEST(CountR, ThresholdSaturationCountsEveryInteger) {
    // δ at the chart radius: even capped off-chart points qualify
    CountReport rep = count_R(golden1(), 10, 0.5);
    EXPECT_EQ(rep.count, 21);
}

TEST(CountR, ChartCapExcludesOffChartPointsJustBelowSaturation) {
    // threshold 0.49: in-chart points need ‖rα‖ ≤ 0.25 first, so the
    // qualifying positive r ≤ 10 are {2, 3, 5, 8, 10}; without the cap the
    // raw-distance count would also admit r ∈ {1, 4, 6, 7, 9}
    CountReport rep = count_R(golden1(), 10, 0.49);
    EXPECT_EQ(rep.count, 11);
}

TEST(CountR, RationalFrequencyCountsItsMultiples) {
    FrequencyVector third = freq_vector({freq_exact(Rational(1, 3))});
    CountReport rep = count_R(third, 9, 1e-9);
    EXPECT_EQ(rep.count, 7);  // r ∈ {0, ±3, ±6, ±9}
}

TEST(CountR, MonotoneInBothArguments) {
    std::mt19937 rng(20260823);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        FrequencyVector a = freq_vector({freq_double(uni(rng)), freq_double(uni(rng))});
        std::int64_t prev = -1;
        for (std::int64_t N : {100, 200, 400}) {
            CountReport rep = count_R(a, N, 0.02);
            EXPECT_GE(rep.count, prev);
            prev = rep.count;
        }
        prev = -1;
        for (double delta : {0.01, 0.05, 0.2}) {
            CountReport rep = count_R(a, 300, delta);
            EXPECT_GE(rep.count, prev);
            prev = rep.count;
            EXPECT_GT(rep.budget, 0.0);
        }
    }
}

TEST(CountR, InvariantUnderIntegerShiftOfTheFrequency) {
    Frequency shifted = freq_exact(*golden_frequency().exact + Quad(Rational(3)));
    CountReport a = count_R(golden1(), 500, 0.07);
    CountReport b = count_R(freq_vector({shifted}), 500, 0.07);
    EXPECT_EQ(a.count, b.count);
}

TEST(CountR, SigmaValidation) {
    FrequencyVector two = freq_vector({golden_frequency(), sqrt_frequency(2)});
    EXPECT_THROW(count_R(two, 10, 0.1, {0.5}), std::invalid_argument);
    EXPECT_THROW(count_R(two, 10, 0.1, {0.6, 0.6}), std::invalid_argument);
    EXPECT_THROW(count_R(two, 10, 0.1, {1.0, 0.0}), std::invalid_argument);
    EXPECT_NO_THROW(count_R(two, 10, 0.1, {0.3, 0.7}));
    EXPECT_NO_THROW(count_R(golden1(), 10, 0.1, {1.0}));  // n = 1 degenerate
}

// --------------------------------------------------------------------------
// dio_lower_bound

TEST(DioBound, GoldenMinimumIsAtROne) {
    DioBound b = dio_lower_bound(golden1(), 10000, 1.0);
    EXPECT_EQ(b.r_min, 1);
    ASSERT_TRUE(b.exact);
    // 1·‖α‖ = 1 − α = (3 − √5)/2
    EXPECT_EQ(*b.exact_value, Quad(Rational(3, 2), Rational(-1, 2), Int(5)));
    EXPECT_NEAR(b.value, 0.38196601125010515, 1e-14);
    EXPECT_GE(b.value, 0.25);
}

TEST(DioBound, Sqrt2MinimumIsAtRTwo) {
    DioBound b = dio_lower_bound(freq_vector({sqrt_frequency(2)}), 10000, 1.0);
    EXPECT_EQ(b.r_min, 2);
    EXPECT_NEAR(b.value, 6.0 - 4.0 * std::sqrt(2.0), 1e-12);  // 2·‖2√2‖ ≈ 0.3431
    EXPECT_GT(b.value, 1.0 / (2.0 * std::sqrt(2.0)) - 0.011);        // Hurwitz regime
}

TEST(DioBound, TruncatedLiouvilleCollapsesAtTheFactorialDenominator) {
    FrequencyVector ell = freq_vector({truncated_liouville(4)});
    DioBound b = dio_lower_bound(ell, 1000000, 1.0);
    EXPECT_EQ(b.r_min, 1000000);
    ASSERT_TRUE(b.exact);
    Int trillion(1);
    for (int i = 0; i < 12; ++i) trillion *= 10;
    EXPECT_EQ(*b.exact_value, Quad(Rational(Int(1), trillion)));
    EXPECT_NEAR(b.value, 1e-12, 1e-24);
}

TEST(DioBound, ConvergentDenominatorsAreBestApproximations) {
    // classical: for q_k < r < q_{k+1} the distance ‖rα‖ exceeds ‖q_k α‖, so
    // a plain distance scan up to q_{k+1} − 1 bottoms out exactly at q_k
    struct Case {
        FrequencyVector a;
        std::vector<std::int64_t> q;
    };
    std::vector<Case> cases;
    cases.push_back({golden1(), {2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377}});
    cases.push_back({freq_vector({sqrt_frequency(2)}), {2, 5, 12, 29, 70, 169, 408, 985}});
    for (const Case& c : cases)
        for (std::size_t k = 0; k + 1 < c.q.size(); ++k) {
            DioBound b = dio_lower_bound(c.a, c.q[k + 1] - 1, 0.0);
            EXPECT_EQ(b.r_min, c.q[k]);
        }
}

// --------------------------------------------------------------------------
// membership evidence

TEST(Membership, QuadraticPairIsConsistentAtScale) {
    FrequencyVector a = freq_vector({freq_exact(sqrt_quad(2) - Quad(Rational(1))),
                                     freq_exact(sqrt_quad(3) - Quad(Rational(1)))});
    MembershipEvidence ev = membership_evidence(a, 1.2, {1000, 10000},
                                                {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3});
    EXPECT_GT(ev.fitted_C, 0.0);
    EXPECT_LT(ev.fitted_C, 50.0);
    EXPECT_TRUE(ev.consistent);
    EXPECT_TRUE(ev.full_measure_ok);
    EXPECT_EQ(ev.cells.size(), 14u);
    // every cell obeys count ≤ fitted_C · envelope by construction of the fit
    for (const CountReport& c : ev.cells)
        EXPECT_LE(static_cast<double>(c.count), ev.fitted_C * c.envelope * (1 + 1e-12));
}

TEST(Membership, RationalComponentIsFlaggedInconsistent) {
    FrequencyVector a = freq_vector({freq_exact(Rational(3, 7))});
    MembershipEvidence ev = membership_evidence(a, 1.05, {100, 10000}, {1e-8});
    ASSERT_EQ(ev.cells.size(), 2u);
    EXPECT_EQ(ev.cells[0].count, 29);    // 2·⌊100/7⌋ + 1
    EXPECT_EQ(ev.cells[1].count, 2857);  // 2·⌊10⁴/7⌋ + 1
    EXPECT_GT(ev.growth, 4.0);
    EXPECT_FALSE(ev.consistent);
    EXPECT_NE(ev.note.find("rational"), std::string::npos);
}

TEST(Membership, HugeNuIsTriviallyConsistentWithSmallConstant) {
    MembershipEvidence ev = membership_evidence(golden1(), 50.0, {1000, 5000}, {0.01, 0.1});
    EXPECT_TRUE(ev.consistent);
    EXPECT_LT(ev.fitted_C, 3.0);
}

TEST(Membership, RecordsAdmissibilityOfTheExponent) {
    // σ = (1/2, 1/2): the full-measure criterion asks exactly ν > 1
    FrequencyVector a = freq_vector({golden_frequency(), sqrt_frequency(2)});
    MembershipEvidence ev = membership_evidence(a, 1.01, {100}, {0.1});
    EXPECT_TRUE(ev.full_measure_ok);
    EXPECT_GT(ev.inclusion_bound, 0.0);
    EXPECT_THROW(membership_evidence(a, 1.0, {100}, {0.1}), std::invalid_argument);
}

TEST(Membership, CsvHasOneRowPerCellPlusHeader) {
    MembershipEvidence ev = membership_evidence(golden1(), 1.2, {100}, {0.05, 0.2});
    std::string csv = count_csv(ev.cells, ev.fitted_C);
    EXPECT_NE(csv.find("N,delta,count,bound,ratio"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

// --------------------------------------------------------------------------
// continued fractions of doubles

TEST(ContinuedFraction, DoubleGoldenPrefixIsAllOnes) {
    std::vector<Int> cf = continued_fraction(0.6180339887498949, 25);
    ASSERT_GE(cf.size(), 15u);
    EXPECT_EQ(cf[0], 0);
    for (std::size_t k = 1; k < 15; ++k) EXPECT_EQ(cf[k], 1) << "index " << k;
}

TEST(ContinuedFraction, DoubleRationalTerminates) {
    std::vector<Int> cf = continued_fraction(22.0 / 7.0, 10);
    ASSERT_EQ(cf.size(), 2u);
    EXPECT_EQ(cf[0], 3);
    EXPECT_EQ(cf[1], 7);
}

// --------------------------------------------------------------------------
// helper sanity

TEST(Frequencies, ExactDescriptionsRoundTripToDoubles) {
    EXPECT_NEAR(golden_frequency().value, 0.6180339887498949, 1e-15);
    EXPECT_NEAR(sqrt_frequency(2).value, 1.4142135623730951, 1e-15);
    EXPECT_NEAR(truncated_liouville(3).value, 0.110001, 1e-15);
    EXPECT_TRUE(freq_vector({golden_frequency()}).all_exact());
    EXPECT_FALSE(freq_vector({freq_double(0.25)}).all_exact());
    EXPECT_THROW(truncated_liouville(0), std::invalid_argument);
}

}  // namespace
}  // namespace nilflow
