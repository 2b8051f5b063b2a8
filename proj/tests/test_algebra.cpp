// Algebra-level analysis: builtins, Jacobi checks, degrees, scaling data,
// basis rescaling, and the two transversality tests.

#include <gtest/gtest.h>

#include "nilflow/algebra.hpp"

using namespace nilflow;

namespace {

RatVec basis_vec(const GradedNilAlgebra& alg, int i) {
    RatVec v(alg.dim(), Rational(0));
    v[i] = 1;
    return v;
}

// Looks up a basis index by name; fails the test if absent.
int named(const GradedNilAlgebra& alg, const std::string& name) {
    for (int i = 0; i < alg.dim(); ++i)
        if (alg.basis_name(i) == name) return i;
    ADD_FAILURE() << "no basis element named " << name << " in " << alg.name();
    return -1;
}

RatVec bracket_names(const GradedNilAlgebra& alg, const std::string& a, const std::string& b) {
    return alg.bracket(basis_vec(alg, named(alg, a)), basis_vec(alg, named(alg, b)));
}

}  // namespace

TEST(Builtins, JacobiHoldsEverywhere) {
    for (const char* name : {"heisenberg", "filiform:3", "filiform:5", "triangular:2", "triangular:3",
                             "triangular:4", "triangular:5", "triangular:6", "free:2:3", "free:2:5",
                             "free:3:3", "free:3:4"}) {
        GradedNilAlgebra alg = algebra_by_name(name);
        EXPECT_TRUE(check_jacobi(alg).empty()) << name;
    }
}

TEST(Builtins, DimensionsAndSteps) {
    EXPECT_EQ(make_heisenberg().dim(), 3);
    EXPECT_EQ(make_heisenberg().step(), 2);
    EXPECT_EQ(make_triangular(3).dim(), 6);
    EXPECT_EQ(make_triangular(3).step(), 3);
    EXPECT_EQ(make_triangular(6).dim(), 21);
    EXPECT_EQ(make_filiform(4).dim(), 5);
    EXPECT_EQ(make_filiform(4).step(), 4);
    EXPECT_EQ(make_free_nilpotent(2, 3).dim(), 5);
    EXPECT_EQ(make_free_nilpotent(2, 5).dim(), 14);
    EXPECT_EQ(make_free_nilpotent(3, 3).dim(), 14);
    EXPECT_EQ(make_free_nilpotent(3, 5).dim(), 80);
}

TEST(Builtins, NameParsingErrors) {
    EXPECT_THROW(algebra_by_name("nope"), std::invalid_argument);
    EXPECT_THROW(algebra_by_name("triangular"), std::invalid_argument);
    EXPECT_THROW(algebra_by_name("triangular:x"), std::invalid_argument);
    EXPECT_THROW(algebra_by_name("free:2"), std::invalid_argument);
    EXPECT_THROW(algebra_by_name("filiform:1"), std::invalid_argument);
    EXPECT_THROW(algebra_by_name("free:9:9"), std::invalid_argument);  // dimension cap
}

TEST(Builtins, TriangularBrackets) {
    GradedNilAlgebra alg = make_triangular(3);
    EXPECT_EQ(bracket_names(alg, "E1_2", "E2_3"), basis_vec(alg, named(alg, "E1_3")));
    EXPECT_EQ(bracket_names(alg, "E2_3", "E3_4"), basis_vec(alg, named(alg, "E2_4")));
    EXPECT_EQ(bracket_names(alg, "E1_2", "E2_4"), basis_vec(alg, named(alg, "E1_4")));
    EXPECT_EQ(bracket_names(alg, "E1_3", "E3_4"), basis_vec(alg, named(alg, "E1_4")));
    // [E12, E34] = 0 (no shared index).
    EXPECT_EQ(bracket_names(alg, "E1_2", "E3_4"), RatVec(alg.dim(), Rational(0)));
}

TEST(Builtins, FreeTwoGeneratorNamedPresentation) {
    GradedNilAlgebra alg = make_free_nilpotent(2, 3);
    EXPECT_EQ(bracket_names(alg, "X1", "X2"), basis_vec(alg, named(alg, "Y1")));
    EXPECT_EQ(bracket_names(alg, "X1", "Y1"), basis_vec(alg, named(alg, "Z1")));
    EXPECT_EQ(bracket_names(alg, "X2", "Y1"), basis_vec(alg, named(alg, "Z2")));
}

TEST(Builtins, FreeThreeGeneratorNamedPresentation) {
    GradedNilAlgebra alg = make_free_nilpotent(3, 3);
    EXPECT_EQ(bracket_names(alg, "X1", "X2"), basis_vec(alg, named(alg, "Y1")));
    EXPECT_EQ(bracket_names(alg, "X2", "X3"), basis_vec(alg, named(alg, "Y2")));
    EXPECT_EQ(bracket_names(alg, "X1", "X3"), basis_vec(alg, named(alg, "Y3")));
    EXPECT_EQ(bracket_names(alg, "X1", "Y1"), basis_vec(alg, named(alg, "Z1")));
    EXPECT_EQ(bracket_names(alg, "X1", "Y2"), basis_vec(alg, named(alg, "Z2")));
    EXPECT_EQ(bracket_names(alg, "X1", "Y3"), basis_vec(alg, named(alg, "Z3")));
    EXPECT_EQ(bracket_names(alg, "X2", "Y1"), basis_vec(alg, named(alg, "Z4")));
    EXPECT_EQ(bracket_names(alg, "X2", "Y2"), basis_vec(alg, named(alg, "Z5")));
    EXPECT_EQ(bracket_names(alg, "X2", "Y3"), basis_vec(alg, named(alg, "Z6")));
    EXPECT_EQ(bracket_names(alg, "X3", "Y2"), basis_vec(alg, named(alg, "Z8")));
    EXPECT_EQ(bracket_names(alg, "X3", "Y3"), basis_vec(alg, named(alg, "Z9")));
    // The Jacobi identity forces [X3,Y1] = Z6 - Z2.
    RatVec expected(alg.dim(), Rational(0));
    expected[named(alg, "Z6")] = 1;
    expected[named(alg, "Z2")] = -1;
    EXPECT_EQ(bracket_names(alg, "X3", "Y1"), expected);
    // Layer dimensions 3 / 3 / 8.
    EXPECT_EQ(alg.layer_indices(1).size(), 3u);
    EXPECT_EQ(alg.layer_indices(2).size(), 3u);
    EXPECT_EQ(alg.layer_indices(3).size(), 8u);
}

TEST(Builtins, CenterBases) {
    auto center_names = [](const GradedNilAlgebra& alg) {
        std::vector<RatVec> c = alg.center_basis();
        return c.size();
    };
    EXPECT_EQ(center_names(make_heisenberg()), 1u);
    EXPECT_EQ(center_names(make_triangular(4)), 1u);
    EXPECT_EQ(center_names(make_free_nilpotent(3, 3)), 8u);
    EXPECT_EQ(center_names(make_filiform(5)), 1u);
}

TEST(Degrees, AdPowerCounts) {
    GradedNilAlgebra alg = make_triangular(3);
    RatVec v = generic_flow_element(alg, 0);
    EXPECT_EQ(degree(alg, v, basis_vec(alg, named(alg, "E2_3"))), 2);
    EXPECT_EQ(degree(alg, v, basis_vec(alg, named(alg, "E3_4"))), 2);
    EXPECT_EQ(degree(alg, v, basis_vec(alg, named(alg, "E1_3"))), 1);
    EXPECT_EQ(degree(alg, v, basis_vec(alg, named(alg, "E2_4"))), 1);
    EXPECT_EQ(degree(alg, v, basis_vec(alg, named(alg, "E1_4"))), 0);
    EXPECT_EQ(degree(alg, v, v), 0);  // ad_V V = 0
    EXPECT_EQ(degree(alg, v, RatVec(alg.dim(), Rational(0))), 0);
}

TEST(Scaling, TriangularFamilyDegreeSums) {
    // Generic degree sum is (k-1)(k^2+k-3)/3; the published family value is
    // three times that.
    for (int k = 2; k <= 6; ++k) {
        ScalingReport rep = scaling_data(make_triangular(k));
        Int expected_generic = Int(k - 1) * Int(k * k + k - 3) / 3;
        EXPECT_EQ(rep.degree_sum, expected_generic) << "k=" << k;
        EXPECT_EQ(rep.published_sum, Int(k - 1) * Int(k * k + k - 3)) << "k=" << k;
        // Every layer-m element has degree k-m.
        GradedNilAlgebra alg = make_triangular(k);
        for (int i = 1; i < alg.dim(); ++i) EXPECT_EQ(rep.degrees[i], k - alg.layer(i));
    }
}

TEST(Scaling, HeisenbergAndHomogeneousProfiles) {
    ScalingReport h = scaling_data(make_heisenberg());
    EXPECT_EQ(h.degree_sum, Int(1));
    EXPECT_EQ(h.published_sum, Int(1));
    EXPECT_EQ(h.lambda, Rational(1));
    EXPECT_EQ(h.delta, Rational(1));

    ScalingReport t3 = scaling_data(make_triangular(3));
    EXPECT_EQ(t3.lambda, Rational(1, 18));
    EXPECT_EQ(t3.delta, Rational(1, 18));
    // Homogeneous profile on the triangular family: lambda = delta = 1/S.
    for (int k = 2; k <= 5; ++k) {
        ScalingReport rep = scaling_data(make_triangular(k));
        Rational s_inv = Rational(1) / Rational(rep.published_sum);
        EXPECT_EQ(rep.lambda, s_inv) << "k=" << k;
        EXPECT_EQ(rep.delta, s_inv) << "k=" << k;
    }
}

TEST(Scaling, UserProfileValidation) {
    GradedNilAlgebra heis = make_heisenberg();
    // Wrong size.
    EXPECT_THROW(scaling_data(heis, RatVec{Rational(1)}), std::invalid_argument);
    // Sum != 1.
    EXPECT_THROW(scaling_data(heis, RatVec{Rational(1, 2), Rational(1, 4)}), std::invalid_argument);
    // Valid profile: rho = (1/2 on X2, 1/2 on Z).
    ScalingReport rep = scaling_data(heis, RatVec{Rational(1, 2), Rational(1, 2)});
    EXPECT_TRUE(rep.rho_user_supplied);
    EXPECT_EQ(rep.lambda, Rational(1, 2));
    EXPECT_EQ(rep.delta, Rational(0));  // flat profile has no layer gap
}

TEST(Scaling, RescaleRates) {
    GradedNilAlgebra alg = make_triangular(3);
    ScalingReport rep = scaling_data(alg);
    RescaleData rd = rescale_basis(alg, rep.rho);
    EXPECT_EQ(rd.rates[0], Rational(1));
    EXPECT_EQ(rd.rates[named(alg, "E2_3")], Rational(-1, 9));
    EXPECT_EQ(rd.rates[named(alg, "E1_3")], Rational(-1, 18));
    EXPECT_EQ(rd.rates[named(alg, "E1_4")], Rational(0));
    // [E12, E23] -> E13 evolves as exp((1 - 2/18 + 1/18) t) = exp(17/18 t).
    bool found = false;
    for (const RescaledTerm& t : rd.brackets)
        if (t.a == named(alg, "E1_2") && t.b == named(alg, "E2_3")) {
            EXPECT_EQ(t.l, named(alg, "E1_3"));
            EXPECT_EQ(t.coeff, Rational(1));
            EXPECT_EQ(t.rate, Rational(17, 18));
            found = true;
        }
    EXPECT_TRUE(found);
}

namespace {

RatVec flow_with_alpha(const GradedNilAlgebra& alg, const std::vector<Rational>& alphas) {
    RatVec v(alg.dim(), Rational(0));
    v[0] = 1;
    size_t used = 0;
    for (int i = 1; i < alg.dim(); ++i)
        if (alg.layer(i) == 1) v[i] = alphas.at(used++);
    return v;
}

}  // namespace

TEST(Transversality, HeisenbergAndTriangularHold) {
    GradedNilAlgebra heis = make_heisenberg();
    TransversalityReport rep = check_transversality(heis, flow_with_alpha(heis, {Rational(2)}));
    EXPECT_TRUE(rep.verdict);
    EXPECT_EQ(rep.span_generators_dim, 2);
    EXPECT_EQ(rep.range_ad_dim, 1);
    EXPECT_EQ(rep.centralizer_dim, 1);  // just the center
    EXPECT_EQ(rep.joint_span_dim, 3);

    GradedNilAlgebra t3 = make_triangular(3);
    rep = check_transversality(t3, flow_with_alpha(t3, {Rational(2), Rational(3)}));
    EXPECT_TRUE(rep.verdict);
    EXPECT_EQ(rep.span_generators_dim, 3);
    EXPECT_EQ(rep.range_ad_dim, 3);
    EXPECT_EQ(rep.centralizer_dim, 2);  // Y1 + alpha3 Y2 direction plus the center
    EXPECT_EQ(rep.joint_span_dim, 6);
}

TEST(Transversality, FreeThreeGeneratorFailsInLayerTwo) {
    GradedNilAlgebra alg = make_free_nilpotent(3, 3);
    TransversalityReport rep =
        check_transversality(alg, flow_with_alpha(alg, {Rational(2), Rational(3)}));
    EXPECT_FALSE(rep.verdict);
    EXPECT_EQ(rep.centralizer_dim, 8);  // strict commutant is exactly the center
    EXPECT_EQ(rep.joint_span_dim, 13);  // one layer-2 direction uncovered
    ASSERT_EQ(rep.witness.size(), 1u);
    EXPECT_EQ(alg.layer(rep.witness[0]), 2);
    EXPECT_NE(rep.note.find("layer(s) 2"), std::string::npos);
}

TEST(Transversality, RejectsFlowInsideIdeal) {
    GradedNilAlgebra heis = make_heisenberg();
    RatVec x(heis.dim(), Rational(0));
    x[1] = 1;
    EXPECT_THROW(check_transversality(heis, x), std::invalid_argument);
}

namespace {

// Central functional on free:3:3 with generic integer values; Z7 is not a
// basis element so eight values cover the center.
RatVec central_functional(const GradedNilAlgebra& alg) {
    RatVec lam(alg.dim(), Rational(0));
    int v = 1;
    for (int i = 0; i < alg.dim(); ++i)
        if (alg.layer(i) == alg.step()) lam[i] = v++;
    return lam;
}

}  // namespace

TEST(GeneralizedTransversality, PredicatesDisagreeOnFreeThreeGenerator) {
    GradedNilAlgebra alg = make_free_nilpotent(3, 3);
    RatVec v = flow_with_alpha(alg, {Rational(2), Rational(3)});
    RatVec lam = central_functional(alg);

    GenTransversalityReport lit =
        check_generalized_transversality(alg, v, lam, CentralizerPredicate::literal);
    EXPECT_TRUE(lit.verdict);  // the written definition is satisfiable here
    EXPECT_EQ(lit.centralizer_dim, 12);
    EXPECT_EQ(lit.effective_centralizer_dim, 12);

    GenTransversalityReport poly =
        check_generalized_transversality(alg, v, lam, CentralizerPredicate::polynomial);
    EXPECT_FALSE(poly.verdict);  // the effective counting fails in layer 2
    EXPECT_EQ(poly.centralizer_dim, 11);           // 1 + 2 + 8 raw solution space
    EXPECT_EQ(poly.effective_centralizer_dim, 8);  // only the center is admitted
    EXPECT_EQ(poly.joint_span_dim, 13);
    ASSERT_EQ(poly.witness.size(), 1u);
    EXPECT_EQ(alg.layer(poly.witness[0]), 2);
}

TEST(GeneralizedTransversality, TriangularHoldsUnderBothPredicates) {
    GradedNilAlgebra alg = make_triangular(3);
    RatVec v = flow_with_alpha(alg, {Rational(2), Rational(3)});
    RatVec lam(alg.dim(), Rational(0));
    lam[alg.dim() - 1] = 1;  // central functional

    GenTransversalityReport lit =
        check_generalized_transversality(alg, v, lam, CentralizerPredicate::literal);
    EXPECT_TRUE(lit.verdict);

    GenTransversalityReport poly =
        check_generalized_transversality(alg, v, lam, CentralizerPredicate::polynomial);
    EXPECT_TRUE(poly.verdict);
    EXPECT_EQ(poly.centralizer_dim, 3);  // one direction per layer survives the symbol conditions
    EXPECT_EQ(poly.effective_centralizer_dim, 2);
}

TEST(GeneralizedTransversality, ZeroFunctionalIsTriviallySatisfied) {
    for (const char* name : {"heisenberg", "triangular:3"}) {
        GradedNilAlgebra alg = algebra_by_name(name);
        RatVec v = generic_flow_element(alg, 0);
        RatVec lam(alg.dim(), Rational(0));
        GenTransversalityReport rep =
            check_generalized_transversality(alg, v, lam, CentralizerPredicate::literal);
        EXPECT_TRUE(rep.verdict) << name;
        EXPECT_EQ(rep.centralizer_dim, alg.dim() - 1) << name;  // all of the ideal
        EXPECT_NE(rep.note.find("degenerate functional"), std::string::npos);
    }
}
