#pragma once

/*
 * Points on a compact nilmanifold M = Γ\N, the group law, reduction to a
 * fundamental domain, nilflows, and the first-return map to the transverse
 * section.
 *
 * Coordinates of the second kind are primary: a group element is stored as
 * the coordinate vector (x_1, …, x_d) of g = exp(x_1 e_1)···exp(x_d e_d) in
 * the layer-ordered basis, so the lattice Γ is exactly the set of integer
 * vectors and reduction mod Γ is coordinate peeling.  First-kind (single
 * exponential) coordinates are a derived view obtained by repeated BCH
 * multiplication; with a layer-ordered basis each peel step only disturbs
 * strictly later coordinates, so both conversions finish in one pass.
 *
 * Everything is templated on the scalar flavor R ∈ {double, Rational, Quad}.
 * In the exact flavors reduction and the return map are computed without any
 * rounding, which is what the long-horizon agreement checks lean on: the
 * closed form of the r-th return and the r-fold iterated flow then agree
 * identically, not merely to tolerance.
 */

#include "nilflow/algebra.hpp"
#include "nilflow/linalg_exact.hpp"
#include "nilflow/quadratic.hpp"
#include "nilflow/rational.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace nilflow {

// ---------------------------------------------------------------------------
// Scalar helpers shared by the flavors.

template <class R>
Int scalar_floor(const R& x) {
    if constexpr (std::is_same_v<R, Rational>) {
        return floor_int(x);
    } else if constexpr (std::is_same_v<R, double>) {
        return Int(static_cast<long long>(std::floor(x)));
    } else {
        return x.floor();
    }
}

template <class R>
Int scalar_round(const R& x) {
    if constexpr (std::is_same_v<R, Rational>) {
        return round_nearest(x);
    } else if constexpr (std::is_same_v<R, double>) {
        return Int(static_cast<long long>(std::llround(x)));
    } else {
        return x.round();
    }
}

template <class R>
double scalar_to_double(const R& x) {
    if constexpr (std::is_same_v<R, Rational>)
        return to_double(x);
    else if constexpr (std::is_same_v<R, double>)
        return x;
    else
        return x.to_double();
}

// Multiplies a scalar by an exact integer (used when a return index or a
// lattice word entry scales a coordinate).
template <class R>
R scalar_times_int(const R& x, const Int& n) {
    return x * scalar_from<R>(Rational(n));
}

// ---------------------------------------------------------------------------
// Lattice
//
// Γ is the set of integer second-kind coordinate vectors.  That set is a
// subgroup exactly when the group law maps integer vectors to integer
// vectors, which we certify at construction time by multiplying all basis
// generator pairs and a batch of random integer words in exact arithmetic.
// `scale` selects the finite-index sublattice (scale·Z)^d, whose minimal
// nontrivial element is `scale` times farther from the identity.

struct Lattice {
    const GradedNilAlgebra* alg = nullptr;
    int scale = 1;
    const GradedNilAlgebra& algebra() const { return *alg; }
};

// ---------------------------------------------------------------------------
// GroupElement and coordinate conversions.

template <class R>
struct GroupElement {
    const GradedNilAlgebra* alg = nullptr;
    std::vector<R> second;  // second-kind coordinates, length dim

    const GradedNilAlgebra& algebra() const { return *alg; }
};

template <class R>
GroupElement<R> group_identity(const GradedNilAlgebra& alg) {
    return {&alg, std::vector<R>(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)))};
}

template <class R>
GroupElement<R> group_from_second_kind(const GradedNilAlgebra& alg, std::vector<R> coords) {
    if (static_cast<int>(coords.size()) != alg.dim())
        throw std::invalid_argument("group_from_second_kind: expected " +
                                    std::to_string(alg.dim()) + " coordinates, got " +
                                    std::to_string(coords.size()));
    return {&alg, std::move(coords)};
}

namespace detail {

// exp(c·e_i) as a first-kind vector.
template <class R>
std::vector<R> axis_vector(const GradedNilAlgebra& alg, int i, const R& c) {
    std::vector<R> v(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    v[static_cast<std::size_t>(i)] = c;
    return v;
}

}  // namespace detail

// First-kind coordinates w with g = exp(Σ w_i e_i), computed by folding the
// factored form right to left: w ← log(exp(x_i e_i)·exp(w)).
template <class R>
std::vector<R> first_kind(const GroupElement<R>& g) {
    const GradedNilAlgebra& alg = g.algebra();
    std::vector<R> w(g.second.size(), scalar_from<R>(Rational(0)));
    for (int i = alg.dim() - 1; i >= 0; --i)
        w = alg.bch(detail::axis_vector(alg, i, g.second[static_cast<std::size_t>(i)]), w);
    return w;
}

// Inverse conversion by peeling: after exp(−w_1 e_1)···exp(−w_i e_i) have
// been multiplied on the left, coordinates 1..i of the residual are zero and
// the residual's coefficient of e_{i+1} is exactly the next second-kind
// coordinate.  Layer ordering guarantees peels never touch earlier slots.
template <class R>
GroupElement<R> group_from_first_kind(const GradedNilAlgebra& alg, std::vector<R> w) {
    if (static_cast<int>(w.size()) != alg.dim())
        throw std::invalid_argument("group_from_first_kind: expected " + std::to_string(alg.dim()) +
                                    " coordinates, got " + std::to_string(w.size()));
    std::vector<R> coords;
    coords.reserve(w.size());
    for (int i = 0; i < alg.dim(); ++i) {
        R xi = w[static_cast<std::size_t>(i)];
        R neg = scalar_from<R>(Rational(0)) - xi;
        coords.push_back(xi);
        w = alg.bch(detail::axis_vector(alg, i, neg), w);
    }
    return {&alg, std::move(coords)};
}

template <class R>
GroupElement<R> multiply(const GroupElement<R>& g, const GroupElement<R>& h) {
    if (g.alg != h.alg) throw std::invalid_argument("multiply: elements from different algebras");
    return group_from_first_kind(g.algebra(), g.algebra().bch(first_kind(g), first_kind(h)));
}

template <class R>
GroupElement<R> group_inverse(const GroupElement<R>& g) {
    std::vector<R> w = first_kind(g);
    for (R& c : w) c = -c;
    return group_from_first_kind(g.algebra(), std::move(w));
}

// Layer-1 second-kind coordinates: the projection to the base torus N^{ab}/Γ^{ab}.
// (First- and second-kind coordinates agree on layer 1, all corrections being
// higher-layer.)
template <class R>
std::vector<R> toral_projection(const GroupElement<R>& g) {
    std::vector<R> out;
    for (int i : g.algebra().layer_indices(1)) out.push_back(g.second[static_cast<std::size_t>(i)]);
    return out;
}

template <class R>
R fiber_coordinate(const GroupElement<R>& g) {
    return g.second[0];
}

// ---------------------------------------------------------------------------
// Lattice construction and reduction.

namespace detail {

inline bool rational_is_integer(const Rational& r) { return denominator(r) == 1; }

}  // namespace detail

inline GradedNilAlgebra lattice_adapted(const GradedNilAlgebra& alg);

// Certifies that integer second-kind vectors form a subgroup: all structure
// constants must be integers, products of basis generators must land on
// integer vectors, and a sample of random integer words must close up under
// the group law.  Fails loudly otherwise — reduction would silently produce
// wrong fundamental-domain points on a non-integral basis.  Bases whose
// integer span does not close (the free and filiform families: BCH introduces
// halves on layer 3 and sixths on layer 4) have a divided-power rebasing
// available through lattice_adapted().
inline Lattice make_lattice(const GradedNilAlgebra& alg, int scale = 1) {
    if (scale < 1) throw std::invalid_argument("make_lattice: scale must be positive");
    for (int a = 0; a < alg.dim(); ++a)
        for (int b = 0; b < alg.dim(); ++b)
            for (const auto& [l, c] : alg.row(a, b))
                if (!detail::rational_is_integer(c))
                    throw std::invalid_argument(
                        "make_lattice: structure constant [" + alg.basis_name(a) + "," +
                        alg.basis_name(b) + "] has non-integer coefficient " + to_string(c) +
                        " on " + alg.basis_name(l) + "; register a rescaled basis first");
    // Closure check on generator pairs: exp(e_a)·exp(e_b) must have integer
    // second-kind coordinates.
    for (int a = 0; a < alg.dim(); ++a)
        for (int b = 0; b < alg.dim(); ++b) {
            GroupElement<Rational> ga =
                group_from_first_kind(alg, detail::axis_vector(alg, a, Rational(1)));
            GroupElement<Rational> gb =
                group_from_first_kind(alg, detail::axis_vector(alg, b, Rational(1)));
            GroupElement<Rational> prod = multiply(ga, gb);
            for (const Rational& c : prod.second)
                if (!detail::rational_is_integer(c))
                    throw std::invalid_argument(
                        "make_lattice: generator product exp(" + alg.basis_name(a) + ")·exp(" +
                        alg.basis_name(b) + ") leaves the integer lattice (coordinate " +
                        to_string(c) + "); use lattice_adapted() for a divided-power basis");
        }
    return {&alg, scale};
}

// Divided-power rebasing: scales every layer-m basis element by 1/(m−1)!, the
// classical denominators that absorb the BCH fractions, so that integer
// second-kind vectors close up under the group law.  Structure constants stay
// integral (the grading turns each 1/(m−1)! into an integer ratio of
// factorials) and all basis-wise invariants — layers, degrees, spanning ranks
// — are untouched, since the change of basis is diagonal.  Bases that already
// close (Heisenberg, the triangular family) are returned unchanged, with
// their matrix models intact.
inline GradedNilAlgebra lattice_adapted(const GradedNilAlgebra& alg) {
    bool plain_ok = true;
    try {
        make_lattice(alg);
    } catch (const std::invalid_argument&) {
        plain_ok = false;
    }
    if (plain_ok) return alg;
    std::vector<Rational> factorial{Rational(1)};
    for (int m = 1; m <= alg.step(); ++m)
        factorial.push_back(factorial.back() * Rational(m));
    auto den = [&](int basis_index) { return factorial[static_cast<std::size_t>(
                                          alg.layer(basis_index) - 1)]; };
    std::vector<int> layers, gens;
    std::vector<std::string> names;
    for (int i = 0; i < alg.dim(); ++i) {
        layers.push_back(alg.layer(i));
        names.push_back(alg.basis_name(i));
    }
    for (int g : alg.generators()) gens.push_back(g);
    GradedNilAlgebra out(alg.name() + ":lattice", layers, names, gens);
    for (int a = 0; a < alg.dim(); ++a)
        for (int b = a + 1; b < alg.dim(); ++b) {
            auto row = alg.row(a, b);
            if (row.empty()) continue;
            std::vector<std::pair<int, Rational>> rescaled;
            for (const auto& [l, c] : row)
                rescaled.push_back({l, c * den(l) / (den(a) * den(b))});
            out.set_bracket(a, b, rescaled);
        }
    out.validate_grading();
    // The rebased integer span must now close; a failure here means the
    // divided-power pattern does not cover this algebra.
    make_lattice(out);
    return out;
}

// The group element of a lattice word, i.e. the element with the given
// integer second-kind coordinates.
template <class R>
GroupElement<R> lattice_element(const Lattice& lat, const std::vector<Int>& word) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (static_cast<int>(word.size()) != alg.dim())
        throw std::invalid_argument("lattice_element: word length mismatch");
    std::vector<R> coords;
    coords.reserve(word.size());
    for (const Int& n : word) coords.push_back(scalar_from<R>(Rational(n)));
    return {&alg, std::move(coords)};
}

template <class R>
struct Reduction {
    GroupElement<R> point;  // all second-kind coordinates in [0,1)
    std::vector<Int> word;  // γ with γ·point = input; its coordinates ARE the word
};

// Peels coordinates in basis order: at stage i we read the current
// second-kind coordinate x_i (by peeling the earlier slots off a scratch
// copy), left-multiply the element by exp(−⌊x_i⌋ e_i), and recompute the
// disturbed tail through the group law on the next stage.  One pass over the
// basis suffices because with a layer-ordered basis the correction at slot i
// never changes slots ≤ i.  With scale m > 1 the peeled multiples are the
// nearest lower multiples of m and the fundamental domain becomes [0,m)^d.
template <class R>
Reduction<R> reduce_mod_lattice(const Lattice& lat, const GroupElement<R>& g) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (g.alg != lat.alg) throw std::invalid_argument("reduce_mod_lattice: algebra mismatch");
    const Int m(lat.scale);
    GroupElement<R> point = g;
    // Correct the first out-of-range slot, re-derive the coordinates through
    // the group law, repeat.  A correction at slot i never disturbs slots
    // < i, so the first bad index is monotone and the loop ends within dim
    // rounds in exact arithmetic.  The float flavor floors with a small snap
    // tolerance — otherwise a coordinate oscillating between −1e−16 and 1.0
    // under re-rounding would cycle forever — and tiny negatives left by the
    // snap are clamped to 0 afterwards.
    auto fuzzy_floor = [](const R& x) {
        if constexpr (std::is_same_v<R, double>)
            return Int(static_cast<long long>(std::floor(x + 1e-12)));
        else
            return scalar_floor(x);
    };
    const int guard = 64 * alg.dim();
    int round = 0;
    for (; round < guard; ++round) {
        int bad = -1;
        Int n(0);
        for (int i = 0; i < alg.dim(); ++i) {
            Int ni = fuzzy_floor(point.second[static_cast<std::size_t>(i)]);
            if (lat.scale != 1) {
                // floor to the nearest lower multiple of the scale
                Int q = ni / m;
                if (ni % m != 0 && ni < 0) q -= 1;
                ni = q * m;
            }
            if (ni != 0) {
                bad = i;
                n = ni;
                break;
            }
        }
        if (bad < 0) break;
        std::vector<R> w =
            alg.bch(detail::axis_vector(alg, bad, scalar_from<R>(Rational(-n))), first_kind(point));
        point = group_from_first_kind(alg, std::move(w));
    }
    if (round == guard)
        throw std::runtime_error("reduce_mod_lattice: peeling did not settle within " +
                                 std::to_string(guard) + " rounds");
    if constexpr (std::is_same_v<R, double>) {
        for (R& c : point.second)
            if (c < 0.0 && c > -1e-9) c = 0.0;
    }
    // The word is read off γ = g·point⁻¹, whose coordinates are integers
    // (exactly in the exact flavors, to rounding error in float).
    GroupElement<R> gamma = multiply(g, group_inverse(point));
    std::vector<Int> word;
    word.reserve(gamma.second.size());
    for (const R& c : gamma.second) word.push_back(scalar_round(c));
    return {std::move(point), std::move(word)};
}

// ---------------------------------------------------------------------------
// Nilflow.

// Frequency data of the nilflow.  The generator is
//     X_α = log( exp(−ξ) · exp(Σ α_i η_i) ),
// so that exp(X_α) = exp(ξ)⁻¹·exp(Σ α_i η_i) exactly; this is the form whose
// time-1 map returns the transverse section to itself, making the return
// index an integer.  `alpha` has one entry per ideal basis element (layer-1
// entries are the toral frequencies; higher entries are usually zero).
template <class R>
struct FlowSpec {
    const GradedNilAlgebra* alg = nullptr;
    std::vector<R> alpha;      // length dim−1
    std::vector<R> generator;  // X_α as a full coefficient vector

    const GradedNilAlgebra& algebra() const { return *alg; }
};

template <class R>
FlowSpec<R> make_flow(const GradedNilAlgebra& alg, std::vector<R> alpha) {
    if (static_cast<int>(alpha.size()) != alg.dim() - 1)
        throw std::invalid_argument("make_flow: expected " + std::to_string(alg.dim() - 1) +
                                    " frequencies (one per ideal basis element), got " +
                                    std::to_string(alpha.size()));
    std::vector<R> ideal(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    for (int i = 1; i < alg.dim(); ++i) ideal[static_cast<std::size_t>(i)] = alpha[i - 1];
    std::vector<R> minus_xi(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    minus_xi[0] = scalar_from<R>(Rational(-1));
    std::vector<R> gen = alg.bch(minus_xi, ideal);
    return {&alg, std::move(alpha), std::move(gen)};
}

// x·exp(t·X), reduced mod Γ.  The base-torus projection advances linearly by
// t·(layer-1 coefficients of X) — exactly in the exact flavors.
template <class R>
GroupElement<R> flow_step(const Lattice& lat, const GroupElement<R>& x, const FlowSpec<R>& spec,
                          const std::type_identity_t<R>& t) {
    const GradedNilAlgebra& alg = lat.algebra();
    std::vector<R> step = spec.generator;
    for (R& c : step) c = c * t;
    std::vector<R> w = alg.bch(first_kind(x), step);
    return reduce_mod_lattice(lat, group_from_first_kind(alg, std::move(w))).point;
}

// ---------------------------------------------------------------------------
// Transverse section and return map.

// The section over θ is {Γ exp(θξ) exp(Σ s_i η_i)}; s collects first-kind
// coefficients of the codimension-one ideal (basis elements 2..d).
template <class R>
struct SectionPoint {
    R theta;
    std::vector<R> s;  // length dim−1
};

template <class R>
GroupElement<R> embed_section(const GradedNilAlgebra& alg, const SectionPoint<R>& p) {
    if (static_cast<int>(p.s.size()) != alg.dim() - 1)
        throw std::invalid_argument("embed_section: transverse coordinate length mismatch");
    std::vector<R> ideal(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    for (int i = 1; i < alg.dim(); ++i) ideal[static_cast<std::size_t>(i)] = p.s[i - 1];
    std::vector<R> theta_xi(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    theta_xi[0] = p.theta;
    return group_from_first_kind(alg, alg.bch(theta_xi, ideal));
}

// Reduces mod Γ and splits off the fiber coordinate; the transverse part is
// converted back to first-kind coefficients of the ideal.  Applying this to
// any Γ-representative of a section point yields the same canonical result,
// which is what the two return-map routes are compared through.
template <class R>
SectionPoint<R> extract_section(const Lattice& lat, const GroupElement<R>& g) {
    const GradedNilAlgebra& alg = lat.algebra();
    GroupElement<R> red = reduce_mod_lattice(lat, g).point;
    // Re-assemble the tail exp(x_2 e_2)···exp(x_d e_d) as one exponential.
    std::vector<R> w(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    for (int i = alg.dim() - 1; i >= 1; --i)
        w = alg.bch(detail::axis_vector(alg, i, red.second[static_cast<std::size_t>(i)]), w);
    std::vector<R> s(w.begin() + 1, w.end());
    return {red.second[0], std::move(s)};
}

template <class R>
SectionPoint<R> canonical_section(const Lattice& lat, const SectionPoint<R>& p) {
    return extract_section(lat, embed_section(lat.algebra(), p));
}

namespace detail {

inline Int power(const Int& r, int j) {
    Int out(1);
    for (int k = 0; k < j; ++k) out *= r;
    return out;
}

// exp(r·ad ξ) as an exact rational matrix: Σ_j r^j/j! (ad ξ)^j, a finite sum
// because ad ξ is nilpotent.
inline RatMatrix exp_ad_xi(const GradedNilAlgebra& alg, const Int& r) {
    const int d = alg.dim();
    RatVec xi(static_cast<std::size_t>(d), Rational(0));
    xi[0] = Rational(1);
    RatMatrix ad = alg.ad(xi);
    RatMatrix out = RatMatrix::identity(static_cast<std::size_t>(d));
    RatMatrix pow = RatMatrix::identity(static_cast<std::size_t>(d));
    Rational fact(1);
    for (int j = 1; j < alg.step(); ++j) {
        pow = pow * ad;
        fact *= Rational(j);
        bool zero = true;
        for (std::size_t a = 0; a < static_cast<std::size_t>(d) && zero; ++a)
            for (std::size_t b = 0; b < static_cast<std::size_t>(d); ++b)
                if (pow(a, b) != 0) {
                    zero = false;
                    break;
                }
        if (zero) break;
        Rational coef = Rational(power(r, j)) / fact;
        for (std::size_t a = 0; a < static_cast<std::size_t>(d); ++a)
            for (std::size_t b = 0; b < static_cast<std::size_t>(d); ++b)
                out(a, b) += coef * pow(a, b);
    }
    return out;
}

template <class R>
std::vector<R> apply_rat_matrix(const RatMatrix& m, const std::vector<R>& v) {
    std::vector<R> out(v.size(), scalar_from<R>(Rational(0)));
    for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = 0; b < v.size(); ++b) {
            // skip exact zeros to keep the flavor arithmetic lean
            const Rational& c = m(a, b);
            if (c == 0) continue;
            out[a] += scalar_from<R>(c) * v[b];
        }
    return out;
}

}  // namespace detail

// Closed form of the r-th return Φ^r.  Writing x = exp(ξ) and A = Σ α_i η_i,
// iterating the time-1 map gives
//     Γ exp(θξ) exp(Σ s_i η_i) exp(r X_α)
//       = Γ exp(θξ) exp( e^{r·ad ξ} Σ s_i η_i ) · exp( log(x^r exp(r X_α)) ),
// and log(x^r exp(rX_α)) = bch(rξ, rX_α) lies in the ideal.  Both factors on
// the right are ideal exponentials, so the new transverse coordinate is a
// single BCH product — a polynomial in r and s evaluated here at the given
// integer r, in exact arithmetic for the exact flavors.
template <class R>
SectionPoint<R> return_map_closed(const Lattice& lat, const SectionPoint<R>& p,
                                  const FlowSpec<R>& spec, const Int& r) {
    const GradedNilAlgebra& alg = lat.algebra();
    std::vector<R> s_full(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    for (int i = 1; i < alg.dim(); ++i) s_full[static_cast<std::size_t>(i)] = p.s[i - 1];
    std::vector<R> conj = detail::apply_rat_matrix<R>(detail::exp_ad_xi(alg, r), s_full);
    std::vector<R> r_xi(static_cast<std::size_t>(alg.dim()), scalar_from<R>(Rational(0)));
    r_xi[0] = scalar_from<R>(Rational(r));
    std::vector<R> r_gen = spec.generator;
    for (R& c : r_gen) c = scalar_times_int(c, r);
    std::vector<R> drift = alg.bch(r_xi, r_gen);
    std::vector<R> new_s = alg.bch(conj, drift);
    // new_s lies in the ideal: its ξ-coefficient cancels identically.
    SectionPoint<R> out{p.theta, std::vector<R>(new_s.begin() + 1, new_s.end())};
    return canonical_section(lat, out);
}

// Direct route: r composed time-1 flow steps with reduction after each one.
template <class R>
SectionPoint<R> return_map_iterated(const Lattice& lat, const SectionPoint<R>& p,
                                    const FlowSpec<R>& spec, const Int& r) {
    const GradedNilAlgebra& alg = lat.algebra();
    GroupElement<R> g = reduce_mod_lattice(lat, embed_section(alg, p)).point;
    const R unit = scalar_from<R>(Rational(r >= 0 ? 1 : -1));
    Int n = r >= 0 ? r : -r;
    for (Int k = 0; k < n; ++k) g = flow_step(lat, g, spec, unit);
    return extract_section(lat, g);
}

// Wrap-aware sup distance between two section points with the same θ-fiber.
template <class R>
double section_distance(const SectionPoint<R>& a, const SectionPoint<R>& b) {
    double out = 0.0;
    auto wrap = [](double x) {
        double f = x - std::floor(x);
        return std::min(f, 1.0 - f);
    };
    out = wrap(scalar_to_double(a.theta) - scalar_to_double(b.theta));
    for (std::size_t i = 0; i < a.s.size(); ++i)
        out = std::max(out, wrap(scalar_to_double(a.s[i]) - scalar_to_double(b.s[i])));
    return out;
}

// The production entry point evaluates both routes and insists they agree —
// a disagreement means a BCH or reduction bug, so it throws rather than
// returning a silently wrong section point.
template <class R>
SectionPoint<R> return_map(const Lattice& lat, const SectionPoint<R>& p, const FlowSpec<R>& spec,
                           const Int& r, double tol = 1e-9) {
    SectionPoint<R> closed = return_map_closed(lat, p, spec, r);
    SectionPoint<R> direct = return_map_iterated(lat, p, spec, r);
    double err = section_distance(closed, direct);
    if (err > tol)
        throw std::runtime_error("return_map: closed form and iterated flow disagree by " +
                                 std::to_string(err) + " at r = " + r.str());
    return closed;
}

// ---------------------------------------------------------------------------
// Lattice geometry: minimal gap and injectivity radius.

struct LatticeGeometry {
    Rational c_gamma;            // min over enumerated γ ≠ id of ‖log γ‖_∞
    std::vector<Int> witness;    // a word attaining the minimum
    Rational injectivity;        // registered analytic value, or c_gamma/2
    bool injectivity_registered; // true when the analytic value 1/2 is used
};

// Enumerates all nontrivial words with |n_i| ≤ radius·scale (stepping by the
// sublattice scale) and minimizes the sup norm of the first-kind coordinates.
// The injectivity radius of the section basis is the analytic value 1/2 when
// `registered_injectivity` is left at its default: the return time of the
// flow to a codimension-one subgroup orbit is 1, so displacements up to half
// a period stay injective.  Pass std::nullopt to fall back to the
// enumeration-derived lower bound c_Γ/2.
inline LatticeGeometry lattice_gap(const Lattice& lat, int radius,
                                   std::optional<Rational> registered_injectivity = Rational(1,
                                                                                            2)) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (radius < 1) throw std::invalid_argument("lattice_gap: radius must be >= 1");
    const int d = alg.dim();
    std::vector<Int> word(static_cast<std::size_t>(d), Int(0));
    std::vector<int> digits(static_cast<std::size_t>(d), -radius);
    bool found = false;
    Rational best(0);
    std::vector<Int> best_word;
    while (true) {
        for (int i = 0; i < d; ++i)
            word[static_cast<std::size_t>(i)] = Int(digits[static_cast<std::size_t>(i)]) *
                                                Int(lat.scale);
        bool trivial = true;
        for (const Int& n : word)
            if (n != 0) trivial = false;
        if (!trivial) {
            GroupElement<Rational> gamma = lattice_element<Rational>(lat, word);
            RatVec w = first_kind(gamma);
            Rational norm(0);
            for (const Rational& c : w) {
                Rational a = c < 0 ? -c : c;
                if (a > norm) norm = a;
            }
            if (!found || norm < best) {
                found = true;
                best = norm;
                best_word = word;
            }
        }
        int i = 0;
        for (; i < d; ++i) {
            if (digits[static_cast<std::size_t>(i)] < radius) {
                ++digits[static_cast<std::size_t>(i)];
                break;
            }
            digits[static_cast<std::size_t>(i)] = -radius;
        }
        if (i == d) break;
    }
    if (!found)
        throw std::runtime_error("lattice_gap: no nontrivial word within the enumeration budget");
    LatticeGeometry out;
    out.c_gamma = best;
    out.witness = std::move(best_word);
    if (registered_injectivity) {
        out.injectivity = *registered_injectivity;
        out.injectivity_registered = true;
    } else {
        out.injectivity = best / Rational(2);
        out.injectivity_registered = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Long orbits.
//
// Orbits re-reduce after every step and keep only fundamental-domain
// coordinates plus winding counters; the base-torus phase is additionally
// accumulated with compensated summation so that 10⁶+-step runs do not drift.
// Winding counters add per-coordinate words from each reduction; on layer 1
// (the abelianization) that sum is exactly the total winding.

template <class R>
class Orbit {
  public:
    Orbit(const Lattice& lat, GroupElement<R> start, FlowSpec<R> spec, R dt)
        : lat_(&lat),
          spec_(std::move(spec)),
          dt_(std::move(dt)),
          point_(reduce_mod_lattice(lat, start).point),
          winding_(static_cast<std::size_t>(lat.algebra().dim()), Int(0)),
          phase_(toral_dim(), 0.0),
          comp_(toral_dim(), 0.0),
          steps_(0) {
        // seed the phase with the starting layer-1 coordinates
        std::vector<R> pr = toral_projection(point_);
        for (std::size_t i = 0; i < pr.size(); ++i) phase_[i] = scalar_to_double(pr[i]);
    }

    void advance(long long steps) {
        const GradedNilAlgebra& alg = lat_->algebra();
        std::vector<R> step_vec = spec_.generator;
        for (R& c : step_vec) c = c * dt_;
        std::vector<int> l1 = alg.layer_indices(1);
        for (long long k = 0; k < steps; ++k) {
            std::vector<R> w = alg.bch(first_kind(point_), step_vec);
            Reduction<R> red = reduce_mod_lattice(*lat_, group_from_first_kind(alg, std::move(w)));
            point_ = std::move(red.point);
            for (std::size_t i = 0; i < winding_.size(); ++i) winding_[i] += red.word[i];
            // compensated accumulation of the linear toral phase
            for (std::size_t i = 0; i < l1.size(); ++i) {
                double inc = scalar_to_double(spec_.generator[static_cast<std::size_t>(
                                 l1[i])]) *
                             scalar_to_double(dt_);
                double y = inc - comp_[i];
                double t = phase_[i] + y;
                comp_[i] = (t - phase_[i]) - y;
                phase_[i] = t;
            }
            ++steps_;
        }
    }

    const GroupElement<R>& point() const { return point_; }
    const std::vector<Int>& winding() const { return winding_; }
    const std::vector<double>& toral_phase() const { return phase_; }
    long long steps() const { return steps_; }

  private:
    std::size_t toral_dim() const {
        return lat_->algebra().layer_indices(1).size();
    }

    const Lattice* lat_;
    FlowSpec<R> spec_;
    R dt_;
    GroupElement<R> point_;
    std::vector<Int> winding_;
    std::vector<double> phase_;
    std::vector<double> comp_;
    long long steps_;
};

}  // namespace nilflow
