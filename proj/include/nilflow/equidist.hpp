#pragma once
/*
 * Observables on the nilmanifold, Birkhoff averages along nilflows,
 * generalized Weyl sums driven by return-map phase polynomials, dyadic box
 * discrepancy, and decay-exponent fitting.
 *
 * Three observable families are supported.
 *  - toral characters e^{2πi⟨m, pr(g)⟩}: pulled back from the base torus
 *    (layer-1 coordinates shift by integers under the lattice, so these are
 *    genuinely invariant); exact zero mean whenever m ≠ 0.
 *  - periodized bumps: a product of C^∞ compactly supported profiles in the
 *    second-kind coordinates, summed over lattice translates.  When the
 *    support sits strictly inside the open unit cell, the reduced
 *    representative is the only translate that can contribute and the
 *    periodization tail is exactly zero; off-center supports enumerate words
 *    within a truncation radius.  The mean is subtracted (product quadrature
 *    of the 1-D profile), so the stored observable is zero-mean up to the
 *    quadrature certificate.
 *  - return phases e^{2πi⟨m, s⟩} on the transverse section: these are
 *    section-level observables, not functions on the manifold; their Birkhoff
 *    sums at integer return times are exactly the generalized Weyl sums whose
 *    cancellation the decay bounds describe.
 *
 * Orbit integrals to T ≈ 10⁷ at dt = 1/64 need ~10⁹ flow steps, far beyond
 * the exact group law.  For step ≤ 3 algebras the right-translation by the
 * fixed step element and the unit lattice peels are polynomial maps of
 * x-degree ≤ 2 in the second-kind coordinates, so they are compiled once into
 * sparse quadratic maps by exact probing of the generic multiplication (probe
 * at 0, e_j, 2e_j, e_j+e_l and solve; every compiled map is then revalidated
 * against the generic route at random points).  The hot loop is pure double
 * arithmetic with no allocation.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nilflow/algebra.hpp"
#include "nilflow/nilmanifold.hpp"

namespace nilflow {

// ---------------------------------------------------------------------------
// Observables.

struct Observable {
    enum class Kind { toral_character, periodized_bump, return_phase };
    Kind kind = Kind::toral_character;
    std::vector<long long> m;          // character frequencies / section phases
    std::vector<double> center, width; // bump geometry, one entry per coordinate
    int radius = 0;                    // lattice-word truncation radius (bump)
    bool interior = false;             // support certified inside the open cell
    bool zero_mean = false;
    double mean_value = 0.0;           // constant subtracted from the raw bump
    double sup = 1.0;                  // sup |f| before mean subtraction
};

namespace detail {

// C^∞ bump profile on (−1, 1), normalized to ψ(0) = 1.
inline double bump_profile(double u) {
    double s = 1.0 - u * u;
    if (s <= 0.0) return 0.0;
    return std::exp(1.0 - 1.0 / s);
}

// ∫_{−1}^{1} ψ(u) du by Simpson on a fine grid; the profile is smooth and
// flat to all orders at ±1, so this converges far beyond the 1e−6 mean
// certificate.
inline double bump_profile_integral() {
    static const double cached = [] {
        const int n = 1 << 15;  // even
        const double h = 2.0 / n;
        double sum = bump_profile(-1.0) + bump_profile(1.0);
        for (int i = 1; i < n; ++i) sum += bump_profile(-1.0 + i * h) * (i % 2 ? 4.0 : 2.0);
        return sum * h / 3.0;
    }();
    return cached;
}

inline std::vector<int> layer1_slots(const GradedNilAlgebra& alg) {
    std::vector<int> out;
    for (int i = 0; i < alg.dim(); ++i)
        if (alg.layer(i) == 1) out.push_back(i);
    return out;
}

}  // namespace detail

inline Observable toral_character(const GradedNilAlgebra& alg, std::vector<long long> m) {
    const std::size_t n1 = detail::layer1_slots(alg).size();
    if (m.size() != n1)
        throw std::invalid_argument("toral_character: expected " + std::to_string(n1) +
                                    " frequencies (one per layer-1 direction), got " +
                                    std::to_string(m.size()));
    Observable f;
    f.kind = Observable::Kind::toral_character;
    f.m = std::move(m);
    for (long long mi : f.m)
        if (mi != 0) f.zero_mean = true;
    return f;
}

// Bump with center c and half-widths w per second-kind coordinate, periodized
// over the lattice.  The cell is [0, scale)^dim; when the support is interior
// to the open cell the truncation radius is irrelevant (tail exactly zero).
inline Observable periodized_bump(const Lattice& lat, std::vector<double> center,
                                  std::vector<double> width, int radius = 0,
                                  bool zero_mean = true) {
    const GradedNilAlgebra& alg = lat.algebra();
    const std::size_t d = static_cast<std::size_t>(alg.dim());
    if (center.size() != d || width.size() != d)
        throw std::invalid_argument("periodized_bump: center/width must have one entry per "
                                    "coordinate (" + std::to_string(d) + ")");
    Observable f;
    f.kind = Observable::Kind::periodized_bump;
    f.center = std::move(center);
    f.width = std::move(width);
    f.radius = radius;
    f.interior = true;
    double mean = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
        if (f.width[i] <= 0)
            throw std::invalid_argument("periodized_bump: widths must be positive");
        if (f.center[i] - f.width[i] <= 0.0 || f.center[i] + f.width[i] >= double(lat.scale))
            f.interior = false;
        mean *= f.width[i] * detail::bump_profile_integral();
    }
    // Haar measure is Lebesgue in these coordinates and the fundamental cell
    // has volume scale^dim, so the mean of the periodization is the full
    // integral of the raw bump over that volume.
    for (std::size_t i = 0; i < d; ++i) mean /= double(lat.scale);
    if (!f.interior && radius < 1)
        throw std::invalid_argument(
            "periodized_bump: support touches the cell boundary; a truncation radius >= 1 is "
            "required for the word periodization");
    f.zero_mean = zero_mean;
    f.mean_value = zero_mean ? mean : 0.0;
    return f;
}

inline Observable return_phase(const GradedNilAlgebra& alg, std::vector<long long> m) {
    if (static_cast<int>(m.size()) != alg.dim() - 1)
        throw std::invalid_argument("return_phase: expected " + std::to_string(alg.dim() - 1) +
                                    " phases (one per ideal coordinate), got " +
                                    std::to_string(m.size()));
    Observable f;
    f.kind = Observable::Kind::return_phase;
    f.m = std::move(m);
    for (long long mi : f.m)
        if (mi != 0) f.zero_mean = true;
    return f;
}

namespace detail {

inline double bump_raw(const Observable& f, const std::vector<double>& coords) {
    double v = 1.0;
    for (std::size_t i = 0; i < coords.size() && v != 0.0; ++i)
        v *= bump_profile((coords[i] - f.center[i]) / f.width[i]);
    return v;
}

}  // namespace detail

// Value of a manifold observable at a reduced point.  Bumps with non-interior
// support walk the lattice words within the truncation radius and verify that
// the outermost shell no longer contributes (otherwise the radius was too
// small and the value would be silently wrong).
inline std::complex<double> observable_value(const Lattice& lat, const Observable& f,
                                             const GroupElement<double>& g) {
    const GradedNilAlgebra& alg = lat.algebra();
    switch (f.kind) {
        case Observable::Kind::toral_character: {
            const std::vector<int> slots = detail::layer1_slots(alg);
            double phase = 0.0;
            for (std::size_t k = 0; k < slots.size(); ++k)
                phase += double(f.m[k]) * g.second[static_cast<std::size_t>(slots[k])];
            return std::polar(1.0, 2.0 * M_PI * phase);
        }
        case Observable::Kind::periodized_bump: {
            double v;
            if (f.interior) {
                v = detail::bump_raw(f, g.second);
            } else {
                // enumerate one shell beyond the requested radius: the extra
                // shell must contribute nothing, otherwise the truncation was
                // too tight and the value would silently be wrong
                v = 0.0;
                double outer = 0.0;
                const int d = alg.dim();
                const int R = f.radius + 1;
                std::vector<Int> word(static_cast<std::size_t>(d), Int(0));
                std::vector<int> digit(static_cast<std::size_t>(d), -R);
                while (true) {
                    int maxabs = 0;
                    for (int i = 0; i < d; ++i) {
                        word[static_cast<std::size_t>(i)] = digit[static_cast<std::size_t>(i)] *
                                                            lat.scale;
                        maxabs = std::max(maxabs, std::abs(digit[static_cast<std::size_t>(i)]));
                    }
                    double contrib =
                        detail::bump_raw(f, multiply(lattice_element<double>(lat, word), g).second);
                    v += contrib;
                    if (maxabs == R) outer += std::abs(contrib);
                    int i = 0;
                    for (; i < d; ++i) {
                        if (++digit[static_cast<std::size_t>(i)] <= R) break;
                        digit[static_cast<std::size_t>(i)] = -R;
                    }
                    if (i == d) break;
                }
                if (outer > 1e-12)
                    throw std::runtime_error(
                        "periodized_bump: truncation radius too small (shell beyond it still "
                        "contributes " + std::to_string(outer) + ")");
            }
            return {v - f.mean_value, 0.0};
        }
        case Observable::Kind::return_phase:
            throw std::invalid_argument(
                "observable_value: return phases live on the section; use birkhoff_average, "
                "which samples them at integer return times");
    }
    throw std::logic_error("observable_value: unreachable");
}

// ---------------------------------------------------------------------------
// Compiled fast stepping.

namespace detail {

// A second-kind coordinate map of the form
//   out_i = in_i + c_i + Σ_j B_ij in_j + Σ_{j≤l} Q_ijl in_j in_l,
// stored sparsely.  Right translation by a fixed group element and left
// translation by a fixed lattice word both have this shape on step ≤ 3
// algebras (every monomial carries the fixed element at least once, so the
// x-degree is at most step − 1 ≤ 2).
struct CompiledMap {
    int dim = 0;
    struct Term {
        int target;
        int j, l;  // j < 0: constant; l < 0: linear in j; else quadratic j·l
        double coef;
    };
    std::vector<Term> terms;

    void apply(const double* in, double* out) const {
        for (int i = 0; i < dim; ++i) out[i] = in[i];
        for (const Term& t : terms) {
            double v = t.coef;
            if (t.j >= 0) v *= in[t.j];
            if (t.l >= 0) v *= in[t.l];
            out[t.target] += v;
        }
    }
};

// Compile an arbitrary map of the shape above by probing it at 0, e_j, 2e_j
// and e_j + e_l, then validate against the original at random points.
template <class F>
CompiledMap compile_quadratic_map(int dim, F&& eval, const char* what) {
    CompiledMap map;
    map.dim = dim;
    auto probe = [&](const std::vector<double>& x) { return eval(x); };
    const std::vector<double> zero(static_cast<std::size_t>(dim), 0.0);
    const std::vector<double> f0 = probe(zero);
    std::vector<std::vector<double>> f1(static_cast<std::size_t>(dim)),
        f2(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
        std::vector<double> x = zero;
        x[static_cast<std::size_t>(j)] = 1.0;
        f1[static_cast<std::size_t>(j)] = probe(x);
        x[static_cast<std::size_t>(j)] = 2.0;
        f2[static_cast<std::size_t>(j)] = probe(x);
    }
    const double cut = 1e-13;
    for (int i = 0; i < dim; ++i) {
        double c = f0[static_cast<std::size_t>(i)];
        if (std::abs(c) > cut) map.terms.push_back({i, -1, -1, c});
        for (int j = 0; j < dim; ++j) {
            double delta = (i == j) ? 1.0 : 0.0;
            double a1 = f1[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - delta - c;
            double a2 =
                f2[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - 2.0 * delta - c;
            double q = (a2 - 2.0 * a1) / 2.0;
            double b = a1 - q;
            if (std::abs(b) > cut) map.terms.push_back({i, j, -1, b});
            if (std::abs(q) > cut) map.terms.push_back({i, j, j, q});
        }
    }
    for (int j = 0; j < dim; ++j)
        for (int l = j + 1; l < dim; ++l) {
            std::vector<double> x = zero;
            x[static_cast<std::size_t>(j)] = 1.0;
            x[static_cast<std::size_t>(l)] = 1.0;
            std::vector<double> fjl = probe(x);
            std::vector<double> expect(static_cast<std::size_t>(dim));
            map.apply(x.data(), expect.data());
            for (int i = 0; i < dim; ++i) {
                double q = fjl[static_cast<std::size_t>(i)] - expect[static_cast<std::size_t>(i)];
                if (std::abs(q) > cut) map.terms.push_back({i, j, l, q});
            }
        }
    // validation: the compiled map must reproduce the generic route
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    auto rnd = [&state] {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        return double(state % 2000001) / 1000000.0 - 1.0;
    };
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(dim));
        for (double& c : x) c = rnd();
        std::vector<double> got(static_cast<std::size_t>(dim));
        map.apply(x.data(), got.data());
        std::vector<double> want = probe(x);
        for (int i = 0; i < dim; ++i)
            if (std::abs(got[static_cast<std::size_t>(i)] - want[static_cast<std::size_t>(i)]) >
                1e-9)
                throw std::runtime_error(std::string("compile_quadratic_map: ") + what +
                                         " is not quadratic in the coordinates (step too high?)");
    }
    return map;
}

}  // namespace detail

// A compiled flow: one right-translation map for the fixed time step plus a
// pair of unit lattice peels per coordinate slot.  Compilation is available
// for step ≤ 3 algebras on the unit-scale lattice.
struct FastFlow {
    const Lattice* lat = nullptr;
    double dt = 0.0;
    detail::CompiledMap step;
    std::vector<detail::CompiledMap> peel_dn, peel_up;
};

inline bool fast_flow_eligible(const Lattice& lat) {
    return lat.algebra().step() <= 3 && lat.scale == 1;
}

inline FastFlow compile_fast_flow(const Lattice& lat, const FlowSpec<double>& spec, double dt) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (!fast_flow_eligible(lat))
        throw std::invalid_argument(
            "compile_fast_flow: compiled stepping needs step <= 3 and a unit-scale lattice "
            "(algebra " + alg.name() + ", step " + std::to_string(alg.step()) + ", scale " +
            std::to_string(lat.scale) + ")");
    if (dt <= 0) throw std::invalid_argument("compile_fast_flow: dt must be positive");
    FastFlow ff;
    ff.lat = &lat;
    ff.dt = dt;

    std::vector<double> w = spec.generator;
    for (double& c : w) c *= dt;
    const GroupElement<double> h = group_from_first_kind(alg, std::move(w));
    const int d = alg.dim();
    auto coords_of = [&](const GroupElement<double>& g) { return g.second; };
    ff.step = detail::compile_quadratic_map(
        d,
        [&](const std::vector<double>& x) {
            return coords_of(multiply(group_from_second_kind(alg, x), h));
        },
        "right step");
    for (int slot = 0; slot < d; ++slot) {
        for (int sgn : {-1, +1}) {
            std::vector<Int> word(static_cast<std::size_t>(d), Int(0));
            word[static_cast<std::size_t>(slot)] = sgn;
            const GroupElement<double> gamma = lattice_element<double>(lat, word);
            detail::CompiledMap m = detail::compile_quadratic_map(
                d,
                [&](const std::vector<double>& x) {
                    return coords_of(multiply(gamma, group_from_second_kind(alg, x)));
                },
                "lattice peel");
            (sgn < 0 ? ff.peel_dn : ff.peel_up).push_back(std::move(m));
        }
    }
    return ff;
}

// One orbit driven by a compiled flow.  Coordinates stay reduced to [0, 1)^d;
// a peel at slot i never disturbs slots < i, so the greedy ascending sweep
// settles quickly.
class FastOrbit {
  public:
    FastOrbit(const FastFlow& ff, std::vector<double> start) : ff_(&ff), x_(std::move(start)) {
        const int d = ff.lat->algebra().dim();
        if (static_cast<int>(x_.size()) != d)
            throw std::invalid_argument("FastOrbit: start coordinate length mismatch");
        scratch_.assign(x_.size(), 0.0);
        reduce();
    }

    void advance() {
        ff_->step.apply(x_.data(), scratch_.data());
        x_.swap(scratch_);
        reduce();
    }

    const std::vector<double>& coords() const { return x_; }

  private:
    // Keeps each coordinate inside the cell with a fuzzy membership test:
    // slot i is acceptable when c ∈ [−1e−12, 1−1e−12), which prevents the
    // ±1 ulp ping-pong at the boundary without ever short-circuiting a peel
    // (a bare coordinate snap across the boundary would silently move the
    // point to a different fiber, because a genuine peel also adjusts the
    // later slots).  Tiny negatives the test admits are clamped to 0.
    void reduce() {
        const int d = static_cast<int>(x_.size());
        int guard = 16 * d;
        for (int i = 0; i < d;) {
            double& c = x_[static_cast<std::size_t>(i)];
            if (c >= -1e-12 && c < 1.0 - 1e-12) {
                if (c < 0.0) c = 0.0;
                ++i;
                continue;
            }
            if (--guard < 0) throw std::runtime_error("FastOrbit: reduction failed to settle");
            const detail::CompiledMap& m = c < 0.0 ? ff_->peel_up[static_cast<std::size_t>(i)]
                                                   : ff_->peel_dn[static_cast<std::size_t>(i)];
            m.apply(x_.data(), scratch_.data());
            x_.swap(scratch_);
        }
    }

    const FastFlow* ff_;
    std::vector<double> x_, scratch_;
};

// ---------------------------------------------------------------------------
// Birkhoff averages and decay series.

namespace detail {

struct KahanComplex {
    double re = 0, im = 0, cre = 0, cim = 0;
    void add(double r, double i) {
        double yr = r - cre, yi = i - cim;
        double tr = re + yr, ti = im + yi;
        cre = (tr - re) - yr;
        cim = (ti - im) - yi;
        re = tr;
        im = ti;
    }
    std::complex<double> value() const { return {re, im}; }
};

}  // namespace detail

// Dyadic checkpoints 2^a ≤ T ≤ 2^b intersected with [lo, hi].
inline std::vector<double> dyadic_checkpoints(double lo, double hi) {
    if (lo <= 0 || hi < lo) throw std::invalid_argument("dyadic_checkpoints: bad range");
    std::vector<double> out;
    for (double t = 1; t <= hi; t *= 2)
        if (t >= lo) out.push_back(t);
    if (out.empty()) throw std::invalid_argument("dyadic_checkpoints: empty range");
    return out;
}

struct DecaySeries {
    std::vector<double> T;
    std::vector<std::complex<double>> value;
    std::vector<double> magnitude;
};

// One pass along the orbit, recording the running trapezoid average at every
// checkpoint.  Uses the compiled stepper when available (mandatory above
// ~10⁶ steps, where the generic group law would take hours).
inline DecaySeries decay_series(const Lattice& lat, const FlowSpec<double>& spec,
                                const Observable& f, const GroupElement<double>& x,
                                std::vector<double> checkpoints, double dt = 1.0 / 64,
                                const FastFlow* ff = nullptr) {
    if (checkpoints.empty()) throw std::invalid_argument("decay_series: no checkpoints");
    std::sort(checkpoints.begin(), checkpoints.end());
    DecaySeries out;
    const GradedNilAlgebra& alg = lat.algebra();

    if (f.kind == Observable::Kind::return_phase) {
        // integer-time sampling of the section phases
        SectionPoint<double> p = extract_section(lat, reduce_mod_lattice(lat, x).point);
        detail::KahanComplex acc;
        long long r = 0;
        for (double T : checkpoints) {
            long long N = std::llround(T);
            if (N < 1) throw std::invalid_argument("decay_series: checkpoint below one return");
            for (; r < N; ++r) {
                double phase = 0.0;
                for (std::size_t k = 0; k < p.s.size(); ++k)
                    phase += double(f.m[k]) * p.s[k];
                acc.add(std::cos(2 * M_PI * phase), std::sin(2 * M_PI * phase));
                p = return_map_closed(lat, p, spec, Int(1));
            }
            out.T.push_back(double(N));
            out.value.push_back(acc.value() / double(N));
            out.magnitude.push_back(std::abs(out.value.back()));
        }
        return out;
    }

    for (double T : checkpoints) {
        const double steps = T / dt;
        if (std::abs(steps - double(std::llround(steps))) > 1e-9)
            throw std::invalid_argument("decay_series: dt must divide every checkpoint");
    }
    const long long Nmax = std::llround(checkpoints.back() / dt);

    std::optional<FastFlow> own;
    if (!ff && fast_flow_eligible(lat) && double(Nmax) > 2e5) {
        own.emplace(compile_fast_flow(lat, spec, dt));
        ff = &*own;
    }
    if (ff && std::abs(ff->dt - dt) > 1e-15)
        throw std::invalid_argument("decay_series: compiled flow was built for a different dt");

    std::size_t next = 0;
    detail::KahanComplex acc;
    double f0re = 0, f0im = 0;

    auto record = [&](long long n, double fre, double fim) {
        while (next < checkpoints.size() &&
               std::llround(checkpoints[next] / dt) == n) {
            double T = checkpoints[next];
            std::complex<double> s = acc.value();
            // trapezoid ends: half weight at t = 0 and t = T
            std::complex<double> avg =
                (s - std::complex<double>(f0re, f0im) * 0.5 - std::complex<double>(fre, fim) * 0.5) *
                (dt / T);
            out.T.push_back(T);
            out.value.push_back(avg);
            out.magnitude.push_back(std::abs(avg));
            ++next;
        }
    };

    if (ff) {
        GroupElement<double> red = reduce_mod_lattice(lat, x).point;
        FastOrbit orbit(*ff, red.second);
        GroupElement<double> probe = group_identity<double>(alg);
        for (long long n = 0; n <= Nmax; ++n) {
            probe.second = orbit.coords();
            std::complex<double> v = observable_value(lat, f, probe);
            if (n == 0) {
                f0re = v.real();
                f0im = v.imag();
            }
            acc.add(v.real(), v.imag());
            record(n, v.real(), v.imag());
            if (n < Nmax) orbit.advance();
        }
    } else {
        GroupElement<double> g = reduce_mod_lattice(lat, x).point;
        for (long long n = 0; n <= Nmax; ++n) {
            std::complex<double> v = observable_value(lat, f, g);
            if (n == 0) {
                f0re = v.real();
                f0im = v.imag();
            }
            acc.add(v.real(), v.imag());
            record(n, v.real(), v.imag());
            if (n < Nmax) g = flow_step(lat, g, spec, dt);
        }
    }
    return out;
}

// (1/T)∫₀^T f(φ^t x) dt by trapezoid quadrature (return phases: integer-time
// Birkhoff mean over ⌊T⌋ returns).
inline std::complex<double> birkhoff_average(const Lattice& lat, const FlowSpec<double>& spec,
                                             const Observable& f, const GroupElement<double>& x,
                                             double T, double dt = 1.0 / 64,
                                             const FastFlow* ff = nullptr) {
    if (T <= 0) throw std::invalid_argument("birkhoff_average: T must be positive");
    DecaySeries s = decay_series(lat, spec, f, x, {T}, dt, ff);
    return s.value.front();
}

// ---------------------------------------------------------------------------
// Generalized Weyl sums.

// (1/N) Σ_{r=0}^{N−1} e^{2πi P(r)} with P(r) = c₀ + c₁ r + … + c_k r^k,
// evaluated by a forward-difference table of depth k on the phase modulo 1.
// All table entries stay in [0, 1): only integer parts are dropped, which
// leaves the exponential untouched, so no magnitude is lost to cancellation
// even at r ≈ 2³³.  Each table level is accumulated with its own
// compensation term, because an uncompensated error at level j integrates
// like N^j along the cascade and would reach ~1e−8 on quadratic phases by
// N = 2²⁰.
inline std::complex<double> weyl_sum(const std::vector<double>& coef, long long N) {
    if (coef.empty()) throw std::invalid_argument("weyl_sum: empty coefficient vector");
    if (N < 1 || N > (1ll << 33)) throw std::invalid_argument("weyl_sum: N out of range");
    const int k = static_cast<int>(coef.size()) - 1;
    // difference table from evaluations of P(0..k) (small arguments: exact-ish)
    std::vector<long double> d(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
        long double p = 0;
        for (int i = k; i >= 0; --i) p = p * j + coef[static_cast<std::size_t>(i)];
        d[static_cast<std::size_t>(j)] = p;
    }
    for (int level = 1; level <= k; ++level)
        for (int j = k; j >= level; --j)
            d[static_cast<std::size_t>(j)] -= d[static_cast<std::size_t>(j - 1)];
    for (long double& v : d) v -= std::floor(v);
    std::vector<long double> comp(static_cast<std::size_t>(k) + 1, 0.0L);

    detail::KahanComplex acc;
    for (long long r = 0; r < N; ++r) {
        double phase = static_cast<double>(d[0] - comp[0]);
        acc.add(std::cos(2 * M_PI * phase), std::sin(2 * M_PI * phase));
        for (int j = 0; j < k; ++j) {
            long double y = (d[static_cast<std::size_t>(j) + 1] -
                             comp[static_cast<std::size_t>(j) + 1]) -
                            comp[static_cast<std::size_t>(j)];
            long double t = d[static_cast<std::size_t>(j)] + y;
            comp[static_cast<std::size_t>(j)] = (t - d[static_cast<std::size_t>(j)]) - y;
            // dropping the integer part is exact (both operands in [1, 2))
            // and leaves the compensation meaningful
            if (t >= 1.0L) t -= 1.0L;
            d[static_cast<std::size_t>(j)] = t;
        }
    }
    return acc.value() / double(N);
}

// Direct-summation oracle sharing no state with the difference kernel.  Each
// monomial c_j r^j is reduced modulo 1 through an exact dyadic split of the
// coefficient: c_j = k_j/2²¹ + lo_j with |lo_j| ≤ 2⁻²², and k_j·r^j mod 2²¹
// is pure modular integer arithmetic, so only the small remainder lo_j·r^j is
// subject to rounding.  The remainder grows like 2⁻²²·N^j, so the oracle is
// honest to ~1e−13 only while N^j ≲ 4e12 per active monomial (quadratics up
// to N ≈ 2·10⁶, quintics up to N ≈ 330); outside that certified range it
// refuses to answer rather than return noise.
inline std::complex<double> weyl_sum_direct(const std::vector<double>& coef, long long N) {
    if (coef.empty()) throw std::invalid_argument("weyl_sum_direct: empty coefficient vector");
    if (N < 1) throw std::invalid_argument("weyl_sum_direct: N out of range");
    const int k = static_cast<int>(coef.size()) - 1;
    const long long M = 1ll << 21;
    std::vector<long long> hi(static_cast<std::size_t>(k) + 1);
    std::vector<long double> lo(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
        double c = coef[static_cast<std::size_t>(j)];
        if (c != 0.0 && std::pow(double(N), j) > 4.0e12)
            throw std::domain_error(
                "weyl_sum_direct: N^" + std::to_string(j) +
                " exceeds the certified accuracy range of the direct oracle");
        long long kk = static_cast<long long>(std::llround(double(c) * double(M)));
        hi[static_cast<std::size_t>(j)] = ((kk % M) + M) % M;
        lo[static_cast<std::size_t>(j)] = static_cast<long double>(c) -
                                          static_cast<long double>(kk) / static_cast<long double>(M);
    }
    detail::KahanComplex acc;
    for (long long r = 0; r < N; ++r) {
        // k_j·r^j mod 2²¹ by modular exponentiation; products stay below 2⁴²
        long long intpart = 0;
        long double lopart = 0;
        long long rj_mod = 1;  // r^j mod 2²¹
        long double rj = 1;
        const long long r_mod = r % M;
        for (int j = 0; j <= k; ++j) {
            intpart = (intpart + hi[static_cast<std::size_t>(j)] * rj_mod) % M;
            lopart += lo[static_cast<std::size_t>(j)] * rj;
            rj_mod = (rj_mod * r_mod) % M;
            rj *= static_cast<long double>(r);
        }
        long double p = static_cast<long double>(intpart) / static_cast<long double>(M) + lopart;
        p -= std::floor(p);
        double phase = static_cast<double>(p);
        acc.add(std::cos(2 * M_PI * phase), std::sin(2 * M_PI * phase));
    }
    return acc.value() / double(N);
}

// ---------------------------------------------------------------------------
// Box discrepancy.

// Max over dyadic cells of |empirical − Lebesgue| at every refinement level
// up to `depth`.  Cells, not anchored boxes: level l splits [0,1)^d into
// 2^{ld} congruent half-open boxes.
inline double discrepancy(const std::vector<std::vector<double>>& pts, int depth) {
    if (pts.empty()) throw std::invalid_argument("discrepancy: no points");
    const int d = static_cast<int>(pts.front().size());
    if (d < 1) throw std::invalid_argument("discrepancy: zero-dimensional points");
    if (depth < 1 || depth > 8) throw std::invalid_argument("discrepancy: depth must be in [1,8]");
    for (const std::vector<double>& p : pts) {
        if (static_cast<int>(p.size()) != d)
            throw std::invalid_argument("discrepancy: ragged point list");
        for (double c : p)
            if (!(c >= 0.0 && c < 1.0))
                throw std::invalid_argument("discrepancy: points must lie in [0,1)^d");
    }
    double worst = 0.0;
    for (int level = 1; level <= depth; ++level) {
        const long long side = 1ll << level;
        long double cells_ld = 1;
        for (int i = 0; i < d; ++i) cells_ld *= side;
        if (cells_ld > double(1 << 24))
            throw std::invalid_argument("discrepancy: cell budget exceeded at depth " +
                                        std::to_string(level));
        const std::size_t cells = static_cast<std::size_t>(cells_ld);
        std::vector<std::int32_t> hist(cells, 0);
        for (const std::vector<double>& p : pts) {
            std::size_t idx = 0;
            for (int i = 0; i < d; ++i) {
                long long c = static_cast<long long>(p[static_cast<std::size_t>(i)] * side);
                if (c >= side) c = side - 1;  // guard against x*2^l rounding to the boundary
                idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(c);
            }
            ++hist[idx];
        }
        const double vol = 1.0 / double(cells);
        for (std::int32_t h : hist)
            worst = std::max(worst, std::abs(double(h) / double(pts.size()) - vol));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Decay fitting.

struct DecayFit {
    std::vector<double> T, A;       // points actually fitted
    double window_lo = 0, window_hi = 0;
    double slope = 0, intercept = 0, residual = 0;
    int excluded = 0;               // out-of-window or below the noise floor
    std::optional<Rational> theoretical;  // positive exponent; predicted slope −x
    std::string note;
};

inline DecayFit fit_decay(const std::vector<double>& T, const std::vector<double>& A,
                          double window_lo = 1024.0, double window_hi = 16777216.0) {
    if (T.size() != A.size()) throw std::invalid_argument("fit_decay: series length mismatch");
    DecayFit fit;
    fit.window_lo = window_lo;
    fit.window_hi = window_hi;
    for (std::size_t i = 0; i < T.size(); ++i) {
        if (T[i] < window_lo || T[i] > window_hi || A[i] <= 1e-15) {
            ++fit.excluded;
            continue;
        }
        fit.T.push_back(T[i]);
        fit.A.push_back(A[i]);
    }
    if (fit.T.size() < 5)
        throw std::invalid_argument("fit_decay: need at least 5 usable points in the window, have " +
                                    std::to_string(fit.T.size()));
    const std::size_t n = fit.T.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double lx = std::log(fit.T[i]), ly = std::log(fit.A[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double det = double(n) * sxx - sx * sx;
    if (det == 0) throw std::invalid_argument("fit_decay: degenerate abscissae");
    fit.slope = (double(n) * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / double(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = std::log(fit.A[i]) - (fit.intercept + fit.slope * std::log(fit.T[i]));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / double(n));
    if (fit.excluded > 0)
        fit.note = std::to_string(fit.excluded) + " point(s) excluded (window or noise floor)";
    return fit;
}

// ---------------------------------------------------------------------------
// Predicted exponents.

enum class ExponentMode { main, step3_uniform, f23_mixing_base };

// The positive exponent x such that averages decay like T^{−x+ε}: 1/(3S) for
// the general bound (S the published degree sum; requires the transversality
// hypothesis), 1/12 for the uniform strictly-triangular step-3 bound, 1/6 for
// the equidistribution base rate entering the mixing argument on the
// 2-generator step-3 algebra.
inline Rational theoretical_exponent(const GradedNilAlgebra& alg, ExponentMode mode) {
    switch (mode) {
        case ExponentMode::main: {
            RatVec x(static_cast<std::size_t>(alg.dim()), Rational(0));
            x[0] = 1;
            int p = 3;
            for (int i = 1; i < alg.dim(); ++i)
                if (alg.layer(i) == 1) {
                    x[static_cast<std::size_t>(i)] = Rational(p, p + 2);
                    p += 4;
                }
            TransversalityReport rep = check_transversality(alg, x);
            if (!rep.verdict)
                throw std::domain_error("theoretical_exponent: " + alg.name() +
                                        " fails the transversality hypothesis of the main bound");
            ScalingReport sc = scaling_data(alg);
            return Rational(Int(1), Int(3) * sc.published_sum);
        }
        case ExponentMode::step3_uniform:
            if (alg.name() != "triangular:3")
                throw std::invalid_argument(
                    "theoretical_exponent: the uniform step-3 bound is stated for triangular:3");
            return Rational(1, 12);
        case ExponentMode::f23_mixing_base:
            if (alg.name() != "free:2:3" && alg.name() != "free:2:3:lattice" &&
                alg.name() != "free:2:3:aut")
                throw std::invalid_argument(
                    "theoretical_exponent: the mixing base rate is stated for free:2:3");
            return Rational(1, 6);
    }
    throw std::logic_error("theoretical_exponent: unreachable");
}

// ---------------------------------------------------------------------------
// Serialization of fits.

inline std::string decay_fit_json(const DecayFit& fit) {
    std::ostringstream os;
    os.precision(17);
    os << "{\n  \"T\": [";
    for (std::size_t i = 0; i < fit.T.size(); ++i) os << (i ? ", " : "") << fit.T[i];
    os << "],\n  \"A\": [";
    for (std::size_t i = 0; i < fit.A.size(); ++i) os << (i ? ", " : "") << fit.A[i];
    os << "],\n  \"window\": [" << fit.window_lo << ", " << fit.window_hi << "],\n";
    os << "  \"slope\": " << fit.slope << ",\n  \"intercept\": " << fit.intercept << ",\n";
    os << "  \"residual\": " << fit.residual << ",\n  \"excluded\": " << fit.excluded << ",\n";
    os << "  \"theoretical_exponent\": ";
    if (fit.theoretical)
        os << '"' << to_string(*fit.theoretical) << '"';
    else
        os << "null";
    os << ",\n  \"note\": \"" << fit.note << "\"\n}\n";
    return os.str();
}

inline std::string decay_fit_gnuplot(const DecayFit& fit, const std::string& title) {
    std::ostringstream os;
    os.precision(17);
    os << "set logscale xy\nset title '" << title << "'\n"
       << "set xlabel 'T'\nset ylabel '|A(T)|'\n$series << EOD\n";
    for (std::size_t i = 0; i < fit.T.size(); ++i) os << fit.T[i] << ' ' << fit.A[i] << '\n';
    os << "EOD\n";
    os << "fitA(x) = exp(" << fit.intercept << ") * x**(" << fit.slope << ")\n";
    if (fit.theoretical) {
        double th = -to_double(*fit.theoretical);
        os << "thA(x) = exp(" << fit.intercept << ") * x**(" << th << ")\n"
           << "plot $series w lp t 'data', fitA(x) t 'fit slope " << fit.slope
           << "', thA(x) t 'predicted slope " << th << "'\n";
    } else {
        os << "plot $series w lp t 'data', fitA(x) t 'fit slope " << fit.slope << "'\n";
    }
    return os.str();
}

}  // namespace nilflow
