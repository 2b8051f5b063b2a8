#pragma once

// Close returns, approach classes, and constructive width lower bounds.
//
// A close return of the flow at a point x is an integer time r whose orbit
// displacement x⁻¹·φʳ(x) can be written, modulo the lattice, as exp(Σ sᵢηᵢ)
// with every |sᵢ| at most half the chart radius I.  The first-layer
// components of that displacement project to the base torus, so their sizes
// are the nearest-integer distances ‖r·αᵢ‖ and do not depend on x; the
// higher-layer components do depend on x and drive the approach-class
// machinery.  Scaling the transverse basis by L^{ρᵢ} turns the raw distances
// into the two summary statistics of an event,
//
//     ε = max over first-layer slots of min{I, L^{ρᵢ}|sᵢ|},
//     δ = max over higher slots     of min{I, L^{ρᵢ}|sᵢ|},
//
// and the approach class of an event with ε ≤ I/2 is the dyadic index j with
// δ ∈ (I·2^{−(j+1)}, I·2^{−j}].  Averaging the resulting counting function H
// along the orbit yields an explicit lower bound for the width of the
// trimmed flow box around the orbit segment: 1/w ≤ (2/I)^a · avg(H).  The
// number reported here is that constructive lower bound, not the supremum
// over all admissible boxes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nilflow/algebra.hpp"
#include "nilflow/diophantine.hpp"
#include "nilflow/nilmanifold.hpp"

namespace nilflow {

// ---------------------------------------------------------------------------
// Events.

struct CloseReturnEvent {
    long long r = 0;        // integer return time, nonzero
    std::vector<double> s;  // ideal displacement (length dim−1), empty when capped
    bool chart_ok = false;  // false when the displacement leaves the chart box
    double eps = 0.0;       // first-layer statistic, capped at I
    double delta = 0.0;     // higher-layer statistic, capped at I
    double toral = 0.0;     // max first-layer base-torus distance, never capped
    std::optional<int> j;   // approach class, set by ap_classify
};

// Degree-proportional transverse scaling exponents: ρᵢ = layer(i)/Σ layer(k)
// over the ideal slots.  They sum to one and each lies in (0, 1).
inline std::vector<double> homogeneous_rho(const GradedNilAlgebra& alg) {
    int total = 0;
    for (int i = 1; i < alg.dim(); ++i) total += alg.layer(i);
    std::vector<double> rho;
    for (int i = 1; i < alg.dim(); ++i)
        rho.push_back(static_cast<double>(alg.layer(i)) / static_cast<double>(total));
    return rho;
}

namespace detail {

// Slots 1..dim−1 of the ideal that sit in the first layer.
inline std::vector<int> ideal_layer1_slots(const GradedNilAlgebra& alg) {
    std::vector<int> out;
    for (int i = 1; i < alg.dim(); ++i)
        if (alg.layer(i) == 1) out.push_back(i);
    return out;
}

// Displacement of z relative to y modulo the lattice: the first-kind vector
// u = log(y⁻¹γz) with γ ∈ Γ chosen to minimise every |uᵢ|.  Peeling the
// slots in ascending (layer-ordered) position is exact: left-multiplying by
// exp(k·eᵢ) changes slot i by exactly k and touches only strictly higher
// layers, so each slot has a unique integer correction placing it in
// [−1/2, 1/2], and no later choice can reopen an earlier slot.
struct ChartSolve {
    bool ok = false;        // every L^0-slot landed within the requested box
    std::vector<double> u;  // minimised first-kind displacement, length dim
};

inline ChartSolve chart_displacement(const GroupElement<double>& y, const GroupElement<double>& z,
                                     double box_radius) {
    const GradedNilAlgebra& alg = y.algebra();
    if (&alg != &z.algebra())
        throw std::invalid_argument("chart_displacement: points live on different algebras");
    const int d = alg.dim();
    GroupElement<double> yinv = group_inverse(y);
    GroupElement<double> g = z;
    for (int i = 0; i < d; ++i) {
        std::vector<double> u = first_kind(multiply(yinv, g));
        long long k = -std::llround(u[static_cast<std::size_t>(i)]);
        if (k != 0) {
            GroupElement<double> gamma = group_from_first_kind(
                alg, axis_vector(alg, i, static_cast<double>(k)));
            g = multiply(gamma, g);
        }
    }
    ChartSolve out;
    out.u = first_kind(multiply(yinv, g));
    if (std::fabs(out.u[0]) > 1e-6)
        throw std::logic_error(
            "chart_displacement: the transverse slot did not cancel; the points do not lie on a "
            "common section fibre");
    out.ok = true;
    for (int i = 1; i < d; ++i)
        if (std::fabs(out.u[static_cast<std::size_t>(i)]) > box_radius + 1e-12) out.ok = false;
    return out;
}

// Long-double accumulator for the fractional parts of r·αᵢ along an integer
// walk; nearest-integer distances stay accurate to ~1e−13 over 10⁶ steps.
struct TorusWalk {
    std::vector<long double> step;
    std::vector<long double> phase;

    explicit TorusWalk(const std::vector<double>& freqs) {
        for (double a : freqs) {
            long double f = static_cast<long double>(a);
            f -= std::floor(f);
            step.push_back(f);
            phase.push_back(0.0L);
        }
    }
    void advance() {
        for (std::size_t i = 0; i < step.size(); ++i) {
            phase[i] += step[i];
            if (phase[i] >= 1.0L) phase[i] -= 1.0L;
        }
    }
    double dist(std::size_t i) const {
        long double f = phase[i];
        return static_cast<double>(f <= 0.5L ? f : 1.0L - f);
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Close-return scan.
//
// Scans |r| ≤ ⌈TL⌉.  A return time survives when every first-layer toral
// distance ‖r·αᵢ‖ is at most I/2 — a necessary condition for the chart
// displacement to exist — and each survivor is then solved at the point.
// When the higher-layer displacement leaves the chart box the event is kept,
// capped at I in both statistics, and flagged; classification drops it.

inline std::vector<CloseReturnEvent> close_returns(const Lattice& lat, const FlowSpec<double>& spec,
                                                   const GroupElement<double>& x, double T,
                                                   double L, const std::vector<double>& rho,
                                                   double I) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (&alg != &spec.algebra() || &alg != &x.algebra())
        throw std::invalid_argument("close_returns: algebra mismatch");
    if (!(I > 0.0) || !(I < 0.5))
        throw std::invalid_argument("close_returns: the chart radius I must lie in (0, 1/2)");
    if (!(T > 0.0) || !(L > 0.0))
        throw std::invalid_argument("close_returns: T and L must be positive");
    const int d = alg.dim();
    if (static_cast<int>(rho.size()) != d - 1)
        throw std::invalid_argument("close_returns: expected " + std::to_string(d - 1) +
                                    " scaling exponents, got " + std::to_string(rho.size()));
    for (double e : rho)
        if (e < 0.0 || e >= 1.0)
            throw std::invalid_argument("close_returns: scaling exponents must lie in [0, 1)");

    const long long rmax = static_cast<long long>(std::ceil(T * L));
    const std::vector<int> layer1 = detail::ideal_layer1_slots(alg);
    std::vector<double> freqs;
    for (int slot : layer1) freqs.push_back(spec.alpha[static_cast<std::size_t>(slot - 1)]);
    std::vector<double> lpow(static_cast<std::size_t>(d), 1.0);
    for (int i = 1; i < d; ++i)
        lpow[static_cast<std::size_t>(i)] = std::pow(L, rho[static_cast<std::size_t>(i - 1)]);

    GroupElement<double> base = reduce_mod_lattice(lat, x).point;
    std::vector<CloseReturnEvent> events;
    for (int sign = +1; sign >= -1; sign -= 2) {
        detail::TorusWalk walk(freqs);
        GroupElement<double> cur = base;
        for (long long k = 1; k <= rmax; ++k) {
            walk.advance();
            cur = flow_step(lat, cur, spec, sign > 0 ? 1.0 : -1.0);
            bool screened = true;
            for (std::size_t i = 0; i < layer1.size(); ++i)
                if (walk.dist(i) > I / 2) screened = false;
            if (!screened) continue;

            CloseReturnEvent ev;
            ev.r = sign * k;
            for (std::size_t i = 0; i < layer1.size(); ++i)
                ev.toral = std::max(ev.toral, walk.dist(i));
            detail::ChartSolve solve = detail::chart_displacement(base, cur, I / 2);
            ev.chart_ok = solve.ok;
            if (solve.ok) {
                ev.s.assign(solve.u.begin() + 1, solve.u.end());
                for (std::size_t i = 0; i < layer1.size(); ++i) {
                    double measured =
                        std::fabs(solve.u[static_cast<std::size_t>(layer1[i])]);
                    if (std::fabs(measured - walk.dist(i)) > 1e-6)
                        throw std::logic_error(
                            "close_returns: first-layer displacement deviates from the "
                            "base-torus distance; the chart solve is inconsistent");
                }
                double eps = 0.0, delta = 0.0;
                for (int i = 1; i < d; ++i) {
                    double scaled = std::min(
                        I, lpow[static_cast<std::size_t>(i)] *
                               std::fabs(solve.u[static_cast<std::size_t>(i)]));
                    if (alg.layer(i) == 1)
                        eps = std::max(eps, scaled);
                    else
                        delta = std::max(delta, scaled);
                }
                ev.eps = eps;
                ev.delta = delta;
            } else {
                ev.eps = I;
                ev.delta = I;
            }
            events.push_back(std::move(ev));
        }
    }
    std::sort(events.begin(), events.end(), [](const CloseReturnEvent& a,
                                               const CloseReturnEvent& b) {
        long long aa = a.r < 0 ? -a.r : a.r;
        long long bb = b.r < 0 ? -b.r : b.r;
        if (aa != bb) return aa < bb;
        return a.r > b.r;
    });
    return events;
}

// ---------------------------------------------------------------------------
// Approach classes.

struct APClass {
    long long r = 0;
    std::optional<int> j;  // none when the event is capped or ε > I/2
    long long J = 0;       // largest j with 2^{j(a−n)} ≤ (2/ε)^n
    double weight = 0.0;   // 2^{j(a−n)} for 1 ≤ j ≤ J, (2/ε)^n beyond, else 0
    double eps = 0.0;
    double delta = 0.0;
};

namespace detail {

inline constexpr int kMaxApClass = 60;

inline int ap_class_index(double delta, double I) {
    int j = 0;
    while (j < kMaxApClass && delta <= I * std::ldexp(1.0, -(j + 1))) ++j;
    return j;
}

inline long long ap_cutoff(double eps, int a, int n) {
    if (a == n) return std::numeric_limits<long long>::max() / 2;
    if (!(eps > 0.0)) return std::numeric_limits<long long>::max() / 2;
    double raw = static_cast<double>(n) * std::log2(2.0 / eps) / static_cast<double>(a - n);
    if (raw >= 1e15) return std::numeric_limits<long long>::max() / 2;
    return static_cast<long long>(std::floor(raw + 1e-12));
}

inline double ap_weight(int j, long long J, double eps, int a, int n) {
    if (j < 1) return 0.0;
    if (j <= J) return std::ldexp(1.0, j * (a - n));
    return std::pow(2.0 / eps, n);
}

}  // namespace detail

inline std::vector<APClass> ap_classify(const GradedNilAlgebra& alg,
                                        const std::vector<CloseReturnEvent>& events, double I) {
    if (!(I > 0.0) || !(I < 0.5))
        throw std::invalid_argument("ap_classify: the chart radius I must lie in (0, 1/2)");
    const int a = alg.dim() - 1;
    const int n = static_cast<int>(detail::ideal_layer1_slots(alg).size());
    std::vector<APClass> out;
    for (const CloseReturnEvent& ev : events) {
        APClass c;
        c.r = ev.r;
        c.eps = ev.eps;
        c.delta = ev.delta;
        c.J = detail::ap_cutoff(ev.eps, a, n);
        if (ev.chart_ok && ev.eps <= I / 2) {
            int j = detail::ap_class_index(ev.delta, I);
            c.j = j;
            c.weight = detail::ap_weight(j, c.J, ev.eps, a, n);
        }
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constructive width lower bound.
//
// The counting function H = 1 + Σ over events of the class weight is sampled
// along the orbit at unit steps of the flow time (the return-time grid); the
// higher-layer displacement of each surviving return is re-solved at every
// sample because it varies along the orbit, while the first-layer statistic
// is frozen once per return time.  Intervals whose endpoint values differ
// are refined with a midpoint and integrated with Simpson weights.  The
// reported width is the constructive bound w = (I/2)^a / avg(H); with no
// events the average is exactly one and w equals (I/2)^a exactly.

struct WidthReport {
    double T = 0.0;
    double L = 1.0;
    double I = 0.0;
    int a = 0;
    int n = 0;
    std::vector<double> rho;
    std::vector<CloseReturnEvent> events;
    double h_average = 1.0;
    double w = 0.0;
    double frac_case1 = 0.0;   // samples with no classified visit
    double frac_case21 = 0.0;  // deepest visit in a class 1 ≤ j ≤ J
    double frac_case22 = 0.0;  // deepest visit in a class j > J
    long long samples = 0;
};

namespace detail {

// H and the case label at one orbit point, from per-event chart re-solves.
struct HSample {
    double H = 1.0;
    int deepest = 0;  // 0: no classified visit, 1: j ≤ J, 2: j > J
};

template <class Partner>
HSample h_sample(const GradedNilAlgebra& alg, const GroupElement<double>& y, Partner&& partner,
                 const std::vector<CloseReturnEvent>& events, const std::vector<double>& lpow,
                 double I, int a, int n) {
    HSample out;
    for (const CloseReturnEvent& ev : events) {
        if (ev.eps > I / 2) continue;  // ε is x-independent: class empty everywhere
        ChartSolve solve = chart_displacement(y, partner(ev.r), I / 2);
        if (!solve.ok) continue;
        double delta = 0.0;
        for (int i = 1; i < alg.dim(); ++i)
            if (alg.layer(i) != 1)
                delta = std::max(delta, std::min(I, lpow[static_cast<std::size_t>(i)] *
                                                        std::fabs(solve.u[static_cast<std::size_t>(
                                                            i)])));
        int j = ap_class_index(delta, I);
        if (j < 1) continue;
        long long J = ap_cutoff(ev.eps, a, n);
        out.H += ap_weight(j, J, ev.eps, a, n);
        out.deepest = std::max(out.deepest, j <= J ? 1 : 2);
    }
    return out;
}

}  // namespace detail

inline WidthReport width_lower_bound(const Lattice& lat, const FlowSpec<double>& spec,
                                     const GroupElement<double>& x, double T, double L,
                                     const std::vector<double>& rho, double I) {
    const GradedNilAlgebra& alg = lat.algebra();
    WidthReport rep;
    rep.T = T;
    rep.L = L;
    rep.I = I;
    rep.a = alg.dim() - 1;
    rep.n = static_cast<int>(detail::ideal_layer1_slots(alg).size());
    rep.rho = rho;
    rep.events = close_returns(lat, spec, x, T, L, rho, I);

    const long long kmax = static_cast<long long>(std::ceil(T * L));
    const int d = alg.dim();
    std::vector<double> lpow(static_cast<std::size_t>(d), 1.0);
    for (int i = 1; i < d; ++i)
        lpow[static_cast<std::size_t>(i)] = std::pow(L, rho[static_cast<std::size_t>(i - 1)]);

    // Orbit table y_k for k ∈ [−kmax, 2·kmax]: every sample k ∈ [0, kmax]
    // pairs with partners k + r for |r| ≤ kmax.
    std::vector<GroupElement<double>> orbit(static_cast<std::size_t>(3 * kmax + 1),
                                            group_identity<double>(alg));
    auto at = [&](long long k) -> GroupElement<double>& {
        return orbit[static_cast<std::size_t>(k + kmax)];
    };
    at(0) = reduce_mod_lattice(lat, x).point;
    for (long long k = 1; k <= 2 * kmax; ++k) at(k) = flow_step(lat, at(k - 1), spec, 1.0);
    for (long long k = -1; k >= -kmax; --k) at(k) = flow_step(lat, at(k + 1), spec, -1.0);

    std::vector<detail::HSample> samples(static_cast<std::size_t>(kmax + 1));
    for (long long k = 0; k <= kmax; ++k) {
        auto partner = [&](long long r) -> const GroupElement<double>& { return at(k + r); };
        samples[static_cast<std::size_t>(k)] =
            detail::h_sample(alg, at(k), partner, rep.events, lpow, I, rep.a, rep.n);
    }

    long long c1 = 0, c21 = 0, c22 = 0;
    for (const detail::HSample& s : samples) {
        if (s.deepest == 0) ++c1;
        if (s.deepest == 1) ++c21;
        if (s.deepest == 2) ++c22;
    }
    rep.samples = kmax + 1;
    rep.frac_case1 = static_cast<double>(c1) / static_cast<double>(kmax + 1);
    rep.frac_case21 = static_cast<double>(c21) / static_cast<double>(kmax + 1);
    rep.frac_case22 = static_cast<double>(c22) / static_cast<double>(kmax + 1);

    if (kmax == 0) {
        rep.h_average = samples[0].H;
    } else {
        double total = 0.0;
        for (long long k = 0; k < kmax; ++k) {
            double h0 = samples[static_cast<std::size_t>(k)].H;
            double h1 = samples[static_cast<std::size_t>(k + 1)].H;
            if (h0 == h1) {
                total += h0;
            } else {
                GroupElement<double> mid = flow_step(lat, at(k), spec, 0.5);
                auto partner = [&](long long r) {
                    return flow_step(lat, at(k + r), spec, 0.5);
                };
                detail::HSample hm =
                    detail::h_sample(alg, mid, partner, rep.events, lpow, I, rep.a, rep.n);
                total += (h0 + 4.0 * hm.H + h1) / 6.0;
            }
        }
        rep.h_average = total / static_cast<double>(kmax);
    }
    rep.w = std::pow(I / 2.0, rep.a) / rep.h_average;
    return rep;
}

// ---------------------------------------------------------------------------
// Good points.
//
// A point passes at threshold w and exponent ζ when, for every horizon Tᵢ in
// the schedule and every intermediate scale T_{j,i} = e^{j·hᵢ} with
// hᵢ = log Tᵢ/⌊log Tᵢ⌋ and 0 ≤ j ≤ ⌊log Tᵢ⌋, the constructive width of the
// scaled flow over a unit time window is at least w/Tᵢ^ζ — both at the point
// itself and at its time-Tᵢ image.

struct GoodPointRow {
    int i = 0;
    int j = 0;
    double T_i = 0.0;
    double T_ji = 0.0;
    double w_x = 0.0;
    double w_y = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct GoodPointReport {
    bool good = false;
    double zeta = 0.0;
    double w_threshold = 0.0;
    double I = 0.0;
    std::vector<GoodPointRow> rows;
};

// Default schedule Tᵢ = i^{(1+ε)/ζ}.
inline std::vector<double> good_point_schedule(int count, double zeta, double eps) {
    if (count < 1 || !(zeta > 0.0) || eps < 0.0)
        throw std::invalid_argument("good_point_schedule: need count ≥ 1, ζ > 0, ε ≥ 0");
    std::vector<double> out;
    for (int i = 1; i <= count; ++i)
        out.push_back(std::pow(static_cast<double>(i), (1.0 + eps) / zeta));
    return out;
}

inline GoodPointReport good_point_check(const Lattice& lat, const FlowSpec<double>& spec,
                                        const GroupElement<double>& x,
                                        const std::vector<double>& horizons, double zeta,
                                        double w_threshold, const std::vector<double>& rho,
                                        double I) {
    if (horizons.empty())
        throw std::invalid_argument("good_point_check: the horizon schedule is empty");
    for (double T : horizons)
        if (!(T >= 1.0))
            throw std::invalid_argument("good_point_check: horizons must be at least 1");
    if (w_threshold < 0.0)
        throw std::invalid_argument("good_point_check: the width threshold must be nonnegative");
    GoodPointReport rep;
    rep.zeta = zeta;
    rep.w_threshold = w_threshold;
    rep.I = I;
    rep.good = true;
    for (std::size_t idx = 0; idx < horizons.size(); ++idx) {
        const double Ti = horizons[idx];
        const long long Ni = static_cast<long long>(std::floor(std::log(Ti)));
        const double hi = Ni > 0 ? std::log(Ti) / static_cast<double>(Ni) : 0.0;

        // Time-Tᵢ image of x along the flow, walked in unit steps.
        GroupElement<double> yi = reduce_mod_lattice(lat, x).point;
        double remaining = Ti;
        while (remaining > 1.0) {
            yi = flow_step(lat, yi, spec, 1.0);
            remaining -= 1.0;
        }
        if (remaining > 0.0) yi = flow_step(lat, yi, spec, remaining);

        const double threshold = w_threshold / std::pow(Ti, zeta);
        for (long long j = 0; j <= std::max<long long>(Ni, 0); ++j) {
            const double Tji = Ni > 0 ? std::exp(static_cast<double>(j) * hi) : 1.0;
            GoodPointRow row;
            row.i = static_cast<int>(idx + 1);
            row.j = static_cast<int>(j);
            row.T_i = Ti;
            row.T_ji = Tji;
            row.w_x = width_lower_bound(lat, spec, x, 1.0, Tji, rho, I).w;
            row.w_y = width_lower_bound(lat, spec, yi, 1.0, Tji, rho, I).w;
            row.threshold = threshold;
            row.pass = row.w_x >= threshold && row.w_y >= threshold;
            if (!row.pass) rep.good = false;
            rep.rows.push_back(row);
            if (Ni == 0) break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Step-3 renormalized width profile.
//
// Specific to the triangular step-3 algebra with flow frequencies (α, β) on
// the first layer.  The renormalization at parameter t contracts the first
// layer by e^{−t/3} and the second by e^{−t/6}; a return time r of the
// scaled flow corresponds to the integer q = r·eᵗ and solves the return
// condition exactly when both toral distances ‖qα‖, ‖qβ‖ are at most
// e^{−t/3}·c_Γ/2.  The rescaled first-layer displacements x̃ᵢ = e^{t/3}·sᵢ
// classify each return into the dyadic band max|x̃| ∈ (c_Γ2^{−n−1}, c_Γ2^{−n}];
// the second-layer offsets drift linearly in the orbit parameter s at rates
// e^{5t/6}x̃₂ and α·e^{5t/6}x̃₃, producing a tent-shaped obstruction profile
//
//     δ_r(s) = (1/16)·min{ c_Γ, max( ‖x̃‖, phase drift at s ) },
//
// floored at ‖x̃‖/16 near each phase alignment and capped at c_Γ/16 away
// from every alignment, with box width w(s) = c_Γ·δ(s)² for δ = min_r δ_r.

struct Step3Event {
    long long q = 0;     // integer return index, r = q·e^{−t}
    double r = 0.0;      // return time of the scaled flow
    double x2t = 0.0;    // e^{t/3} · first-layer displacement along X₂
    double x3t = 0.0;    // e^{t/3} · first-layer displacement along X₃
    double y1t = 0.0;    // e^{t/6} · second-layer offset along Y₁ at s = 0
    double y2t = 0.0;    // e^{t/6} · second-layer offset along Y₂ at s = 0
    int nclass = 0;      // dyadic band of max(|x2t|, |x3t|)
};

struct Step3Report {
    double t = 0.0;
    double T = 0.0;
    double c_gamma = 0.0;
    double nu = 0.0;                  // Diophantine exponent used in the bound check
    double epsilon = 0.0;             // slack exponent in the counting bound
    std::vector<Step3Event> events;   // both signs of q
    std::vector<long long> counts;    // events per dyadic band n = 0, 1, …
    std::vector<double> bounds;       // T·(c_Γ/2ⁿ)·e^{(2/3+ε/2)t}
    std::vector<double> ratios;       // count/bound per band
    double fitted_C = 0.0;            // max ratio over occupied bands
    double C_alpha = 0.0;             // min over events of max|x̃|·e^{(ν/2−1/3)t}·r^{ν/2}
    bool displacement_ok = true;      // C_alpha > 0, vacuously true with no events
    double avg_inv_w = 0.0;           // (1/T_avg)·∫ ds/w(s) over the profiled prefix
    double avg_T = 0.0;               // prefix length actually profiled
    double baseline_inv_w = 0.0;      // flat value 1/(c_Γ·(c_Γ/16)²)
    long long grid_points = 0;
};

inline Step3Report step3_width(const Lattice& lat, const FlowSpec<double>& spec,
                               const GroupElement<double>& x, double T, double t,
                               double nu = 1.4142135623730951, double epsilon = 0.1,
                               double profile_budget = 5e7) {
    const GradedNilAlgebra& alg = lat.algebra();
    if (alg.name() != "triangular:3")
        throw std::invalid_argument(
            "step3_width: the renormalized profile is specific to triangular:3");
    if (!(T > 0.0) || !(t > 0.0))
        throw std::invalid_argument("step3_width: T and t must be positive");
    const double alpha = spec.alpha[0];
    const double beta = spec.alpha[1];

    Step3Report rep;
    rep.t = t;
    rep.T = T;
    rep.nu = nu;
    rep.epsilon = epsilon;
    const double c = to_double(lattice_gap(lat, 1).c_gamma);
    rep.c_gamma = c;
    rep.baseline_inv_w = 1.0 / (c * (c / 16.0) * (c / 16.0));

    const long long qmax = static_cast<long long>(std::floor(T * std::exp(t)));
    const double box = std::exp(-t / 3.0) * c / 2.0;
    const double e13 = std::exp(t / 3.0);
    const double e16 = std::exp(t / 6.0);
    GroupElement<double> base = reduce_mod_lattice(lat, x).point;

    for (int sign = +1; sign >= -1; sign -= 2) {
        detail::TorusWalk walk({alpha, beta});
        GroupElement<double> cur = base;
        for (long long k = 1; k <= qmax; ++k) {
            walk.advance();
            cur = flow_step(lat, cur, spec, sign > 0 ? 1.0 : -1.0);
            if (walk.dist(0) > box || walk.dist(1) > box) continue;
            detail::ChartSolve solve = detail::chart_displacement(base, cur, 0.499);
            Step3Event ev;
            ev.q = sign * k;
            ev.r = static_cast<double>(sign * k) * std::exp(-t);
            ev.x2t = e13 * solve.u[1];
            ev.x3t = e13 * solve.u[2];
            ev.y1t = e16 * solve.u[3];
            ev.y2t = e16 * solve.u[4];
            if (std::fabs(std::fabs(solve.u[1]) - walk.dist(0)) > 1e-6 ||
                std::fabs(std::fabs(solve.u[2]) - walk.dist(1)) > 1e-6)
                throw std::logic_error(
                    "step3_width: first-layer displacement deviates from the base-torus "
                    "distance");
            double m = std::max(std::fabs(ev.x2t), std::fabs(ev.x3t));
            int n = 0;
            while (n < detail::kMaxApClass && m <= c * std::ldexp(1.0, -(n + 1))) ++n;
            ev.nclass = n;
            rep.events.push_back(ev);
        }
    }

    int nmax = -1;
    for (const Step3Event& ev : rep.events) nmax = std::max(nmax, ev.nclass);
    rep.counts.assign(static_cast<std::size_t>(nmax + 1), 0);
    for (const Step3Event& ev : rep.events) ++rep.counts[static_cast<std::size_t>(ev.nclass)];
    const double growth = std::exp((2.0 / 3.0 + epsilon / 2.0) * t);
    for (int n = 0; n <= nmax; ++n) {
        double bound = T * (c * std::ldexp(1.0, -n)) * growth;
        rep.bounds.push_back(bound);
        double ratio = static_cast<double>(rep.counts[static_cast<std::size_t>(n)]) / bound;
        rep.ratios.push_back(ratio);
        rep.fitted_C = std::max(rep.fitted_C, ratio);
    }

    rep.C_alpha = std::numeric_limits<double>::infinity();
    for (const Step3Event& ev : rep.events) {
        if (ev.q <= 0) continue;
        double m = std::max(std::fabs(ev.x2t), std::fabs(ev.x3t));
        rep.C_alpha = std::min(rep.C_alpha,
                               m * std::exp((nu / 2.0 - 1.0 / 3.0) * t) * std::pow(ev.r, nu / 2.0));
    }
    if (rep.events.empty()) rep.C_alpha = 0.0;
    rep.displacement_ok = rep.events.empty() || rep.C_alpha > 0.0;

    // Obstruction profile.  The two phase drifts wrap with the second-layer
    // lattice spacing, e^{t/6} in rescaled units.
    if (rep.events.empty()) {
        rep.avg_inv_w = 1.0 / (c * (c / 16.0) * (c / 16.0));
        rep.avg_T = T;
        rep.grid_points = 0;
        return rep;
    }
    const double W = e16;
    const double drift = std::exp(5.0 * t / 6.0);
    const double ds = std::exp(-5.0 * t / 6.0) / 2.0;
    double Tavg = T;
    double npts_full = T / ds * static_cast<double>(rep.events.size());
    if (npts_full > profile_budget)
        Tavg = T * profile_budget / npts_full;
    const long long npts = std::max<long long>(1, static_cast<long long>(std::floor(Tavg / ds)));
    auto wrap = [W](double v) {
        double f = v - std::floor(v / W) * W;
        return f <= W / 2 ? f : W - f;
    };
    double total = 0.0;
    for (long long k = 0; k <= npts; ++k) {
        double s = static_cast<double>(k) * ds;
        double delta = c / 16.0;
        for (const Step3Event& ev : rep.events) {
            double m1 = wrap(ev.y1t + drift * ev.x2t * s);
            double m2 = wrap(ev.y2t + alpha * drift * ev.x3t * s);
            double mnorm = std::max(std::fabs(ev.x2t), std::fabs(ev.x3t));
            double dr = std::min(c, std::max(mnorm, std::max(m1, m2))) / 16.0;
            delta = std::min(delta, dr);
        }
        double contrib = 1.0 / (c * delta * delta);
        total += (k == 0 || k == npts) ? contrib / 2.0 : contrib;
    }
    rep.avg_inv_w = total / static_cast<double>(npts);
    rep.avg_T = static_cast<double>(npts) * ds;
    rep.grid_points = npts + 1;
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization.

inline std::string events_csv(const GradedNilAlgebra& alg,
                              const std::vector<CloseReturnEvent>& events) {
    std::ostringstream os;
    os.precision(17);
    os << "r";
    for (int i = 1; i < alg.dim(); ++i) os << ",s" << i;
    os << ",eps,delta,j\n";
    for (const CloseReturnEvent& ev : events) {
        os << ev.r;
        for (int i = 1; i < alg.dim(); ++i) {
            os << ',';
            if (ev.chart_ok) os << ev.s[static_cast<std::size_t>(i - 1)];
        }
        os << ',' << ev.eps << ',' << ev.delta << ',';
        if (ev.j) os << *ev.j;
        os << '\n';
    }
    return os.str();
}

inline std::string width_report_json(const WidthReport& rep) {
    std::ostringstream os;
    os.precision(17);
    os << "{\n  \"T\": " << rep.T << ",\n  \"L\": " << rep.L << ",\n  \"I\": " << rep.I
       << ",\n  \"a\": " << rep.a << ",\n  \"n\": " << rep.n << ",\n  \"rho\": [";
    for (std::size_t i = 0; i < rep.rho.size(); ++i) os << (i ? ", " : "") << rep.rho[i];
    os << "],\n  \"width_kind\": \"constructive lower bound\",\n  \"h_average\": "
       << rep.h_average << ",\n  \"w\": " << rep.w << ",\n  \"case_fractions\": ["
       << rep.frac_case1 << ", " << rep.frac_case21 << ", " << rep.frac_case22
       << "],\n  \"samples\": " << rep.samples << ",\n  \"events\": [";
    for (std::size_t i = 0; i < rep.events.size(); ++i) {
        const CloseReturnEvent& ev = rep.events[i];
        os << (i ? ",\n    " : "\n    ") << "{\"r\": " << ev.r << ", \"eps\": " << ev.eps
           << ", \"delta\": " << ev.delta << ", \"capped\": " << (ev.chart_ok ? "false" : "true")
           << "}";
    }
    os << (rep.events.empty() ? "]" : "\n  ]") << "\n}\n";
    return os.str();
}

inline std::string step3_csv(const Step3Report& rep) {
    std::ostringstream os;
    os.precision(17);
    os << "n,count,bound,ratio\n";
    for (std::size_t n = 0; n < rep.counts.size(); ++n)
        os << n << ',' << rep.counts[n] << ',' << rep.bounds[n] << ',' << rep.ratios[n] << '\n';
    return os.str();
}

inline std::string step3_json(const Step3Report& rep) {
    std::ostringstream os;
    os.precision(17);
    os << "{\n  \"t\": " << rep.t << ",\n  \"T\": " << rep.T << ",\n  \"c_gamma\": "
       << rep.c_gamma << ",\n  \"nu\": " << rep.nu << ",\n  \"epsilon\": " << rep.epsilon
       << ",\n  \"returns\": " << rep.events.size() << ",\n  \"counts\": [";
    for (std::size_t i = 0; i < rep.counts.size(); ++i) os << (i ? ", " : "") << rep.counts[i];
    os << "],\n  \"fitted_C\": " << rep.fitted_C << ",\n  \"C_alpha\": " << rep.C_alpha
       << ",\n  \"displacement_ok\": " << (rep.displacement_ok ? "true" : "false")
       << ",\n  \"avg_inv_w\": " << rep.avg_inv_w << ",\n  \"avg_T\": " << rep.avg_T
       << ",\n  \"baseline_inv_w\": " << rep.baseline_inv_w << ",\n  \"grid_points\": "
       << rep.grid_points << "\n}\n";
    return os.str();
}

}  // namespace nilflow
