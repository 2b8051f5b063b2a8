#pragma once

/*
 * Exact arithmetic in a real quadratic field Q(√D), D a positive non-square
 * integer. Values are a + b√D with rational a, b.
 *
 * This is the backbone of the Diophantine oracles: nearest-integer distances
 * ‖qα‖ for α = golden, √2−1, … are computed without rounding, continued
 * fractions of quadratic irrationals come out of an exact floor/invert loop,
 * and eigendata of integer matrices (λ = (t+√(t²−4))/2) stays exact through
 * the renormalization checks. Comparisons and floor are fully exact; only the
 * final conversion to double rounds.
 */

#include "nilflow/rational.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilflow {

class Quad {
  public:
    Quad() : a_(0), b_(0), d_(0) {}
    Quad(Rational a) : a_(std::move(a)), b_(0), d_(0) {}
    Quad(Rational a, Rational b, Int d) : a_(std::move(a)), b_(std::move(b)), d_(std::move(d)) {
        if (d_ < 0) throw std::invalid_argument("Quad: negative radicand");
        if (b_ == 0) d_ = 0;  // canonical: rational values carry d = 0
    }

    const Rational& a() const { return a_; }
    const Rational& b() const { return b_; }
    const Int& d() const { return d_; }
    bool is_rational() const { return b_ == 0; }

    friend Quad operator+(const Quad& x, const Quad& y) {
        Int d = join(x, y);
        return Quad(x.a_ + y.a_, x.b_ + y.b_, d);
    }
    friend Quad operator-(const Quad& x, const Quad& y) {
        Int d = join(x, y);
        return Quad(x.a_ - y.a_, x.b_ - y.b_, d);
    }
    Quad operator-() const { return Quad(-a_, -b_, d_); }
    friend Quad operator*(const Quad& x, const Quad& y) {
        Int d = join(x, y);
        return Quad(x.a_ * y.a_ + Rational(d) * x.b_ * y.b_, x.a_ * y.b_ + x.b_ * y.a_, d);
    }
    friend Quad operator/(const Quad& x, const Quad& y) {
        // multiply by the conjugate: (a+b√d)⁻¹ = (a−b√d)/(a²−d b²)
        Int d = join(x, y);
        Rational norm = y.a_ * y.a_ - Rational(d) * y.b_ * y.b_;
        if (norm == 0) throw std::domain_error("Quad: division by zero");
        return x * Quad(y.a_ / norm, -y.b_ / norm, d);
    }
    Quad& operator+=(const Quad& y) { return *this = *this + y; }
    Quad& operator-=(const Quad& y) { return *this = *this - y; }
    Quad& operator*=(const Quad& y) { return *this = *this * y; }
    Quad& operator/=(const Quad& y) { return *this = *this / y; }

    Quad conjugate() const { return Quad(a_, -b_, d_); }

    // Exact sign of a + b√d: compare a² against d·b² when signs differ.
    int sgn() const {
        int sa = nilflow::sign(a_), sb = nilflow::sign(b_);
        if (sb == 0) return sa;
        if (sa == 0) return sb;
        if (sa == sb) return sa;
        Rational lhs = a_ * a_, rhs = Rational(d_) * b_ * b_;
        if (lhs == rhs) return 0;
        return (lhs > rhs) ? sa : sb;
    }

    friend bool operator==(const Quad& x, const Quad& y) { return (x - y).sgn() == 0; }
    friend bool operator!=(const Quad& x, const Quad& y) { return !(x == y); }
    friend bool operator<(const Quad& x, const Quad& y) { return (x - y).sgn() < 0; }
    friend bool operator>(const Quad& x, const Quad& y) { return (x - y).sgn() > 0; }
    friend bool operator<=(const Quad& x, const Quad& y) { return (x - y).sgn() <= 0; }
    friend bool operator>=(const Quad& x, const Quad& y) { return (x - y).sgn() >= 0; }

    // Exact floor: start from a double estimate, then correct with exact
    // comparisons (the estimate is off by at most a few units).
    Int floor() const {
        if (b_ == 0) return floor_int(a_);
        Int n(static_cast<long long>(std::floor(to_double_())));
        while (Quad(Rational(n)) > *this) --n;
        while (Quad(Rational(n + 1)) <= *this) ++n;
        return n;
    }
    Int round() const { return (*this + Quad(Rational(1, 2))).floor(); }

    // |x − nearest integer|, exact.
    Quad dist_to_int() const {
        Quad r = *this - Quad(Rational(round()));
        return r.sgn() < 0 ? -r : r;
    }

    Quad abs() const { return sgn() < 0 ? -*this : *this; }

    double to_double() const { return to_double_(); }

    std::string str() const {
        if (b_ == 0) return nilflow::to_string(a_);
        return nilflow::to_string(a_) + " + " + nilflow::to_string(b_) + "*sqrt(" + d_.str() + ")";
    }

  private:
    double to_double_() const {
        long double r = a_.convert_to<long double>() +
                        b_.convert_to<long double>() * sqrtl(d_.convert_to<long double>());
        return static_cast<double>(r);
    }
    static Int join(const Quad& x, const Quad& y) {
        if (x.d_ == 0) return y.d_;
        if (y.d_ == 0 || x.d_ == y.d_) return x.d_;
        throw std::invalid_argument("Quad: mixing distinct radicands " + x.d_.str() + " and " +
                                    y.d_.str());
    }

    Rational a_, b_;
    Int d_;
};

inline Quad sqrt_quad(long long d) { return Quad(Rational(0), Rational(1), Int(d)); }
inline Quad golden_ratio() { return Quad(Rational(1, 2), Rational(1, 2), Int(5)); }

// Larger real root of ax² + bx + c (integer coefficients, positive discriminant).
inline Quad quadratic_root(const Int& a, const Int& b, const Int& c) {
    if (a == 0) throw std::invalid_argument("quadratic_root: not a quadratic");
    Int disc = b * b - 4 * a * c;
    if (disc < 0) throw std::invalid_argument("quadratic_root: complex roots");
    // x = (−b + √disc) / (2a); fold square factors of disc into the rational part.
    Int sq = 1, rest = disc;
    for (Int f = 2; f * f <= rest; ++f)
        while (rest % (f * f) == 0) {
            rest /= f * f;
            sq *= f;
        }
    Rational half(1, 1);
    half /= Rational(2 * a);
    if (rest == 1)  // rational roots
        return Quad(Rational(-b + sq) * half);
    Quad root(Rational(-b) * half, Rational(sq) * half, rest);
    Quad other(Rational(-b) * half, -Rational(sq) * half, rest);
    return root > other ? root : other;
}

// Continued-fraction expansion by exact floor/invert. Quadratic irrationals
// give eventually periodic output; rationals terminate (and we stop cleanly).
inline std::vector<Int> continued_fraction(Quad x, int depth) {
    if (depth < 1) throw std::invalid_argument("continued_fraction: depth must be >= 1");
    std::vector<Int> out;
    for (int k = 0; k < depth; ++k) {
        Int a = x.floor();
        out.push_back(a);
        Quad frac = x - Quad(Rational(a));
        if (frac.sgn() == 0) break;
        x = Quad(Rational(1)) / frac;
    }
    return out;
}

// Convergents p_k/q_k from partial quotients.
struct Convergent {
    Int p, q;
};
inline std::vector<Convergent> convergents(const std::vector<Int>& cf) {
    std::vector<Convergent> out;
    Int pm1 = 1, pm2 = 0, qm1 = 0, qm2 = 1;
    for (const Int& a : cf) {
        Int p = a * pm1 + pm2, q = a * qm1 + qm2;
        out.push_back({p, q});
        pm2 = pm1;
        pm1 = p;
        qm2 = qm1;
        qm1 = q;
    }
    return out;
}

}  // namespace nilflow
