#pragma once

/*
 * Exact scalar types used throughout the library.
 *
 * All structure constants, bracket tables, BCH coefficients and oracle
 * computations run over arbitrary-precision rationals so that equality checks
 * are genuinely exact. Orbit kernels use plain double; the two flavors never
 * mix silently (conversions are explicit).
 */

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nilflow {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

inline Rational rational(long long num, long long den = 1) {
    if (den == 0) throw std::invalid_argument("rational: zero denominator");
    return Rational(Int(num), Int(den));
}

// Parses "p", "-p", or "p/q" with arbitrary-precision parts.
inline Rational parse_rational(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rational(Int(s));
        Int num(s.substr(0, slash));
        Int den(s.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("zero denominator");
        return Rational(num, den);
    } catch (const std::exception&) {
        throw std::invalid_argument("parse_rational: cannot parse '" + s + "'");
    }
}

inline std::string to_string(const Rational& q) {
    if (denominator(q) == 1) return numerator(q).str();
    return numerator(q).str() + "/" + denominator(q).str();
}

// Floor of an exact rational as a big integer (rounds toward -inf).
inline Int floor_int(const Rational& q) {
    Int n = numerator(q), d = denominator(q);  // d > 0 by normalization
    Int quot = n / d;
    if (n < 0 && quot * d != n) --quot;
    return quot;
}

inline Int round_nearest(const Rational& q) { return floor_int(q + Rational(1, 2)); }

inline int sign(const Rational& q) {
    if (q > 0) return 1;
    if (q < 0) return -1;
    return 0;
}

inline Rational abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

}  // namespace nilflow
