// Exact unipotent matrix arithmetic: the faithful matrix realization of the
// upper-triangular algebras.  Because strictly upper triangular matrices are
// nilpotent, exp and log are finite polynomial sums and stay inside the
// rationals, so products of exponentials can be evaluated with no error at
// all.  This gives an independent cross-check for the abstract
// Baker-Campbell-Hausdorff evaluation: both routes must agree exactly.

#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "nilflow/rational.hpp"

namespace nilflow {

// Dense square rational matrix, sized at construction.  Only the handful of
// operations the unipotent model needs.
class SquareMat {
public:
    explicit SquareMat(int n) : n_(n), a_(static_cast<size_t>(n) * n) {}

    static SquareMat identity(int n) {
        SquareMat m(n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1;
        return m;
    }

    int size() const { return n_; }
    Rational& at(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
    const Rational& at(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

    SquareMat operator*(const SquareMat& o) const {
        if (o.n_ != n_) throw std::invalid_argument("SquareMat: size mismatch");
        SquareMat r(n_);
        for (int i = 0; i < n_; ++i)
            for (int k = 0; k < n_; ++k) {
                const Rational& x = at(i, k);
                if (x == 0) continue;
                for (int j = 0; j < n_; ++j) {
                    const Rational& y = o.at(k, j);
                    if (y != 0) r.at(i, j) += x * y;
                }
            }
        return r;
    }

    SquareMat& operator+=(const SquareMat& o) {
        for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }

    SquareMat& scale(const Rational& c) {
        for (auto& x : a_) x *= c;
        return *this;
    }

    bool operator==(const SquareMat& o) const { return n_ == o.n_ && a_ == o.a_; }

    bool is_zero() const {
        for (const auto& x : a_)
            if (x != 0) return false;
        return true;
    }

private:
    int n_;
    std::vector<Rational> a_;
};

// exp(N) for a nilpotent matrix N: the series terminates at N^(n-1).
inline SquareMat unipotent_exp(const SquareMat& n) {
    SquareMat acc = SquareMat::identity(n.size());
    SquareMat power = SquareMat::identity(n.size());
    Rational inv_fact = 1;
    for (int i = 1; i < n.size(); ++i) {
        power = power * n;
        if (power.is_zero()) break;
        inv_fact /= i;
        SquareMat term = power;
        term.scale(inv_fact);
        acc += term;
    }
    return acc;
}

// log(M) for unipotent M = I + N: alternating series in N, also finite.
inline SquareMat unipotent_log(const SquareMat& m) {
    SquareMat n = m;
    for (int i = 0; i < n.size(); ++i) n.at(i, i) -= 1;
    SquareMat acc(m.size());
    SquareMat power = SquareMat::identity(m.size());
    for (int i = 1; i < m.size(); ++i) {
        power = power * n;
        if (power.is_zero()) break;
        SquareMat term = power;
        term.scale(Rational((i % 2 == 1) ? 1 : -1, i));
        acc += term;
    }
    return acc;
}

// A basis for a subalgebra of strictly upper triangular (k+1)x(k+1) matrices:
// each abstract basis element maps to a single elementary matrix E_{rc}.
// Coordinates round-trip trivially because distinct basis elements occupy
// distinct matrix entries.
struct MatrixBasis {
    int size = 0;                              // matrix dimension (k+1)
    std::vector<std::pair<int, int>> entries;  // (row, col) per basis element, 0-based

    SquareMat to_matrix(const std::vector<Rational>& coords) const {
        if (coords.size() != entries.size())
            throw std::invalid_argument("MatrixBasis: coordinate count mismatch");
        SquareMat m(size);
        for (size_t i = 0; i < entries.size(); ++i)
            m.at(entries[i].first, entries[i].second) = coords[i];
        return m;
    }

    // Reads coordinates back off the matrix entries and checks that nothing
    // leaked outside the spanned positions (which would mean the input was
    // not in the subalgebra's image).
    std::vector<Rational> from_matrix(const SquareMat& m) const {
        std::vector<Rational> coords(entries.size());
        SquareMat residue = m;
        for (size_t i = 0; i < entries.size(); ++i) {
            coords[i] = m.at(entries[i].first, entries[i].second);
            residue.at(entries[i].first, entries[i].second) = 0;
        }
        for (int r = 0; r < residue.size(); ++r)
            for (int c = 0; c < residue.size(); ++c)
                if (residue.at(r, c) != 0)
                    throw std::domain_error("MatrixBasis: matrix has components outside the basis span");
        return coords;
    }
};

// log(exp(X) * exp(Y)) computed entirely in the matrix realization.
inline std::vector<Rational> matrix_bch(const MatrixBasis& basis,
                                        const std::vector<Rational>& x,
                                        const std::vector<Rational>& y) {
    SquareMat product = unipotent_exp(basis.to_matrix(x)) * unipotent_exp(basis.to_matrix(y));
    return basis.from_matrix(unipotent_log(product));
}

}  // namespace nilflow
