#pragma once

/*
 * Small dense exact-rational linear algebra: rank, solve, nullspace, inverse.
 *
 * Plain Gaussian elimination with first-nonzero pivoting. Over exact
 * rationals there is no stability concern; sizes here are tiny (dim ≤ 80), so
 * fraction growth is a non-issue and fraction-free variants are not worth the
 * complexity.
 */

#include "nilflow/rational.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nilflow {

class RatMatrix {
  public:
    RatMatrix() : rows_(0), cols_(0) {}
    RatMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, Rational(0)) {}

    static RatMatrix identity(std::size_t n) {
        RatMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Rational& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Rational& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    RatMatrix transposed() const {
        RatMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    friend RatMatrix operator*(const RatMatrix& x, const RatMatrix& y) {
        if (x.cols_ != y.rows_) throw std::invalid_argument("RatMatrix: shape mismatch");
        RatMatrix r(x.rows_, y.cols_);
        for (std::size_t i = 0; i < x.rows_; ++i)
            for (std::size_t k = 0; k < x.cols_; ++k) {
                if (x(i, k) == 0) continue;
                for (std::size_t j = 0; j < y.cols_; ++j) r(i, j) += x(i, k) * y(k, j);
            }
        return r;
    }

    friend bool operator==(const RatMatrix& x, const RatMatrix& y) {
        return x.rows_ == y.rows_ && x.cols_ == y.cols_ && x.data_ == y.data_;
    }

    // Row-reduces in place; returns the rank and fills pivot column indices.
    std::size_t row_reduce(std::vector<std::size_t>* pivot_cols = nullptr) {
        std::size_t rank = 0;
        for (std::size_t col = 0; col < cols_ && rank < rows_; ++col) {
            std::size_t piv = rank;
            while (piv < rows_ && (*this)(piv, col) == 0) ++piv;
            if (piv == rows_) continue;
            if (piv != rank)
                for (std::size_t j = 0; j < cols_; ++j)
                    std::swap((*this)(piv, j), (*this)(rank, j));
            Rational inv = Rational(1) / (*this)(rank, col);
            for (std::size_t j = col; j < cols_; ++j) (*this)(rank, j) *= inv;
            for (std::size_t i = 0; i < rows_; ++i) {
                if (i == rank || (*this)(i, col) == 0) continue;
                Rational f = (*this)(i, col);
                for (std::size_t j = col; j < cols_; ++j)
                    (*this)(i, j) -= f * (*this)(rank, j);
            }
            if (pivot_cols) pivot_cols->push_back(col);
            ++rank;
        }
        return rank;
    }

    std::size_t rank() const {
        RatMatrix copy = *this;
        return copy.row_reduce();
    }

    // Basis of the right nullspace, one column vector per row of the result.
    std::vector<std::vector<Rational>> nullspace() const {
        RatMatrix r = *this;
        std::vector<std::size_t> pivots;
        r.row_reduce(&pivots);
        std::vector<bool> is_pivot(cols_, false);
        for (auto c : pivots) is_pivot[c] = true;
        std::vector<std::vector<Rational>> basis;
        for (std::size_t free_col = 0; free_col < cols_; ++free_col) {
            if (is_pivot[free_col]) continue;
            std::vector<Rational> v(cols_, Rational(0));
            v[free_col] = 1;
            for (std::size_t k = 0; k < pivots.size(); ++k) v[pivots[k]] = -r(k, free_col);
            basis.push_back(std::move(v));
        }
        return basis;
    }

    // Solves A x = b exactly; returns false when inconsistent. For
    // underdetermined systems any one solution is produced.
    bool solve(const std::vector<Rational>& b, std::vector<Rational>& x) const {
        if (b.size() != rows_) throw std::invalid_argument("RatMatrix::solve: bad rhs size");
        RatMatrix aug(rows_, cols_ + 1);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) aug(i, j) = (*this)(i, j);
            aug(i, cols_) = b[i];
        }
        std::vector<std::size_t> pivots;
        std::size_t rank = aug.row_reduce(&pivots);
        if (!pivots.empty() && pivots.back() == cols_) return false;  // 0 = nonzero row
        x.assign(cols_, Rational(0));
        for (std::size_t k = 0; k < rank; ++k) x[pivots[k]] = aug(k, cols_);
        return true;
    }

    RatMatrix inverse() const {
        if (rows_ != cols_) throw std::invalid_argument("RatMatrix::inverse: not square");
        RatMatrix aug(rows_, 2 * cols_);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) aug(i, j) = (*this)(i, j);
            aug(i, cols_ + i) = 1;
        }
        if (aug.row_reduce() != rows_) throw std::domain_error("RatMatrix::inverse: singular");
        RatMatrix inv(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) inv(i, j) = aug(i, cols_ + j);
        return inv;
    }

  private:
    std::size_t rows_, cols_;
    std::vector<Rational> data_;
};

// Rank of the span of a set of vectors (rows).
inline std::size_t span_rank(const std::vector<std::vector<Rational>>& vectors) {
    if (vectors.empty()) return 0;
    RatMatrix m(vectors.size(), vectors.front().size());
    for (std::size_t i = 0; i < vectors.size(); ++i)
        for (std::size_t j = 0; j < vectors[i].size(); ++j) m(i, j) = vectors[i][j];
    return m.rank();
}

}  // namespace nilflow
