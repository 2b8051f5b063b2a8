#pragma once

/*
 * Free Lie algebra combinatorics over exact rationals.
 *
 * Basis: Lyndon words (a Hall family) over g letters, up to a length cap.
 * Every Lyndon word w carries its standard bracketing σ(w) = [σ(u), σ(v)]
 * where w = uv and v is the longest proper Lyndon suffix. Expanded in the
 * free associative algebra, σ(w) = w + (strictly lex-greater words), so
 * decomposing an arbitrary homogeneous Lie element against the basis is a
 * triangular elimination on its lexicographically smallest word.
 *
 * The same machinery derives the BCH coefficients: log(exp x · exp y) is
 * computed directly as a truncated noncommutative power series and decomposed
 * into Lyndon bracketings. No published coefficient table is copied in; the
 * exact unipotent-matrix tests cross-check the result independently.
 */

#include "nilflow/rational.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilflow {

// Words over letters 0..g-1, stored as raw bytes in a std::string so that
// lexicographic word order is plain string order.
using Word = std::string;

// Truncated element of the free associative algebra: word -> coefficient.
using TensorElt = std::map<Word, Rational>;

inline void tensor_add(TensorElt& acc, const TensorElt& x, const Rational& scale) {
    for (const auto& [w, c] : x) {
        Rational& slot = acc[w];
        slot += scale * c;
        if (slot == 0) acc.erase(w);
    }
}

inline TensorElt tensor_mul(const TensorElt& x, const TensorElt& y, std::size_t max_len) {
    TensorElt out;
    for (const auto& [wx, cx] : x)
        for (const auto& [wy, cy] : y) {
            if (wx.size() + wy.size() > max_len) continue;
            Rational& slot = out[wx + wy];
            slot += cx * cy;
            if (slot == 0) out.erase(wx + wy);
        }
    return out;
}

inline TensorElt tensor_bracket(const TensorElt& x, const TensorElt& y, std::size_t max_len) {
    TensorElt out = tensor_mul(x, y, max_len);
    tensor_add(out, tensor_mul(y, x, max_len), Rational(-1));
    return out;
}

inline bool is_lyndon(const Word& w) {
    if (w.empty()) return false;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w.substr(i) <= w) return false;  // proper suffixes must be strictly greater
    return true;
}

// All Lyndon words over g letters with length in [1, max_len], ordered by
// (length, lex). Sizes follow the necklace-counting dimensions (2,1,2,3,6,...
// for g=2), which the tests pin.
inline std::vector<Word> lyndon_words(int g, int max_len) {
    std::vector<Word> all;
    // Duval's generation: lexicographic stream of Lyndon words up to max_len.
    Word w(1, char(0));
    while (true) {
        if (static_cast<int>(w.size()) <= max_len) all.push_back(w);
        // extend periodically to full length, then increment the last letter
        Word ext = w;
        while (static_cast<int>(ext.size()) < max_len)
            ext.push_back(ext[ext.size() % w.size()]);
        while (!ext.empty() && ext.back() == char(g - 1)) ext.pop_back();
        if (ext.empty()) break;
        ++ext.back();
        w = ext;
    }
    std::stable_sort(all.begin(), all.end(), [](const Word& a, const Word& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return all;
}

// A Lyndon basis element: the word, its standard factorization (indices into
// the same list; -1 for single letters), and its tensor-algebra expansion.
struct LyndonElt {
    Word word;
    int left = -1, right = -1;
    TensorElt expansion;
};

class LyndonBasis {
  public:
    LyndonBasis(int generators, int max_len) : g_(generators), max_len_(max_len) {
        if (generators < 1) throw std::invalid_argument("LyndonBasis: need >= 1 generator");
        if (max_len < 1) throw std::invalid_argument("LyndonBasis: need max_len >= 1");
        std::vector<Word> words = lyndon_words(generators, max_len);
        elts_.reserve(words.size());
        for (std::size_t i = 0; i < words.size(); ++i) {
            index_[words[i]] = static_cast<int>(i);
            LyndonElt e;
            e.word = words[i];
            if (words[i].size() == 1) {
                e.expansion[words[i]] = 1;
            } else {
                // standard factorization w = uv, v the longest proper Lyndon suffix
                std::size_t split = 1;
                for (std::size_t s = 1; s < words[i].size(); ++s)
                    if (is_lyndon(words[i].substr(s))) {
                        split = s;
                        break;
                    }
                e.left = at(words[i].substr(0, split));
                e.right = at(words[i].substr(split));
                e.expansion = tensor_bracket(elts_[e.left].expansion, elts_[e.right].expansion,
                                             max_len_);
            }
            elts_.push_back(std::move(e));
        }
    }

    int generators() const { return g_; }
    int max_len() const { return max_len_; }
    std::size_t size() const { return elts_.size(); }
    const LyndonElt& operator[](std::size_t i) const { return elts_[i]; }
    int at(const Word& w) const {
        auto it = index_.find(w);
        if (it == index_.end()) throw std::out_of_range("LyndonBasis: not a basis word");
        return it->second;
    }

    // Decomposes a Lie element (given by its tensor expansion, all word
    // lengths <= max_len) into basis coefficients, by triangular elimination
    // on the lexicographically smallest surviving word per length.
    std::vector<Rational> decompose(TensorElt elt) const {
        std::vector<Rational> coeff(elts_.size(), Rational(0));
        while (!elt.empty()) {
            // smallest word overall; within equal content the Lyndon leader
            auto lead = elt.begin();
            for (auto it = elt.begin(); it != elt.end(); ++it)
                if (it->first.size() < lead->first.size() ||
                    (it->first.size() == lead->first.size() && it->first < lead->first))
                    lead = it;
            auto idx_it = index_.find(lead->first);
            if (idx_it == index_.end())
                throw std::domain_error("LyndonBasis::decompose: not a Lie element");
            int idx = idx_it->second;
            Rational c = lead->second;
            coeff[idx] += c;
            tensor_add(elt, elts_[idx].expansion, -c);
        }
        return coeff;
    }

  private:
    int g_, max_len_;
    std::vector<LyndonElt> elts_;
    std::map<Word, int> index_;
};

// Necklace-count dimension of the degree-m layer of the free Lie algebra on g
// generators: (1/m) Σ_{d|m} μ(d) g^{m/d}. Used as an independent check.
inline long long free_layer_dim(int g, int m) {
    auto moebius = [](int n) {
        int result = 1;
        for (int p = 2; p * p <= n; ++p)
            if (n % p == 0) {
                n /= p;
                if (n % p == 0) return 0;
                result = -result;
            }
        if (n > 1) result = -result;
        return result;
    };
    long long sum = 0;
    for (int d = 1; d <= m; ++d) {
        if (m % d) continue;
        long long pw = 1;
        for (int i = 0; i < m / d; ++i) pw *= g;
        sum += moebius(d) * pw;
    }
    return sum / m;
}

// One BCH term: a Lyndon bracketing over two letters with its coefficient.
struct BchTerm {
    int lyndon_index;
    Rational coeff;
};

// BCH coefficients through the given order, derived from scratch:
// u = exp(x)exp(y) − 1 and log(1+u) in the truncated free associative
// algebra, then a Lyndon decomposition per homogeneous degree.
struct BchTable {
    LyndonBasis basis;
    std::vector<BchTerm> terms;

    explicit BchTable(int order) : basis(2, order) {
        TensorElt x{{Word(1, char(0)), Rational(1)}};
        TensorElt y{{Word(1, char(1)), Rational(1)}};
        auto exp_series = [&](const TensorElt& a) {
            TensorElt acc{{Word(), Rational(1)}};
            TensorElt power{{Word(), Rational(1)}};
            Rational fact(1);
            for (int n = 1; n <= order; ++n) {
                power = tensor_mul(power, a, order);
                fact *= n;
                tensor_add(acc, power, Rational(1) / fact);
            }
            return acc;
        };
        TensorElt u = tensor_mul(exp_series(x), exp_series(y), order);
        tensor_add(u, TensorElt{{Word(), Rational(1)}}, Rational(-1));
        TensorElt log_acc;
        TensorElt upow{{Word(), Rational(1)}};
        for (int n = 1; n <= order; ++n) {
            upow = tensor_mul(upow, u, order);
            Rational c = Rational((n % 2) ? 1 : -1, n);
            tensor_add(log_acc, upow, c);
        }
        std::vector<Rational> coeff = basis.decompose(std::move(log_acc));
        for (std::size_t i = 0; i < coeff.size(); ++i)
            if (coeff[i] != 0) terms.push_back({static_cast<int>(i), coeff[i]});
    }

    // Shared table at the library-wide order cap.
    static constexpr int kMaxOrder = 5;
    static const BchTable& instance() {
        static BchTable table(kMaxOrder);
        return table;
    }
};

// Evaluates the BCH series for X, Y through the table, with user-supplied
// vector space operations. Bracket results are memoized per Lyndon index.
//
// Vec must support: copy, and the callbacks
//   bracket(a, b) -> Vec      axpy(acc, scale, v) (acc += scale * v)
template <class Vec, class Bracket, class Axpy>
Vec bch_evaluate(const Vec& x, const Vec& y, const Vec& zero, Bracket&& bracket, Axpy&& axpy) {
    const BchTable& table = BchTable::instance();
    std::vector<Vec> memo;
    memo.reserve(table.basis.size());
    for (std::size_t i = 0; i < table.basis.size(); ++i) {
        const LyndonElt& e = table.basis[i];
        if (e.word.size() == 1)
            memo.push_back(e.word[0] == 0 ? x : y);
        else
            memo.push_back(bracket(memo[e.left], memo[e.right]));
    }
    Vec out = zero;
    for (const BchTerm& t : table.terms) axpy(out, t.coeff, memo[t.lyndon_index]);
    return out;
}

}  // namespace nilflow
