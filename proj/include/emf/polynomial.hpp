#pragma once

// Polynomials in the overlap symbols p_{ij} = p_{ji}, with the derivation
// X_{ab} acting on them.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace emf {

/// Symbol p_{first second} with first <= second.
using Symbol = std::pair<std::uint32_t, std::uint32_t>;

inline Symbol make_symbol(std::uint32_t i, std::uint32_t j) { return i <= j ? Symbol{i, j} : Symbol{j, i}; }

/// Sorted multiset of symbols.
using Monomial = std::vector<Symbol>;

template <class Coeff>
class OverlapPolynomial {
 public:
  using Terms = std::map<Monomial, Coeff>;

  OverlapPolynomial() = default;

  static OverlapPolynomial constant(const Coeff& c) {
    OverlapPolynomial p;
    p.add(Monomial{}, c);
    return p;
  }

  static OverlapPolynomial symbol(std::uint32_t i, std::uint32_t j, const Coeff& c = Coeff(1)) {
    OverlapPolynomial p;
    p.add(Monomial{make_symbol(i, j)}, c);
    return p;
  }

  const Terms& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  void add(Monomial m, const Coeff& c) {
    if (c == Coeff(0)) return;
    std::sort(m.begin(), m.end());
    auto [it, inserted] = terms_.try_emplace(std::move(m), c);
    if (!inserted) {
      it->second += c;
      if (it->second == Coeff(0)) terms_.erase(it);
    }
  }

  OverlapPolynomial& operator+=(const OverlapPolynomial& o) {
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  OverlapPolynomial& operator-=(const OverlapPolynomial& o) {
    for (const auto& [m, c] : o.terms_) add(m, -c);
    return *this;
  }
  OverlapPolynomial& operator*=(const Coeff& s) {
    if (s == Coeff(0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  friend OverlapPolynomial operator+(OverlapPolynomial a, const OverlapPolynomial& b) { return a += b; }
  friend OverlapPolynomial operator-(OverlapPolynomial a, const OverlapPolynomial& b) { return a -= b; }
  friend OverlapPolynomial operator*(OverlapPolynomial a, const Coeff& s) { return a *= s; }
  friend OverlapPolynomial operator*(const OverlapPolynomial& a, const OverlapPolynomial& b) {
    OverlapPolynomial out;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        out.add(std::move(m), ca * cb);
      }
    return out;
  }
  friend bool operator==(const OverlapPolynomial& a, const OverlapPolynomial& b) { return a.terms_ == b.terms_; }

  /// Substitutes p_{ij} = value(i, j).
  template <class Value, class F>
  Value evaluate(F&& value) const {
    Value total(0);
    for (const auto& [m, c] : terms_) {
      Value prod = static_cast<Value>(c);
      for (const auto& s : m) prod *= value(s.first, s.second);
      total += prod;
    }
    return total;
  }

  template <class Other, class Convert>
  OverlapPolynomial<Other> convert(Convert&& f) const {
    OverlapPolynomial<Other> out;
    for (const auto& [m, c] : terms_) out.add(m, f(c));
    return out;
  }

  /// Human-readable form with 1-based symbol indices.
  std::string str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) os << " + ";
      first = false;
      os << "(" << c << ")";
      for (const auto& s : m) os << "*p" << s.first + 1 << "_" << s.second + 1;
    }
    return os.str();
  }

 private:
  Terms terms_;
};

using ExactPolynomial = OverlapPolynomial<boost::multiprecision::cpp_rational>;

namespace detail {

/// X_{ab} applied to a single symbol, as (coefficient, symbol) pairs.
inline std::vector<std::pair<int, Symbol>> apply_X_symbol(std::uint32_t a, std::uint32_t b, Symbol s) {
  const auto [i, j] = s;
  if (i == j) {
    if (i == a) return {{-2, make_symbol(a, b)}};
    if (i == b) return {{2, make_symbol(a, b)}};
    return {};
  }
  if (make_symbol(a, b) == s) return {{1, make_symbol(a, a)}, {-1, make_symbol(b, b)}};
  if (i == a || j == a) return {{-1, make_symbol(b, i == a ? j : i)}};
  if (i == b || j == b) return {{1, make_symbol(a, i == b ? j : i)}};
  return {};
}

}  // namespace detail

/// Derivation X_{ab} extended to products by the Leibniz rule.
template <class Coeff>
OverlapPolynomial<Coeff> apply_X(std::uint32_t a, std::uint32_t b, const OverlapPolynomial<Coeff>& poly) {
  OverlapPolynomial<Coeff> out;
  if (a == b) return out;
  for (const auto& [m, c] : poly.terms()) {
    for (std::size_t t = 0; t < m.size(); ++t) {
      if (t > 0 && m[t] == m[t - 1]) continue;  // repeated factor: counted via multiplicity below
      const auto multiplicity = static_cast<int>(std::count(m.begin(), m.end(), m[t]));
      for (const auto& [k, sym] : detail::apply_X_symbol(a, b, m[t])) {
        Monomial next = m;
        next[t] = sym;
        out.add(std::move(next), c * Coeff(k * multiplicity));
      }
    }
  }
  return out;
}

/// Leibniz expansion of det(p_{k_i k_j}).
inline ExactPolynomial det_expand(const std::vector<std::uint32_t>& k) {
  const std::size_t n = k.size();
  std::vector<std::size_t> sigma(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  ExactPolynomial out;
  do {
    int inversions = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (sigma[i] > sigma[j]) ++inversions;
    Monomial m;
    m.reserve(n);
    for (std::size_t i = 0; i < n; ++i) m.push_back(make_symbol(k[i], k[sigma[i]]));
    out.add(std::move(m), inversions % 2 == 0 ? 1 : -1);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return out;
}

}  // namespace emf
