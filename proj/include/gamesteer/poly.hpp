#pragma once

// Sparse multivariate polynomials over an ordered variable set.
//
// Polynomial<Scalar> stores a map from exponent tuples to coefficients. The
// scalar type is double for numeric polynomials and AffineForm (see sos.hpp)
// for polynomials whose coefficients are affine in decision variables.
// Normalization is exact: only coefficients that are exactly zero are dropped.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gamesteer {

/// Ordered list of variable identifiers. State coordinates come first,
/// control coordinates after.
class VarSpace {
 public:
  explicit VarSpace(std::vector<std::string> names);

  std::size_t dim() const { return names_.size(); }
  const std::string& name(std::size_t k) const { return names_.at(k); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const VarSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
};

using SpacePtr = std::shared_ptr<const VarSpace>;

SpacePtr make_space(std::vector<std::string> names);

/// Fixed-length exponent tuple, one entry per variable of the space.
using Exponent = std::vector<int>;

int total_degree(const Exponent& e);

/// Graded lexicographic order: lower total degree first, ties broken
/// lexicographically with the first variable most significant.
bool graded_lex_less(const Exponent& a, const Exponent& b);

inline bool is_zero_coefficient(double v) { return v == 0.0; }

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar = double>
class Polynomial {
 public:
  using Terms = std::map<Exponent, Scalar>;

  Polynomial() = default;
  explicit Polynomial(SpacePtr space) : space_(std::move(space)) {}

  static Polynomial constant(SpacePtr space, const Scalar& value) {
    Polynomial p(space);
    p.add_term(Exponent(p.dim(), 0), value);
    return p;
  }

  static Polynomial variable(SpacePtr space, std::size_t k) {
    Polynomial p(space);
    if (k >= p.dim()) throw DimensionError("variable index out of range");
    Exponent e(p.dim(), 0);
    e[k] = 1;
    p.add_term(e, Scalar(1.0));
    return p;
  }

  static Polynomial monomial(SpacePtr space, Exponent e, const Scalar& coeff) {
    Polynomial p(space);
    p.add_term(e, coeff);
    return p;
  }

  const SpacePtr& space() const { return space_; }
  std::size_t dim() const { return space_ ? space_->dim() : 0; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  /// Total degree; -1 for the zero polynomial.
  int degree() const {
    int d = -1;
    for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
    return d;
  }

  /// Coefficient of a monomial (zero if absent).
  Scalar coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Scalar{} : it->second;
  }

  void add_term(const Exponent& e, const Scalar& c) {
    if (e.size() != dim()) throw DimensionError("exponent length does not match space");
    for (int v : e)
      if (v < 0) throw std::invalid_argument("negative exponent");
    if (is_zero_coefficient(c)) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second = it->second + c;
      if (is_zero_coefficient(it->second)) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& q) {
    check_same_space(q);
    for (const auto& [e, c] : q.terms_) add_term(e, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& q) {
    check_same_space(q);
    for (const auto& [e, c] : q.terms_) add_term(e, c * -1.0);
    return *this;
  }

  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second = it->second * s;
      if (is_zero_coefficient(it->second))
        it = terms_.erase(it);
      else
        ++it;
    }
    return *this;
  }

  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }

  bool same_space(const Polynomial& q) const {
    if (space_ == q.space_) return true;
    return space_ && q.space_ && *space_ == *q.space_;
  }

  void check_same_space(const Polynomial& q) const {
    if (!same_space(q)) throw DimensionError("polynomials live in different variable spaces");
  }

  bool operator==(const Polynomial& q) const { return same_space(q) && terms_ == q.terms_; }

 private:
  SpacePtr space_;
  Terms terms_;
};

using Poly = Polynomial<double>;

/// Evaluates p at a point; terms are accumulated in lexicographic exponent
/// order so the result is deterministic.
double eval(const Poly& p, std::span<const double> point);

template <typename A, typename B>
auto mul(const Polynomial<A>& p, const Polynomial<B>& q)
    -> Polynomial<decltype(std::declval<A>() * std::declval<B>())> {
  using R = decltype(std::declval<A>() * std::declval<B>());
  if (!(p.space() == q.space() || (p.space() && q.space() && *p.space() == *q.space())))
    throw DimensionError("polynomials live in different variable spaces");
  Polynomial<R> out(p.space());
  Exponent e(p.dim());
  for (const auto& [ep, cp] : p.terms()) {
    for (const auto& [eq, cq] : q.terms()) {
      for (std::size_t k = 0; k < e.size(); ++k) e[k] = ep[k] + eq[k];
      out.add_term(e, cp * cq);
    }
  }
  return out;
}

inline Poly operator*(const Poly& p, const Poly& q) { return mul(p, q); }

/// Power rule in variable k.
template <typename S>
Polynomial<S> partial(const Polynomial<S>& p, std::size_t k) {
  if (k >= p.dim()) throw DimensionError("partial: variable index out of range");
  Polynomial<S> out(p.space());
  for (const auto& [e, c] : p.terms()) {
    if (e[k] == 0) continue;
    Exponent d = e;
    d[k] -= 1;
    out.add_term(d, c * static_cast<double>(e[k]));
  }
  return out;
}

/// Fixes the listed variables to numeric values. The result keeps the same
/// variable space; fixed variables no longer appear in any term.
template <typename S>
Polynomial<S> substitute(const Polynomial<S>& p,
                         const std::vector<std::pair<std::size_t, double>>& assignments) {
  for (const auto& [k, v] : assignments)
    if (k >= p.dim()) throw DimensionError("substitute: variable index out of range");
  Polynomial<S> out(p.space());
  for (const auto& [e, c] : p.terms()) {
    Exponent r = e;
    double factor = 1.0;
    for (const auto& [k, v] : assignments) {
      for (int j = 0; j < r[k]; ++j) factor *= v;
      r[k] = 0;
    }
    out.add_term(r, c * factor);
  }
  return out;
}

/// Replaces variable k by the polynomial q (same space).
template <typename S>
Polynomial<S> compose(const Polynomial<S>& p, std::size_t k, const Poly& q) {
  if (k >= p.dim()) throw DimensionError("compose: variable index out of range");
  if (!(p.space() == q.space() || *p.space() == *q.space()))
    throw DimensionError("compose: spaces differ");
  int max_power = 0;
  for (const auto& [e, c] : p.terms()) max_power = std::max(max_power, e[k]);
  std::vector<Poly> powers;
  powers.push_back(Poly::constant(q.space(), 1.0));
  for (int j = 1; j <= max_power; ++j) powers.push_back(mul(powers.back(), q));

  Polynomial<S> out(p.space());
  for (const auto& [e, c] : p.terms()) {
    Exponent r = e;
    const int power = r[k];
    r[k] = 0;
    for (const auto& [eq, cq] : powers[power].terms()) {
      Exponent s = r;
      for (std::size_t j = 0; j < s.size(); ++j) s[j] += eq[j];
      out.add_term(s, c * cq);
    }
  }
  return out;
}

/// Indices of variables that appear with a positive exponent in some term.
template <typename S>
std::vector<std::size_t> active_variables(const Polynomial<S>& p) {
  std::vector<bool> seen(p.dim(), false);
  for (const auto& [e, c] : p.terms())
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k] > 0) seen[k] = true;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (seen[k]) out.push_back(k);
  return out;
}

/// All exponent tuples of total degree <= max_degree in graded-lex order.
std::vector<Exponent> monomial_basis(std::size_t dim, int max_degree);

/// Number of monomials of degree <= d in n variables, C(n + d, d).
std::size_t monomial_count(std::size_t dim, int max_degree);

/// Text form `coeff*x1^e1*...*xn^en` terms joined by ` + `; "0" for zero.
std::string to_string(const Poly& p);

/// Parses the text form produced by to_string.
Poly parse_polynomial(const SpacePtr& space, std::string_view text);

}  // namespace gamesteer
