#include "gamesteer/poly.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace gamesteer {

VarSpace::VarSpace(std::vector<std::string> names) : names_(std::move(names)) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("variable names must be nonempty");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate variable name: " + n);
  }
}

std::optional<std::size_t> VarSpace::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < names_.size(); ++k)
    if (names_[k] == name) return k;
  return std::nullopt;
}

SpacePtr make_space(std::vector<std::string> names) {
  return std::make_shared<const VarSpace>(std::move(names));
}

int total_degree(const Exponent& e) { return std::accumulate(e.begin(), e.end(), 0); }

bool graded_lex_less(const Exponent& a, const Exponent& b) {
  const int da = total_degree(a);
  const int db = total_degree(b);
  if (da != db) return da < db;
  // Within a degree, x^... with a larger leading exponent comes later so the
  // first-degree block reads [x1, x2, ...].
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

double eval(const Poly& p, std::span<const double> point) {
  if (point.size() != p.dim()) throw DimensionError("eval: point length does not match space");
  double sum = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double m = c;
    for (std::size_t k = 0; k < e.size(); ++k)
      for (int j = 0; j < e[k]; ++j) m *= point[k];
    sum += m;
  }
  return sum;
}

namespace {

void enumerate(std::size_t dim, int remaining, std::size_t k, Exponent& cur,
               std::vector<Exponent>& out) {
  if (k == dim) {
    out.push_back(cur);
    return;
  }
  for (int v = 0; v <= remaining; ++v) {
    cur[k] = v;
    enumerate(dim, remaining - v, k + 1, cur, out);
  }
  cur[k] = 0;
}

}  // namespace

std::vector<Exponent> monomial_basis(std::size_t dim, int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("monomial_basis: negative degree");
  std::vector<Exponent> out;
  Exponent cur(dim, 0);
  if (dim == 0) {
    out.push_back(cur);
    return out;
  }
  enumerate(dim, max_degree, 0, cur, out);
  std::sort(out.begin(), out.end(), graded_lex_less);
  return out;
}

std::size_t monomial_count(std::size_t dim, int max_degree) {
  // C(dim + d, d) computed incrementally; exact for the sizes used here.
  std::size_t r = 1;
  for (int i = 1; i <= max_degree; ++i) r = r * (dim + static_cast<std::size_t>(i)) / static_cast<std::size_t>(i);
  return r;
}

namespace {

std::string format_coefficient(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  std::string s(buf);
  // Exponent signs would collide with the term separator.
  auto pos = s.find("e+");
  if (pos != std::string::npos) s.erase(pos + 1, 1);
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string to_string(const Poly& p) {
  if (p.is_zero()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [e, c] : p.terms()) {
    if (!first) out << " + ";
    first = false;
    out << format_coefficient(c);
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] == 0) continue;
      out << '*' << p.space()->name(k);
      if (e[k] != 1) out << '^' << e[k];
    }
  }
  return out.str();
}

Poly parse_polynomial(const SpacePtr& space, std::string_view text) {
  Poly p(space);
  text = trim(text);
  if (text == "0" || text.empty()) return p;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('+', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view term = trim(text.substr(start, end - start));
    if (term.empty()) throw std::invalid_argument("parse_polynomial: empty term");

    Exponent e(space->dim(), 0);
    std::size_t star = term.find('*');
    std::string coeff_text(trim(term.substr(0, star)));
    char* stop = nullptr;
    double c = std::strtod(coeff_text.c_str(), &stop);
    if (stop != coeff_text.c_str() + coeff_text.size())
      throw std::invalid_argument("parse_polynomial: bad coefficient '" + coeff_text + "'");
    while (star != std::string_view::npos) {
      std::size_t next = term.find('*', star + 1);
      std::string_view factor =
          trim(term.substr(star + 1, next == std::string_view::npos ? std::string_view::npos : next - star - 1));
      std::size_t caret = factor.find('^');
      std::string_view name = factor.substr(0, caret);
      int power = 1;
      if (caret != std::string_view::npos) {
        auto digits = factor.substr(caret + 1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), power);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || power < 0)
          throw std::invalid_argument("parse_polynomial: bad exponent");
      }
      auto idx = space->index_of(name);
      if (!idx) throw std::invalid_argument("parse_polynomial: unknown variable '" + std::string(name) + "'");
      e[*idx] += power;
      star = next;
    }
    p.add_term(e, c);
    start = end + 1;
    if (end == text.size()) break;
  }
  return p;
}

}  // namespace gamesteer
