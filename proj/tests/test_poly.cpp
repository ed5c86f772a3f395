#include <gtest/gtest.h>

#include <random>

#include "gamesteer/poly.hpp"

using namespace gamesteer;

namespace {

Poly x_of(const SpacePtr& s, std::size_t k) { return Poly::variable(s, k); }

Poly random_poly(const SpacePtr& s, int max_deg, int n_terms, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  auto basis = monomial_basis(s->dim(), max_deg);
  std::uniform_int_distribution<std::size_t> pick(0, basis.size() - 1);
  Poly p(s);
  for (int t = 0; t < n_terms; ++t) p.add_term(basis[pick(rng)], coef(rng));
  return p;
}

// Independent binomial coefficient via Pascal's triangle.
std::size_t pascal(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> c(n + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) {
    c[i][0] = 1;
    for (std::size_t j = 1; j <= i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c[n][k];
}

}  // namespace

TEST(Poly, EvalExamples) {
  auto s = make_space({"x", "y"});
  Poly p = x_of(s, 0) * x_of(s, 0) + 2.0 * x_of(s, 1);
  std::vector<double> pt{3.0, 1.0};
  EXPECT_DOUBLE_EQ(eval(p, pt), 11.0);
  EXPECT_DOUBLE_EQ(eval(Poly(s), pt), 0.0);

  auto s2 = make_space({"x", "w"});
  std::vector<double> pt2{0.5, 0.4};
  EXPECT_DOUBLE_EQ(eval(x_of(s2, 0) * x_of(s2, 1), pt2), 0.2);
  std::vector<double> bad{1.0};
  EXPECT_THROW(eval(p, bad), DimensionError);
}

TEST(Poly, MulExamples) {
  auto s = make_space({"x", "y"});
  Poly one = Poly::constant(s, 1.0);
  Poly x = x_of(s, 0), y = x_of(s, 1);
  EXPECT_EQ((x + one) * (x - one), x * x - one);
  EXPECT_TRUE((x * Poly(s)).is_zero());
  EXPECT_EQ((x + y) * (x + y), x * x + 2.0 * (x * y) + y * y);
  EXPECT_EQ(((x + one) * (y - one)).degree(), 2);
  EXPECT_THROW(x * Poly::variable(make_space({"a", "b"}), 0), DimensionError);
}

TEST(Poly, PartialExamples) {
  auto s = make_space({"x", "y"});
  Poly x = x_of(s, 0), y = x_of(s, 1);
  EXPECT_EQ(partial(x * x * y, 0), 2.0 * (x * y));
  EXPECT_TRUE(partial(Poly::constant(s, 3.0), 0).is_zero());
  EXPECT_TRUE(partial(x * x * x, 1).is_zero());
  EXPECT_THROW(partial(x, 2), DimensionError);
}

TEST(Poly, SubstituteExamples) {
  auto s = make_space({"x", "y"});
  Poly x = x_of(s, 0), y = x_of(s, 1);
  EXPECT_TRUE(substitute(x * y, {{0, 0.0}}).is_zero());
  EXPECT_EQ(substitute(x + y, {{0, 1.0}}), y + Poly::constant(s, 1.0));
  auto s2 = make_space({"x", "w"});
  Poly x2 = x_of(s2, 0), w = x_of(s2, 1);
  EXPECT_EQ(substitute(x2 * x2 * w, {{1, 2.0}}), 2.0 * (x2 * x2));
}

TEST(Poly, MonomialBasisExamples) {
  auto b = monomial_basis(2, 1);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0], (Exponent{0, 0}));
  EXPECT_EQ(b[1], (Exponent{1, 0}));
  EXPECT_EQ(b[2], (Exponent{0, 1}));
  EXPECT_EQ(monomial_basis(2, 2).size(), 6u);
  EXPECT_EQ(monomial_basis(5, 3).size(), 56u);
  EXPECT_THROW(monomial_basis(2, -1), std::invalid_argument);
}

TEST(Poly, MonomialBasisCountMatchesBinomial) {
  for (std::size_t dim = 1; dim <= 6; ++dim)
    for (int d = 0; d <= 8; ++d) {
      auto b = monomial_basis(dim, d);
      EXPECT_EQ(b.size(), pascal(dim + d, d)) << dim << " " << d;
      EXPECT_EQ(monomial_count(dim, d), b.size());
      for (std::size_t k = 1; k < b.size(); ++k) EXPECT_TRUE(graded_lex_less(b[k - 1], b[k]));
    }
}

TEST(PolyProperty, EvalIsMultiplicative) {
  std::mt19937_64 rng(7);
  auto s = make_space({"a", "b", "c"});
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 100; ++t) {
    Poly p = random_poly(s, 3, 6, rng), q = random_poly(s, 3, 6, rng);
    std::vector<double> z{u(rng), u(rng), u(rng)};
    const double lhs = eval(p * q, z);
    const double rhs = eval(p, z) * eval(q, z);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(PolyProperty, ProductRuleIsExact) {
  std::mt19937_64 rng(11);
  auto s = make_space({"a", "b", "c"});
  for (int t = 0; t < 50; ++t) {
    // integer coefficients keep the comparison exact
    Poly p(s), q(s);
    std::uniform_int_distribution<int> ci(-3, 3);
    for (const auto& e : monomial_basis(3, 2)) {
      p.add_term(e, ci(rng));
      q.add_term(e, ci(rng));
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(partial(p * q, k), partial(p, k) * q + p * partial(q, k));
  }
}

TEST(PolyProperty, SubstituteThenEval) {
  std::mt19937_64 rng(13);
  auto s = make_space({"a", "b", "c"});
  for (int t = 0; t < 50; ++t) {
    Poly p(s);
    std::uniform_int_distribution<int> ci(-3, 3);
    for (const auto& e : monomial_basis(3, 3)) p.add_term(e, ci(rng));
    // dyadic values keep arithmetic exact
    const double vb = 0.5, a = 1.25, c = -0.75;
    std::vector<double> z{a, vb, c};
    EXPECT_EQ(eval(substitute(p, {{1, vb}}), z), eval(p, z));
  }
}

TEST(Poly, TextRoundTrip) {
  std::mt19937_64 rng(17);
  auto s = make_space({"x11", "x21", "w1"});
  for (int t = 0; t < 20; ++t) {
    Poly p = random_poly(s, 4, 8, rng);
    EXPECT_EQ(parse_polynomial(s, to_string(p)), p);
  }
  EXPECT_EQ(to_string(Poly(s)), "0");
  EXPECT_TRUE(parse_polynomial(s, "0").is_zero());
  EXPECT_THROW(parse_polynomial(s, "1*zz"), std::invalid_argument);
}

TEST(Poly, ExactNormalization) {
  auto s = make_space({"x"});
  Poly p = Poly::variable(s, 0);
  p.add_term({1}, -1.0);
  EXPECT_TRUE(p.is_zero());
  EXPECT_EQ(p.degree(), -1);
  Poly q = Poly::monomial(s, {2}, 1e-300);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_THROW(make_space({"x", "x"}), std::invalid_argument);
}
