#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>
#include <sstream>

#include "gamesteer/sos.hpp"

using namespace gamesteer;

namespace {

struct Solved {
  CompiledSos compiled;
  SdpSolution sol;
  SosExtraction ex;
};

Solved run(const SosProgram& prog) {
  Solved s;
  s.compiled = compile(prog);
  s.sol = solve(s.compiled.sdp);
  s.ex = extract(prog, s.compiled, s.sol);
  return s;
}

SemialgebraicSet interval(const SpacePtr& s, double lo, double hi) {
  SemialgebraicSet set(s);
  Poly x = Poly::variable(s, 0);
  set.inequalities = {x - Poly::constant(s, lo), Poly::constant(s, hi) - x};
  set.box = {{lo, hi}};
  return set;
}

}  // namespace

TEST(AffineForm, Arithmetic) {
  AffineForm a = AffineForm::variable(2, 3.0) + AffineForm(1.0);
  AffineForm b = AffineForm::variable(0, -1.0) + AffineForm::variable(2, -3.0);
  AffineForm c = a + b;
  EXPECT_EQ(c.constant(), 1.0);
  ASSERT_EQ(c.terms().size(), 1u);
  EXPECT_EQ(c.terms()[0], (std::pair<int, double>{0, -1.0}));
  std::vector<double> d{2.0, 0.0, 5.0};
  EXPECT_DOUBLE_EQ((a * 2.0).evaluate(d), 32.0);
  EXPECT_TRUE((a * 0.0).is_zero());
}

TEST(SosProgramTest, DeclarePolyCounts) {
  SosProgram prog(make_space({"a", "b", "c", "d"}));
  DecisionPoly p = prog.declare_poly(3);
  EXPECT_EQ(p.monomials.size(), 35u);
  DecisionPoly q = prog.declare_poly(0);
  EXPECT_EQ(q.monomials.size(), 1u);
  EXPECT_EQ(q.offset, 35);
  EXPECT_EQ(prog.num_decisions(), 36);
}

TEST(SosProgramTest, IdentityExamples) {
  auto s = make_space({"x"});
  {
    SosProgram prog(s);
    DecisionPoly p1 = prog.declare_poly(2), p2 = prog.declare_poly(2);
    prog.add_poly_identity(prog.as_polynomial(p1) + prog.as_polynomial(p2));
    CompiledSos c = compile(prog);
    EXPECT_EQ(c.sdp.rows, 3);
    Eigen::VectorXd t(3);
    t << 1.0, -2.0, 0.5;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 6);
    l.leftCols(3).setIdentity();
    prog.set_lsq_objective(l, t);
    Solved r = run(prog);
    ASSERT_EQ(r.sol.status, SdpStatus::Solved);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.ex.decisions[k] + r.ex.decisions[3 + k], 0.0, 1e-7);
    EXPECT_NEAR(r.ex.decisions[1], -2.0, 1e-5);
  }
  {
    SosProgram prog(s);
    prog.add_poly_identity(lift(Poly::constant(s, 3.0)));
    EXPECT_THROW(compile(prog), std::runtime_error);
  }
  {
    SosProgram prog(s);
    prog.add_poly_identity(AffinePoly(s));
    EXPECT_EQ(compile(prog).sdp.rows, 0);
  }
}

TEST(SosProgramTest, NonnegExamples) {
  auto s = make_space({"x"});
  Poly x = Poly::variable(s, 0);
  {
    SosProgram prog(s);
    SemialgebraicSet set(s);
    set.inequalities = {x};
    prog.add_nonneg_on(lift(x), set, 2);
    Solved r = run(prog);
    ASSERT_EQ(r.sol.status, SdpStatus::Solved);
    const auto& cert = r.ex.certificate.constraints.at(0);
    ASSERT_EQ(cert.sos.size(), 2u);
    EXPECT_LE(cert.sos[0].gram.norm(), 1e-6);
    EXPECT_NEAR(cert.sos[1].gram(0, 0), 1.0, 1e-6);
  }
  {
    // With linear generators the degree-2 truncation has constant sigma_j,
    // so 1 - x^2 needs either the ball constraint or degree 3.
    const Poly expr = Poly::constant(s, 1.0) - x * x;
    SemialgebraicSet ball = interval(s, -1.0, 1.0);
    ball.archimedean_radius = 1.0;
    for (const auto& [set, d] : {std::pair{ball, 2}, std::pair{interval(s, -1.0, 1.0), 3}}) {
      SosProgram prog(s);
      prog.add_nonneg_on(lift(expr), set, d);
      Solved r = run(prog);
      EXPECT_EQ(r.sol.status, SdpStatus::Solved) << d;
      EXPECT_LE(r.ex.certificate.constraints[0].identity_residual, 1e-6);
    }
  }
  {
    SosProgram prog(s);
    prog.add_nonneg_on(lift(Poly::constant(s, -1.0)), SemialgebraicSet(s), 2);
    Solved r = run(prog);
    EXPECT_NE(r.sol.status, SdpStatus::Solved);
  }
  {
    SosProgram prog(s);
    EXPECT_THROW(prog.add_nonneg_on(lift(x * x * x), SemialgebraicSet(s), 2), std::invalid_argument);
  }
}

TEST(SosProgramTest, HandBuiltMultipliersSatisfyIdentity) {
  // sigma_1 = (1+x)^2/2 on g_1 = 1 - x, sigma_2 = (1-x)^2/2 on g_2 = 1 + x
  auto s = make_space({"x"});
  Poly x = Poly::variable(s, 0), one = Poly::constant(s, 1.0);
  Poly lhs = (one - x) * (one + x) * (one + x) * 0.5 + (one + x) * (one - x) * (one - x) * 0.5;
  EXPECT_EQ(lhs, one - x * x);
}

TEST(SosProgramTest, SosBlockSingleConstraint) {
  auto s = make_space({"x"});
  Poly x = Poly::variable(s, 0);
  SosProgram prog(s);
  prog.add_nonneg_on(lift(x * x + Poly::constant(s, 1.0)), SemialgebraicSet(s), 2);
  Solved r = run(prog);
  ASSERT_EQ(r.sol.status, SdpStatus::Solved);
  EXPECT_EQ(r.compiled.sdp.blocks, std::vector<int>{2});
  EXPECT_LE(r.ex.certificate.delta_achieved, 1e-7);
}

TEST(SosLsq, Examples) {
  auto s = make_space({"x"});
  {
    SosProgram prog(s);
    prog.declare_poly(2);
    Eigen::Vector3d t(0.3, -1.0, 2.0);
    prog.set_lsq_objective(Eigen::MatrixXd::Identity(3, 3), t);
    Solved r = run(prog);
    ASSERT_EQ(r.sol.status, SdpStatus::Solved);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.ex.decisions[k], t(k), 1e-5);
    EXPECT_NEAR(r.sol.primal_objective, 0.0, 1e-6);
  }
  {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g;
    Eigen::MatrixXd l(6, 3);
    Eigen::VectorXd t(6);
    for (int i = 0; i < 6; ++i) {
      t(i) = g(rng);
      for (int j = 0; j < 3; ++j) l(i, j) = g(rng);
    }
    SosProgram prog(s);
    prog.declare_poly(2);
    prog.set_lsq_objective(l, t);
    Solved r = run(prog);
    ASSERT_EQ(r.sol.status, SdpStatus::Solved);
    const Eigen::VectorXd c = (l.transpose() * l).ldlt().solve(l.transpose() * t);
    const double best = (l * c - t).squaredNorm();
    EXPECT_NEAR(r.sol.primal_objective, best, 1e-5);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.ex.decisions[k], c(k), 1e-4);
  }
  {
    SosProgram prog(s);
    prog.declare_poly(1);
    prog.set_lsq_objective(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
    Solved r = run(prog);
    EXPECT_EQ(r.compiled.epigraph_block, -1);
    EXPECT_EQ(r.ex.objective, 0.0);
  }
  {
    SosProgram prog(s);
    prog.declare_poly(1);
    EXPECT_THROW(prog.set_lsq_objective(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd(3)), DimensionError);
  }
}

namespace {

// Fit a quadratic to noisy data subject to nonnegativity on [-1, 1].
SosProgram constrained_quadratic_fit(const SpacePtr& s, int d, std::mt19937_64& rng) {
  SosProgram prog(s);
  DecisionPoly h = prog.declare_poly(2);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 8;
  Eigen::MatrixXd l(n, 3);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) {
    const double z = u(rng);
    l(i, 0) = 1.0;
    l(i, 1) = z;
    l(i, 2) = z * z;
    t(i) = z * z - 0.3 + 0.2 * g(rng);  // pulls the fit negative near 0
  }
  prog.set_lsq_objective(l, t);
  SemialgebraicSet set = interval(s, -1.0, 1.0);
  prog.add_nonneg_on(prog.as_polynomial(h), set, d, "nonneg");
  return prog;
}

}  // namespace

TEST(SosProperty, CertificateIdentityAndGramsOnSamples) {
  auto s = make_space({"x"});
  std::mt19937_64 rng(31);
  SosProgram prog = constrained_quadratic_fit(s, 4, rng);
  Solved r = run(prog);
  ASSERT_EQ(r.sol.status, SdpStatus::Solved);
  for (const auto& cert : r.ex.certificate.constraints) {
    const Poly rhs = certificate_polynomial(cert);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> z{u(rng)};
      const double e = eval(cert.expr, z);
      EXPECT_LE(std::abs(e - eval(rhs, z)), 1e-5 * (1.0 + std::abs(e)));
    }
    for (const auto& blk : cert.sos) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.gram);
      EXPECT_GE(es.eigenvalues()(0), -1e-7);
    }
  }
}

TEST(SosProperty, HierarchyMonotone) {
  auto s = make_space({"x"});
  for (int inst = 0; inst < 5; ++inst) {
    double prev = std::numeric_limits<double>::infinity();
    for (int d : {2, 4, 6}) {
      std::mt19937_64 rng(100 + inst);
      SosProgram prog = constrained_quadratic_fit(s, d, rng);
      Solved r = run(prog);
      ASSERT_EQ(r.sol.status, SdpStatus::Solved);
      EXPECT_LE(r.sol.primal_objective, prev + 1e-6);
      prev = r.sol.primal_objective;
    }
  }
}

TEST(SosProperty, CompileDeterministic) {
  auto s = make_space({"x", "y"});
  auto build = [&] {
    SosProgram prog(s);
    DecisionPoly h = prog.declare_poly(2);
    SemialgebraicSet set(s);
    set.inequalities = {Poly::variable(s, 0), Poly::variable(s, 1)};
    set.archimedean_radius = 2.0;
    prog.add_nonneg_on(prog.as_polynomial(h), set, 3);
    return compile(prog);
  };
  CompiledSos a = build(), b = build();
  ASSERT_EQ(a.sdp.a.size(), b.sdp.a.size());
  for (std::size_t k = 0; k < a.sdp.a.size(); ++k) {
    EXPECT_EQ(a.sdp.a[k].row(), b.sdp.a[k].row());
    EXPECT_EQ(a.sdp.a[k].col(), b.sdp.a[k].col());
    EXPECT_EQ(a.sdp.a[k].value(), b.sdp.a[k].value());
  }
  EXPECT_EQ(a.sdp.blocks, b.sdp.blocks);
  EXPECT_EQ(a.sdp.b, b.sdp.b);
}

TEST(SosDelta, Examples) {
  auto s = make_space({"x"});
  Poly x = Poly::variable(s, 0);
  SemialgebraicSet unit = interval(s, 0.0, 1.0);
  std::mt19937_64 rng(41);
  EXPECT_EQ(check_delta_satisfiability(x, unit, 500, rng), 0.0);
  EXPECT_EQ(check_delta_satisfiability(Poly::constant(s, 1.0), unit, 500, rng), 0.0);

  // dense grid oracle of max(0, -(x - 0.1)) over [0, 1], step 0.01
  const int steps = 100;
  double grid = 0.0;
  for (int i = 0; i <= steps; ++i) grid = std::max(grid, 0.1 - static_cast<double>(i) / steps);
  const double got = check_delta_satisfiability(x - Poly::constant(s, 0.1), unit, 500, rng);
  EXPECT_NEAR(got, grid, 2.0 / steps);

  SemialgebraicSet empty = unit;
  empty.inequalities.push_back(x - Poly::constant(s, 2.0));
  EXPECT_THROW(check_delta_satisfiability(x, empty, 10, rng), std::runtime_error);
}

TEST(SosReport, ListsConstraints) {
  auto s = make_space({"x"});
  SosProgram prog(s);
  prog.add_nonneg_on(lift(Poly::variable(s, 0)), interval(s, 0.0, 1.0), 2, "face");
  Solved r = run(prog);
  std::ostringstream out;
  write_certificate_report(r.ex.certificate, out);
  EXPECT_NE(out.str().find("constraint face"), std::string::npos);
}
