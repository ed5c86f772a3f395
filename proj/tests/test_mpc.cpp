#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gamesteer/mpc.hpp"

using namespace gamesteer;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  int k = 0;
  for (double d : v) x(k++) = d;
  return x;
}

PolynomialModel oracle(const Game& g) { return PolynomialModel("oracle", *replicator(g).symbolic, g.state_dim()); }

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-12, b.norm());
}

Eigen::MatrixXd fd_gradient(const Planner& p, const Eigen::VectorXd& x0, const ControlSequence& w,
                            const Eigen::VectorXd& w_prev) {
  Eigen::MatrixXd g(w.rows(), w.cols());
  const double h = 1e-6;
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      ControlSequence a = w, b = w;
      a(r, c) += h;
      b(r, c) -= h;
      g(r, c) = (p.objective(x0, a, w_prev) - p.objective(x0, b, w_prev)) / (2 * h);
    }
  return g;
}

}  // namespace

TEST(Mpc, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(1);
  const Game g = make_stag_hunt();
  const PolynomialModel m = oracle(g);
  for (int n : {1, 3, 5}) {
    MpcConfig cfg;
    cfg.horizon = n;
    cfg.target = vec({1, 0, 1, 0});
    cfg.avoid.push_back({vec({0.5, 0.5}), 0.4, 1e2});
    const Planner p(m, g, cfg);
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd x0 = sample_profile(g, rng);
      ControlSequence w(g.controls(), n);
      for (int c = 0; c < n; ++c) w.col(c) = sample_control(g, rng);
      const Eigen::VectorXd w_prev = sample_control(g, rng);
      ControlSequence grad;
      p.objective(x0, w, w_prev, &grad);
      EXPECT_LE(relative_error(grad, fd_gradient(p, x0, w, w_prev)), 1e-6);
    }
  }
}

TEST(Mpc, GradientWithRpsOracle) {
  std::mt19937_64 rng(2);
  const Game g = make_rps(0.25);
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.horizon = 4;
  cfg.target = uniform_profile(g);
  const Planner p(m, g, cfg);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x0 = sample_profile(g, rng);
    ControlSequence w(g.controls(), 4);
    for (int c = 0; c < 4; ++c) w.col(c) = sample_control(g, rng);
    ControlSequence grad;
    p.objective(x0, w, Eigen::VectorXd::Zero(4), &grad);
    EXPECT_LE(relative_error(grad, fd_gradient(p, x0, w, Eigen::VectorXd::Zero(4))), 1e-6);
  }
}

TEST(Mpc, GradientOfSingleStepQuadraticSurrogate) {
  // N = 1, beta = 0: the objective is quadratic in w for a field affine in w
  std::mt19937_64 rng(3);
  const Game g = make_matching_pennies();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.horizon = 1;
  cfg.beta = 0.0;
  cfg.target = vec({0.5, 0.5, 0.5, 0.5});
  const Planner p(m, g, cfg);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd x0 = sample_profile(g, rng);
    const ControlSequence w = sample_control(g, rng);
    ControlSequence grad;
    p.objective(x0, w, Eigen::VectorXd::Zero(3), &grad);
    EXPECT_LE(relative_error(grad, fd_gradient(p, x0, w, Eigen::VectorXd::Zero(3))), 1e-6);
  }
}

TEST(Mpc, EquilibriumTargetGivesZeroControl) {
  const Game g = make_stag_hunt();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({1, 0, 1, 0});
  const Planner p(m, g, cfg);
  const Plan plan = p.plan(cfg.target, Eigen::VectorXd::Zero(3), nullptr, 0);
  EXPECT_LE(plan.w.cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LE(plan.objective, 1e-12);
}

TEST(Mpc, DegenerateBoundsGiveZeroSequence) {
  const Game g = make_stag_hunt();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({1, 0, 1, 0});
  cfg.bounds.assign(3, {0.0, 0.0});
  const Planner p(m, g, cfg);
  const Plan plan = p.plan(vec({0.4, 0.6, 0.3, 0.7}), Eigen::VectorXd::Zero(3), nullptr, 0);
  EXPECT_EQ(plan.w.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mpc, OverflowingModelFallsBackToZeroSequence) {
  const Game g = make_stag_hunt();
  const PolynomialModel m("blowup", {parse_polynomial(g.joint_space(), "1e300*w11 + 1e300"),
                                     parse_polynomial(g.joint_space(), "-1e300*w11 + -1e300"),
                                     Poly(g.joint_space()), Poly(g.joint_space())},
                          g.state_dim());
  MpcConfig cfg;
  cfg.target = vec({1, 0, 1, 0});
  const Planner p(m, g, cfg);
  const Plan plan = p.plan(vec({0.4, 0.6, 0.3, 0.7}), Eigen::VectorXd::Zero(3), nullptr, 0);
  ASSERT_EQ(plan.w.rows(), 3);
  ASSERT_EQ(plan.w.cols(), cfg.horizon);
  EXPECT_EQ(plan.w.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(std::isfinite(plan.objective));
}

TEST(Mpc, PlanIsDeterministicAndNoWorseThanWarmStart) {
  std::mt19937_64 rng(4);
  const Game g = make_matching_pennies();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({0.5, 0.5, 0.5, 0.5});
  cfg.seed = 9;
  const Planner p(m, g, cfg);
  const Eigen::VectorXd x0 = vec({0.2, 0.8, 0.6, 0.4});
  ControlSequence warm(3, cfg.horizon);
  for (int c = 0; c < cfg.horizon; ++c) warm.col(c) = sample_control(g, rng);
  const Plan a = p.plan(x0, Eigen::VectorXd::Zero(3), &warm, 5);
  const Plan b = p.plan(x0, Eigen::VectorXd::Zero(3), &warm, 5);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_LE(a.objective, a.warm_objective);
  for (Eigen::Index r = 0; r < a.w.rows(); ++r) {
    EXPECT_GE(a.w.row(r).minCoeff(), 0.0);
    EXPECT_LE(a.w.row(r).maxCoeff(), 1.0);
  }
}

TEST(Mpc, InvalidConfigThrows) {
  const Game g = make_stag_hunt();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({1, 0, 1, 0});
  cfg.horizon = 0;
  EXPECT_THROW(Planner(m, g, cfg), std::invalid_argument);
  cfg.horizon = 10;
  cfg.alpha = -1;
  EXPECT_THROW(Planner(m, g, cfg), std::invalid_argument);
  cfg.alpha = 0.01;
  cfg.avoid.push_back({vec({0.0, 1.0}), 0.0, 1.0});
  EXPECT_THROW(Planner(m, g, cfg), std::invalid_argument);
}

TEST(Mpc, OracleModelSteersStagHunt) {
  const Game g = make_stag_hunt();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({1, 0, 1, 0});
  const ClosedLoopLog log = run_closed_loop(replicator(g), m, g, vec({0.4, 0.6, 0.3, 0.7}), cfg, 15.0);
  ASSERT_EQ(log.size(), 151u);
  EXPECT_LE((log.x.back() - cfg.target).cwiseAbs().maxCoeff(), 1e-2);
  for (const auto& w : log.w) g.check_control(w);
}

TEST(Mpc, ZeroBoundsMatchUncontrolledIntegration) {
  const Game g = make_matching_pennies();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({0.5, 0.5, 0.5, 0.5});
  cfg.bounds.assign(3, {0.0, 0.0});
  cfg.restarts = 0;
  const Eigen::VectorXd x0 = vec({0.2, 0.8, 0.6, 0.4});
  const ClosedLoopLog log = run_closed_loop(replicator(g), m, g, x0, cfg, 2.0);
  const Trajectory ref =
      integrate(replicator(g), g, x0, [](double) { return Eigen::VectorXd::Zero(3); }, 0.01, 2.0);
  ASSERT_EQ(log.size(), 21u);
  for (std::size_t k = 0; k < log.size(); ++k) EXPECT_EQ(log.x[k], ref.x[10 * k]);
  EXPECT_EQ(accumulated_cost(log), 0.0);
}

TEST(Mpc, AvoidanceKeepsDistance) {
  const Game g = make_matching_pennies();
  const PolynomialModel m = oracle(g);
  MpcConfig cfg;
  cfg.target = vec({0.5, 0.5, 0.5, 0.5});
  cfg.avoid.push_back({vec({0.0, 1.0}), 0.4, 1e2});
  const ClosedLoopLog log = run_closed_loop(log_barrier(g), m, g, vec({0.2, 0.8, 0.6, 0.4}), cfg, 15.0);
  double dmin = INFINITY;
  for (const auto& x : log.x) dmin = std::min(dmin, std::hypot(x(0) - 0.0, x(2) - 1.0));
  EXPECT_GE(dmin, 0.4 - 1e-2);
}

TEST(AccumulatedCost, Definition) {
  ClosedLoopLog zero, unit, fine;
  for (int k = 0; k <= 100; ++k) {
    zero.append(0.1 * k, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Phase::Steer);
    unit.append(0.1 * k, Eigen::VectorXd::Zero(2), vec({0.6, 0.8}), Phase::Steer);
  }
  EXPECT_EQ(accumulated_cost(zero), 0.0);
  EXPECT_NEAR(accumulated_cost(unit), 10.0, 1e-12);

  // the same piecewise signal sampled at 0.2 and 0.1
  ClosedLoopLog coarse;
  for (int k = 0; k <= 50; ++k) coarse.append(0.2 * k, Eigen::VectorXd::Zero(1), vec({std::sin(0.2 * k)}), Phase::Steer);
  for (int k = 0; k <= 100; ++k)
    fine.append(0.1 * k, Eigen::VectorXd::Zero(1), vec({std::sin(0.2 * (k / 2))}), Phase::Steer);
  EXPECT_NEAR(accumulated_cost(coarse), accumulated_cost(fine), 1e-9);

  // only steer rows count
  ClosedLoopLog mixed;
  mixed.append(0.0, Eigen::VectorXd::Zero(1), vec({1.0}), Phase::Identify);
  mixed.append(1.0, Eigen::VectorXd::Zero(1), vec({2.0}), Phase::Steer);
  mixed.append(2.0, Eigen::VectorXd::Zero(1), vec({2.0}), Phase::Steer);
  EXPECT_DOUBLE_EQ(accumulated_cost(mixed), 4.0);
}

TEST(ClosedLoopLogTest, ExtendMergesBoundaryRow) {
  ClosedLoopLog a, b;
  a.append(0.0, vec({1}), vec({0}), Phase::Identify);
  a.append(1.0, vec({2}), vec({0}), Phase::Identify);
  b.append(1.0, vec({2}), vec({5}), Phase::Steer);
  b.append(2.0, vec({3}), vec({5}), Phase::Steer);
  a.extend(b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.phase[1], Phase::Steer);
  EXPECT_EQ(a.w[1](0), 5.0);
}

TEST(ClosedLoopLogTest, CsvColumns) {
  const Game g = make_stag_hunt();
  ClosedLoopLog log;
  log.append(0.5, vec({0.4, 0.6, 0.3, 0.7}), vec({1, 2, 0}), Phase::Evaluate);
  std::ostringstream out;
  write_log_csv(log, g, out);
  EXPECT_EQ(out.str(), "t,phase,x11,x12,x21,x22,w11,w12,w21\n0.5,evaluate,0.40000000000000002,0.59999999999999998,"
                       "0.29999999999999999,0.69999999999999996,1,2,0\n");
  EXPECT_EQ(parse_phase("steer"), Phase::Steer);
  EXPECT_THROW(parse_phase("idle"), std::invalid_argument);
}
