#include "gamesteer/game.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gamesteer {

Game::Game(std::string name, std::vector<int> actions, std::vector<std::vector<double>> payoff,
           std::vector<std::vector<ControlTie>> ties, std::vector<std::pair<double, double>> bounds,
           std::vector<std::string> control_names)
    : name_(std::move(name)),
      actions_(std::move(actions)),
      payoff_(std::move(payoff)),
      ties_(std::move(ties)),
      bounds_(std::move(bounds)),
      control_names_(std::move(control_names)) {
  if (actions_.empty()) throw std::invalid_argument("game: no players");
  offsets_.push_back(0);
  for (int m : actions_) {
    if (m < 1) throw std::invalid_argument("game: player without actions");
    offsets_.push_back(offsets_.back() + m);
    joint_count_ *= m;
  }
  if (static_cast<int>(payoff_.size()) != players() || static_cast<int>(ties_.size()) != players())
    throw std::invalid_argument("game: payoff/tie tensors must have one entry per player");
  std::vector<bool> used(bounds_.size(), false);
  for (int i = 0; i < players(); ++i) {
    if (static_cast<int>(payoff_[i].size()) != joint_count_ || static_cast<int>(ties_[i].size()) != joint_count_)
      throw std::invalid_argument("game: tensor size differs from joint action count");
    for (double v : payoff_[i])
      if (!std::isfinite(v)) throw std::invalid_argument("game: non-finite payoff");
    for (const auto& t : ties_[i]) {
      if (t.fixed_zero()) continue;
      if (t.var >= controls()) throw std::invalid_argument("game: tie references unknown control");
      used[t.var] = true;
    }
  }
  for (std::size_t k = 0; k < bounds_.size(); ++k) {
    if (!used[k]) throw std::invalid_argument("game: control variable referenced by no entry");
    if (!(bounds_[k].first <= bounds_[k].second)) throw std::invalid_argument("game: control bounds lo > hi");
  }
  if (control_names_.empty())
    for (int k = 0; k < controls(); ++k) control_names_.push_back("w" + std::to_string(k + 1));
  if (static_cast<int>(control_names_.size()) != controls())
    throw std::invalid_argument("game: control name count differs from control count");
}

int Game::joint_index(const std::vector<int>& a) const {
  int idx = 0;
  for (int i = 0; i < players(); ++i) idx = idx * actions_[i] + a.at(i);
  return idx;
}

std::vector<int> Game::joint_actions(int joint) const {
  std::vector<int> a(players());
  for (int i = players() - 1; i >= 0; --i) {
    a[i] = joint % actions_[i];
    joint /= actions_[i];
  }
  return a;
}

double Game::payoff(int i, int joint, const Eigen::VectorXd& w) const {
  const auto& t = ties_[i][joint];
  return payoff_[i][joint] + (t.fixed_zero() ? 0.0 : t.sign * w(t.var));
}

SpacePtr Game::joint_space() const {
  std::vector<std::string> names;
  for (int i = 0; i < players(); ++i)
    for (int a = 0; a < actions_[i]; ++a) names.push_back("x" + std::to_string(i + 1) + std::to_string(a + 1));
  for (const auto& n : control_names_) names.push_back(n);
  return make_space(std::move(names));
}

void Game::check_profile(const Eigen::VectorXd& x) const {
  if (x.size() != state_dim()) throw std::invalid_argument("profile length does not match game");
  for (int i = 0; i < players(); ++i) {
    const auto xi = x.segment(offsets_[i], actions_[i]);
    if (xi.minCoeff() < -1e-9 || std::abs(xi.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("profile entry is not a distribution");
  }
}

void Game::check_control(const Eigen::VectorXd& w) const {
  if (w.size() != controls()) throw std::invalid_argument("control length does not match game");
  for (int k = 0; k < controls(); ++k)
    if (w(k) < bounds_[k].first || w(k) > bounds_[k].second)
      throw std::invalid_argument("control outside its bounds");
}

Eigen::VectorXd Game::clamp_control(const Eigen::VectorXd& w) const {
  Eigen::VectorXd r = w;
  for (int k = 0; k < controls(); ++k) r(k) = std::clamp(r(k), bounds_[k].first, bounds_[k].second);
  return r;
}

Game make_symmetric_2x2(const Eigen::Matrix2d& a, double lo, double hi, std::string name) {
  std::vector<std::vector<double>> payoff(2, std::vector<double>(4));
  std::vector<std::vector<ControlTie>> ties(2, std::vector<ControlTie>(4));
  // control variables for player-1 entries (1,1), (1,2), (2,1); (2,2) fixed at 0
  const int var_of[2][2] = {{0, 1}, {2, -1}};
  for (int a1 = 0; a1 < 2; ++a1)
    for (int a2 = 0; a2 < 2; ++a2) {
      const int j = a1 * 2 + a2;
      payoff[0][j] = a(a1, a2);
      payoff[1][j] = a(a2, a1);
      ties[0][j] = {var_of[a1][a2], 1.0};
      ties[1][j] = {var_of[a2][a1], 1.0};  // w_{2,(a1,a2)} = w_{1,(a2,a1)}
    }
  return Game(std::move(name), {2, 2}, payoff, ties, {{lo, hi}, {lo, hi}, {lo, hi}}, {"w11", "w12", "w21"});
}

Game make_stag_hunt() {
  Eigen::Matrix2d a;
  a << 4, 1, 3, 3;
  return make_symmetric_2x2(a, 0.0, 2.0, "stag_hunt");
}

Game make_zero_sum(const Eigen::MatrixXd& a, const std::vector<std::pair<int, int>>& free_entries, double lo,
                   double hi, std::string name) {
  const int m1 = static_cast<int>(a.rows()), m2 = static_cast<int>(a.cols());
  std::vector<std::vector<double>> payoff(2, std::vector<double>(m1 * m2));
  std::vector<std::vector<ControlTie>> ties(2, std::vector<ControlTie>(m1 * m2));
  std::vector<std::pair<double, double>> bounds;
  std::vector<std::string> names;
  for (int a1 = 0; a1 < m1; ++a1)
    for (int a2 = 0; a2 < m2; ++a2) {
      payoff[0][a1 * m2 + a2] = a(a1, a2);
      payoff[1][a1 * m2 + a2] = -a(a1, a2);
    }
  for (const auto& [a1, a2] : free_entries) {
    if (a1 < 0 || a1 >= m1 || a2 < 0 || a2 >= m2) throw std::invalid_argument("make_zero_sum: entry out of range");
    const int var = static_cast<int>(bounds.size());
    ties[0][a1 * m2 + a2] = {var, 1.0};
    ties[1][a1 * m2 + a2] = {var, -1.0};
    bounds.emplace_back(lo, hi);
    names.push_back("w" + std::to_string(a1 + 1) + std::to_string(a2 + 1));
  }
  return Game(std::move(name), {m1, m2}, payoff, ties, bounds, names);
}

Game make_zero_sum_2x2(const Eigen::Matrix2d& a) {
  return make_zero_sum(a, {{0, 0}, {0, 1}, {1, 0}}, 0.0, 1.0, "zero_sum_2x2");
}

Game make_matching_pennies() {
  Eigen::Matrix2d a;
  a << 1, -1, -1, 1;
  return make_zero_sum(a, {{0, 0}, {0, 1}, {1, 0}}, 0.0, 1.0, "matching_pennies");
}

Game make_rps(double epsilon) {
  Eigen::Matrix3d a;
  a << epsilon, -1, 1, 1, epsilon, -1, -1, 1, epsilon;
  return make_zero_sum(a, {{0, 1}, {0, 2}, {1, 0}, {2, 0}}, -1.0, 1.0, "rps");
}

Eigen::VectorXd action_utilities(const Game& g, int i, const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.actions(i));
  for (int j = 0; j < g.joint_count(); ++j) {
    const auto a = g.joint_actions(j);
    double prob = 1.0;
    for (int k = 0; k < g.players(); ++k)
      if (k != i) prob *= x(g.index(k, a[k]));
    v(a[i]) += prob * g.payoff(i, j, w);
  }
  return v;
}

double utility(const Game& g, int i, const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  const Eigen::VectorXd v = action_utilities(g, i, x, w);
  double u = 0.0;
  for (int a = 0; a < g.actions(i); ++a) u += x(g.index(i, a)) * v(a);
  return u;
}

std::vector<Poly> action_utilities_symbolic(const Game& g, int i, const SpacePtr& space) {
  if (static_cast<int>(space->dim()) != g.state_dim() + g.controls())
    throw DimensionError("action_utilities_symbolic: space does not match game");
  std::vector<Poly> v(g.actions(i), Poly(space));
  for (int j = 0; j < g.joint_count(); ++j) {
    const auto a = g.joint_actions(j);
    Poly prob = Poly::constant(space, 1.0);
    for (int k = 0; k < g.players(); ++k)
      if (k != i) prob = prob * Poly::variable(space, g.index(k, a[k]));
    Poly pay = Poly::constant(space, g.base_payoff(i, j));
    const auto& t = g.tie(i, j);
    if (!t.fixed_zero()) pay += t.sign * Poly::variable(space, g.state_dim() + t.var);
    v[a[i]] += prob * pay;
  }
  return v;
}

bool is_stag_hunt_class(const Eigen::Matrix2d& a) {
  return a(0, 0) > a(1, 0) && a(1, 1) > a(0, 1) && a(0, 0) > a(1, 1);
}

bool is_zero_sum_interior(const Eigen::Matrix2d& a) {
  // p = (a22 - a21) / D and q = (a22 - a12) / D lie in (0, 1) iff these
  // differences pair up with matching strict signs.
  const double r1 = a(0, 0) - a(0, 1), r2 = a(1, 1) - a(1, 0);
  const double c1 = a(0, 0) - a(1, 0), c2 = a(1, 1) - a(0, 1);
  return r1 * r2 > 0 && c1 * c2 > 0;
}

Game random_game(GameClass kind, std::mt19937_64& rng, int max_draws) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int draw = 0; draw < max_draws; ++draw) {
    Eigen::Matrix2d a;
    a << u(rng), u(rng), u(rng), u(rng);
    if (kind == GameClass::StagHuntClass && is_stag_hunt_class(a)) return make_symmetric_2x2(a, 0.0, 2.0, "random_stag_hunt");
    if (kind == GameClass::ZeroSum2x2InteriorNE && is_zero_sum_interior(a)) {
      Game g = make_zero_sum_2x2(a);
      return g;
    }
  }
  throw std::runtime_error("random_game: rejection cap exceeded");
}

Eigen::Matrix2d payoff_matrix_2x2(const Game& g) {
  if (g.players() != 2 || g.actions(0) != 2 || g.actions(1) != 2) throw std::invalid_argument("not a 2x2 game");
  Eigen::Matrix2d a;
  for (int a1 = 0; a1 < 2; ++a1)
    for (int a2 = 0; a2 < 2; ++a2) a(a1, a2) = g.base_payoff(0, a1 * 2 + a2);
  return a;
}

Eigen::VectorXd interior_ne_2x2(const Game& g) {
  const Eigen::Matrix2d a = payoff_matrix_2x2(g);
  for (int j = 0; j < 4; ++j)
    if (g.base_payoff(1, j) != -g.base_payoff(0, j)) throw std::invalid_argument("interior_ne_2x2: game is not zero-sum");
  if (!is_zero_sum_interior(a)) throw std::invalid_argument("interior_ne_2x2: no interior equilibrium");
  const double d = a(0, 0) - a(0, 1) - a(1, 0) + a(1, 1);
  const double p = (a(1, 1) - a(1, 0)) / d;
  const double q = (a(1, 1) - a(0, 1)) / d;
  Eigen::VectorXd x(4);
  x << p, 1.0 - p, q, 1.0 - q;
  return x;
}

std::vector<int> reduced_indices(const Game& g) {
  std::vector<int> r;
  for (int i = 0; i < g.players(); ++i)
    for (int a = 0; a + 1 < g.actions(i); ++a) r.push_back(g.index(i, a));
  return r;
}

Eigen::VectorXd reduce(const Game& g, const Eigen::VectorXd& x) {
  const auto idx = reduced_indices(g);
  Eigen::VectorXd r(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r(k) = x(idx[k]);
  return r;
}

Eigen::VectorXd lift_profile(const Game& g, const Eigen::VectorXd& r) {
  Eigen::VectorXd x(g.state_dim());
  int k = 0;
  for (int i = 0; i < g.players(); ++i) {
    double s = 0.0;
    for (int a = 0; a + 1 < g.actions(i); ++a) {
      x(g.index(i, a)) = r(k++);
      s += x(g.index(i, a));
    }
    x(g.index(i, g.actions(i) - 1)) = 1.0 - s;
  }
  return x;
}

Eigen::VectorXd lift_velocity(const Game& g, const Eigen::VectorXd& dr) {
  Eigen::VectorXd v(g.state_dim());
  int k = 0;
  for (int i = 0; i < g.players(); ++i) {
    double s = 0.0;
    for (int a = 0; a + 1 < g.actions(i); ++a) {
      v(g.index(i, a)) = dr(k++);
      s += v(g.index(i, a));
    }
    v(g.index(i, g.actions(i) - 1)) = -s;
  }
  return v;
}

Eigen::VectorXd uniform_profile(const Game& g) {
  Eigen::VectorXd x(g.state_dim());
  for (int i = 0; i < g.players(); ++i)
    x.segment(g.index(i, 0), g.actions(i)).setConstant(1.0 / g.actions(i));
  return x;
}

}  // namespace gamesteer
