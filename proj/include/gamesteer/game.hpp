#pragma once

// Normal-form games whose payoffs are perturbed by a control signal:
//
//   u_i(a, w) = u_i(a, 0) + w_{i,a}
//
// Each perturbation entry w_{i,a} is either fixed at zero or tied to one of
// q free control variables with a sign, so a handful of scalars drive every
// player's payoff tensor. Mixed profiles are stored flat: the m_1 entries of
// player 1, then the m_2 entries of player 2, and so on.

#include <Eigen/Dense>

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gamesteer/poly.hpp"

namespace gamesteer {

/// Where a payoff perturbation comes from: control variable `var` scaled by
/// `sign`, or nothing when var < 0.
struct ControlTie {
  int var = -1;
  double sign = 1.0;
  bool fixed_zero() const { return var < 0; }
};

class Game {
 public:
  /// payoff[i][joint] with joint actions in mixed radix, player 1 most
  /// significant. ties has the same shape.
  Game(std::string name, std::vector<int> actions, std::vector<std::vector<double>> payoff,
       std::vector<std::vector<ControlTie>> ties, std::vector<std::pair<double, double>> bounds,
       std::vector<std::string> control_names = {});

  const std::string& name() const { return name_; }
  int players() const { return static_cast<int>(actions_.size()); }
  int actions(int i) const { return actions_.at(i); }
  const std::vector<int>& action_counts() const { return actions_; }
  int controls() const { return static_cast<int>(bounds_.size()); }
  const std::vector<std::pair<double, double>>& control_bounds() const { return bounds_; }
  const std::vector<std::string>& control_names() const { return control_names_; }

  /// Length of a flat profile, sum of m_i.
  int state_dim() const { return offsets_.back(); }
  /// Flat index of x_{i,a}.
  int index(int i, int a) const { return offsets_.at(i) + a; }
  int joint_count() const { return joint_count_; }
  int joint_index(const std::vector<int>& a) const;
  std::vector<int> joint_actions(int joint) const;

  double base_payoff(int i, int joint) const { return payoff_.at(i).at(joint); }
  const ControlTie& tie(int i, int joint) const { return ties_.at(i).at(joint); }
  double payoff(int i, int joint, const Eigen::VectorXd& w) const;

  /// Names x11, x12, ..., then the control names.
  SpacePtr joint_space() const;

  /// Throws std::invalid_argument unless each x_i is a distribution (1e-9).
  void check_profile(const Eigen::VectorXd& x) const;
  void check_control(const Eigen::VectorXd& w) const;
  Eigen::VectorXd clamp_control(const Eigen::VectorXd& w) const;

 private:
  std::string name_;
  std::vector<int> actions_;
  std::vector<int> offsets_;
  int joint_count_ = 1;
  std::vector<std::vector<double>> payoff_;
  std::vector<std::vector<ControlTie>> ties_;
  std::vector<std::pair<double, double>> bounds_;
  std::vector<std::string> control_names_;
};

/// Symmetric 2x2 game u_1(a) = A[a1][a2], u_2(a) = A[a2][a1] with
/// w_{1,(a1,a2)} = w_{2,(a2,a1)} free in [lo, hi] except w_{1,(2,2)} = 0.
Game make_symmetric_2x2(const Eigen::Matrix2d& a, double lo = 0.0, double hi = 2.0, std::string name = "symmetric");
Game make_stag_hunt();

/// Zero-sum game u_1 = -u_2 = A with the perturbation shared through
/// w_{2,a} = -w_{1,a}; `free_entries` lists the joint actions (a1, a2) of
/// player 1 that carry a control variable.
Game make_zero_sum(const Eigen::MatrixXd& a, const std::vector<std::pair<int, int>>& free_entries, double lo,
                   double hi, std::string name = "zero_sum");
/// A = (1 -1; -1 1), controls on (1,1), (1,2), (2,1) in [0, 1].
Game make_matching_pennies();
/// Matching-pennies control structure on an arbitrary 2x2 zero-sum matrix.
Game make_zero_sum_2x2(const Eigen::Matrix2d& a);
/// A = (e -1 1; 1 e -1; -1 1 e), controls on (1,2), (1,3), (2,1), (3,1) in [-1, 1].
Game make_rps(double epsilon);

/// Expected payoff u_i(x, w).
double utility(const Game& g, int i, const Eigen::VectorXd& x, const Eigen::VectorXd& w);

/// v_{i,a} = u_i(a, x_{-i}, w) for every action a of player i.
Eigen::VectorXd action_utilities(const Game& g, int i, const Eigen::VectorXd& x, const Eigen::VectorXd& w);

/// Symbolic v_{i,a} over g.joint_space().
std::vector<Poly> action_utilities_symbolic(const Game& g, int i, const SpacePtr& space);

enum class GameClass { StagHuntClass, ZeroSum2x2InteriorNE };

/// A11 > A21, A22 > A12, A11 > A22.
bool is_stag_hunt_class(const Eigen::Matrix2d& a);
/// Zero-sum 2x2 with a unique, strictly interior equilibrium.
bool is_zero_sum_interior(const Eigen::Matrix2d& a);

/// Entries uniform on [-5, 5], redrawn until the class predicate holds.
/// Throws std::runtime_error after max_draws rejections.
Game random_game(GameClass kind, std::mt19937_64& rng, int max_draws = 100000);

/// Player-1 payoff matrix of a 2x2 game at w = 0.
Eigen::Matrix2d payoff_matrix_2x2(const Game& g);

/// Indifference solution (p, 1-p, q, 1-q) of a 2x2 zero-sum game at w = 0.
/// Throws std::invalid_argument when there is no interior equilibrium.
Eigen::VectorXd interior_ne_2x2(const Game& g);

/// Reduced coordinates: every x_{i,a} except the last action of each player.
std::vector<int> reduced_indices(const Game& g);
Eigen::VectorXd reduce(const Game& g, const Eigen::VectorXd& x);
/// Inverse of reduce: the dropped coordinate of player i is 1 - sum of the kept ones.
Eigen::VectorXd lift_profile(const Game& g, const Eigen::VectorXd& r);
/// Velocity lifting by tangency: dropped component = -sum of kept ones.
Eigen::VectorXd lift_velocity(const Game& g, const Eigen::VectorXd& dr);

Eigen::VectorXd uniform_profile(const Game& g);

}  // namespace gamesteer
