#pragma once

// Receding-horizon steering. Each plan minimizes
//
//   sum_{n=1..N} |x_n - x*|^2 + alpha sum_n |w_n|^2 + beta sum_n |w_n - w_{n-1}|^2
//   + sum_balls weight * sum_n max(0, r^2 - |R x_n - R c|^2)^2
//
// over box-constrained sequences w_0..w_{N-1}, with the Euler prediction
// x_{n+1} = x_n + dt p(x_n, w_n) of a fitted model p. w_{-1} is the control
// applied at the previous step and R selects reduced coordinates.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gamesteer/dynamics.hpp"
#include "gamesteer/game.hpp"
#include "gamesteer/siarc.hpp"

namespace gamesteer {

/// Ball to keep out of, measured in reduced coordinates.
struct AvoidanceBall {
  Eigen::VectorXd center;  // reduced coordinates
  double radius = 0.4;
  double weight = 1e2;
};

struct MpcConfig {
  int horizon = 10;
  double dt = 0.1;
  double alpha = 0.01;
  double beta = 0.01;
  Eigen::VectorXd target;  // full profile
  std::vector<AvoidanceBall> avoid;
  /// Overrides the game's control box when nonempty.
  std::vector<std::pair<double, double>> bounds;

  int iters = 300;
  double step = 0.1;
  int restarts = 3;
  std::uint64_t seed = 0;
  /// RK4 steps of the true system per control interval.
  int substeps = 10;
};

/// Control sequence, one column per horizon step.
using ControlSequence = Eigen::MatrixXd;

struct Plan {
  ControlSequence w;
  double objective = 0.0;
  double warm_objective = 0.0;  // objective of the warm start, NaN without one
  int iterations = 0;
};

class Planner {
 public:
  Planner(const VelocityModel& model, const Game& g, MpcConfig cfg);

  const MpcConfig& config() const { return cfg_; }
  const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }

  /// Objective value; `grad` (same shape as w) is filled when nonnull.
  double objective(const Eigen::VectorXd& x0, const ControlSequence& w, const Eigen::VectorXd& w_prev,
                   ControlSequence* grad = nullptr) const;
  /// Euler rollout x_0..x_N as columns.
  Eigen::MatrixXd rollout(const Eigen::VectorXd& x0, const ControlSequence& w) const;

  void project(ControlSequence& w) const;

  /// Multi-start projected gradient: the warm start (when given), the zero
  /// sequence and `restarts` uniform random sequences; the best is kept.
  /// When no start has a finite objective the projected zero sequence is
  /// returned with an infinite objective.
  Plan plan(const Eigen::VectorXd& x0, const Eigen::VectorXd& w_prev, const ControlSequence* warm,
            std::uint64_t stream) const;

 private:
  double descend(const Eigen::VectorXd& x0, const Eigen::VectorXd& w_prev, ControlSequence& w, int* iters) const;

  const VelocityModel& model_;
  const Game& game_;
  MpcConfig cfg_;
  std::vector<std::pair<double, double>> bounds_;
  std::vector<int> reduced_;
};

enum class Phase { Identify, Evaluate, Steer };

std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

/// Row k holds the state at t[k] and the control applied on [t[k], t[k+1]).
struct ClosedLoopLog {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> w;
  std::vector<Phase> phase;
  std::vector<Eigen::MatrixXd> predicted;  // steer rows only, empty otherwise
  std::vector<double> objective;           // planner objective per steer row, NaN otherwise

  std::size_t size() const { return t.size(); }
  void append(double time, const Eigen::VectorXd& state, const Eigen::VectorXd& control, Phase ph);
  /// Appends every row of `other` (its times are already absolute).
  void extend(const ClosedLoopLog& other);
};

/// Closed loop on the true field from x0 at time t0 for t_total.
ClosedLoopLog run_closed_loop(const VectorField& truth, const VelocityModel& model, const Game& g,
                              const Eigen::VectorXd& x0, const MpcConfig& cfg, double t_total, double t0 = 0.0);

/// sum over steer rows of |w_k|^2 (t_{k+1} - t_k).
double accumulated_cost(const ClosedLoopLog& log);

/// CSV with columns t, phase, x..., w... (names from the game).
void write_log_csv(const ClosedLoopLog& log, const Game& g, std::ostream& out);

}  // namespace gamesteer
