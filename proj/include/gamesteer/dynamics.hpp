#pragma once

// Ground-truth learning dynamics, RK4 integration on the product of simplices,
// and the short noisy-control data collection used for identification.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gamesteer/game.hpp"
#include "gamesteer/poly.hpp"

namespace gamesteer {

using FieldFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& w)>;

struct VectorField {
  std::string name;
  FieldFn eval;
  /// One polynomial per flat state coordinate over Game::joint_space(), when
  /// the field is polynomial.
  std::optional<std::vector<Poly>> symbolic;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const { return eval(x, w); }
};

/// f_{i,a} = x_{i,a} (v_{i,a} - u_i).
VectorField replicator(const Game& g);
/// f_{i,a} = x_{i,a}^2 (v_{i,a} - sum_b x_{i,b}^2 v_{i,b} / sum_b x_{i,b}^2).
/// Coordinates below `floor` are raised to it before evaluation.
VectorField log_barrier(const Game& g, double floor = 1e-12);
/// Evaluates a list of polynomials over the joint space.
VectorField polynomial_field(std::string name, std::vector<Poly> p);

/// State path with the control held over each step.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> w;  // w[k] acts on [t[k], t[k+1]); the last entry repeats
  int renormalizations = 0;
};

using ControlFn = std::function<Eigen::VectorXd(double t)>;

/// Clamps tiny negatives and renormalizes each player's block when it has
/// drifted by more than 1e-12. Throws std::runtime_error when a coordinate or
/// block sum is off by more than 1e-6. Returns true if anything changed.
bool project_to_simplex(const Game& g, Eigen::VectorXd& x);

/// One classical RK4 step with w held constant, followed by project_to_simplex.
Eigen::VectorXd rk4_step(const VectorField& f, const Game& g, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                         double dt, int* renormalized = nullptr);

/// Fixed-step RK4 from x0 over [0, T]; the control is sampled at the start of
/// each step.
Trajectory integrate(const VectorField& f, const Game& g, const Eigen::VectorXd& x0, const ControlFn& control,
                     double dt, double t_end);

enum class VelocityMode { Measured, FiniteDifference };

std::string to_string(VelocityMode m);
VelocityMode parse_velocity_mode(const std::string& s);

struct TrajectoryDataset {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> w;
  std::vector<Eigen::VectorXd> xdot;
  std::vector<VelocityMode> provenance;
  Trajectory path;  // the full simulated identification run

  std::size_t size() const { return t.size(); }
};

struct CollectOptions {
  int k = 4;
  /// Per-control noise standard deviation; empty means 0.1 (hi - lo).
  std::vector<double> sigma;
  double dt_sample = 0.1;
  double dt_integrate = 0.01;
  VelocityMode mode = VelocityMode::Measured;
};

/// Draws K Gaussian controls (clipped into bounds), holds control k on
/// [k dt_sample, (k+1) dt_sample) and records the state at the middle of each
/// hold. Finite-difference velocities use the hold's end points, a central
/// difference with step dt_sample / 2.
TrajectoryDataset collect_dataset(const VectorField& f, const Game& g, const Eigen::VectorXd& x0,
                                  const CollectOptions& opts, std::mt19937_64& rng);

/// Uniform point of the product of simplices (flat Dirichlet per player).
Eigen::VectorXd sample_profile(const Game& g, std::mt19937_64& rng);
/// Uniform point of the control box.
Eigen::VectorXd sample_control(const Game& g, std::mt19937_64& rng);

/// Integrates the uncontrolled field over [0, t_end] and returns the closest
/// distance to x0 reached after the state has first left the ball of radius
/// leave_radius around x0 (infinity if it never left).
double recurrence_distance(const VectorField& f, const Game& g, const Eigen::VectorXd& x0, double dt, double t_end,
                           double leave_radius);

}  // namespace gamesteer
