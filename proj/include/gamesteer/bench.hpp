#pragma once

// Experiment orchestration. A scenario runs three phases on the true
// dynamics: identification under noise controls (then a model fit), an
// open-loop evaluation under a fresh noise signal, and closed-loop steering.
//
// Scenario files are flat `section/key = value` lines; `#` starts a comment.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gamesteer/baselines.hpp"
#include "gamesteer/dynamics.hpp"
#include "gamesteer/game.hpp"
#include "gamesteer/mpc.hpp"
#include "gamesteer/siarc.hpp"

namespace gamesteer {

struct Scenario {
  std::string name = "scenario";

  // game/
  std::string game = "stag_hunt";  // stag_hunt | matching_pennies | rps | symmetric_2x2 | zero_sum_2x2
  double epsilon = 0.25;
  std::vector<double> payoff;  // a11 a12 a21 a22 for the explicit 2x2 kinds
  std::string dynamics = "replicator";  // replicator | log_barrier

  // data/
  int k = 4;
  int k_sindy = 0;  // per-method overrides, 0 means k
  int k_pinn = 0;
  double noise = 0.1;  // noise standard deviation as a fraction of each control range
  double dt_sample = 0.1;
  double dt_integrate = 0.01;
  VelocityMode velocity = VelocityMode::Measured;

  // method/
  std::string method = "siarc";  // siarc | sindy | pinn
  SiarcConfig siarc;
  SindyConfig sindy;
  PinnConfig pinn;

  // mpc/ (the target is resolved from target/)
  MpcConfig mpc;

  // phases/
  double t_evaluate = 2.0;
  double t_steer = 15.0;

  // target/ and start
  std::string target = "pure:1,1";  // pure:a1,a2,... | interior_ne | uniform | x:<profile>
  std::vector<double> x0;           // full profile, or reduced (one entry less per player)
  std::uint64_t seed = 1;

  int k_for_method() const;
  /// k * dt_sample.
  double t_identify() const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
/// Canonical text: every key, fixed order, round-trips through parse_scenario.
std::string to_text(const Scenario& s);
/// FNV-1a of the canonical text without the seed and name lines.
std::uint64_t config_hash(const Scenario& s);

Scenario stag_hunt_scenario();
Scenario matching_pennies_scenario();
Scenario rps_scenario();

Game build_game(const Scenario& s);
VectorField build_truth(const Scenario& s, const Game& g);
Eigen::VectorXd resolve_target(const Scenario& s, const Game& g);
Eigen::VectorXd resolve_x0(const Scenario& s, const Game& g);

struct IdentifiedModel {
  std::shared_ptr<VelocityModel> model;
  std::optional<FitReport> siarc;
  std::optional<SindyRegression> sindy;
  std::optional<PinnLosses> pinn;
  std::string dump;  // model text
  double seconds = 0.0;
};

IdentifiedModel identify(const Scenario& s, const Game& g, const TrajectoryDataset& data);

/// Vector metrics are per reduced coordinate.
struct MetricsRecord {
  std::vector<double> mse_ref;      // mean over steer rows of (x - x*)^2
  std::vector<double> error_final;  // |x(T_final) - x*|
  double cost = 0.0;
  std::vector<double> mse_true;     // held-out velocity error
  double mse_eval = 0.0;            // open-loop prediction error over the evaluation phase
};

struct ScenarioResult {
  Scenario scenario;
  TrajectoryDataset data;
  IdentifiedModel identified;
  ClosedLoopLog log;
  std::vector<Eigen::VectorXd> eval_predicted;  // model rollout for the evaluate rows
  Eigen::VectorXd target;
  MetricsRecord metrics;
};

/// Throws std::runtime_error naming the scenario when a phase fails.
ScenarioResult run_scenario(const Scenario& s);

/// Metrics of a finished log against a target; steer rows only.
MetricsRecord steer_metrics(const ClosedLoopLog& log, const Game& g, const Eigen::VectorXd& target);

struct RunRecord {
  std::string scenario;
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool ok = true;
  std::string error;
  MetricsRecord metrics;
};

RunRecord make_record(const ScenarioResult& r);

struct SweepResult {
  std::vector<RunRecord> runs;
  MetricsRecord mean;  // over successful runs
  int failures = 0;
};

/// n points of the unit cube, one per stratum along every axis.
Eigen::MatrixXd latin_hypercube(int n, int dim, std::mt19937_64& rng);

/// Member i uses seed derive_seed(s.seed, i).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Start points: Latin hypercube over the reduced box for 2x2 games,
/// Dirichlet(1, ..., 1) per player otherwise.
std::vector<Eigen::VectorXd> sample_initial_conditions(const Game& g, int n, std::mt19937_64& rng);

/// Copies of s from sampled start points, named <name>/ic<i>.
std::vector<Scenario> initial_condition_members(const Scenario& s, int n);
/// Copies of base over random payoffs of the given class, named
/// <name>/payoff<i>; targets are the (1, 1) pure profile for the stag-hunt
/// class and the interior equilibrium for zero-sum games.
std::vector<Scenario> payoff_members(GameClass kind, int n, const Scenario& base);

using RunCallback = std::function<void(std::size_t index, const ScenarioResult& result)>;

/// Runs every member; a failing member is recorded and counted, not rethrown.
SweepResult run_sweep(const std::vector<Scenario>& members, const RunCallback& on_run = {});
SweepResult sweep_initial_conditions(const Scenario& s, int n);
SweepResult sweep_payoffs(GameClass kind, int n, const Scenario& base);

MetricsRecord mean_metrics(const std::vector<RunRecord>& runs);

/// CSV: scenario, method, seed, config_hash, status, cost, mse_eval and the
/// vector metrics as `;` separated lists.
void emit_report(const std::vector<RunRecord>& records, std::ostream& out);
void emit_report(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_report(std::istream& in);

}  // namespace gamesteer
