#pragma once

// Side-information assisted regression with control: least-squares fit of
// polynomial velocity fields p_{i,a}(x, w) subject to
//   tangency       sum_a p_{i,a} == 0,
//   forward inv.   p_{i,a} >= 0 on the face x_{i,a} = 0,
//   pos. corr.     sum_a v_{i,a} p_{i,a} >= 0 on X x Omega,
// each nonnegativity certified by SOS multipliers.
//
// Templates use reduced monomials: the last action of each player never
// appears, and every constraint is written after eliminating it through
// x_{i,m} = 1 - sum_{b<m} x_{i,b}.

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gamesteer/dynamics.hpp"
#include "gamesteer/game.hpp"
#include "gamesteer/poly.hpp"
#include "gamesteer/sdp.hpp"
#include "gamesteer/sos.hpp"

namespace gamesteer {

/// Uniform evaluation contract for every identified model. Inputs and
/// outputs use full flat simplex coordinates.
class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd velocity(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const = 0;
  /// d velocity / d x and d velocity / d w. The default is a central
  /// difference with step 1e-6.
  virtual void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& w, Eigen::MatrixXd& jx,
                         Eigen::MatrixXd& jw) const;
};

/// Polynomial field over a joint (state, control) space with precompiled
/// monomial evaluation and analytic Jacobians.
class PolynomialModel : public VelocityModel {
 public:
  PolynomialModel(std::string name, std::vector<Poly> p, int state_dim);

  std::string name() const override { return name_; }
  Eigen::VectorXd velocity(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const override;
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& w, Eigen::MatrixXd& jx,
                 Eigen::MatrixXd& jw) const override;

  const std::vector<Poly>& polynomials() const { return p_; }
  int state_dim() const { return state_dim_; }

 private:
  struct Compiled {
    std::vector<std::vector<std::pair<int, double>>> rows;  // (monomial id, coefficient) per output
  };
  void evaluate_monomials(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const;

  std::string name_;
  std::vector<Poly> p_;
  int state_dim_;
  int dim_;
  int max_power_ = 0;
  std::vector<Exponent> monomials_;
  Compiled value_;
  std::vector<Compiled> partial_;  // one per joint variable
  mutable std::vector<double> powers_;
  mutable std::vector<double> mono_;
};

struct SiarcConfig {
  int degree = 7;         // relaxation degree of the positive-correlation constraints
  int rfi_degree = -1;    // relaxation degree of the face constraints; < 0 means `degree`
  bool rfi = true;
  bool pc = true;
  int state_degree = 3;   // template degree in the reduced state
  int control_degree = 1; // template degree in the controls
  /// Adds the redundant products x_{i,a} x_{i,b} >= 0 (reduced form) to the
  /// positive-correlation domains, which lets degree 2 + 2 deg(v) certify
  /// variance-type expressions.
  bool product_generators = false;
  bool archimedean = true;
  double prune = 1e-8;
  SdpOptions sdp;
};

struct SiarcProblem {
  SosProgram program;
  std::vector<DecisionPoly> templates;  // one per flat state coordinate
  int identities = 0;
  int faces = 0;
  int pc_constraints = 0;

  explicit SiarcProblem(SpacePtr s) : program(std::move(s)) {}
};

/// Replaces x_{i,m} by 1 - sum_{b<m} x_{i,b} for every player.
Poly eliminate_last_actions(const Poly& p, const Game& g);

/// Monomials of the reduced template class.
std::vector<Exponent> template_monomials(const Game& g, int state_degree, int control_degree);

SiarcProblem build_problem(const TrajectoryDataset& data, const Game& g, const SiarcConfig& cfg);

struct FitReport {
  SdpStatus status = SdpStatus::MaxIters;
  int iterations = 0;
  SdpResiduals residuals;
  double training_mse = 0.0;  // mean over samples and coordinates
  double delta = 0.0;
  double seconds = 0.0;
  std::vector<int> blocks;
  int rows = 0;
  Certificate certificate;
};

struct SiarcFit {
  std::shared_ptr<PolynomialModel> model;
  FitReport report;
};

SiarcFit fit(const TrajectoryDataset& data, const Game& g, const SiarcConfig& cfg);

/// Mean squared velocity error per flat coordinate over n uniform (x, w).
Eigen::VectorXd model_mse_true(const VelocityModel& model, const VectorField& truth, const Game& g, int n,
                               std::mt19937_64& rng);

struct SideInfoCheck {
  double rfi_min = 0.0;  // min over face samples of p_{i,a} with x_{i,a} = 0
  double pc_min = 0.0;   // min over samples of sum_a v_{i,a} p_{i,a}
};

/// Empirical side-information check over n samples per constraint family.
SideInfoCheck check_side_information(const VelocityModel& model, const Game& g, int n, std::mt19937_64& rng);

/// Model dump: one `p_{i,a} = <poly>` line per coordinate, then metadata.
void write_model(const PolynomialModel& model, const FitReport& report, std::ostream& out);

}  // namespace gamesteer
