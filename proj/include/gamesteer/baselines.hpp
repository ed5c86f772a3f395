#pragma once

// Comparison identifiers.
//
// SINDYc: sequentially thresholded least squares over a monomial library in
// the reduced state and the controls, one output at a time.
//
// PINN: a in -> 5 -> 5 -> out tanh network from (reduced state, controls) to
// reduced velocities, trained by full-batch gradient descent on
//   lambda_0 l0 + lambda_rfi l_rfi + lambda_pc l_pc
// where l0 is the squared data error summed over coordinates and averaged
// over samples, and the physics terms are hinge penalties averaged over face
// and interior collocation points.
//
// Both lift reduced velocities to the flat simplex by tangency.

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include "gamesteer/dynamics.hpp"
#include "gamesteer/game.hpp"
#include "gamesteer/poly.hpp"
#include "gamesteer/siarc.hpp"

namespace gamesteer {

struct SindyConfig {
  int degree = 3;
  /// Upper bound on the control degree of a library term; < 0 means none.
  int control_degree = 1;
  double threshold = 1e-3;
  int max_iters = 25;
};

struct SindyRegression {
  Eigen::MatrixXd coefficients;  // library terms x outputs
  std::vector<std::vector<int>> support_sizes;  // per output, per iteration
  bool rank_deficient = false;
  bool converged = true;  // every output reached a fixpoint
};

/// Thresholded least squares theta * xi ~= y with column j of theta the
/// j-th library monomial evaluated at the rows of z. Refits on the surviving
/// support use the minimum-norm solution.
SindyRegression sindy_regress(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, const std::vector<Exponent>& library,
                              const SindyConfig& cfg);

/// Evaluates every library monomial at every row of z.
Eigen::MatrixXd library_matrix(const Eigen::MatrixXd& z, const std::vector<Exponent>& library);

struct SindyFit {
  std::shared_ptr<PolynomialModel> model;
  SindyRegression regression;
};

SindyFit sindy_fit(const TrajectoryDataset& data, const Game& g, const SindyConfig& cfg);

/// Parameters of the in -> 5 -> 5 -> out tanh network.
struct PinnNet {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static PinnNet random(int in, int out, std::mt19937_64& rng, int width = 5);
  static PinnNet zeros_like(const PinnNet& n);

  int inputs() const { return static_cast<int>(w1.cols()); }
  int outputs() const { return static_cast<int>(w3.rows()); }
  /// One column per input point.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z) const;

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
  bool finite() const;
};

struct PinnLossWeights {
  double data = 1.0;
  double rfi = 1.0;
  double pc = 1.0;
  int points_per_set = 500;
};

struct PinnLosses {
  double data = 0.0;
  double rfi = 0.0;
  double pc = 0.0;
  double total = 0.0;
};

/// Training data and collocation sets in network coordinates. The face
/// sets are x_{i,a} = 0 for every action, the last action meaning
/// sum_{b<m} x_{i,b} = 1; the interior set is uniform on the simplices.
class PinnProblem {
 public:
  PinnProblem(const TrajectoryDataset& data, const Game& g, const PinnLossWeights& weights, std::mt19937_64& rng);

  /// Loss; when grad is nonnull it receives d loss / d parameters.
  PinnLosses loss(const PinnNet& net, PinnNet* grad = nullptr) const;
  /// Mean RFI hinge over a fresh face set drawn from rng.
  double rfi_hinge(const PinnNet& net, std::mt19937_64& rng, int per_face) const;

  int inputs() const { return static_cast<int>(z_data_.rows()); }
  int outputs() const { return static_cast<int>(y_data_.rows()); }

 private:
  struct FaceSet {
    Eigen::MatrixXd z;
    int player;
    int action;  // last action: the dropped coordinate
  };
  FaceSet make_face(int i, int a, int n, std::mt19937_64& rng) const;
  /// Adds the face hinge of one set and its d/dP into gp.
  double face_term(const FaceSet& f, const Eigen::MatrixXd& p, Eigen::MatrixXd* gp) const;

  Game game_;
  PinnLossWeights weights_;
  std::vector<int> reduced_;
  Eigen::MatrixXd z_data_, y_data_;
  std::vector<FaceSet> faces_;
  Eigen::MatrixXd z_pc_;
  Eigen::MatrixXd grad_u_pc_;  // reduced payoff gradient per output row and point
};

struct PinnConfig {
  PinnLossWeights weights;
  int epochs = 20000;
  double step = 1e-2;
  int history_every = 100;
};

class PinnModel : public VelocityModel {
 public:
  PinnModel(const Game& g, PinnNet net);
  std::string name() const override { return "pinn"; }
  Eigen::VectorXd velocity(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const override;
  const PinnNet& net() const { return net_; }

 private:
  Game game_;
  PinnNet net_;
};

struct PinnFit {
  std::shared_ptr<PinnModel> model;
  std::vector<PinnLosses> history;  // every history_every epochs, then the final loss
  PinnLosses initial;
};

/// Throws std::runtime_error when the loss becomes non-finite.
PinnFit pinn_fit(const TrajectoryDataset& data, const Game& g, const PinnConfig& cfg, std::mt19937_64& rng);

/// Weight dump: one `name rows cols` header and then the rows of each array.
void write_pinn(const PinnNet& net, std::ostream& out);

}  // namespace gamesteer
