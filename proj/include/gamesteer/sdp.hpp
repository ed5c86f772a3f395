#pragma once

// Small dense semidefinite programs in standard primal form
//
//   minimize    c' z
//   subject to  A z = b,  z in S+^{n_1} x ... x S+^{n_B} x R^{free}
//
// Each PSD block is vectorized column-wise over its lower triangle with
// off-diagonal entries scaled by sqrt(2), so Euclidean inner products of the
// vectorization equal trace inner products of the matrices.
//
// Two solvers share this interface. The default is an infeasible-start
// primal-dual interior-point method (HKM direction, Mehrotra predictor-
// corrector) whose Schur complement is factored per group of rows coupled
// through a common block. The alternative is a Douglas-Rachford / ADMM
// splitting between the affine set {A z = b} (cached sparse factorization of
// A A') and the cone, cheaper per iteration but slow to reach high accuracy
// on degenerate problems.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>
#include <vector>

namespace gamesteer {

struct SdpProblem {
  std::vector<int> blocks;  // PSD block dimensions
  int free_dim = 0;         // unconstrained scalar variables, stored after all blocks
  int rows = 0;             // number of equality constraints
  std::vector<Eigen::Triplet<double>> a;  // sparse A over the vectorization
  Eigen::VectorXd b;
  Eigen::VectorXd c;

  int vec_dim() const;
  int block_offset(int k) const;
  int free_offset() const;
  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

enum class SdpStatus { Solved, MaxIters, InfeasibleSuspect };

std::string to_string(SdpStatus s);

struct SdpResiduals {
  double primal = 0.0;  // ||A z - b|| / (1 + ||b||) plus PSD violation of z
  double dual = 0.0;    // ||c - A'y - s|| / (1 + ||c||) with s the cone part of c - A'y
  double gap = 0.0;     // |c'z - b'y| / (1 + |c'z| + |b'y|)

  double max() const { return std::max(primal, std::max(dual, gap)); }
};

struct SdpSolution {
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::VectorXd free;
  Eigen::VectorXd dual;  // y, one entry per equality row
  SdpStatus status = SdpStatus::MaxIters;
  SdpResiduals residuals;
  int iterations = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
};

enum class SdpMethod { InteriorPoint, Admm };

std::string to_string(SdpMethod m);
SdpMethod parse_sdp_method(const std::string& s);

struct SdpOptions {
  SdpMethod method = SdpMethod::InteriorPoint;
  double tol = 1e-7;
  bool verbose = false;

  // interior point
  int ipm_max_iters = 100;
  double ipm_step = 0.95;  // fraction of the distance to the cone boundary

  // ADMM
  int max_iters = 200000;
  double relaxation = 1.5;  // over-relaxation alpha in (0, 2)
  double rho = 1.0;         // initial penalty
  bool adapt_rho = true;
  int check_interval = 10;
  /// Infeasibility heuristic: after this many iterations, stop when the
  /// primal residual has stalled above `infeasible_floor` over a window.
  int infeasible_min_iters = 4000;
  int infeasible_window = 2000;
  double infeasible_floor = 1e-3;
};

/// Packed symmetric vectorization helpers.
int svec_size(int n);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int n);
/// Position of entry (i, j), i >= j, inside svec of an n x n block.
int svec_index(int n, int i, int j);

/// Euclidean projection onto the PSD cone: eigenvalues clamped at zero.
/// The input is symmetrized as (M + M') / 2 first.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts = {});

/// Residuals of an arbitrary primal/dual pair, in the problem's own scaling.
SdpResiduals residuals(const SdpProblem& prob, const SdpSolution& sol);

/// Stacks the primal solution into the problem vectorization.
Eigen::VectorXd stack_primal(const SdpProblem& prob, const SdpSolution& sol);

/// Block-sparse triplet text dump:
///   line 1: "blocks <B> <n_1> ... <n_B>"
///   line 2: "free <f>"
///   line 3: "rows <m>"
///   then "b <row> <value>" for each nonzero b entry,
///   "c <col> <value>" for each nonzero c entry,
///   "a <row> <col> <value>" for each stored A entry.
/// Columns index the vectorization described above.
void write_problem(const SdpProblem& prob, std::ostream& out);

}  // namespace gamesteer
