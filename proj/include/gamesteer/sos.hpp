#pragma once

// Sum-of-squares programs over polynomials whose coefficients are affine in a
// vector of decision variables. Nonnegativity on a semialgebraic set
//
//   S = { z : g_j(z) >= 0, h_l(z) = 0 }
//
// is imposed through a quadratic-module certificate
//
//   expr = sigma_0 + sum_j sigma_j g_j + sum_l q_l h_l,
//
// with sigma_j SOS (Gram matrices become PSD blocks) and q_l free. The program
// compiles to an SdpProblem; extract() maps the solution back to decision
// values and a Certificate.

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gamesteer/poly.hpp"
#include "gamesteer/sdp.hpp"

namespace gamesteer {

/// constant + sum_k coeff_k * d_k over decision indices k (sorted, no zeros).
class AffineForm {
 public:
  AffineForm() = default;
  AffineForm(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)

  static AffineForm variable(int index, double coeff = 1.0);

  double constant() const { return constant_; }
  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  bool is_zero() const { return constant_ == 0.0 && terms_.empty(); }
  bool is_constant() const { return terms_.empty(); }
  double evaluate(std::span<const double> decisions) const;

  friend AffineForm operator+(const AffineForm& a, const AffineForm& b);
  friend AffineForm operator*(const AffineForm& a, double s);
  friend AffineForm operator*(double s, const AffineForm& a) { return a * s; }
  bool operator==(const AffineForm& o) const = default;

 private:
  double constant_ = 0.0;
  std::vector<std::pair<int, double>> terms_;
};

inline bool is_zero_coefficient(const AffineForm& f) { return f.is_zero(); }

using AffinePoly = Polynomial<AffineForm>;

/// Lifts a numeric polynomial to an AffinePoly with constant coefficients.
AffinePoly lift(const Poly& p);

/// Replaces decision variables by numeric values.
Poly instantiate(const AffinePoly& p, std::span<const double> decisions);

struct SemialgebraicSet {
  SpacePtr space;
  std::vector<Poly> inequalities;  // g_j >= 0
  std::vector<Poly> equalities;    // h_l == 0
  /// When set, R - sum z_k^2 >= 0 over the variables a constraint involves is
  /// appended at compile time.
  std::optional<double> archimedean_radius;
  /// Ambient box, one [lo, hi] per variable of the space; used for sampling
  /// and for bounding certificate slack. Empty means [0, 1] per variable.
  std::vector<std::pair<double, double>> box;

  explicit SemialgebraicSet(SpacePtr s) : space(std::move(s)) {}
};

/// Handle of a decision polynomial: coefficient k multiplies monomials[k]
/// and lives at decision index offset + k.
struct DecisionPoly {
  int offset = 0;
  std::vector<Exponent> monomials;
};

class SosProgram {
 public:
  struct Nonneg {
    AffinePoly expr;
    SemialgebraicSet set;
    int degree;
    std::string label;
  };
  struct Identity {
    AffinePoly expr;
    std::string label;
  };

  explicit SosProgram(SpacePtr space) : space_(std::move(space)) {}

  const SpacePtr& space() const { return space_; }
  int num_decisions() const { return num_decisions_; }

  /// One free coefficient per monomial of degree <= max_degree.
  DecisionPoly declare_poly(int max_degree);
  /// One free coefficient per listed monomial.
  DecisionPoly declare_poly(std::vector<Exponent> monomials);
  AffinePoly as_polynomial(const DecisionPoly& h) const;

  /// expr == 0 as a polynomial identity: one linear equality per monomial.
  void add_poly_identity(const AffinePoly& expr, std::string label = {});
  void add_nonneg_on(const AffinePoly& expr, const SemialgebraicSet& set, int degree, std::string label = {});
  /// minimize || L d - target ||^2 over decisions d.
  void set_lsq_objective(const Eigen::MatrixXd& l, const Eigen::VectorXd& target);
  /// minimize sum_r (rows[r](d) - target[r])^2.
  void set_lsq_objective(std::vector<AffineForm> rows, const Eigen::VectorXd& target);

  const std::vector<Identity>& identities() const { return identities_; }
  const std::vector<Nonneg>& nonneg_constraints() const { return nonneg_; }
  const std::vector<AffineForm>& lsq_rows() const { return lsq_rows_; }
  const Eigen::VectorXd& lsq_target() const { return lsq_target_; }

 private:
  void check_space(const AffinePoly& p) const;

  SpacePtr space_;
  int num_decisions_ = 0;
  std::vector<Identity> identities_;
  std::vector<Nonneg> nonneg_;
  std::vector<AffineForm> lsq_rows_;
  Eigen::VectorXd lsq_target_;
};

/// Layout of one compiled nonnegativity constraint.
struct CompiledNonneg {
  std::string label;
  int degree = 0;
  std::vector<std::size_t> active;       // variables the certificate ranges over
  std::vector<Poly> generators;          // multiplier of each SOS block; [0] is the constant 1
  std::vector<std::vector<Exponent>> bases;  // monomial basis per SOS block
  std::vector<int> block_index;          // SdpProblem block of each SOS block
  std::vector<Poly> equalities;          // h_l
  std::vector<std::vector<Exponent>> eq_bases;
  std::vector<int> eq_offset;            // free offset of each q_l coefficient vector
};

struct CompiledSos {
  SdpProblem sdp;
  std::vector<CompiledNonneg> nonneg;
  int decision_offset = 0;  // free-variable index of decision 0
  int epigraph_block = -1;  // SdpProblem block holding [[I, r], [r', t]]
};

struct SosBlockCertificate {
  Poly generator;               // g_j (1 for sigma_0)
  std::vector<Exponent> basis;
  Eigen::MatrixXd gram;
};

struct NonnegCertificate {
  std::string label;
  Poly expr;                    // the constraint with decisions substituted
  std::vector<SosBlockCertificate> sos;
  std::vector<Poly> equalities;
  std::vector<Poly> equality_multipliers;
  double identity_residual = 0.0;  // max |coefficient| of expr - certificate
  double delta = 0.0;              // bound on the violation over the ambient box
};

struct Certificate {
  std::vector<NonnegCertificate> constraints;
  double delta_achieved = 0.0;
};

struct SosExtraction {
  std::vector<double> decisions;  // pruned
  std::vector<double> raw_decisions;
  Certificate certificate;
  double objective = 0.0;         // least-squares objective at the pruned decisions
};

CompiledSos compile(const SosProgram& prog);

/// Reads decisions and certificate pieces out of an SDP solution. Decision
/// values with |d| < prune are set to zero.
SosExtraction extract(const SosProgram& prog, const CompiledSos& compiled, const SdpSolution& sol,
                      double prune = 1e-8);

/// sigma = b' G b for the given monomial basis.
Poly gram_polynomial(const SpacePtr& space, const std::vector<Exponent>& basis, const Eigen::MatrixXd& gram);

/// Sum of sigma_j g_j + q_l h_l for a certificate.
Poly certificate_polynomial(const NonnegCertificate& cert);

/// Uniform sample of S by rejection inside its ambient box.
/// Throws std::runtime_error if no point is accepted within the attempt cap.
std::vector<std::vector<double>> sample_set(const SemialgebraicSet& set, int n, std::mt19937_64& rng);

/// max(0, -min expr) over n uniform samples of S: an empirical lower bound on
/// the violation of "expr >= 0 on S".
double check_delta_satisfiability(const Poly& expr, const SemialgebraicSet& set, int n_samples,
                                  std::mt19937_64& rng);

/// Human-readable audit report of a certificate.
void write_certificate_report(const Certificate& cert, std::ostream& out);

}  // namespace gamesteer
