#include "gamesteer/sos.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

namespace gamesteer {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

AffineForm AffineForm::variable(int index, double coeff) {
  if (index < 0) throw std::invalid_argument("AffineForm: negative decision index");
  AffineForm f;
  if (coeff != 0.0) f.terms_.emplace_back(index, coeff);
  return f;
}

double AffineForm::evaluate(std::span<const double> decisions) const {
  double v = constant_;
  for (const auto& [k, c] : terms_) {
    if (static_cast<std::size_t>(k) >= decisions.size())
      throw std::out_of_range("AffineForm: decision index out of range");
    v += c * decisions[k];
  }
  return v;
}

AffineForm operator+(const AffineForm& a, const AffineForm& b) {
  AffineForm r;
  r.constant_ = a.constant_ + b.constant_;
  r.terms_.reserve(a.terms_.size() + b.terms_.size());
  auto i = a.terms_.begin();
  auto j = b.terms_.begin();
  while (i != a.terms_.end() || j != b.terms_.end()) {
    if (j == b.terms_.end() || (i != a.terms_.end() && i->first < j->first)) {
      r.terms_.push_back(*i++);
    } else if (i == a.terms_.end() || j->first < i->first) {
      r.terms_.push_back(*j++);
    } else {
      const double c = i->second + j->second;
      if (c != 0.0) r.terms_.emplace_back(i->first, c);
      ++i;
      ++j;
    }
  }
  return r;
}

AffineForm operator*(const AffineForm& a, double s) {
  AffineForm r;
  if (s == 0.0) return r;
  r.constant_ = a.constant_ * s;
  r.terms_.reserve(a.terms_.size());
  for (const auto& [k, c] : a.terms_) {
    const double v = c * s;
    if (v != 0.0) r.terms_.emplace_back(k, v);
  }
  return r;
}

AffinePoly lift(const Poly& p) {
  AffinePoly out(p.space());
  for (const auto& [e, c] : p.terms()) out.add_term(e, AffineForm(c));
  return out;
}

Poly instantiate(const AffinePoly& p, std::span<const double> decisions) {
  Poly out(p.space());
  for (const auto& [e, c] : p.terms()) out.add_term(e, c.evaluate(decisions));
  return out;
}

void SosProgram::check_space(const AffinePoly& p) const {
  if (!p.space() || !(*p.space() == *space_)) throw DimensionError("sos: polynomial not in the program space");
}

DecisionPoly SosProgram::declare_poly(int max_degree) {
  return declare_poly(monomial_basis(space_->dim(), max_degree));
}

DecisionPoly SosProgram::declare_poly(std::vector<Exponent> monomials) {
  std::set<Exponent> seen;
  for (const auto& e : monomials) {
    if (e.size() != space_->dim()) throw DimensionError("declare_poly: exponent length does not match space");
    if (!seen.insert(e).second) throw std::invalid_argument("declare_poly: repeated monomial");
  }
  DecisionPoly h;
  h.offset = num_decisions_;
  h.monomials = std::move(monomials);
  num_decisions_ += static_cast<int>(h.monomials.size());
  return h;
}

AffinePoly SosProgram::as_polynomial(const DecisionPoly& h) const {
  AffinePoly p(space_);
  for (std::size_t k = 0; k < h.monomials.size(); ++k)
    p.add_term(h.monomials[k], AffineForm::variable(h.offset + static_cast<int>(k)));
  return p;
}

void SosProgram::add_poly_identity(const AffinePoly& expr, std::string label) {
  check_space(expr);
  identities_.push_back({expr, std::move(label)});
}

void SosProgram::add_nonneg_on(const AffinePoly& expr, const SemialgebraicSet& set, int degree,
                               std::string label) {
  check_space(expr);
  if (!set.space || !(*set.space == *space_)) throw DimensionError("add_nonneg_on: set not in the program space");
  for (const auto& g : set.inequalities)
    if (!g.same_space(Poly(space_))) throw DimensionError("add_nonneg_on: generator not in the program space");
  if (!set.box.empty() && set.box.size() != space_->dim())
    throw DimensionError("add_nonneg_on: box length does not match space");
  if (degree < std::max(expr.degree(), 0))
    throw std::invalid_argument("add_nonneg_on: relaxation degree below the expression degree");
  nonneg_.push_back({expr, set, degree, std::move(label)});
}

void SosProgram::set_lsq_objective(const Eigen::MatrixXd& l, const Eigen::VectorXd& target) {
  if (l.cols() != num_decisions_) throw DimensionError("set_lsq_objective: L has wrong column count");
  if (l.rows() != target.size()) throw DimensionError("set_lsq_objective: target length mismatch");
  std::vector<AffineForm> rows;
  for (int r = 0; r < l.rows(); ++r) {
    AffineForm f;
    for (int c = 0; c < l.cols(); ++c)
      if (l(r, c) != 0.0) f = f + AffineForm::variable(c, l(r, c));
    rows.push_back(std::move(f));
  }
  set_lsq_objective(std::move(rows), target);
}

void SosProgram::set_lsq_objective(std::vector<AffineForm> rows, const Eigen::VectorXd& target) {
  if (static_cast<Eigen::Index>(rows.size()) != target.size())
    throw DimensionError("set_lsq_objective: target length mismatch");
  for (const auto& r : rows)
    for (const auto& [k, c] : r.terms())
      if (k >= num_decisions_) throw std::out_of_range("set_lsq_objective: unknown decision");
  lsq_rows_ = std::move(rows);
  lsq_target_ = target;
}

namespace {

bool subset_of(const std::vector<std::size_t>& vars, const std::vector<bool>& active) {
  for (std::size_t k : vars)
    if (!active[k]) return false;
  return true;
}

// Monomials of degree <= d over the active variables, embedded in the full space.
std::vector<Exponent> local_basis(std::size_t dim, const std::vector<std::size_t>& active, int d) {
  std::vector<Exponent> out;
  for (const auto& le : monomial_basis(active.size(), d)) {
    Exponent e(dim, 0);
    for (std::size_t k = 0; k < active.size(); ++k) e[active[k]] = le[k];
    out.push_back(std::move(e));
  }
  return out;
}

Exponent add_exp(const Exponent& a, const Exponent& b) {
  Exponent r = a;
  for (std::size_t k = 0; k < r.size(); ++k) r[k] += b[k];
  return r;
}

struct Row {
  std::vector<Eigen::Triplet<double>> entries;  // row index filled in at emission
  double rhs = 0.0;
};

void emit_rows(std::map<Exponent, Row>& rows, SdpProblem& prob, const std::string& what) {
  for (auto& [e, r] : rows) {
    if (r.entries.empty()) {
      if (r.rhs != 0.0) throw std::runtime_error("sos compile: " + what + " has an unmatched nonzero coefficient");
      continue;
    }
    const int row = prob.rows++;
    for (const auto& t : r.entries) prob.a.emplace_back(row, t.col(), t.value());
    prob.b.conservativeResize(prob.rows);
    prob.b(row) = r.rhs;
  }
}

// Adds expr's coefficients to the rows: decisions d_k enter with -coeff, the
// constant moves to the right-hand side.
void add_expr_rows(const AffinePoly& expr, int decision_offset, std::map<Exponent, Row>& rows) {
  for (const auto& [e, f] : expr.terms()) {
    Row& r = rows[e];
    r.rhs += f.constant();
    for (const auto& [k, c] : f.terms()) r.entries.emplace_back(0, decision_offset + k, -c);
  }
}

double box_bound(const Poly& p, const std::vector<double>& radius) {
  double s = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double m = std::abs(c);
    for (std::size_t k = 0; k < e.size(); ++k)
      for (int j = 0; j < e[k]; ++j) m *= radius[k];
    s += m;
  }
  return s;
}

std::vector<std::pair<double, double>> effective_box(const SemialgebraicSet& set) {
  if (!set.box.empty()) return set.box;
  return std::vector<std::pair<double, double>>(set.space->dim(), {0.0, 1.0});
}

}  // namespace

CompiledSos compile(const SosProgram& prog) {
  const std::size_t dim = prog.space()->dim();
  const int nd = prog.num_decisions();
  CompiledSos out;

  // Layout pass: bases and block sizes.
  int n_free = nd;
  for (const auto& con : prog.nonneg_constraints()) {
    CompiledNonneg cn;
    cn.label = con.label;
    cn.degree = con.degree;
    cn.active = active_variables(con.expr);
    std::vector<bool> is_active(dim, false);
    for (std::size_t k : cn.active) is_active[k] = true;

    const Poly one = Poly::constant(prog.space(), 1.0);
    cn.generators.push_back(one);
    for (const auto& g : con.set.inequalities)
      if (subset_of(active_variables(g), is_active) && g.degree() > 0) cn.generators.push_back(g);
    if (con.set.archimedean_radius && !cn.active.empty()) {
      Poly g = Poly::constant(prog.space(), *con.set.archimedean_radius);
      for (std::size_t k : cn.active) {
        Exponent e(dim, 0);
        e[k] = 2;
        g.add_term(e, -1.0);
      }
      cn.generators.push_back(g);
    }
    std::vector<Poly> kept;
    for (const auto& g : cn.generators) {
      const int dg = g.degree();
      if (dg > con.degree) continue;
      kept.push_back(g);
      cn.bases.push_back(local_basis(dim, cn.active, (con.degree - dg) / 2));
    }
    cn.generators = std::move(kept);

    for (const auto& h : con.set.equalities) {
      if (!subset_of(active_variables(h), is_active) || h.degree() <= 0 || h.degree() > con.degree) continue;
      cn.equalities.push_back(h);
      cn.eq_bases.push_back(local_basis(dim, cn.active, con.degree - h.degree()));
      cn.eq_offset.push_back(n_free);
      n_free += static_cast<int>(cn.eq_bases.back().size());
    }
    for (const auto& basis : cn.bases) {
      cn.block_index.push_back(static_cast<int>(out.sdp.blocks.size()));
      out.sdp.blocks.push_back(static_cast<int>(basis.size()));
    }
    out.nonneg.push_back(std::move(cn));
  }
  const std::size_t n_lsq = prog.lsq_rows().size();
  if (n_lsq > 0) {
    out.epigraph_block = static_cast<int>(out.sdp.blocks.size());
    out.sdp.blocks.push_back(static_cast<int>(n_lsq) + 1);
  }
  out.sdp.free_dim = n_free;
  const int foff = out.sdp.free_offset();
  out.decision_offset = foff;
  out.sdp.c = Eigen::VectorXd::Zero(out.sdp.vec_dim());
  out.sdp.b.resize(0);

  // Emission pass.
  for (std::size_t ci = 0; ci < prog.nonneg_constraints().size(); ++ci) {
    const auto& con = prog.nonneg_constraints()[ci];
    const auto& cn = out.nonneg[ci];
    std::map<Exponent, Row> rows;
    for (std::size_t bi = 0; bi < cn.bases.size(); ++bi) {
      const auto& basis = cn.bases[bi];
      const int n = static_cast<int>(basis.size());
      const int boff = out.sdp.block_offset(cn.block_index[bi]);
      for (int j = 0; j < n; ++j) {
        for (int i = j; i < n; ++i) {
          const Exponent bij = add_exp(basis[i], basis[j]);
          const int col = boff + svec_index(n, i, j);
          const double w = (i == j) ? 1.0 : kSqrt2;
          for (const auto& [eg, cg] : cn.generators[bi].terms())
            rows[add_exp(bij, eg)].entries.emplace_back(0, col, w * cg);
        }
      }
    }
    for (std::size_t li = 0; li < cn.equalities.size(); ++li) {
      const auto& basis = cn.eq_bases[li];
      for (std::size_t m = 0; m < basis.size(); ++m) {
        const int col = foff + cn.eq_offset[li] + static_cast<int>(m);
        for (const auto& [eh, ch] : cn.equalities[li].terms())
          rows[add_exp(basis[m], eh)].entries.emplace_back(0, col, ch);
      }
    }
    add_expr_rows(con.expr, foff, rows);
    emit_rows(rows, out.sdp, "constraint '" + con.label + "'");
  }

  for (const auto& id : prog.identities()) {
    std::map<Exponent, Row> rows;
    add_expr_rows(id.expr, foff, rows);
    emit_rows(rows, out.sdp, "identity '" + id.label + "'");
  }

  if (n_lsq > 0) {
    const int n = static_cast<int>(n_lsq) + 1;
    const int boff = out.sdp.block_offset(out.epigraph_block);
    auto add_row = [&](std::vector<Eigen::Triplet<double>> entries, double rhs) {
      const int row = out.sdp.rows++;
      for (const auto& t : entries) out.sdp.a.emplace_back(row, t.col(), t.value());
      out.sdp.b.conservativeResize(out.sdp.rows);
      out.sdp.b(row) = rhs;
    };
    // top-left identity
    for (int j = 0; j + 1 < n; ++j)
      for (int i = j; i + 1 < n; ++i) add_row({{0, boff + svec_index(n, i, j), 1.0}}, i == j ? 1.0 : 0.0);
    // last row holds the residual vector
    for (int j = 0; j + 1 < n; ++j) {
      const AffineForm& f = prog.lsq_rows()[j];
      std::vector<Eigen::Triplet<double>> e{{0, boff + svec_index(n, n - 1, j), 1.0 / kSqrt2}};
      for (const auto& [k, c] : f.terms()) e.emplace_back(0, foff + k, -c);
      add_row(std::move(e), f.constant() - prog.lsq_target()(j));
    }
    out.sdp.c(boff + svec_index(n, n - 1, n - 1)) = 1.0;
  }
  out.sdp.validate();
  return out;
}

Poly gram_polynomial(const SpacePtr& space, const std::vector<Exponent>& basis, const Eigen::MatrixXd& gram) {
  Poly p(space);
  const int n = static_cast<int>(basis.size());
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) p.add_term(add_exp(basis[i], basis[j]), (i == j ? 1.0 : 2.0) * gram(i, j));
  return p;
}

Poly certificate_polynomial(const NonnegCertificate& cert) {
  Poly sum(cert.expr.space());
  for (const auto& blk : cert.sos) sum += gram_polynomial(sum.space(), blk.basis, blk.gram) * blk.generator;
  for (std::size_t l = 0; l < cert.equalities.size(); ++l) sum += cert.equality_multipliers[l] * cert.equalities[l];
  return sum;
}

SosExtraction extract(const SosProgram& prog, const CompiledSos& compiled, const SdpSolution& sol, double prune) {
  SosExtraction ex;
  const int nd = prog.num_decisions();
  if (sol.free.size() != compiled.sdp.free_dim) throw std::invalid_argument("extract: solution shape mismatch");
  ex.raw_decisions.assign(sol.free.data(), sol.free.data() + nd);
  ex.decisions = ex.raw_decisions;
  for (double& d : ex.decisions)
    if (std::abs(d) < prune) d = 0.0;

  double delta_sum = 0.0;
  for (std::size_t ci = 0; ci < compiled.nonneg.size(); ++ci) {
    const auto& cn = compiled.nonneg[ci];
    const auto& con = prog.nonneg_constraints()[ci];
    NonnegCertificate cert;
    cert.label = cn.label;
    cert.expr = instantiate(con.expr, ex.decisions);

    std::vector<double> radius;
    for (const auto& [lo, hi] : effective_box(con.set)) radius.push_back(std::max(std::abs(lo), std::abs(hi)));

    double gram_slack = 0.0;
    for (std::size_t bi = 0; bi < cn.bases.size(); ++bi) {
      SosBlockCertificate blk{cn.generators[bi], cn.bases[bi], sol.blocks.at(cn.block_index[bi])};
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.gram, Eigen::EigenvaluesOnly);
      const double lmin = es.eigenvalues()(0);
      if (lmin < 0) {
        double basis_mass = 0.0;
        for (const auto& b : blk.basis) basis_mass += box_bound(Poly::monomial(prog.space(), add_exp(b, b), 1.0), radius);
        gram_slack += -lmin * basis_mass * box_bound(blk.generator, radius);
      }
      cert.sos.push_back(std::move(blk));
    }
    for (std::size_t li = 0; li < cn.equalities.size(); ++li) {
      Poly q(prog.space());
      for (std::size_t m = 0; m < cn.eq_bases[li].size(); ++m)
        q.add_term(cn.eq_bases[li][m], sol.free(cn.eq_offset[li] + static_cast<int>(m)));
      cert.equalities.push_back(cn.equalities[li]);
      cert.equality_multipliers.push_back(std::move(q));
    }
    const Poly err = cert.expr - certificate_polynomial(cert);
    for (const auto& [e, c] : err.terms()) cert.identity_residual = std::max(cert.identity_residual, std::abs(c));
    cert.delta = box_bound(err, radius) + gram_slack;
    delta_sum = std::max(delta_sum, cert.delta);
    ex.certificate.constraints.push_back(std::move(cert));
  }
  ex.certificate.delta_achieved = delta_sum;

  for (std::size_t r = 0; r < prog.lsq_rows().size(); ++r) {
    const double v = prog.lsq_rows()[r].evaluate(ex.decisions) - prog.lsq_target()(static_cast<Eigen::Index>(r));
    ex.objective += v * v;
  }
  return ex;
}

std::vector<std::vector<double>> sample_set(const SemialgebraicSet& set, int n, std::mt19937_64& rng) {
  const auto box = effective_box(set);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (const auto& [lo, hi] : box) {
    if (!(hi >= lo)) throw std::invalid_argument("sample_set: empty box interval");
    dist.emplace_back(lo, hi);
  }
  std::vector<std::vector<double>> out;
  const long cap = 1000L * n + 10000L;
  std::vector<double> z(box.size());
  for (long attempt = 0; attempt < cap && static_cast<int>(out.size()) < n; ++attempt) {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = dist[k](rng);
    bool ok = true;
    for (const auto& g : set.inequalities)
      if (eval(g, z) < 0.0) {
        ok = false;
        break;
      }
    for (const auto& h : set.equalities)
      if (ok && std::abs(eval(h, z)) > 1e-9) ok = false;
    if (ok) out.push_back(z);
  }
  if (static_cast<int>(out.size()) < n) throw std::runtime_error("sample_set: rejection sampler exhausted");
  return out;
}

double check_delta_satisfiability(const Poly& expr, const SemialgebraicSet& set, int n_samples,
                                  std::mt19937_64& rng) {
  if (!expr.same_space(Poly(set.space))) throw DimensionError("check_delta_satisfiability: space mismatch");
  double worst = 0.0;
  for (const auto& z : sample_set(set, n_samples, rng)) worst = std::max(worst, -eval(expr, z));
  return worst;
}

void write_certificate_report(const Certificate& cert, std::ostream& out) {
  out << "delta_achieved " << cert.delta_achieved << '\n';
  for (const auto& c : cert.constraints) {
    out << "constraint " << (c.label.empty() ? "(unnamed)" : c.label) << '\n';
    out << "  expr " << to_string(c.expr) << '\n';
    out << "  identity_residual " << c.identity_residual << "  delta " << c.delta << '\n';
    for (const auto& blk : c.sos) {
      double lmin = 0.0;
      if (blk.gram.size() > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.gram, Eigen::EigenvaluesOnly);
        lmin = es.eigenvalues()(0);
      }
      out << "  sos generator " << to_string(blk.generator) << "  basis " << blk.basis.size()
          << "  trace " << blk.gram.trace() << "  min_eig " << lmin << '\n';
    }
    for (std::size_t l = 0; l < c.equalities.size(); ++l)
      out << "  eq " << to_string(c.equalities[l]) << "  multiplier " << to_string(c.equality_multipliers[l]) << '\n';
  }
}

}  // namespace gamesteer
