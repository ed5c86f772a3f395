#include "gamesteer/siarc.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

namespace gamesteer {

void VelocityModel::jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& w, Eigen::MatrixXd& jx,
                              Eigen::MatrixXd& jw) const {
  const double h = 1e-6;
  const Eigen::VectorXd f0 = velocity(x, w);
  jx.resize(f0.size(), x.size());
  jw.resize(f0.size(), w.size());
  Eigen::VectorXd xp = x, wp = w;
  for (int k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + h;
    const Eigen::VectorXd fp = velocity(xp, w);
    xp(k) = x(k) - h;
    jx.col(k) = (fp - velocity(xp, w)) / (2.0 * h);
    xp(k) = x(k);
  }
  for (int k = 0; k < w.size(); ++k) {
    wp(k) = w(k) + h;
    const Eigen::VectorXd fp = velocity(x, wp);
    wp(k) = w(k) - h;
    jw.col(k) = (fp - velocity(x, wp)) / (2.0 * h);
    wp(k) = w(k);
  }
}

PolynomialModel::PolynomialModel(std::string name, std::vector<Poly> p, int state_dim)
    : name_(std::move(name)), p_(std::move(p)), state_dim_(state_dim) {
  if (p_.empty()) throw std::invalid_argument("PolynomialModel: no outputs");
  dim_ = static_cast<int>(p_.front().dim());
  for (const auto& q : p_)
    if (!q.same_space(p_.front())) throw DimensionError("PolynomialModel: outputs in different spaces");
  if (state_dim_ > dim_) throw DimensionError("PolynomialModel: state dimension exceeds space");

  std::map<Exponent, int> ids;
  auto compile_list = [&](const std::vector<Poly>& polys) {
    Compiled c;
    for (const auto& q : polys) {
      std::vector<std::pair<int, double>> row;
      for (const auto& [e, coef] : q.terms()) {
        auto [it, inserted] = ids.try_emplace(e, static_cast<int>(monomials_.size()));
        if (inserted) monomials_.push_back(e);
        for (int v : e) max_power_ = std::max(max_power_, v);
        row.emplace_back(it->second, coef);
      }
      c.rows.push_back(std::move(row));
    }
    return c;
  };
  value_ = compile_list(p_);
  for (int k = 0; k < dim_; ++k) {
    std::vector<Poly> d;
    for (const auto& q : p_) d.push_back(partial(q, static_cast<std::size_t>(k)));
    partial_.push_back(compile_list(d));
  }
  powers_.assign(static_cast<std::size_t>(dim_) * (max_power_ + 1), 1.0);
  mono_.assign(monomials_.size(), 0.0);
}

void PolynomialModel::evaluate_monomials(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  if (x.size() != state_dim_ || x.size() + w.size() != dim_)
    throw DimensionError("PolynomialModel: input dimension mismatch");
  const int stride = max_power_ + 1;
  for (int k = 0; k < dim_; ++k) {
    const double z = k < state_dim_ ? x(k) : w(k - state_dim_);
    double* row = &powers_[static_cast<std::size_t>(k) * stride];
    row[0] = 1.0;
    for (int j = 1; j < stride; ++j) row[j] = row[j - 1] * z;
  }
  for (std::size_t m = 0; m < monomials_.size(); ++m) {
    double v = 1.0;
    const Exponent& e = monomials_[m];
    for (int k = 0; k < dim_; ++k)
      if (e[k]) v *= powers_[static_cast<std::size_t>(k) * stride + e[k]];
    mono_[m] = v;
  }
}

Eigen::VectorXd PolynomialModel::velocity(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  evaluate_monomials(x, w);
  Eigen::VectorXd out(p_.size());
  for (std::size_t r = 0; r < p_.size(); ++r) {
    double s = 0.0;
    for (const auto& [id, c] : value_.rows[r]) s += c * mono_[id];
    out(static_cast<Eigen::Index>(r)) = s;
  }
  return out;
}

void PolynomialModel::jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& w, Eigen::MatrixXd& jx,
                                Eigen::MatrixXd& jw) const {
  evaluate_monomials(x, w);
  const int n_out = static_cast<int>(p_.size());
  jx.resize(n_out, state_dim_);
  jw.resize(n_out, dim_ - state_dim_);
  for (int k = 0; k < dim_; ++k) {
    for (int r = 0; r < n_out; ++r) {
      double s = 0.0;
      for (const auto& [id, c] : partial_[k].rows[r]) s += c * mono_[id];
      if (k < state_dim_)
        jx(r, k) = s;
      else
        jw(r, k - state_dim_) = s;
    }
  }
}

Poly eliminate_last_actions(const Poly& p, const Game& g) {
  Poly out = p;
  const SpacePtr& s = p.space();
  for (int i = 0; i < g.players(); ++i) {
    Poly rest = Poly::constant(s, 1.0);
    for (int a = 0; a + 1 < g.actions(i); ++a) rest -= Poly::variable(s, g.index(i, a));
    out = compose(out, g.index(i, g.actions(i) - 1), rest);
  }
  return out;
}

std::vector<Exponent> template_monomials(const Game& g, int state_degree, int control_degree) {
  const auto red = reduced_indices(g);
  const int nx = g.state_dim(), nw = g.controls();
  std::vector<Exponent> out;
  for (const auto& ex : monomial_basis(red.size(), state_degree))
    for (const auto& ew : monomial_basis(static_cast<std::size_t>(nw), control_degree)) {
      Exponent e(static_cast<std::size_t>(nx + nw), 0);
      for (std::size_t k = 0; k < red.size(); ++k) e[red[k]] = ex[k];
      for (int k = 0; k < nw; ++k) e[nx + k] = ew[k];
      out.push_back(std::move(e));
    }
  std::sort(out.begin(), out.end(), graded_lex_less);
  return out;
}

namespace {

// Inequalities describing player i's reduced simplex, optionally with one
// reduced coordinate removed (it has been substituted away on a face).
std::vector<Poly> simplex_generators(const Game& g, const SpacePtr& s, int i, int removed = -1) {
  std::vector<Poly> gens;
  Poly rest = Poly::constant(s, 1.0);
  for (int a = 0; a + 1 < g.actions(i); ++a) {
    if (a == removed) continue;
    Poly xa = Poly::variable(s, g.index(i, a));
    gens.push_back(xa);
    rest -= xa;
  }
  if (rest.degree() > 0) gens.push_back(rest);
  return gens;
}

// All pairwise products of player i's simplex coordinates in reduced form.
std::vector<Poly> product_generators(const Game& g, const SpacePtr& s, int i) {
  std::vector<Poly> y;
  Poly rest = Poly::constant(s, 1.0);
  for (int a = 0; a + 1 < g.actions(i); ++a) {
    y.push_back(Poly::variable(s, g.index(i, a)));
    rest -= y.back();
  }
  y.push_back(rest);
  std::vector<Poly> out;
  for (std::size_t a = 0; a < y.size(); ++a)
    for (std::size_t b = a + 1; b < y.size(); ++b) out.push_back(y[a] * y[b]);
  return out;
}

std::vector<Poly> control_generators(const Game& g, const SpacePtr& s) {
  std::vector<Poly> gens;
  for (int k = 0; k < g.controls(); ++k) {
    const auto [lo, hi] = g.control_bounds()[k];
    if (lo == hi) continue;
    Poly w = Poly::variable(s, g.state_dim() + k);
    gens.push_back(w - Poly::constant(s, lo));
    gens.push_back(Poly::constant(s, hi) - w);
  }
  return gens;
}

std::vector<std::pair<double, double>> ambient_box(const Game& g) {
  std::vector<std::pair<double, double>> box(g.state_dim(), {0.0, 1.0});
  for (const auto& b : g.control_bounds()) box.push_back(b);
  return box;
}

double archimedean_radius(const Game& g) {
  double r = static_cast<double>(reduced_indices(g).size());
  for (const auto& [lo, hi] : g.control_bounds()) r += std::max(lo * lo, hi * hi);
  return r;
}

}  // namespace

SiarcProblem build_problem(const TrajectoryDataset& data, const Game& g, const SiarcConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("build_problem: empty dataset");
  const SpacePtr space = g.joint_space();
  SiarcProblem prob(space);
  SosProgram& prog = prob.program;
  const auto mons = template_monomials(g, cfg.state_degree, cfg.control_degree);
  std::vector<AffinePoly> p;
  for (int c = 0; c < g.state_dim(); ++c) {
    prob.templates.push_back(prog.declare_poly(mons));
    p.push_back(prog.as_polynomial(prob.templates.back()));
  }

  const auto box = ambient_box(g);
  const double radius = archimedean_radius(g);
  const auto wgens = control_generators(g, space);
  auto make_set = [&](std::vector<Poly> gens) {
    SemialgebraicSet set(space);
    set.inequalities = std::move(gens);
    set.box = box;
    if (cfg.archimedean) set.archimedean_radius = radius;
    return set;
  };
  const int rfi_degree = cfg.rfi_degree < 0 ? cfg.degree : cfg.rfi_degree;

  if (cfg.rfi) {
    for (int i = 0; i < g.players(); ++i) {
      AffinePoly sum(space);
      for (int a = 0; a < g.actions(i); ++a) sum += p[g.index(i, a)];
      prog.add_poly_identity(sum, "tangency_" + std::to_string(i + 1));
      ++prob.identities;
    }
    for (int i = 0; i < g.players(); ++i) {
      const int m = g.actions(i);
      for (int a = 0; a < m; ++a) {
        AffinePoly expr(space);
        int removed;
        if (a + 1 < m) {
          expr = substitute(p[g.index(i, a)], {{static_cast<std::size_t>(g.index(i, a)), 0.0}});
          removed = a;
        } else if (m == 2) {
          expr = substitute(p[g.index(i, a)], {{static_cast<std::size_t>(g.index(i, 0)), 1.0}});
          removed = 0;
        } else {
          // x_{i,m} = 0 means x_{i,m-1} = 1 - sum of the other reduced coordinates
          Poly rest = Poly::constant(space, 1.0);
          for (int b = 0; b + 2 < m; ++b) rest -= Poly::variable(space, g.index(i, b));
          expr = compose(p[g.index(i, a)], g.index(i, m - 2), rest);
          removed = m - 2;
        }
        std::vector<Poly> gens = simplex_generators(g, space, i, removed);
        for (int j = 0; j < g.players(); ++j)
          if (j != i)
            for (auto& q : simplex_generators(g, space, j)) gens.push_back(q);
        for (const auto& q : wgens) gens.push_back(q);
        prog.add_nonneg_on(expr, make_set(std::move(gens)), std::max(rfi_degree, std::max(expr.degree(), 0)),
                           "face_" + std::to_string(i + 1) + std::to_string(a + 1));
        ++prob.faces;
      }
    }
  }

  if (cfg.pc) {
    std::vector<Poly> gens;
    for (int j = 0; j < g.players(); ++j)
      for (auto& q : simplex_generators(g, space, j)) gens.push_back(q);
    if (cfg.product_generators)
      for (int j = 0; j < g.players(); ++j)
        for (auto& q : product_generators(g, space, j)) gens.push_back(q);
    for (const auto& q : wgens) gens.push_back(q);
    for (int i = 0; i < g.players(); ++i) {
      const auto v = action_utilities_symbolic(g, i, space);
      AffinePoly expr(space);
      for (int a = 0; a < g.actions(i); ++a) expr += mul(p[g.index(i, a)], eliminate_last_actions(v[a], g));
      if (expr.degree() > cfg.degree)
        throw std::invalid_argument("build_problem: relaxation degree below deg(v) + deg(p)");
      prog.add_nonneg_on(expr, make_set(gens), cfg.degree, "pc_" + std::to_string(i + 1));
      ++prob.pc_constraints;
    }
  }

  // least squares over all samples and coordinates
  std::vector<AffineForm> rows;
  std::vector<double> target;
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::vector<double> z(data.x[k].data(), data.x[k].data() + data.x[k].size());
    z.insert(z.end(), data.w[k].data(), data.w[k].data() + data.w[k].size());
    std::vector<double> mono_val;
    for (const auto& e : mons) mono_val.push_back(eval(Poly::monomial(space, e, 1.0), z));
    for (int c = 0; c < g.state_dim(); ++c) {
      AffineForm f;
      for (std::size_t m = 0; m < mons.size(); ++m)
        if (mono_val[m] != 0.0) f = f + AffineForm::variable(prob.templates[c].offset + static_cast<int>(m), mono_val[m]);
      rows.push_back(std::move(f));
      target.push_back(data.xdot[k](c));
    }
  }
  prog.set_lsq_objective(std::move(rows), Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size())));
  return prob;
}

SiarcFit fit(const TrajectoryDataset& data, const Game& g, const SiarcConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  SiarcProblem prob = build_problem(data, g, cfg);
  const CompiledSos compiled = compile(prob.program);
  const SdpSolution sol = solve(compiled.sdp, cfg.sdp);
  SosExtraction ex = extract(prob.program, compiled, sol, cfg.prune);

  std::vector<Poly> p;
  for (const auto& h : prob.templates) p.push_back(instantiate(prob.program.as_polynomial(h), ex.decisions));
  if (cfg.rfi) {
    // tangency holds only to solver accuracy; make it exact
    for (int i = 0; i < g.players(); ++i) {
      Poly rest(p.front().space());
      for (int a = 0; a + 1 < g.actions(i); ++a) rest += p[g.index(i, a)];
      p[g.index(i, g.actions(i) - 1)] = -1.0 * rest;
    }
  }
  SiarcFit out;
  out.model = std::make_shared<PolynomialModel>("siarc", std::move(p), g.state_dim());
  FitReport& r = out.report;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.residuals = sol.residuals;
  r.blocks = compiled.sdp.blocks;
  r.rows = compiled.sdp.rows;
  r.delta = ex.certificate.delta_achieved;
  r.certificate = std::move(ex.certificate);
  double se = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) se += (out.model->velocity(data.x[k], data.w[k]) - data.xdot[k]).squaredNorm();
  r.training_mse = se / static_cast<double>(data.size() * g.state_dim());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Eigen::VectorXd model_mse_true(const VelocityModel& model, const VectorField& truth, const Game& g, int n,
                               std::mt19937_64& rng) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.state_dim());
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd x = sample_profile(g, rng);
    const Eigen::VectorXd w = sample_control(g, rng);
    acc += (model.velocity(x, w) - truth(x, w)).array().square().matrix();
  }
  return acc / static_cast<double>(n);
}

SideInfoCheck check_side_information(const VelocityModel& model, const Game& g, int n, std::mt19937_64& rng) {
  SideInfoCheck c;
  c.rfi_min = std::numeric_limits<double>::infinity();
  c.pc_min = std::numeric_limits<double>::infinity();
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < g.players(); ++i) {
    for (int a = 0; a < g.actions(i); ++a) {
      for (int s = 0; s < n; ++s) {
        Eigen::VectorXd x = sample_profile(g, rng);
        // uniform point of the face x_{i,a} = 0
        double sum = 0.0;
        for (int b = 0; b < g.actions(i); ++b) sum += (x(g.index(i, b)) = (b == a ? 0.0 : e(rng)));
        x.segment(g.index(i, 0), g.actions(i)) /= sum;
        const Eigen::VectorXd w = sample_control(g, rng);
        c.rfi_min = std::min(c.rfi_min, model.velocity(x, w)(g.index(i, a)));
      }
    }
  }
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd x = sample_profile(g, rng);
    const Eigen::VectorXd w = sample_control(g, rng);
    const Eigen::VectorXd f = model.velocity(x, w);
    for (int i = 0; i < g.players(); ++i) {
      const Eigen::VectorXd v = action_utilities(g, i, x, w);
      c.pc_min = std::min(c.pc_min, v.dot(f.segment(g.index(i, 0), g.actions(i))));
    }
  }
  return c;
}

void write_model(const PolynomialModel& model, const FitReport& report, std::ostream& out) {
  const SpacePtr& s = model.polynomials().front().space();
  out << "model " << model.name() << '\n';
  for (std::size_t c = 0; c < model.polynomials().size(); ++c)
    out << "p_" << s->name(c) << " = " << to_string(model.polynomials()[c]) << '\n';
  out << "status " << to_string(report.status) << '\n';
  out << "iterations " << report.iterations << '\n';
  out << "residuals " << report.residuals.primal << ' ' << report.residuals.dual << ' ' << report.residuals.gap << '\n';
  out << "training_mse " << report.training_mse << '\n';
  out << "delta " << report.delta << '\n';
  out << "blocks";
  for (int b : report.blocks) out << ' ' << b;
  out << "\nrows " << report.rows << '\n';
  out << "seconds " << report.seconds << '\n';
}

}  // namespace gamesteer
