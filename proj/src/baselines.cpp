#include "gamesteer/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace gamesteer {

// SINDYc

Eigen::MatrixXd library_matrix(const Eigen::MatrixXd& z, const std::vector<Exponent>& library) {
  Eigen::MatrixXd theta(z.rows(), static_cast<Eigen::Index>(library.size()));
  for (std::size_t j = 0; j < library.size(); ++j) {
    if (static_cast<Eigen::Index>(library[j].size()) != z.cols())
      throw DimensionError("library_matrix: exponent length does not match data");
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      double v = 1.0;
      for (Eigen::Index k = 0; k < z.cols(); ++k)
        for (int e = 0; e < library[j][k]; ++e) v *= z(r, k);
      theta(r, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return theta;
}

namespace {

Eigen::VectorXd refit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& y, const std::vector<int>& support,
                      bool* rank_deficient) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(theta.cols());
  if (support.empty()) return xi;
  Eigen::MatrixXd sub(theta.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = theta.col(support[k]);
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sub);
  if (cod.rank() < sub.cols()) *rank_deficient = true;
  const Eigen::VectorXd sol = cod.solve(y);
  for (std::size_t k = 0; k < support.size(); ++k) xi(support[k]) = sol(static_cast<Eigen::Index>(k));
  return xi;
}

}  // namespace

SindyRegression sindy_regress(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, const std::vector<Exponent>& library,
                              const SindyConfig& cfg) {
  if (z.rows() == 0) throw std::invalid_argument("sindy_regress: no samples");
  if (y.rows() != z.rows()) throw DimensionError("sindy_regress: sample count mismatch");
  if (cfg.threshold < 0.0) throw std::invalid_argument("sindy_regress: threshold must be >= 0");
  const Eigen::MatrixXd theta = library_matrix(z, library);

  SindyRegression r;
  r.coefficients = Eigen::MatrixXd::Zero(theta.cols(), y.cols());
  r.support_sizes.resize(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    std::vector<int> support(static_cast<std::size_t>(theta.cols()));
    for (int j = 0; j < theta.cols(); ++j) support[j] = j;
    Eigen::VectorXd xi = refit(theta, y.col(c), support, &r.rank_deficient);
    auto& sizes = r.support_sizes[static_cast<std::size_t>(c)];
    sizes.push_back(static_cast<int>(support.size()));
    bool fixpoint = false;
    for (int it = 0; it < cfg.max_iters; ++it) {
      std::vector<int> kept;
      for (int j : support)
        if (std::abs(xi(j)) >= cfg.threshold) kept.push_back(j);
      if (kept == support) {
        fixpoint = true;
        break;
      }
      support = std::move(kept);
      xi = refit(theta, y.col(c), support, &r.rank_deficient);
      sizes.push_back(static_cast<int>(support.size()));
    }
    if (!fixpoint) r.converged = false;
    r.coefficients.col(c) = xi;
  }
  return r;
}

SindyFit sindy_fit(const TrajectoryDataset& data, const Game& g, const SindyConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("sindy_fit: empty dataset");
  const SpacePtr space = g.joint_space();
  const auto red = reduced_indices(g);
  const int nx = g.state_dim(), nw = g.controls();

  std::vector<Exponent> library;
  for (const auto& e : monomial_basis(space->dim(), cfg.degree)) {
    bool ok = true;
    for (int k = 0; k < nx; ++k)
      if (e[k] > 0 && std::find(red.begin(), red.end(), k) == red.end()) ok = false;
    int wdeg = 0;
    for (int k = 0; k < nw; ++k) wdeg += e[nx + k];
    if (cfg.control_degree >= 0 && wdeg > cfg.control_degree) ok = false;
    if (ok) library.push_back(e);
  }

  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd z(n, nx + nw), y(n, static_cast<Eigen::Index>(red.size()));
  for (Eigen::Index k = 0; k < n; ++k) {
    z.row(k) << data.x[k].transpose(), data.w[k].transpose();
    for (std::size_t r = 0; r < red.size(); ++r) y(k, static_cast<Eigen::Index>(r)) = data.xdot[k](red[r]);
  }

  SindyFit fit;
  fit.regression = sindy_regress(z, y, library, cfg);
  std::vector<Poly> p(static_cast<std::size_t>(nx), Poly(space));
  for (std::size_t r = 0; r < red.size(); ++r)
    for (std::size_t j = 0; j < library.size(); ++j) {
      const double c = fit.regression.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
      if (c != 0.0) p[red[r]].add_term(library[j], c);
    }
  // tangency completion for the dropped coordinate of each player
  for (int i = 0; i < g.players(); ++i) {
    Poly rest(space);
    for (int a = 0; a + 1 < g.actions(i); ++a) rest += p[g.index(i, a)];
    p[g.index(i, g.actions(i) - 1)] = -1.0 * rest;
  }
  fit.model = std::make_shared<PolynomialModel>("sindy", std::move(p), nx);
  return fit;
}

// PINN network

PinnNet PinnNet::random(int in, int out, std::mt19937_64& rng, int width) {
  auto glorot = [&](int rows, int cols) {
    const double a = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-a, a);
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
    return m;
  };
  PinnNet n;
  n.w1 = glorot(width, in);
  n.w2 = glorot(width, width);
  n.w3 = glorot(out, width);
  n.b1 = Eigen::VectorXd::Zero(width);
  n.b2 = Eigen::VectorXd::Zero(width);
  n.b3 = Eigen::VectorXd::Zero(out);
  return n;
}

PinnNet PinnNet::zeros_like(const PinnNet& n) {
  PinnNet z;
  z.w1 = Eigen::MatrixXd::Zero(n.w1.rows(), n.w1.cols());
  z.w2 = Eigen::MatrixXd::Zero(n.w2.rows(), n.w2.cols());
  z.w3 = Eigen::MatrixXd::Zero(n.w3.rows(), n.w3.cols());
  z.b1 = Eigen::VectorXd::Zero(n.b1.size());
  z.b2 = Eigen::VectorXd::Zero(n.b2.size());
  z.b3 = Eigen::VectorXd::Zero(n.b3.size());
  return z;
}

Eigen::MatrixXd PinnNet::forward(const Eigen::MatrixXd& z) const {
  const Eigen::MatrixXd h1 = ((w1 * z).colwise() + b1).array().tanh().matrix();
  const Eigen::MatrixXd h2 = ((w2 * h1).colwise() + b2).array().tanh().matrix();
  return (w3 * h2).colwise() + b3;
}

Eigen::VectorXd PinnNet::flatten() const {
  Eigen::VectorXd t(w1.size() + w2.size() + w3.size() + b1.size() + b2.size() + b3.size());
  Eigen::Index k = 0;
  for (const Eigen::MatrixXd* m : {&w1, &w2, &w3}) {
    t.segment(k, m->size()) = m->reshaped();
    k += m->size();
  }
  for (const Eigen::VectorXd* v : {&b1, &b2, &b3}) {
    t.segment(k, v->size()) = *v;
    k += v->size();
  }
  return t;
}

void PinnNet::unflatten(const Eigen::VectorXd& t) {
  Eigen::Index k = 0;
  for (Eigen::MatrixXd* m : {&w1, &w2, &w3}) {
    m->reshaped() = t.segment(k, m->size());
    k += m->size();
  }
  for (Eigen::VectorXd* v : {&b1, &b2, &b3}) {
    *v = t.segment(k, v->size());
    k += v->size();
  }
  if (k != t.size()) throw DimensionError("PinnNet::unflatten: parameter count mismatch");
}

bool PinnNet::finite() const { return flatten().allFinite(); }

void write_pinn(const PinnNet& net, std::ostream& out) {
  const auto old = out.precision(17);
  auto dump = [&](const char* name, const Eigen::MatrixXd& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  };
  dump("w1", net.w1);
  dump("b1", net.b1);
  dump("w2", net.w2);
  dump("b2", net.b2);
  dump("w3", net.w3);
  dump("b3", net.b3);
  out.precision(old);
}

// PINN losses

namespace {

// Output row of the reduced coordinate (i, a), a below the last action.
int reduced_row(const Game& g, int i, int a) { return g.index(i, a) - i; }

Eigen::VectorXd dirichlet_ones(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v(k) = e(rng);
  return v / v.sum();
}

}  // namespace

PinnProblem::PinnProblem(const TrajectoryDataset& data, const Game& g, const PinnLossWeights& weights,
                         std::mt19937_64& rng)
    : game_(g), weights_(weights), reduced_(reduced_indices(g)) {
  if (data.size() == 0) throw std::invalid_argument("PinnProblem: empty dataset");
  if (weights.data < 0 || weights.rfi < 0 || weights.pc < 0) throw std::invalid_argument("PinnProblem: negative weight");
  if (weights.points_per_set < 1) throw std::invalid_argument("PinnProblem: points_per_set must be >= 1");
  const int nr = static_cast<int>(reduced_.size()), nw = g.controls();
  const auto n = static_cast<Eigen::Index>(data.size());
  z_data_.resize(nr + nw, n);
  y_data_.resize(nr, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int r = 0; r < nr; ++r) {
      z_data_(r, k) = data.x[k](reduced_[r]);
      y_data_(r, k) = data.xdot[k](reduced_[r]);
    }
    z_data_.block(nr, k, nw, 1) = data.w[k];
  }

  for (int i = 0; i < g.players(); ++i)
    for (int a = 0; a < g.actions(i); ++a) faces_.push_back(make_face(i, a, weights.points_per_set, rng));

  const int m = weights.points_per_set;
  z_pc_.resize(nr + nw, m);
  grad_u_pc_.resize(nr, m);
  for (int k = 0; k < m; ++k) {
    const Eigen::VectorXd x = sample_profile(g, rng);
    const Eigen::VectorXd w = sample_control(g, rng);
    for (int r = 0; r < nr; ++r) z_pc_(r, k) = x(reduced_[r]);
    z_pc_.block(nr, k, nw, 1) = w;
    for (int i = 0; i < g.players(); ++i) {
      const Eigen::VectorXd v = action_utilities(g, i, x, w);
      const int last = g.actions(i) - 1;
      for (int a = 0; a < last; ++a) grad_u_pc_(reduced_row(g, i, a), k) = v(a) - v(last);
    }
  }
}

PinnProblem::FaceSet PinnProblem::make_face(int i, int a, int n, std::mt19937_64& rng) const {
  const int nr = static_cast<int>(reduced_.size()), nw = game_.controls();
  FaceSet f{Eigen::MatrixXd(nr + nw, n), i, a};
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd x = sample_profile(game_, rng);
    const int m = game_.actions(i);
    const Eigen::VectorXd rest = dirichlet_ones(m - 1, rng);
    for (int b = 0, j = 0; b < m; ++b) x(game_.index(i, b)) = b == a ? 0.0 : rest(j++);
    for (int r = 0; r < nr; ++r) f.z(r, k) = x(reduced_[r]);
    f.z.block(nr, k, nw, 1) = sample_control(game_, rng);
  }
  return f;
}

double PinnProblem::face_term(const FaceSet& f, const Eigen::MatrixXd& p, Eigen::MatrixXd* gp) const {
  // velocity of x_{i,a} on its own zero face must be >= 0
  const int last = game_.actions(f.player) - 1;
  const double inv = 1.0 / static_cast<double>(p.cols());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    double q = 0.0;
    if (f.action < last) {
      q = p(reduced_row(game_, f.player, f.action), k);
    } else {
      for (int b = 0; b < last; ++b) q -= p(reduced_row(game_, f.player, b), k);
    }
    if (q >= 0.0) continue;
    sum -= q;
    if (!gp) continue;
    if (f.action < last) {
      (*gp)(reduced_row(game_, f.player, f.action), k) -= inv;
    } else {
      for (int b = 0; b < last; ++b) (*gp)(reduced_row(game_, f.player, b), k) += inv;
    }
  }
  return sum * inv;
}

namespace {

// Accumulates the parameter gradient of sum_k gp(:,k) . net(z(:,k)).
void backprop(const PinnNet& net, const Eigen::MatrixXd& z, const Eigen::MatrixXd& gp, PinnNet& grad) {
  const Eigen::MatrixXd h1 = ((net.w1 * z).colwise() + net.b1).array().tanh().matrix();
  const Eigen::MatrixXd h2 = ((net.w2 * h1).colwise() + net.b2).array().tanh().matrix();
  grad.w3 += gp * h2.transpose();
  grad.b3 += gp.rowwise().sum();
  const Eigen::MatrixXd d2 = ((net.w3.transpose() * gp).array() * (1.0 - h2.array().square())).matrix();
  grad.w2 += d2 * h1.transpose();
  grad.b2 += d2.rowwise().sum();
  const Eigen::MatrixXd d1 = ((net.w2.transpose() * d2).array() * (1.0 - h1.array().square())).matrix();
  grad.w1 += d1 * z.transpose();
  grad.b1 += d1.rowwise().sum();
}

}  // namespace

PinnLosses PinnProblem::loss(const PinnNet& net, PinnNet* grad) const {
  if (net.inputs() != inputs() || net.outputs() != outputs()) throw DimensionError("PinnProblem: network shape mismatch");
  PinnLosses l;
  if (grad) *grad = PinnNet::zeros_like(net);

  const Eigen::MatrixXd p = net.forward(z_data_);
  const Eigen::MatrixXd e = p - y_data_;
  const double inv_n = 1.0 / static_cast<double>(e.cols());
  l.data = e.squaredNorm() * inv_n;
  if (grad && weights_.data > 0) backprop(net, z_data_, 2.0 * weights_.data * inv_n * e, *grad);

  for (const auto& f : faces_) {
    const Eigen::MatrixXd pf = net.forward(f.z);
    Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(pf.rows(), pf.cols());
    l.rfi += face_term(f, pf, grad ? &gp : nullptr);
    if (grad && weights_.rfi > 0) backprop(net, f.z, weights_.rfi * gp, *grad);
  }

  const Eigen::MatrixXd pp = net.forward(z_pc_);
  Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(pp.rows(), pp.cols());
  const double inv = 1.0 / static_cast<double>(pp.cols());
  for (Eigen::Index k = 0; k < pp.cols(); ++k)
    for (int i = 0; i < game_.players(); ++i) {
      const int last = game_.actions(i) - 1;
      double s = 0.0;
      for (int a = 0; a < last; ++a) s += grad_u_pc_(reduced_row(game_, i, a), k) * pp(reduced_row(game_, i, a), k);
      if (s >= 0.0) continue;
      l.pc -= s * inv;
      for (int a = 0; a < last; ++a) gp(reduced_row(game_, i, a), k) -= grad_u_pc_(reduced_row(game_, i, a), k) * inv;
    }
  if (grad && weights_.pc > 0) backprop(net, z_pc_, weights_.pc * gp, *grad);

  l.total = weights_.data * l.data + weights_.rfi * l.rfi + weights_.pc * l.pc;
  return l;
}

double PinnProblem::rfi_hinge(const PinnNet& net, std::mt19937_64& rng, int per_face) const {
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < game_.players(); ++i)
    for (int a = 0; a < game_.actions(i); ++a) {
      const FaceSet f = make_face(i, a, per_face, rng);
      sum += face_term(f, net.forward(f.z), nullptr);
      ++count;
    }
  return sum / count;
}

// PINN model and training

PinnModel::PinnModel(const Game& g, PinnNet net) : game_(g), net_(std::move(net)) {
  if (net_.inputs() != static_cast<int>(reduced_indices(g).size()) + g.controls())
    throw DimensionError("PinnModel: network input size mismatch");
}

Eigen::VectorXd PinnModel::velocity(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  if (x.size() != game_.state_dim() || w.size() != game_.controls())
    throw DimensionError("PinnModel: input dimension mismatch");
  const Eigen::VectorXd r = reduce(game_, x);
  Eigen::VectorXd z(r.size() + w.size());
  z << r, w;
  return lift_velocity(game_, net_.forward(z).col(0));
}

PinnFit pinn_fit(const TrajectoryDataset& data, const Game& g, const PinnConfig& cfg, std::mt19937_64& rng) {
  if (cfg.epochs < 0 || !(cfg.step > 0.0)) throw std::invalid_argument("pinn_fit: bad optimizer settings");
  const PinnProblem prob(data, g, cfg.weights, rng);
  PinnNet net = PinnNet::random(prob.inputs(), prob.outputs(), rng);
  PinnNet grad;
  PinnFit fit;
  const int every = std::max(1, cfg.history_every);
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const PinnLosses l = prob.loss(net, epoch < cfg.epochs ? &grad : nullptr);
    if (!std::isfinite(l.total) || !net.finite()) {
      std::ostringstream msg;
      msg << "pinn_fit: loss diverged at epoch " << epoch << " (data " << l.data << ", rfi " << l.rfi << ", pc "
          << l.pc << ")";
      throw std::runtime_error(msg.str());
    }
    if (epoch == 0) fit.initial = l;
    if (epoch % every == 0 || epoch == cfg.epochs) fit.history.push_back(l);
    if (epoch == cfg.epochs) break;
    net.unflatten(net.flatten() - cfg.step * grad.flatten());
  }
  fit.model = std::make_shared<PinnModel>(g, std::move(net));
  return fit;
}

}  // namespace gamesteer
