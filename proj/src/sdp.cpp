#include "gamesteer/sdp.hpp"

#include "sdp_internal.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace gamesteer {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

using SpMat = Eigen::SparseMatrix<double>;

}  // namespace

int svec_size(int n) { return n * (n + 1) / 2; }

int svec_index(int n, int i, int j) {
  // column-major lower triangle: column j holds rows j..n-1
  return j * n - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(k++) = (i == j) ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int n) {
  Eigen::MatrixXd m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      const double val = (i == j) ? v(k) : v(k) / kSqrt2;
      m(i, j) = val;
      m(j, i) = val;
      ++k;
    }
  }
  return m;
}

int SdpProblem::vec_dim() const {
  int n = free_dim;
  for (int b : blocks) n += svec_size(b);
  return n;
}

int SdpProblem::block_offset(int k) const {
  int off = 0;
  for (int i = 0; i < k; ++i) off += svec_size(blocks[i]);
  return off;
}

int SdpProblem::free_offset() const { return block_offset(static_cast<int>(blocks.size())); }

void SdpProblem::validate() const {
  for (int bsz : blocks)
    if (bsz <= 0) throw std::invalid_argument("sdp: block dimensions must be positive");
  if (free_dim < 0) throw std::invalid_argument("sdp: negative free dimension");
  if (b.size() != rows) throw std::invalid_argument("sdp: b length differs from row count");
  if (c.size() != vec_dim()) throw std::invalid_argument("sdp: c length differs from vectorization size");
  const int n = vec_dim();
  for (const auto& t : a)
    if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= n)
      throw std::invalid_argument("sdp: triplet index out of range");
}

std::string to_string(SdpMethod m) { return m == SdpMethod::InteriorPoint ? "interior_point" : "admm"; }

SdpMethod parse_sdp_method(const std::string& s) {
  if (s == "interior_point" || s == "ipm") return SdpMethod::InteriorPoint;
  if (s == "admm") return SdpMethod::Admm;
  throw std::invalid_argument("unknown sdp method: " + s);
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Solved: return "solved";
    case SdpStatus::MaxIters: return "max_iters";
    case SdpStatus::InfeasibleSuspect: return "infeasible_suspect";
  }
  return "unknown";
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("project_psd: matrix not square");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("project_psd: eigensolver did not converge");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

// In-place projection of every PSD block of a stacked vector.
class ConeProjector {
 public:
  explicit ConeProjector(const SdpProblem& prob) : blocks_(prob.blocks) {
    int off = 0;
    for (int n : blocks_) {
      offsets_.push_back(off);
      off += svec_size(n);
      work_.emplace_back(n, n);
      solvers_.emplace_back(n);
    }
  }

  void project(Eigen::VectorXd& v) {
    for (std::size_t k = 0; k < blocks_.size(); ++k) project_block(v, k);
  }

  // Negative part norm of each block (Frobenius), summed in quadrature.
  double violation(const Eigen::VectorXd& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const int n = blocks_[k];
      unpack(v, k);
      solvers_[k].compute(work_[k], Eigen::EigenvaluesOnly);
      for (int i = 0; i < n; ++i) {
        const double l = solvers_[k].eigenvalues()(i);
        if (l < 0) s += l * l;
      }
    }
    return std::sqrt(s);
  }

 private:
  void unpack(const Eigen::VectorXd& v, std::size_t k) {
    const int n = blocks_[k];
    Eigen::MatrixXd& m = work_[k];
    int idx = offsets_[k];
    for (int j = 0; j < n; ++j) {
      m(j, j) = v(idx++);
      for (int i = j + 1; i < n; ++i) m(i, j) = v(idx++) / kSqrt2;
    }
  }

  void project_block(Eigen::VectorXd& v, std::size_t k) {
    const int n = blocks_[k];
    if (n == 1) {
      double& x = v(offsets_[k]);
      if (x < 0) x = 0;
      return;
    }
    unpack(v, k);
    Eigen::MatrixXd& m = work_[k];
    auto& es = solvers_[k];
    es.compute(m);  // reads the lower triangle
    if (es.info() != Eigen::Success) throw std::runtime_error("sdp: eigensolver did not converge");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& vecs = es.eigenvectors();
    int neg = 0;
    while (neg < n && lam(neg) < 0) ++neg;
    const int pos = n - neg;
    if (neg == 0) return;  // already PSD
    Eigen::MatrixXd p;
    if (pos == 0) {
      p.setZero(n, n);
    } else if (pos <= neg) {
      const auto vp = vecs.rightCols(pos);
      p.noalias() = vp * lam.tail(pos).asDiagonal() * vp.transpose();
    } else {
      // M_+ = M - V_- L_- V_-'
      const auto vn = vecs.leftCols(neg);
      p = m.selfadjointView<Eigen::Lower>();
      p.noalias() -= vn * lam.head(neg).asDiagonal() * vn.transpose();
    }
    int idx = offsets_[k];
    for (int j = 0; j < n; ++j) {
      v(idx++) = p(j, j);
      for (int i = j + 1; i < n; ++i) v(idx++) = kSqrt2 * p(i, j);
    }
  }

  std::vector<int> blocks_;
  std::vector<int> offsets_;
  std::vector<Eigen::MatrixXd> work_;
  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> solvers_;
};

SpMat build_matrix(const SdpProblem& prob) {
  SpMat a(prob.rows, prob.vec_dim());
  a.setFromTriplets(prob.a.begin(), prob.a.end());
  a.makeCompressed();
  return a;
}

SdpResiduals compute_residuals(const SpMat& a, const SdpProblem& prob, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& y, ConeProjector& cone) {
  SdpResiduals r;
  const double nb = prob.b.norm();
  const double nc = prob.c.norm();
  const double zviol = cone.violation(z);
  r.primal = ((a * z - prob.b).norm() + zviol) / (1.0 + nb);

  Eigen::VectorXd s = prob.c - a.transpose() * y;
  // distance of s from the dual cone (self-dual PSD blocks, {0} for free vars)
  double dviol = cone.violation(s);
  const int f0 = prob.free_offset();
  double free_part = prob.free_dim > 0 ? s.segment(f0, prob.free_dim).squaredNorm() : 0.0;
  r.dual = std::sqrt(dviol * dviol + free_part) / (1.0 + nc);

  const double pobj = prob.c.dot(z);
  const double dobj = prob.b.dot(y);
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

}  // namespace

Eigen::VectorXd stack_primal(const SdpProblem& prob, const SdpSolution& sol) {
  Eigen::VectorXd z(prob.vec_dim());
  int off = 0;
  for (std::size_t k = 0; k < prob.blocks.size(); ++k) {
    const Eigen::VectorXd v = svec(sol.blocks.at(k));
    z.segment(off, v.size()) = v;
    off += static_cast<int>(v.size());
  }
  if (prob.free_dim > 0) z.segment(off, prob.free_dim) = sol.free;
  return z;
}

SdpResiduals residuals(const SdpProblem& prob, const SdpSolution& sol) {
  prob.validate();
  if (sol.blocks.size() != prob.blocks.size() || sol.free.size() != prob.free_dim ||
      sol.dual.size() != prob.rows)
    throw std::invalid_argument("residuals: solution shape does not match problem");
  const SpMat a = build_matrix(prob);
  ConeProjector cone(prob);
  return compute_residuals(a, prob, stack_primal(prob, sol), sol.dual, cone);
}

SdpSolution solve_admm(const SdpProblem& prob, const SdpOptions& opts) {
  prob.validate();
  const int n = prob.vec_dim();
  const int m = prob.rows;
  const SpMat a = build_matrix(prob);
  ConeProjector cone(prob);

  // Row equilibration: unit Euclidean norm per row.
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
  {
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it) sq(it.row()) += it.value() * it.value();
    for (int i = 0; i < m; ++i) {
      if (sq(i) == 0.0) {
        if (prob.b(i) != 0.0) throw std::invalid_argument("sdp: empty constraint row with nonzero rhs");
        row_scale(i) = 0.0;  // row is 0 = 0; dropped from the factorization below
      } else {
        row_scale(i) = 1.0 / std::sqrt(sq(i));
      }
    }
  }
  const SpMat as = row_scale.asDiagonal() * a;
  const Eigen::VectorXd bs = row_scale.cwiseProduct(prob.b);

  SpMat gram = as * as.transpose();
  {
    // Regularize; empty rows get a unit diagonal so the factor stays definite.
    SpMat reg(m, m);
    std::vector<Eigen::Triplet<double>> d;
    d.reserve(m);
    for (int i = 0; i < m; ++i) d.emplace_back(i, i, row_scale(i) == 0.0 ? 1.0 : 1e-11);
    reg.setFromTriplets(d.begin(), d.end());
    gram += reg;
  }
  Eigen::SimplicialLDLT<SpMat> factor;
  if (m > 0) {
    factor.compute(gram);
    if (factor.info() != Eigen::Success) throw std::runtime_error("sdp: factorization of A A' failed");
  }

  const double alpha = opts.relaxation;
  double rho = opts.rho;
  const double nb = prob.b.norm();
  const double nc = prob.c.norm();

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w(n), x(n), mu = Eigen::VectorXd::Zero(m), zprev(n);
  Eigen::VectorXd ys(m);

  SdpSolution sol;
  std::vector<double> pres_history;  // one entry per check
  SdpResiduals last;
  int iter = 0;
  for (iter = 1; iter <= opts.max_iters; ++iter) {
    w = z - u - prob.c / rho;
    if (m > 0) {
      mu = factor.solve(as * w - bs);
      x = w - as.transpose() * mu;
    } else {
      x = w;
    }
    zprev = z;
    w = alpha * x + (1.0 - alpha) * zprev + u;  // reuse w as the pre-projection point
    z = w;
    cone.project(z);
    u = w - z;

    if (iter % opts.check_interval != 0 && iter != opts.max_iters) continue;

    // y = -rho * D mu (unscaled), s = -rho u
    ys = -rho * row_scale.cwiseProduct(mu);
    const double pres = (a * z - prob.b).norm() / (1.0 + nb);
    const double dres = (prob.c - a.transpose() * ys + rho * u).norm() / (1.0 + nc);
    const double pobj = prob.c.dot(z);
    const double dobj = prob.b.dot(ys);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    pres_history.push_back(pres);

    if (opts.verbose && iter % (opts.check_interval * 100) == 0)
      std::fprintf(stderr, "sdp iter %7d  pres %.3e  dres %.3e  gap %.3e  rho %.3e  obj %.8e\n", iter, pres,
                   dres, gap, rho, pobj);

    if (std::max(pres, std::max(dres, gap)) <= opts.tol) {
      last = compute_residuals(a, prob, z, ys, cone);
      if (last.max() <= opts.tol) {
        sol.status = SdpStatus::Solved;
        break;
      }
    }

    const int window_checks = opts.infeasible_window / opts.check_interval;
    if (iter >= opts.infeasible_min_iters && static_cast<int>(pres_history.size()) > window_checks) {
      const double then = pres_history[pres_history.size() - 1 - window_checks];
      if (pres > opts.infeasible_floor && pres > 0.95 * then) {
        sol.status = SdpStatus::InfeasibleSuspect;
        break;
      }
    }

    if (opts.adapt_rho && iter % (opts.check_interval * 5) == 0 && pres > 0 && dres > 0) {
      const double ratio = pres / dres;
      if (ratio > 5.0 || ratio < 0.2) {
        const double factor_rho = std::clamp(std::sqrt(ratio), 0.1, 10.0);
        rho *= factor_rho;
        u /= factor_rho;
      }
    }
  }
  if (iter > opts.max_iters) {
    iter = opts.max_iters;
    sol.status = SdpStatus::MaxIters;
  }
  ys = -rho * row_scale.cwiseProduct(mu);
  sol.iterations = iter;
  sol.dual = ys;
  sol.residuals = compute_residuals(a, prob, z, ys, cone);
  if (sol.status == SdpStatus::Solved && sol.residuals.max() > opts.tol) sol.status = SdpStatus::MaxIters;
  sol.primal_objective = prob.c.dot(z);
  sol.dual_objective = prob.b.dot(ys);
  int off = 0;
  for (int bsz : prob.blocks) {
    sol.blocks.push_back(smat(z.segment(off, svec_size(bsz)), bsz));
    off += svec_size(bsz);
  }
  sol.free = z.segment(off, prob.free_dim);
  return sol;
}

SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts) {
  return opts.method == SdpMethod::InteriorPoint ? solve_interior_point(prob, opts) : solve_admm(prob, opts);
}

void write_problem(const SdpProblem& prob, std::ostream& out) {
  prob.validate();
  out << "blocks " << prob.blocks.size();
  for (int b : prob.blocks) out << ' ' << b;
  out << "\nfree " << prob.free_dim << "\nrows " << prob.rows << '\n';
  char buf[64];
  for (int i = 0; i < prob.rows; ++i)
    if (prob.b(i) != 0.0) {
      std::snprintf(buf, sizeof buf, "%.17g", prob.b(i));
      out << "b " << i << ' ' << buf << '\n';
    }
  for (int i = 0; i < prob.c.size(); ++i)
    if (prob.c(i) != 0.0) {
      std::snprintf(buf, sizeof buf, "%.17g", prob.c(i));
      out << "c " << i << ' ' << buf << '\n';
    }
  for (const auto& t : prob.a) {
    std::snprintf(buf, sizeof buf, "%.17g", t.value());
    out << "a " << t.row() << ' ' << t.col() << ' ' << buf << '\n';
  }
}

}  // namespace gamesteer
