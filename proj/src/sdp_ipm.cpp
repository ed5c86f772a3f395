#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sdp_internal.hpp"

namespace gamesteer {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

using SpMat = Eigen::SparseMatrix<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A_i restricted to one block is sum_e w_e (E_pq + E_qp) over its entries.
struct Entry {
  int row;    // global row
  int local;  // row index inside the row group
  int p, q;   // p >= q
  double w;
};

struct Block {
  int n = 0;
  int offset = 0;  // start inside the vectorization
  int group = -1;
  std::vector<Entry> entries;  // sorted by row
};

// Rows coupled through shared blocks; an independent dense Schur block.
struct RowGroup {
  std::vector<int> rows;
  std::vector<int> blocks;
  std::vector<int> free_cols;
  Mat b;  // rows x free_cols, scaled A restricted to free columns
  Mat m;  // Schur block
  Eigen::LLT<Mat> chol;
};

int find(std::vector<int>& parent, int i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Largest step a with X + a D PSD, given the Cholesky factor of X.
double max_step(const Eigen::LLT<Mat>& lx, const Mat& d) {
  if (d.rows() == 1) return d(0, 0) < 0 ? -lx.matrixLLT()(0, 0) * lx.matrixLLT()(0, 0) / d(0, 0) : 1e300;
  const auto l = lx.matrixL();
  Mat t = l.solve(d);
  const Mat u = l.solve(t.transpose());
  t = u.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : 1e300;
}

class InteriorPoint {
 public:
  InteriorPoint(const SdpProblem& prob, const SdpOptions& opts) : prob_(prob), opts_(opts) { setup(); }

  SdpSolution run();

 private:
  void setup();
  Vec apply_a(const std::vector<Mat>& y, const Vec& yf) const;       // A z for blocks + free part
  void apply_at(const Vec& y, std::vector<Mat>& out, Vec& free) const;  // A' y
  bool factor();
  void solve_kkt(const Vec& h, const Vec& rdf, Vec& dy, Vec& dxf) const;
  void direction(const std::vector<Mat>& t, const Vec& rp, const std::vector<Mat>& rd, const Vec& rdf,
                 std::vector<Mat>& dx, Vec& dxf, Vec& dy, std::vector<Mat>& ds);

  const SdpProblem& prob_;
  const SdpOptions& opts_;
  int m_ = 0, nf_ = 0, nbar_ = 0;
  Vec scale_;  // row scaling
  Vec bs_;
  std::vector<Block> blocks_;
  std::vector<Mat> cblk_;
  Vec cf_;
  SpMat bfree_;  // scaled A restricted to free columns, m x nf
  std::vector<RowGroup> groups_;
  std::vector<int> free_rows_;  // active rows without block entries
  std::vector<bool> active_;

  // iterate
  std::vector<Mat> x_, s_, w_;
  std::vector<Eigen::LLT<Mat>> lx_, ls_;
  Vec xf_, y_;
  Eigen::PartialPivLU<Mat> saddle_;
};

void InteriorPoint::setup() {
  prob_.validate();
  m_ = prob_.rows;
  nf_ = prob_.free_dim;
  const int n = prob_.vec_dim();
  SpMat a(m_, n);
  a.setFromTriplets(prob_.a.begin(), prob_.a.end());
  a.makeCompressed();

  scale_ = Vec::Zero(m_);
  {
    Vec sq = Vec::Zero(m_);
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it) sq(it.row()) += it.value() * it.value();
    active_.assign(m_, false);
    for (int i = 0; i < m_; ++i) {
      if (sq(i) == 0.0) {
        if (prob_.b(i) != 0.0) throw std::invalid_argument("sdp: empty constraint row with nonzero rhs");
      } else {
        scale_(i) = 1.0 / std::sqrt(sq(i));
        active_[i] = true;
      }
    }
  }
  bs_ = scale_.cwiseProduct(prob_.b);

  // column -> (block, p, q)
  const int nb = static_cast<int>(prob_.blocks.size());
  std::vector<int> col_block(n, -1), col_p(n), col_q(n);
  int off = 0;
  for (int k = 0; k < nb; ++k) {
    Block blk;
    blk.n = prob_.blocks[k];
    blk.offset = off;
    nbar_ += blk.n;
    int idx = off;
    for (int j = 0; j < blk.n; ++j)
      for (int i = j; i < blk.n; ++i) {
        col_block[idx] = k;
        col_p[idx] = i;
        col_q[idx] = j;
        ++idx;
      }
    off = idx;
    blocks_.push_back(std::move(blk));
  }
  const int f0 = off;

  std::vector<Eigen::Triplet<double>> bt;
  std::vector<bool> has_block(m_, false);
  for (int col = 0; col < n; ++col)
    for (SpMat::InnerIterator it(a, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      const double v = it.value() * scale_(r);
      if (v == 0.0) continue;
      if (col >= f0) {
        bt.emplace_back(r, col - f0, v);
        continue;
      }
      const int k = col_block[col];
      const int p = col_p[col], q = col_q[col];
      blocks_[k].entries.push_back({r, -1, p, q, p == q ? 0.5 * v : v / kSqrt2});
      has_block[r] = true;
    }
  bfree_.resize(m_, nf_);
  bfree_.setFromTriplets(bt.begin(), bt.end());
  bfree_.makeCompressed();

  // row groups
  std::vector<int> parent(m_);
  std::iota(parent.begin(), parent.end(), 0);
  for (auto& blk : blocks_) {
    std::sort(blk.entries.begin(), blk.entries.end(),
              [](const Entry& x, const Entry& y) { return x.row < y.row; });
    for (std::size_t e = 1; e < blk.entries.size(); ++e) {
      const int ra = find(parent, blk.entries[0].row), rb = find(parent, blk.entries[e].row);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::vector<int> group_of_root(m_, -1), local(m_, -1), group_of(m_, -1);
  for (int r = 0; r < m_; ++r) {
    if (!active_[r]) continue;
    if (!has_block[r]) {
      free_rows_.push_back(r);
      continue;
    }
    const int root = find(parent, r);
    if (group_of_root[root] < 0) {
      group_of_root[root] = static_cast<int>(groups_.size());
      groups_.emplace_back();
    }
    RowGroup& g = groups_[group_of_root[root]];
    group_of[r] = group_of_root[root];
    local[r] = static_cast<int>(g.rows.size());
    g.rows.push_back(r);
  }
  for (int k = 0; k < nb; ++k) {
    Block& blk = blocks_[k];
    if (blk.entries.empty()) continue;
    blk.group = group_of[blk.entries[0].row];
    groups_[blk.group].blocks.push_back(k);
    for (auto& e : blk.entries) e.local = local[e.row];
  }
  SpMat bt_rows = bfree_.transpose();  // nf x m, column r lists free entries of row r
  for (auto& g : groups_) {
    std::vector<int> cols;
    for (int r : g.rows)
      for (SpMat::InnerIterator it(bt_rows, r); it; ++it) cols.push_back(static_cast<int>(it.row()));
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    g.free_cols = cols;
    std::vector<int> pos(nf_, -1);
    for (std::size_t c = 0; c < cols.size(); ++c) pos[cols[c]] = static_cast<int>(c);
    g.b = Mat::Zero(static_cast<Eigen::Index>(g.rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t li = 0; li < g.rows.size(); ++li)
      for (SpMat::InnerIterator it(bt_rows, g.rows[li]); it; ++it) g.b(static_cast<Eigen::Index>(li), pos[it.row()]) = it.value();
  }

  cblk_.resize(nb);
  for (int k = 0; k < nb; ++k) cblk_[k] = smat(prob_.c.segment(blocks_[k].offset, svec_size(blocks_[k].n)), blocks_[k].n);
  cf_ = prob_.c.segment(f0, nf_);
}

Vec InteriorPoint::apply_a(const std::vector<Mat>& y, const Vec& yf) const {
  Vec out = Vec::Zero(m_);
  for (std::size_t k = 0; k < blocks_.size(); ++k)
    for (const Entry& e : blocks_[k].entries) out(e.row) += 2.0 * e.w * y[k](e.p, e.q);
  if (nf_ > 0) out += bfree_ * yf;
  return out;
}

void InteriorPoint::apply_at(const Vec& y, std::vector<Mat>& out, Vec& free) const {
  out.resize(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    Mat& o = out[k];
    o.setZero(blocks_[k].n, blocks_[k].n);
    for (const Entry& e : blocks_[k].entries) {
      o(e.p, e.q) += e.w * y(e.row);
      o(e.q, e.p) += e.w * y(e.row);
    }
  }
  free = nf_ > 0 ? Vec(bfree_.transpose() * y) : Vec();
}

bool InteriorPoint::factor() {
  // Schur complement M_ij = tr(A_i X A_j W) per row group
  for (auto& g : groups_) {
    const int r = static_cast<int>(g.rows.size());
    Mat mg = Mat::Zero(r, r);
    for (int k : g.blocks) {
      const Block& blk = blocks_[k];
      const Mat& x = x_[k];
      const Mat& w = w_[k];
      const auto& en = blk.entries;
      for (std::size_t a = 0; a < en.size(); ++a) {
        const Entry& e = en[a];
        const int p = e.p, q = e.q;
        for (std::size_t b = a; b < en.size(); ++b) {
          const Entry& f = en[b];
          const int rr = f.p, s = f.q;
          const double v = e.w * f.w * (x(q, rr) * w(s, p) + x(q, s) * w(rr, p) + x(p, rr) * w(s, q) + x(p, s) * w(rr, q));
          if (e.local == f.local)
            mg(e.local, e.local) += (a == b) ? v : 2.0 * v;
          else
            mg(e.local, f.local) += v;
        }
      }
    }
    mg.triangularView<Eigen::StrictlyLower>() = mg.transpose().triangularView<Eigen::StrictlyLower>();
    double reg = 0.0;
    const double dmax = std::max(1.0, mg.diagonal().maxCoeff());
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (reg > 0) mg.diagonal().array() += reg;
      g.chol.compute(mg);
      if (g.chol.info() == Eigen::Success) break;
      if (reg > 0) mg.diagonal().array() -= reg;
      reg = reg == 0.0 ? 1e-14 * dmax : reg * 100.0;
    }
    if (g.chol.info() != Eigen::Success) return false;
    if (reg > 0) mg.diagonal().array() -= reg;
    g.m = std::move(mg);
  }

  // saddle system in (dxf, -dy0)
  const int n0 = static_cast<int>(free_rows_.size());
  Mat kkt = Mat::Zero(nf_ + n0, nf_ + n0);
  for (auto& g : groups_) {
    if (g.free_cols.empty()) continue;
    const Mat y = g.chol.matrixL().solve(g.b);
    const Mat sg = y.transpose() * y;
    for (std::size_t i = 0; i < g.free_cols.size(); ++i)
      for (std::size_t j = 0; j < g.free_cols.size(); ++j)
        kkt(g.free_cols[i], g.free_cols[j]) += sg(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  if (nf_ + n0 == 0) return true;
  const double dmax = nf_ > 0 ? std::max(1.0, kkt.diagonal().head(nf_).cwiseAbs().maxCoeff()) : 1.0;
  for (int i = 0; i < nf_; ++i) kkt(i, i) += 1e-15 * dmax;
  const SpMat bt_rows = bfree_.transpose();
  for (int k = 0; k < n0; ++k) {
    for (SpMat::InnerIterator it(bt_rows, free_rows_[k]); it; ++it) {
      kkt(nf_ + k, it.row()) = it.value();
      kkt(it.row(), nf_ + k) = it.value();
    }
    kkt(nf_ + k, nf_ + k) = -1e-14;
  }
  saddle_.compute(kkt);
  return true;
}

// One pass of the block elimination for
//   [M B; B' 0] [dy; dxf] = [h; rdf]
// where rows without block entries have a zero M part.
void InteriorPoint::solve_kkt(const Vec& h, const Vec& rdf, Vec& dy, Vec& dxf) const {
  const int n0 = static_cast<int>(free_rows_.size());
  Vec rhs = Vec::Zero(nf_ + n0);
  std::vector<Vec> hv(groups_.size());
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const RowGroup& g = groups_[gi];
    Vec hg(static_cast<Eigen::Index>(g.rows.size()));
    for (std::size_t li = 0; li < g.rows.size(); ++li) hg(static_cast<Eigen::Index>(li)) = h(g.rows[li]);
    hv[gi] = hg;
    if (g.free_cols.empty()) continue;
    const Vec v = g.b.transpose() * g.chol.solve(hg);
    for (std::size_t c = 0; c < g.free_cols.size(); ++c) rhs(g.free_cols[c]) += v(static_cast<Eigen::Index>(c));
  }
  if (nf_ > 0) rhs.head(nf_) -= rdf;
  for (int k = 0; k < n0; ++k) rhs(nf_ + k) = h(free_rows_[k]);
  Vec sol = nf_ + n0 > 0 ? Vec(saddle_.solve(rhs)) : Vec();
  dxf = sol.head(nf_);
  dy = Vec::Zero(m_);
  for (int k = 0; k < n0; ++k) dy(free_rows_[k]) = -sol(nf_ + k);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const RowGroup& g = groups_[gi];
    Vec hg = hv[gi];
    if (!g.free_cols.empty()) {
      Vec d(static_cast<Eigen::Index>(g.free_cols.size()));
      for (std::size_t c = 0; c < g.free_cols.size(); ++c) d(static_cast<Eigen::Index>(c)) = dxf(g.free_cols[c]);
      hg -= g.b * d;
    }
    const Vec v = g.chol.solve(hg);
    for (std::size_t li = 0; li < g.rows.size(); ++li) dy(g.rows[li]) = v(static_cast<Eigen::Index>(li));
  }
}

void InteriorPoint::direction(const std::vector<Mat>& t, const Vec& rp, const std::vector<Mat>& rd, const Vec& rdf,
                              std::vector<Mat>& dx, Vec& dxf, Vec& dy, std::vector<Mat>& ds) {
  const Vec h = rp - apply_a(t, Vec::Zero(nf_));
  solve_kkt(h, rdf, dy, dxf);
  // iterative refinement against the unregularized system
  for (int pass = 0; pass < 4; ++pass) {
    Vec r1 = h - (nf_ > 0 ? Vec(bfree_ * dxf) : Vec::Zero(m_));
    for (const auto& g : groups_) {
      Vec yg(static_cast<Eigen::Index>(g.rows.size()));
      for (std::size_t li = 0; li < g.rows.size(); ++li) yg(static_cast<Eigen::Index>(li)) = dy(g.rows[li]);
      const Vec my = g.m * yg;
      for (std::size_t li = 0; li < g.rows.size(); ++li) r1(g.rows[li]) -= my(static_cast<Eigen::Index>(li));
    }
    for (int i = 0; i < m_; ++i)
      if (!active_[i]) r1(i) = 0.0;
    const Vec r2 = nf_ > 0 ? Vec(rdf - bfree_.transpose() * dy) : Vec();
    Vec cy, cx;
    solve_kkt(r1, r2, cy, cx);
    dy += cy;
    dxf += cx;
  }
  std::vector<Mat> aty;
  Vec unused;
  apply_at(dy, aty, unused);
  dx.resize(blocks_.size());
  ds.resize(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    ds[k] = rd[k] - aty[k];
    dx[k] = t[k] + sym(x_[k] * aty[k] * w_[k]);
  }
}

SdpSolution InteriorPoint::run() {
  const int nb = static_cast<int>(blocks_.size());
  const double nb_norm = prob_.b.norm(), nc_norm = prob_.c.norm();
  const double bmax = bs_.size() > 0 ? bs_.cwiseAbs().maxCoeff() : 0.0;
  x_.resize(nb);
  s_.resize(nb);
  w_.resize(nb);
  lx_.resize(nb);
  ls_.resize(nb);
  for (int k = 0; k < nb; ++k) {
    const int n = blocks_[k].n;
    const double xi = std::max({10.0, std::sqrt(static_cast<double>(n)), n * (1.0 + bmax)});
    const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), cblk_[k].norm()});
    x_[k] = xi * Mat::Identity(n, n);
    s_[k] = eta * Mat::Identity(n, n);
  }
  xf_ = Vec::Zero(nf_);
  y_ = Vec::Zero(m_);

  SdpSolution sol;
  sol.status = SdpStatus::MaxIters;
  int iter = 0;
  double best_pres = std::numeric_limits<double>::infinity();
  int stall = 0;
  double best_worst = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  std::vector<Mat> best_x = x_;
  Vec best_xf = xf_, best_y = y_;
  for (iter = 0; iter <= opts_.ipm_max_iters; ++iter) {
    // residuals in the scaled problem
    const Vec rp = bs_ - apply_a(x_, xf_);
    std::vector<Mat> aty;
    Vec atyf;
    apply_at(y_, aty, atyf);
    std::vector<Mat> rd(nb);
    double dres2 = 0.0, pobj = 0.0, gapxs = 0.0;
    for (int k = 0; k < nb; ++k) {
      rd[k] = cblk_[k] - aty[k] - s_[k];
      dres2 += rd[k].squaredNorm();
      pobj += (cblk_[k].array() * x_[k].array()).sum();
      gapxs += (x_[k].array() * s_[k].array()).sum();
    }
    const Vec rdf = nf_ > 0 ? Vec(cf_ - atyf) : Vec();
    if (nf_ > 0) {
      dres2 += rdf.squaredNorm();
      pobj += cf_.dot(xf_);
    }
    const double dobj = bs_.dot(y_);
    Vec rp_unscaled = Vec::Zero(m_);
    for (int i = 0; i < m_; ++i)
      if (active_[i]) rp_unscaled(i) = rp(i) / scale_(i);
    const double pres = rp_unscaled.norm() / (1.0 + nb_norm);
    const double dres = std::sqrt(dres2) / (1.0 + nc_norm);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = nbar_ > 0 ? gapxs / nbar_ : 0.0;
    if (opts_.verbose)
      std::fprintf(stderr, "ipm iter %3d  pres %.3e  dres %.3e  gap %.3e  mu %.3e  pobj %.10e  dobj %.10e\n", iter,
                   pres, dres, gap, mu, pobj, dobj);
    const double worst = std::max({pres, dres, gap});
    if (worst < best_worst) {
      // keep the most accurate iterate; late iterations can lose accuracy
      best_worst = worst;
      best_iter = iter;
      best_x = x_;
      best_xf = xf_;
      best_y = y_;
    }
    if (worst <= opts_.tol) {
      sol.status = SdpStatus::Solved;
      break;
    }
    if (iter == opts_.ipm_max_iters) break;
    if (iter - best_iter >= 8 && mu < 1e-8 * (1.0 + std::abs(pobj))) break;  // stalled near optimality

    // The dual grows without bound along a ray when the primal is infeasible.
    if (iter >= 10 && pres > std::sqrt(opts_.tol) && dobj > 1e8 * (1.0 + std::abs(pobj))) {
      sol.status = SdpStatus::InfeasibleSuspect;
      break;
    }
    if (pres < 0.5 * best_pres) {
      best_pres = pres;
      stall = 0;
    } else if (++stall >= 25 && pres > std::sqrt(opts_.tol)) {
      sol.status = SdpStatus::InfeasibleSuspect;
      break;
    }

    bool ok = true;
    for (int k = 0; k < nb && ok; ++k) {
      lx_[k].compute(x_[k]);
      ls_[k].compute(s_[k]);
      ok = lx_[k].info() == Eigen::Success && ls_[k].info() == Eigen::Success;
      if (ok) w_[k] = ls_[k].solve(Mat::Identity(blocks_[k].n, blocks_[k].n));
    }
    if (!ok || !factor()) break;

    // predictor
    std::vector<Mat> t(nb), dx, ds, dxc, dsc;
    std::vector<Mat> xrdw(nb);
    for (int k = 0; k < nb; ++k) {
      xrdw[k] = sym(x_[k] * rd[k] * w_[k]);
      t[k] = -x_[k] - xrdw[k];
    }
    Vec dxf, dy, dxfc, dyc;
    direction(t, rp, rd, rdf, dx, dxf, dy, ds);
    double ap = 1.0, ad = 1.0;
    for (int k = 0; k < nb; ++k) {
      ap = std::min(ap, max_step(lx_[k], dx[k]));
      ad = std::min(ad, max_step(ls_[k], ds[k]));
    }
    double mu_aff = 0.0;
    for (int k = 0; k < nb; ++k)
      mu_aff += ((x_[k] + ap * dx[k]).array() * (s_[k] + ad * ds[k]).array()).sum();
    mu_aff /= std::max(1, nbar_);
    const double sigma = mu > 0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0) : 0.0;

    // corrector
    for (int k = 0; k < nb; ++k)
      t[k] = sigma * mu * w_[k] - x_[k] - xrdw[k] - sym(dx[k] * ds[k] * w_[k]);
    direction(t, rp, rd, rdf, dxc, dxfc, dyc, dsc);
    ap = 1.0;
    ad = 1.0;
    for (int k = 0; k < nb; ++k) {
      ap = std::min(ap, opts_.ipm_step * max_step(lx_[k], dxc[k]));
      ad = std::min(ad, opts_.ipm_step * max_step(ls_[k], dsc[k]));
    }
    for (int k = 0; k < nb; ++k) {
      x_[k] = sym(x_[k] + ap * dxc[k]);
      s_[k] = sym(s_[k] + ad * dsc[k]);
    }
    if (nf_ > 0) xf_ += ap * dxfc;
    y_ += ad * dyc;
  }

  sol.iterations = std::min(iter, opts_.ipm_max_iters);
  if (sol.status != SdpStatus::InfeasibleSuspect) {
    x_ = best_x;
    xf_ = best_xf;
    y_ = best_y;
  }
  sol.blocks = x_;
  sol.free = xf_;
  sol.dual = scale_.cwiseProduct(y_);
  sol.residuals = residuals(prob_, sol);
  if (sol.status == SdpStatus::Solved && sol.residuals.max() > opts_.tol) sol.status = SdpStatus::MaxIters;
  sol.primal_objective = prob_.c.dot(stack_primal(prob_, sol));
  sol.dual_objective = prob_.b.dot(sol.dual);
  return sol;
}

}  // namespace

SdpSolution solve_interior_point(const SdpProblem& prob, const SdpOptions& opts) {
  InteriorPoint ipm(prob, opts);
  return ipm.run();
}

}  // namespace gamesteer
