#include "gamesteer/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace gamesteer {

Planner::Planner(const VelocityModel& model, const Game& g, MpcConfig cfg)
    : model_(model), game_(g), cfg_(std::move(cfg)), reduced_(reduced_indices(g)) {
  if (cfg_.horizon < 1) throw std::invalid_argument("MpcConfig: horizon must be >= 1");
  if (!(cfg_.dt > 0.0)) throw std::invalid_argument("MpcConfig: dt must be > 0");
  if (cfg_.alpha < 0.0 || cfg_.beta < 0.0) throw std::invalid_argument("MpcConfig: weights must be >= 0");
  if (cfg_.substeps < 1) throw std::invalid_argument("MpcConfig: substeps must be >= 1");
  if (cfg_.target.size() != g.state_dim()) throw std::invalid_argument("MpcConfig: target dimension mismatch");
  for (const auto& b : cfg_.avoid) {
    if (!(b.radius > 0.0)) throw std::invalid_argument("MpcConfig: avoidance radius must be > 0");
    if (b.center.size() != static_cast<Eigen::Index>(reduced_.size()))
      throw std::invalid_argument("MpcConfig: avoidance center must use reduced coordinates");
  }
  bounds_ = cfg_.bounds.empty() ? g.control_bounds() : cfg_.bounds;
  if (static_cast<int>(bounds_.size()) != g.controls()) throw std::invalid_argument("MpcConfig: bounds size mismatch");
  for (const auto& [lo, hi] : bounds_)
    if (lo > hi) throw std::invalid_argument("MpcConfig: empty control interval");
}

void Planner::project(ControlSequence& w) const {
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    w.row(r) = w.row(r).cwiseMax(bounds_[r].first).cwiseMin(bounds_[r].second);
}

Eigen::MatrixXd Planner::rollout(const Eigen::VectorXd& x0, const ControlSequence& w) const {
  Eigen::MatrixXd xs(x0.size(), w.cols() + 1);
  xs.col(0) = x0;
  for (Eigen::Index n = 0; n < w.cols(); ++n) xs.col(n + 1) = xs.col(n) + cfg_.dt * model_.velocity(xs.col(n), w.col(n));
  return xs;
}

double Planner::objective(const Eigen::VectorXd& x0, const ControlSequence& w, const Eigen::VectorXd& w_prev,
                          ControlSequence* grad) const {
  const int n_steps = static_cast<int>(w.cols());
  const Eigen::MatrixXd xs = rollout(x0, w);

  double f = 0.0;
  // d stage cost / d x_n for n = 1..N
  Eigen::MatrixXd lx = Eigen::MatrixXd::Zero(xs.rows(), n_steps + 1);
  for (int n = 1; n <= n_steps; ++n) {
    const Eigen::VectorXd e = xs.col(n) - cfg_.target;
    f += e.squaredNorm();
    lx.col(n) = 2.0 * e;
    for (const auto& b : cfg_.avoid) {
      Eigen::VectorXd d(reduced_.size());
      for (std::size_t k = 0; k < reduced_.size(); ++k) d(k) = xs(reduced_[k], n) - b.center(k);
      const double h = b.radius * b.radius - d.squaredNorm();
      if (h <= 0.0) continue;
      f += b.weight * h * h;
      for (std::size_t k = 0; k < reduced_.size(); ++k) lx(reduced_[k], n) += -4.0 * b.weight * h * d(k);
    }
  }
  for (int n = 0; n < n_steps; ++n) {
    const Eigen::VectorXd prev = n == 0 ? w_prev : Eigen::VectorXd(w.col(n - 1));
    f += cfg_.alpha * w.col(n).squaredNorm() + cfg_.beta * (w.col(n) - prev).squaredNorm();
  }
  if (!grad) return f;

  grad->resize(w.rows(), w.cols());
  Eigen::VectorXd lambda = lx.col(n_steps);  // adjoint of x_{n+1}
  Eigen::MatrixXd jx, jw;
  for (int n = n_steps - 1; n >= 0; --n) {
    model_.jacobians(xs.col(n), w.col(n), jx, jw);
    const Eigen::VectorXd prev = n == 0 ? w_prev : Eigen::VectorXd(w.col(n - 1));
    Eigen::VectorXd g = cfg_.dt * jw.transpose() * lambda + 2.0 * cfg_.alpha * w.col(n) +
                        2.0 * cfg_.beta * (w.col(n) - prev);
    if (n + 1 < n_steps) g -= 2.0 * cfg_.beta * (w.col(n + 1) - w.col(n));
    grad->col(n) = g;
    lambda = lx.col(n) + lambda + cfg_.dt * jx.transpose() * lambda;
  }
  return f;
}

double Planner::descend(const Eigen::VectorXd& x0, const Eigen::VectorXd& w_prev, ControlSequence& w,
                        int* iters) const {
  ControlSequence g;
  double f = objective(x0, w, w_prev, &g);
  double s = cfg_.step;
  int it = 0;
  for (; it < cfg_.iters; ++it) {
    bool accepted = false;
    while (s > 1e-14) {
      ControlSequence cand = w - s * g;
      project(cand);
      const ControlSequence d = cand - w;
      if (d.cwiseAbs().maxCoeff() <= 1e-12) {  // projected stationarity
        *iters += it;
        return f;
      }
      const double fc = objective(x0, cand, w_prev);
      if (fc <= f + (g.array() * d.array()).sum() + d.squaredNorm() / (2.0 * s)) {
        w = std::move(cand);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
    f = objective(x0, w, w_prev, &g);
    s *= 2.0;
  }
  *iters += it;
  return f;
}

Plan Planner::plan(const Eigen::VectorXd& x0, const Eigen::VectorXd& w_prev, const ControlSequence* warm,
                   std::uint64_t stream) const {
  const int q = game_.controls();
  const int n_steps = cfg_.horizon;
  std::vector<ControlSequence> starts;
  Plan best;
  best.objective = std::numeric_limits<double>::infinity();
  best.warm_objective = std::numeric_limits<double>::quiet_NaN();
  if (warm) {
    if (warm->rows() != q || warm->cols() != n_steps) throw std::invalid_argument("plan: warm start shape mismatch");
    starts.push_back(*warm);
    project(starts.back());
    best.warm_objective = objective(x0, starts.back(), w_prev);
  }
  starts.push_back(ControlSequence::Zero(q, n_steps));
  project(starts.back());

  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  for (int r = 0; r < cfg_.restarts; ++r) {
    ControlSequence w(q, n_steps);
    for (int k = 0; k < q; ++k)
      for (int n = 0; n < n_steps; ++n)
        w(k, n) = std::uniform_real_distribution<double>(bounds_[k].first, bounds_[k].second)(rng);
    starts.push_back(std::move(w));
  }

  for (auto& w : starts) {
    const double f = descend(x0, w_prev, w, &best.iterations);
    if (f < best.objective) {
      best.objective = f;
      best.w = w;
    }
  }
  if (best.w.size() == 0) {
    // every rollout left the finite range; hold the control at its bound-projected zero
    best.w = ControlSequence::Zero(q, n_steps);
    project(best.w);
  }
  return best;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Identify: return "identify";
    case Phase::Evaluate: return "evaluate";
    case Phase::Steer: return "steer";
  }
  return "unknown";
}

Phase parse_phase(const std::string& s) {
  if (s == "identify") return Phase::Identify;
  if (s == "evaluate") return Phase::Evaluate;
  if (s == "steer") return Phase::Steer;
  throw std::invalid_argument("unknown phase '" + s + "'");
}

void ClosedLoopLog::append(double time, const Eigen::VectorXd& state, const Eigen::VectorXd& control, Phase ph) {
  t.push_back(time);
  x.push_back(state);
  w.push_back(control);
  phase.push_back(ph);
  predicted.emplace_back();
  objective.push_back(std::numeric_limits<double>::quiet_NaN());
}

void ClosedLoopLog::extend(const ClosedLoopLog& other) {
  if (other.size() == 0) return;
  // the closing row of one phase is the opening row of the next
  if (size() > 0 && t.back() == other.t.front()) {
    t.pop_back();
    x.pop_back();
    w.pop_back();
    phase.pop_back();
    predicted.pop_back();
    objective.pop_back();
  }
  t.insert(t.end(), other.t.begin(), other.t.end());
  x.insert(x.end(), other.x.begin(), other.x.end());
  w.insert(w.end(), other.w.begin(), other.w.end());
  phase.insert(phase.end(), other.phase.begin(), other.phase.end());
  predicted.insert(predicted.end(), other.predicted.begin(), other.predicted.end());
  objective.insert(objective.end(), other.objective.begin(), other.objective.end());
}

ClosedLoopLog run_closed_loop(const VectorField& truth, const VelocityModel& model, const Game& g,
                              const Eigen::VectorXd& x0, const MpcConfig& cfg, double t_total, double t0) {
  g.check_profile(x0);
  const Planner planner(model, g, cfg);
  const int steps = static_cast<int>(std::lround(t_total / cfg.dt));
  const double h = cfg.dt / cfg.substeps;

  ClosedLoopLog log;
  Eigen::VectorXd x = x0;
  ControlSequence w_prev_seq = ControlSequence::Zero(g.controls(), 1);
  planner.project(w_prev_seq);
  Eigen::VectorXd w_prev = w_prev_seq.col(0);
  ControlSequence warm;
  for (int k = 0; k < steps; ++k) {
    const Plan p = planner.plan(x, w_prev, k == 0 ? nullptr : &warm, static_cast<std::uint64_t>(k));
    if (k > 0 && p.objective > p.warm_objective)
      throw std::logic_error("run_closed_loop: plan is worse than its warm start");
    const Eigen::VectorXd w = p.w.col(0);
    log.append(t0 + k * cfg.dt, x, w, Phase::Steer);
    log.predicted.back() = planner.rollout(x, p.w);
    log.objective.back() = p.objective;

    for (int s = 0; s < cfg.substeps; ++s) x = rk4_step(truth, g, x, w, h);
    w_prev = w;
    warm.resize(p.w.rows(), p.w.cols());
    warm.leftCols(p.w.cols() - 1) = p.w.rightCols(p.w.cols() - 1);
    warm.col(p.w.cols() - 1) = p.w.col(p.w.cols() - 1);
  }
  log.append(t0 + steps * cfg.dt, x, w_prev, Phase::Steer);
  return log;
}

double accumulated_cost(const ClosedLoopLog& log) {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < log.size(); ++k)
    if (log.phase[k] == Phase::Steer) c += log.w[k].squaredNorm() * (log.t[k + 1] - log.t[k]);
  return c;
}

void write_log_csv(const ClosedLoopLog& log, const Game& g, std::ostream& out) {
  const SpacePtr s = g.joint_space();
  out << "t,phase";
  for (std::size_t k = 0; k < s->dim(); ++k) out << ',' << s->name(k);
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < log.size(); ++k) {
    out << log.t[k] << ',' << to_string(log.phase[k]);
    for (Eigen::Index c = 0; c < log.x[k].size(); ++c) out << ',' << log.x[k](c);
    for (Eigen::Index c = 0; c < log.w[k].size(); ++c) out << ',' << log.w[k](c);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace gamesteer
