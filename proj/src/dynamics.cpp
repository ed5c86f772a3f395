#include "gamesteer/dynamics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gamesteer {

VectorField replicator(const Game& g) {
  VectorField f;
  f.name = "replicator";
  f.eval = [g](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    Eigen::VectorXd dx(g.state_dim());
    for (int i = 0; i < g.players(); ++i) {
      const Eigen::VectorXd v = action_utilities(g, i, x, w);
      const auto xi = x.segment(g.index(i, 0), g.actions(i));
      const double u = xi.dot(v);
      for (int a = 0; a < g.actions(i); ++a) dx(g.index(i, a)) = xi(a) * (v(a) - u);
    }
    return dx;
  };
  const SpacePtr space = g.joint_space();
  std::vector<Poly> sym(g.state_dim(), Poly(space));
  for (int i = 0; i < g.players(); ++i) {
    const auto v = action_utilities_symbolic(g, i, space);
    Poly u(space);
    for (int a = 0; a < g.actions(i); ++a) u += Poly::variable(space, g.index(i, a)) * v[a];
    for (int a = 0; a < g.actions(i); ++a) sym[g.index(i, a)] = Poly::variable(space, g.index(i, a)) * (v[a] - u);
  }
  f.symbolic = std::move(sym);
  return f;
}

VectorField log_barrier(const Game& g, double floor) {
  VectorField f;
  f.name = "log_barrier";
  f.eval = [g, floor](const Eigen::VectorXd& x_in, const Eigen::VectorXd& w) {
    const Eigen::VectorXd x = x_in.cwiseMax(floor);
    Eigen::VectorXd dx(g.state_dim());
    for (int i = 0; i < g.players(); ++i) {
      const Eigen::VectorXd v = action_utilities(g, i, x, w);
      const Eigen::VectorXd sq = x.segment(g.index(i, 0), g.actions(i)).array().square();
      const double mean = sq.dot(v) / sq.sum();
      for (int a = 0; a < g.actions(i); ++a) dx(g.index(i, a)) = sq(a) * (v(a) - mean);
    }
    return dx;
  };
  return f;
}

VectorField polynomial_field(std::string name, std::vector<Poly> p) {
  VectorField f;
  f.name = std::move(name);
  f.eval = [p](const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
    std::vector<double> z(x.data(), x.data() + x.size());
    z.insert(z.end(), w.data(), w.data() + w.size());
    Eigen::VectorXd dx(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) dx(k) = eval(p[k], z);
    return dx;
  };
  f.symbolic = std::move(p);
  return f;
}

bool project_to_simplex(const Game& g, Eigen::VectorXd& x) {
  bool changed = false;
  for (int i = 0; i < g.players(); ++i) {
    auto xi = x.segment(g.index(i, 0), g.actions(i));
    if (!xi.allFinite()) throw std::runtime_error("integration produced a non-finite state");
    if (xi.minCoeff() < -1e-6 || std::abs(xi.sum() - 1.0) > 1e-6)
      throw std::runtime_error("state left the simplex by more than 1e-6");
    if (xi.minCoeff() < 0.0) {
      xi = xi.cwiseMax(0.0);
      changed = true;
    }
    const double s = xi.sum();
    if (std::abs(s - 1.0) > 1e-12) {
      xi /= s;
      changed = true;
    }
  }
  return changed;
}

Eigen::VectorXd rk4_step(const VectorField& f, const Game& g, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                         double dt, int* renormalized) {
  const Eigen::VectorXd k1 = f(x, w);
  const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1, w);
  const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2, w);
  const Eigen::VectorXd k4 = f(x + dt * k3, w);
  Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (project_to_simplex(g, next) && renormalized) ++*renormalized;
  return next;
}

Trajectory integrate(const VectorField& f, const Game& g, const Eigen::VectorXd& x0, const ControlFn& control,
                     double dt, double t_end) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  g.check_profile(x0);
  Trajectory tr;
  const long steps = std::lround(t_end / dt);
  Eigen::VectorXd x = x0;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::VectorXd w = control(t);
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.w.push_back(w);
    if (k < steps) x = rk4_step(f, g, x, w, dt, &tr.renormalizations);
  }
  return tr;
}

std::string to_string(VelocityMode m) { return m == VelocityMode::Measured ? "measured" : "finite_difference"; }

VelocityMode parse_velocity_mode(const std::string& s) {
  if (s == "measured") return VelocityMode::Measured;
  if (s == "finite_difference" || s == "fd") return VelocityMode::FiniteDifference;
  throw std::invalid_argument("unknown velocity mode: " + s);
}

TrajectoryDataset collect_dataset(const VectorField& f, const Game& g, const Eigen::VectorXd& x0,
                                  const CollectOptions& opts, std::mt19937_64& rng) {
  if (opts.k < 1) throw std::invalid_argument("collect_dataset: K must be at least 1");
  if (!(opts.dt_sample > 0.0) || !(opts.dt_integrate > 0.0))
    throw std::invalid_argument("collect_dataset: step sizes must be positive");
  g.check_profile(x0);
  std::vector<double> sigma = opts.sigma;
  if (sigma.empty())
    for (const auto& [lo, hi] : g.control_bounds()) sigma.push_back(0.1 * (hi - lo));
  if (static_cast<int>(sigma.size()) != g.controls()) throw std::invalid_argument("collect_dataset: sigma length");

  // Integration steps per half hold; dt is adjusted so holds align with steps.
  const long half = std::max(1L, std::lround(0.5 * opts.dt_sample / opts.dt_integrate));
  const double dt = 0.5 * opts.dt_sample / static_cast<double>(half);

  std::normal_distribution<double> normal(0.0, 1.0);
  TrajectoryDataset ds;
  Eigen::VectorXd x = x0;
  double t = 0.0;
  for (int k = 0; k < opts.k; ++k) {
    Eigen::VectorXd w(g.controls());
    for (int c = 0; c < g.controls(); ++c) w(c) = sigma[c] * normal(rng);
    w = g.clamp_control(w);

    const Eigen::VectorXd x_start = x;
    for (long s = 0; s < 2 * half; ++s) {
      if (s == half) {
        ds.t.push_back(t);
        ds.x.push_back(x);
        ds.w.push_back(w);
      }
      ds.path.t.push_back(t);
      ds.path.x.push_back(x);
      ds.path.w.push_back(w);
      x = rk4_step(f, g, x, w, dt, &ds.path.renormalizations);
      t = static_cast<double>(k * 2 * half + s + 1) * dt;
    }
    if (opts.mode == VelocityMode::Measured)
      ds.xdot.push_back(f(ds.x.back(), w));
    else
      ds.xdot.push_back((x - x_start) / opts.dt_sample);
    ds.provenance.push_back(opts.mode);
  }
  ds.path.t.push_back(t);
  ds.path.x.push_back(x);
  ds.path.w.push_back(ds.w.back());
  return ds;
}

Eigen::VectorXd sample_profile(const Game& g, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd x(g.state_dim());
  for (int i = 0; i < g.players(); ++i) {
    double s = 0.0;
    for (int a = 0; a < g.actions(i); ++a) s += (x(g.index(i, a)) = e(rng));
    x.segment(g.index(i, 0), g.actions(i)) /= s;
  }
  return x;
}

Eigen::VectorXd sample_control(const Game& g, std::mt19937_64& rng) {
  Eigen::VectorXd w(g.controls());
  for (int c = 0; c < g.controls(); ++c) {
    std::uniform_real_distribution<double> u(g.control_bounds()[c].first, g.control_bounds()[c].second);
    w(c) = u(rng);
  }
  return w;
}

double recurrence_distance(const VectorField& f, const Game& g, const Eigen::VectorXd& x0, double dt, double t_end,
                           double leave_radius) {
  g.check_profile(x0);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(g.controls());
  Eigen::VectorXd x = x0;
  bool left = false;
  double best = std::numeric_limits<double>::infinity();
  const long steps = std::lround(t_end / dt);
  for (long k = 0; k < steps; ++k) {
    x = rk4_step(f, g, x, w, dt);
    const double d = (x - x0).norm();
    if (!left && d > leave_radius) left = true;
    if (left) best = std::min(best, d);
  }
  return best;
}

}  // namespace gamesteer
