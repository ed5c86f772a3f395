#include "gamesteer/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gamesteer {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

long long to_integer(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t to_unsigned(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || end != t.data() + t.size() || t.empty())
    throw std::invalid_argument("expected an unsigned integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<double> to_list(const std::string& s, char sep = ',') {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(to_double(item));
  return out;
}

std::string join(const std::vector<double>& v, char sep = ',') {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += sep;
    out += fmt(v[k]);
  }
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Field {
  std::string key;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, const std::string&)> set;
};

#define GS_NUM(KEY, MEMBER) \
  Field{KEY, [](const Scenario& s) { return fmt(s.MEMBER); }, [](Scenario& s, const std::string& v) { s.MEMBER = to_double(v); }}
#define GS_INT(KEY, MEMBER)                                             \
  Field{KEY, [](const Scenario& s) { return std::to_string(s.MEMBER); }, \
        [](Scenario& s, const std::string& v) { s.MEMBER = static_cast<int>(to_integer(v)); }}
#define GS_BOOL(KEY, MEMBER)                                                    \
  Field{KEY, [](const Scenario& s) { return std::string(s.MEMBER ? "true" : "false"); }, \
        [](Scenario& s, const std::string& v) { s.MEMBER = to_bool(v); }}
#define GS_STR(KEY, MEMBER) \
  Field{KEY, [](const Scenario& s) { return s.MEMBER; }, [](Scenario& s, const std::string& v) { s.MEMBER = trim(v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      GS_STR("run/name", name),
      Field{"run/seed", [](const Scenario& s) { return std::to_string(s.seed); },
            [](Scenario& s, const std::string& v) { s.seed = to_unsigned(v); }},
      Field{"run/x0", [](const Scenario& s) { return join(s.x0); },
            [](Scenario& s, const std::string& v) { s.x0 = to_list(v); }},
      GS_STR("game/name", game),
      GS_NUM("game/epsilon", epsilon),
      Field{"game/payoff", [](const Scenario& s) { return join(s.payoff); },
            [](Scenario& s, const std::string& v) { s.payoff = to_list(v); }},
      GS_STR("game/dynamics", dynamics),
      GS_INT("data/k", k),
      GS_INT("data/k_sindy", k_sindy),
      GS_INT("data/k_pinn", k_pinn),
      GS_NUM("data/noise", noise),
      GS_NUM("data/dt_sample", dt_sample),
      GS_NUM("data/dt_integrate", dt_integrate),
      Field{"data/velocity", [](const Scenario& s) { return to_string(s.velocity); },
            [](Scenario& s, const std::string& v) { s.velocity = parse_velocity_mode(trim(v)); }},
      GS_STR("method/name", method),
      GS_INT("method/degree", siarc.degree),
      GS_INT("method/rfi_degree", siarc.rfi_degree),
      GS_BOOL("method/rfi", siarc.rfi),
      GS_BOOL("method/pc", siarc.pc),
      GS_INT("method/state_degree", siarc.state_degree),
      GS_INT("method/control_degree", siarc.control_degree),
      GS_BOOL("method/product_generators", siarc.product_generators),
      GS_BOOL("method/archimedean", siarc.archimedean),
      Field{"method/solver", [](const Scenario& s) { return to_string(s.siarc.sdp.method); },
            [](Scenario& s, const std::string& v) { s.siarc.sdp.method = parse_sdp_method(trim(v)); }},
      GS_NUM("method/tol", siarc.sdp.tol),
      GS_INT("method/ipm_max_iters", siarc.sdp.ipm_max_iters),
      GS_INT("method/admm_max_iters", siarc.sdp.max_iters),
      GS_INT("method/sindy_degree", sindy.degree),
      GS_INT("method/sindy_control_degree", sindy.control_degree),
      GS_NUM("method/threshold", sindy.threshold),
      GS_INT("method/sindy_max_iters", sindy.max_iters),
      GS_INT("method/epochs", pinn.epochs),
      GS_NUM("method/step", pinn.step),
      GS_NUM("method/lambda_data", pinn.weights.data),
      GS_NUM("method/lambda_rfi", pinn.weights.rfi),
      GS_NUM("method/lambda_pc", pinn.weights.pc),
      GS_INT("method/points_per_set", pinn.weights.points_per_set),
      GS_INT("mpc/horizon", mpc.horizon),
      GS_NUM("mpc/dt", mpc.dt),
      GS_NUM("mpc/alpha", mpc.alpha),
      GS_NUM("mpc/beta", mpc.beta),
      GS_INT("mpc/iters", mpc.iters),
      GS_NUM("mpc/step", mpc.step),
      GS_INT("mpc/restarts", mpc.restarts),
      GS_INT("mpc/substeps", mpc.substeps),
      Field{"mpc/avoid",
            [](const Scenario& s) {
              std::string out;
              for (const auto& b : s.mpc.avoid) {
                if (!out.empty()) out += " | ";
                out += join(to_std(b.center)) + "; " + fmt(b.radius) + "; " + fmt(b.weight);
              }
              return out;
            },
            [](Scenario& s, const std::string& v) {
              // center; radius; weight, balls separated by |
              s.mpc.avoid.clear();
              std::stringstream in(v);
              std::string ball;
              while (std::getline(in, ball, '|')) {
                if (trim(ball).empty()) continue;
                std::stringstream parts(ball);
                std::string c, r, w;
                std::getline(parts, c, ';');
                std::getline(parts, r, ';');
                std::getline(parts, w, ';');
                const auto center = to_list(c);
                AvoidanceBall b;
                b.center = Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size()));
                b.radius = to_double(r);
                if (!trim(w).empty()) b.weight = to_double(w);
                s.mpc.avoid.push_back(b);
              }
            }},
      GS_NUM("phases/t_evaluate", t_evaluate),
      GS_NUM("phases/t_steer", t_steer),
      GS_STR("target/profile", target),
  };
  return f;
}

#undef GS_NUM
#undef GS_INT
#undef GS_BOOL
#undef GS_STR

}  // namespace

int Scenario::k_for_method() const {
  if (method == "sindy" && k_sindy > 0) return k_sindy;
  if (method == "pinn" && k_pinn > 0) return k_pinn;
  return k;
}

double Scenario::t_identify() const { return k_for_method() * dt_sample; }

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  std::optional<double> t_identify;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("scenario line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (key == "phases/t_identify") {
        t_identify = to_double(value);
        continue;
      }
      const auto it = by_key.find(key);
      if (it == by_key.end()) throw std::invalid_argument("unknown key");
      it->second->set(s, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("scenario line " + std::to_string(number) + " (" + key + "): " + e.what());
    }
  }
  // an identification duration fixes the hold length of the K samples
  if (t_identify) s.dt_sample = *t_identify / s.k;
  if (s.k < 1) throw std::invalid_argument("scenario: data/k must be >= 1");
  if (!(s.dt_sample > 0) || !(s.dt_integrate > 0)) throw std::invalid_argument("scenario: time steps must be > 0");
  if (!(s.t_evaluate > 0) || !(s.t_steer > 0)) throw std::invalid_argument("scenario: durations must be > 0");
  if (s.noise < 0) throw std::invalid_argument("scenario: data/noise must be >= 0");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string to_text(const Scenario& s) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(s) + "\n";
  return out;
}

std::uint64_t config_hash(const Scenario& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& f : fields()) {
    if (f.key == "run/seed" || f.key == "run/name") continue;
    for (unsigned char c : f.key + " = " + f.get(s) + "\n") {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  return h;
}

Scenario stag_hunt_scenario() {
  Scenario s;
  s.name = "stag_hunt";
  s.game = "stag_hunt";
  s.dynamics = "replicator";
  s.k = 4;
  // the uncontrolled flow from x0 drains toward the (2, 2) corner, from which
  // bounded incentives escape only slowly; a short evaluation keeps it reachable
  s.t_evaluate = 0.5;
  s.x0 = {0.4, 0.3};
  s.target = "pure:1,1";
  return s;
}

Scenario matching_pennies_scenario() {
  Scenario s;
  s.name = "matching_pennies";
  s.game = "matching_pennies";
  s.dynamics = "log_barrier";
  s.k = 6;
  s.k_sindy = s.k_pinn = 50;
  s.x0 = {0.2, 0.6};
  s.target = "interior_ne";
  return s;
}

Scenario rps_scenario() {
  Scenario s;
  s.name = "rps";
  s.game = "rps";
  s.epsilon = 0.25;
  s.dynamics = "replicator";
  s.k = 11;
  s.x0 = {0.5, 0.3, 0.2, 0.2, 0.3, 0.5};
  s.target = "uniform";
  s.siarc.degree = 6;
  s.siarc.rfi_degree = 5;
  s.siarc.product_generators = true;
  return s;
}

Game build_game(const Scenario& s) {
  auto matrix = [&]() {
    if (s.payoff.size() != 4) throw std::invalid_argument("game/payoff needs four entries a11,a12,a21,a22");
    Eigen::Matrix2d a;
    a << s.payoff[0], s.payoff[1], s.payoff[2], s.payoff[3];
    return a;
  };
  if (s.game == "stag_hunt") return make_stag_hunt();
  if (s.game == "matching_pennies") return make_matching_pennies();
  if (s.game == "rps") return make_rps(s.epsilon);
  if (s.game == "symmetric_2x2") return make_symmetric_2x2(matrix());
  if (s.game == "zero_sum_2x2") return make_zero_sum_2x2(matrix());
  throw std::invalid_argument("unknown game '" + s.game + "'");
}

VectorField build_truth(const Scenario& s, const Game& g) {
  if (s.dynamics == "replicator") return replicator(g);
  if (s.dynamics == "log_barrier") return log_barrier(g);
  throw std::invalid_argument("unknown dynamics '" + s.dynamics + "'");
}

Eigen::VectorXd resolve_target(const Scenario& s, const Game& g) {
  Eigen::VectorXd x;
  if (s.target == "uniform") {
    x = uniform_profile(g);
  } else if (s.target == "interior_ne") {
    x = interior_ne_2x2(g);
  } else if (s.target.rfind("pure:", 0) == 0) {
    const auto a = to_list(s.target.substr(5));
    if (static_cast<int>(a.size()) != g.players()) throw std::invalid_argument("pure target needs one action per player");
    x = Eigen::VectorXd::Zero(g.state_dim());
    for (int i = 0; i < g.players(); ++i) {
      const int act = static_cast<int>(a[i]) - 1;
      if (act < 0 || act >= g.actions(i) || a[i] != act + 1) throw std::invalid_argument("pure target action out of range");
      x(g.index(i, act)) = 1.0;
    }
  } else if (s.target.rfind("x:", 0) == 0) {
    const auto v = to_list(s.target.substr(2));
    x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    if (x.size() != g.state_dim()) x = lift_profile(g, x);
  } else {
    throw std::invalid_argument("unknown target '" + s.target + "'");
  }
  g.check_profile(x);
  return x;
}

Eigen::VectorXd resolve_x0(const Scenario& s, const Game& g) {
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(s.x0.data(), static_cast<Eigen::Index>(s.x0.size()));
  Eigen::VectorXd x;
  if (v.size() == g.state_dim()) {
    x = v;
  } else if (v.size() == static_cast<Eigen::Index>(reduced_indices(g).size())) {
    x = lift_profile(g, v);
  } else {
    throw std::invalid_argument("run/x0 has the wrong length");
  }
  g.check_profile(x);
  return x;
}

IdentifiedModel identify(const Scenario& s, const Game& g, const TrajectoryDataset& data) {
  const auto start = std::chrono::steady_clock::now();
  IdentifiedModel id;
  std::ostringstream dump;
  if (s.method == "siarc") {
    SiarcFit f = fit(data, g, s.siarc);
    if (f.report.status == SdpStatus::InfeasibleSuspect) throw std::runtime_error("SIARc program reported infeasible");
    write_model(*f.model, f.report, dump);
    id.model = f.model;
    id.siarc = f.report;
  } else if (s.method == "sindy") {
    SindyFit f = sindy_fit(data, g, s.sindy);
    dump << "model sindy\n";
    const SpacePtr space = g.joint_space();
    for (int c = 0; c < g.state_dim(); ++c)
      dump << "p_" << space->name(static_cast<std::size_t>(c)) << " = " << to_string(f.model->polynomials()[c]) << '\n';
    dump << "rank_deficient " << (f.regression.rank_deficient ? "true" : "false") << '\n';
    id.model = f.model;
    id.sindy = f.regression;
  } else if (s.method == "pinn") {
    std::mt19937_64 rng(derive_seed(s.seed, 3));
    PinnFit f = pinn_fit(data, g, s.pinn, rng);
    dump << "model pinn\n";
    write_pinn(f.model->net(), dump);
    id.model = f.model;
    id.pinn = f.history.back();
  } else {
    throw std::invalid_argument("unknown method '" + s.method + "'");
  }
  id.dump = dump.str();
  id.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return id;
}

MetricsRecord steer_metrics(const ClosedLoopLog& log, const Game& g, const Eigen::VectorXd& target) {
  const auto red = reduced_indices(g);
  MetricsRecord m;
  m.mse_ref.assign(red.size(), 0.0);
  int rows = 0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (log.phase[k] != Phase::Steer) continue;
    ++rows;
    last = k;
    for (std::size_t r = 0; r < red.size(); ++r) m.mse_ref[r] += std::pow(log.x[k](red[r]) - target(red[r]), 2);
  }
  if (rows == 0) throw std::invalid_argument("steer_metrics: log has no steer rows");
  for (double& v : m.mse_ref) v /= rows;
  for (int r : red) m.error_final.push_back(std::abs(log.x[last](r) - target(r)));
  m.cost = accumulated_cost(log);
  return m;
}

namespace {

Eigen::VectorXd noise_control(const Game& g, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(g.controls());
  for (int c = 0; c < g.controls(); ++c) {
    const auto [lo, hi] = g.control_bounds()[c];
    w(c) = noise * (hi - lo) * normal(rng);
  }
  return g.clamp_control(w);
}

Eigen::VectorXd model_rk4(const VelocityModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& w, double h) {
  const Eigen::VectorXd k1 = m.velocity(x, w);
  const Eigen::VectorXd k2 = m.velocity(x + 0.5 * h * k1, w);
  const Eigen::VectorXd k3 = m.velocity(x + 0.5 * h * k2, w);
  const Eigen::VectorXd k4 = m.velocity(x + h * k3, w);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s) {
  ScenarioResult res;
  res.scenario = s;
  std::string phase = "setup";
  try {
    const Game g = build_game(s);
    const VectorField truth = build_truth(s, g);
    const Eigen::VectorXd x0 = resolve_x0(s, g);
    res.target = resolve_target(s, g);

    phase = "identify";
    CollectOptions o;
    o.k = s.k_for_method();
    for (const auto& [lo, hi] : g.control_bounds()) o.sigma.push_back(s.noise * (hi - lo));
    o.dt_sample = s.dt_sample;
    o.dt_integrate = s.dt_integrate;
    o.mode = s.velocity;
    std::mt19937_64 data_rng(derive_seed(s.seed, 1));
    res.data = collect_dataset(truth, g, x0, o, data_rng);
    for (std::size_t k = 0; k < res.data.path.t.size(); ++k)
      res.log.append(res.data.path.t[k], res.data.path.x[k], res.data.path.w[k], Phase::Identify);
    res.identified = identify(s, g, res.data);
    const VelocityModel& model = *res.identified.model;

    phase = "evaluate";
    std::mt19937_64 eval_rng(derive_seed(s.seed, 2));
    const int steps = static_cast<int>(std::lround(s.t_evaluate / s.dt_integrate));
    const int hold = std::max(1, static_cast<int>(std::lround(s.dt_sample / s.dt_integrate)));
    double t = res.log.t.back();
    Eigen::VectorXd x = res.log.x.back(), xhat = x, w = noise_control(g, s.noise, eval_rng);
    ClosedLoopLog eval;
    double err = 0.0;
    bool diverged = false;
    const auto red = reduced_indices(g);
    for (int k = 0; k <= steps; ++k) {
      if (k > 0 && k % hold == 0 && k < steps) w = noise_control(g, s.noise, eval_rng);
      eval.append(t, x, w, Phase::Evaluate);
      res.eval_predicted.push_back(xhat);
      for (int r : red) err += std::pow(xhat(r) - x(r), 2);
      if (k == steps) break;
      x = rk4_step(truth, g, x, w, s.dt_integrate);
      if (!diverged) {
        xhat = model_rk4(model, xhat, w, s.dt_integrate);
        if (!xhat.allFinite()) diverged = true;
      }
      if (diverged) xhat = Eigen::VectorXd::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
      t = res.log.t.back() + (k + 1) * s.dt_integrate;
    }
    res.log.extend(eval);

    phase = "steer";
    MpcConfig mc = s.mpc;
    mc.target = res.target;
    mc.seed = derive_seed(s.seed, 5);
    res.log.extend(run_closed_loop(truth, model, g, x, mc, s.t_steer, t));

    phase = "metrics";
    res.metrics = steer_metrics(res.log, g, res.target);
    res.metrics.mse_eval = diverged ? std::numeric_limits<double>::infinity()
                                    : err / static_cast<double>((steps + 1) * red.size());
    std::mt19937_64 holdout(derive_seed(s.seed, 4));
    const Eigen::VectorXd mse = model_mse_true(model, truth, g, 1000, holdout);
    for (int r : red) res.metrics.mse_true.push_back(mse(r));
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario '" + s.name + "' (" + s.method + "), " + phase + ": " + e.what());
  }
  return res;
}

RunRecord make_record(const ScenarioResult& r) {
  RunRecord rec;
  rec.scenario = r.scenario.name;
  rec.method = r.scenario.method;
  rec.seed = r.scenario.seed;
  rec.config_hash = config_hash(r.scenario);
  rec.metrics = r.metrics;
  return rec;
}

Eigen::MatrixXd latin_hypercube(int n, int dim, std::mt19937_64& rng) {
  if (n < 1 || dim < 1) throw std::invalid_argument("latin_hypercube: n and dim must be >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd pts(n, dim);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int d = 0; d < dim; ++d) {
    for (int k = 0; k < n; ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int k = 0; k < n; ++k) pts(k, d) = (perm[k] + u(rng)) / n;
  }
  return pts;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<Eigen::VectorXd> sample_initial_conditions(const Game& g, int n, std::mt19937_64& rng) {
  std::vector<Eigen::VectorXd> out;
  const bool two_by_two = g.players() == 2 && g.actions(0) == 2 && g.actions(1) == 2;
  if (two_by_two) {
    const Eigen::MatrixXd pts = latin_hypercube(n, 2, rng);
    for (int k = 0; k < n; ++k) out.push_back(lift_profile(g, pts.row(k).transpose()));
  } else {
    for (int k = 0; k < n; ++k) out.push_back(sample_profile(g, rng));
  }
  return out;
}

MetricsRecord mean_metrics(const std::vector<RunRecord>& runs) {
  MetricsRecord m;
  int n = 0;
  auto add = [](std::vector<double>& acc, const std::vector<double>& v) {
    if (acc.empty()) acc.assign(v.size(), 0.0);
    if (acc.size() != v.size()) throw std::invalid_argument("mean_metrics: metric lengths differ");
    for (std::size_t k = 0; k < v.size(); ++k) acc[k] += v[k];
  };
  for (const auto& r : runs) {
    if (!r.ok) continue;
    ++n;
    add(m.mse_ref, r.metrics.mse_ref);
    add(m.error_final, r.metrics.error_final);
    add(m.mse_true, r.metrics.mse_true);
    m.cost += r.metrics.cost;
    m.mse_eval += r.metrics.mse_eval;
  }
  if (n == 0) return m;
  for (auto* v : {&m.mse_ref, &m.error_final, &m.mse_true})
    for (double& x : *v) x /= n;
  m.cost /= n;
  m.mse_eval /= n;
  return m;
}

SweepResult run_sweep(const std::vector<Scenario>& members, const RunCallback& on_run) {
  SweepResult out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const Scenario& m = members[i];
    try {
      const ScenarioResult r = run_scenario(m);
      out.runs.push_back(make_record(r));
      if (on_run) on_run(i, r);
    } catch (const std::exception& e) {
      RunRecord r;
      r.scenario = m.name;
      r.method = m.method;
      r.seed = m.seed;
      r.config_hash = config_hash(m);
      r.ok = false;
      r.error = e.what();
      out.runs.push_back(r);
      ++out.failures;
    }
  }
  out.mean = mean_metrics(out.runs);
  return out;
}

std::vector<Scenario> initial_condition_members(const Scenario& s, int n) {
  if (n < 1) throw std::invalid_argument("initial_condition_members: n must be >= 1");
  const Game g = build_game(s);
  std::mt19937_64 rng(derive_seed(s.seed, 0x1c));
  const auto starts = sample_initial_conditions(g, n, rng);
  std::vector<Scenario> members;
  for (int i = 0; i < n; ++i) {
    Scenario m = s;
    m.name = s.name + "/ic" + std::to_string(i);
    m.x0 = to_std(starts[i]);
    m.seed = derive_seed(s.seed, static_cast<std::uint64_t>(i));
    members.push_back(std::move(m));
  }
  return members;
}

std::vector<Scenario> payoff_members(GameClass kind, int n, const Scenario& base) {
  if (n < 1) throw std::invalid_argument("payoff_members: n must be >= 1");
  std::mt19937_64 rng(derive_seed(base.seed, 0x9a));
  std::vector<Scenario> members;
  for (int i = 0; i < n; ++i) {
    const Game g = random_game(kind, rng);
    const Eigen::Matrix2d a = payoff_matrix_2x2(g);
    Scenario m = base;
    m.name = base.name + "/payoff" + std::to_string(i);
    m.payoff = {a(0, 0), a(0, 1), a(1, 0), a(1, 1)};
    if (kind == GameClass::StagHuntClass) {
      m.game = "symmetric_2x2";
      m.target = "pure:1,1";
    } else {
      m.game = "zero_sum_2x2";
      m.target = "interior_ne";
    }
    m.seed = derive_seed(base.seed, static_cast<std::uint64_t>(i));
    members.push_back(std::move(m));
  }
  return members;
}

SweepResult sweep_initial_conditions(const Scenario& s, int n) { return run_sweep(initial_condition_members(s, n)); }

SweepResult sweep_payoffs(GameClass kind, int n, const Scenario& base) {
  return run_sweep(payoff_members(kind, n, base));
}

void emit_report(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "scenario,method,seed,config_hash,status,cost,mse_eval,mse_ref,error_final,mse_true\n";
  for (const auto& r : records) {
    out << r.scenario << ',' << r.method << ',' << r.seed << ',' << r.config_hash << ','
        << (r.ok ? "ok" : "failed") << ',' << fmt(r.metrics.cost) << ',' << fmt(r.metrics.mse_eval) << ','
        << join(r.metrics.mse_ref, ';') << ',' << join(r.metrics.error_final, ';') << ','
        << join(r.metrics.mse_true, ';') << '\n';
  }
}

void emit_report(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  emit_report(records, out);
  if (!out) throw std::runtime_error("failed writing report '" + path + "'");
}

std::vector<RunRecord> read_report(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (trim(line) != "scenario,method,seed,config_hash,status,cost,mse_eval,mse_ref,error_final,mse_true")
    throw std::invalid_argument("read_report: unexpected header");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) throw std::invalid_argument("read_report: expected 10 columns");
    RunRecord r;
    r.scenario = cells[0];
    r.method = cells[1];
    r.seed = to_unsigned(cells[2]);
    r.config_hash = to_unsigned(cells[3]);
    r.ok = cells[4] == "ok";
    r.metrics.cost = to_double(cells[5]);
    r.metrics.mse_eval = to_double(cells[6]);
    r.metrics.mse_ref = to_list(cells[7], ';');
    r.metrics.error_final = to_list(cells[8], ';');
    r.metrics.mse_true = to_list(cells[9], ';');
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gamesteer
