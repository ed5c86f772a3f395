// Command line driver for scenario runs, sweeps and report aggregation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "gamesteer/bench.hpp"

namespace fs = std::filesystem;
using namespace gamesteer;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::string out = "out";
};

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.config);
  if (c.seed) s.seed = *c.seed;
  if (!c.method.empty()) s.method = c.method;
  return s;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out.precision(17);
  return out;
}

std::string file_stem(const std::string& name) {
  std::string s = name;
  for (char& ch : s)
    if (ch == '/' || ch == ' ') ch = '_';
  return s;
}

void write_dataset(const TrajectoryDataset& d, const Game& g, const fs::path& p) {
  std::ofstream out = open_out(p);
  const SpacePtr s = g.joint_space();
  out << "t";
  for (std::size_t k = 0; k < s->dim(); ++k) out << ',' << s->name(k);
  for (int c = 0; c < g.state_dim(); ++c) out << ",d" << s->name(static_cast<std::size_t>(c));
  out << ",velocity\n";
  for (std::size_t k = 0; k < d.size(); ++k) {
    out << d.t[k];
    for (Eigen::Index c = 0; c < d.x[k].size(); ++c) out << ',' << d.x[k](c);
    for (Eigen::Index c = 0; c < d.w[k].size(); ++c) out << ',' << d.w[k](c);
    for (Eigen::Index c = 0; c < d.xdot[k].size(); ++c) out << ',' << d.xdot[k](c);
    out << ',' << to_string(d.provenance[k]) << '\n';
  }
}

/// Evaluate rows: true state next to the open-loop model prediction.
void write_evaluation(const ScenarioResult& r, const Game& g, const fs::path& p) {
  std::ofstream out = open_out(p);
  const SpacePtr s = g.joint_space();
  out << "t";
  for (int c = 0; c < g.state_dim(); ++c) out << ',' << s->name(static_cast<std::size_t>(c));
  for (int c = 0; c < g.state_dim(); ++c) out << ",pred_" << s->name(static_cast<std::size_t>(c));
  out << '\n';
  std::size_t e = 0;
  for (std::size_t k = 0; k < r.log.size() && e < r.eval_predicted.size(); ++k) {
    if (r.log.phase[k] != Phase::Evaluate) continue;
    out << r.log.t[k];
    for (Eigen::Index c = 0; c < r.log.x[k].size(); ++c) out << ',' << r.log.x[k](c);
    for (Eigen::Index c = 0; c < r.eval_predicted[e].size(); ++c) out << ',' << r.eval_predicted[e](c);
    out << '\n';
    ++e;
  }
}

void write_run(const ScenarioResult& r, const fs::path& dir) {
  const Game g = build_game(r.scenario);
  const std::string stem = file_stem(r.scenario.name);
  {
    std::ofstream out = open_out(dir / (stem + "_trajectory.csv"));
    write_log_csv(r.log, g, out);
  }
  write_evaluation(r, g, dir / (stem + "_evaluate.csv"));
  std::ofstream model = open_out(dir / (stem + "_model.txt"));
  model << r.identified.dump;
}

void print_summary(const RunRecord& r) {
  std::cout << r.scenario << " [" << r.method << "] seed " << r.seed << ": ";
  if (!r.ok) {
    std::cout << "FAILED " << r.error << '\n';
    return;
  }
  auto list = [](const std::vector<double>& v) {
    std::string out;
    char buf[32];
    for (double d : v) {
      std::snprintf(buf, sizeof buf, "%s%.3e", out.empty() ? "" : " ", d);
      out += buf;
    }
    return out;
  };
  std::cout << "error_final " << list(r.metrics.error_final) << ", mse_ref " << list(r.metrics.mse_ref) << ", cost "
            << r.metrics.cost << ", mse_true " << list(r.metrics.mse_true) << '\n';
}

int cmd_identify(const Common& c) {
  const Scenario s = load(c);
  const Game g = build_game(s);
  CollectOptions o;
  o.k = s.k_for_method();
  for (const auto& [lo, hi] : g.control_bounds()) o.sigma.push_back(s.noise * (hi - lo));
  o.dt_sample = s.dt_sample;
  o.dt_integrate = s.dt_integrate;
  o.mode = s.velocity;
  std::mt19937_64 rng(derive_seed(s.seed, 1));
  const VectorField truth = build_truth(s, g);
  const TrajectoryDataset data = collect_dataset(truth, g, resolve_x0(s, g), o, rng);
  const IdentifiedModel id = identify(s, g, data);
  const fs::path dir(c.out);
  const std::string stem = file_stem(s.name);
  write_dataset(data, g, dir / (stem + "_data.csv"));
  open_out(dir / (stem + "_model.txt")) << id.dump;
  std::mt19937_64 holdout(derive_seed(s.seed, 4));
  const Eigen::VectorXd mse = model_mse_true(*id.model, truth, g, 1000, holdout);
  std::cout << s.name << " [" << s.method << "]: " << data.size() << " samples, fit " << id.seconds << " s";
  if (id.siarc) std::cout << ", status " << to_string(id.siarc->status) << ", residual " << id.siarc->residuals.max();
  std::cout << "\nmse_true";
  for (int r : reduced_indices(g)) std::cout << ' ' << mse(r);
  std::cout << '\n';
  return 0;
}

int cmd_steer(const Common& c) {
  const Scenario s = load(c);
  const ScenarioResult r = run_scenario(s);
  const fs::path dir(c.out);
  write_run(r, dir);
  const RunRecord rec = make_record(r);
  emit_report({rec}, (dir / (file_stem(s.name) + "_report.csv")).string());
  print_summary(rec);
  return 0;
}

int finish_sweep(const SweepResult& sw, const std::string& name, const fs::path& dir) {
  emit_report(sw.runs, (dir / (file_stem(name) + "_report.csv")).string());
  for (const auto& r : sw.runs) print_summary(r);
  RunRecord mean;
  mean.scenario = name + " (mean of " + std::to_string(sw.runs.size() - sw.failures) + ")";
  mean.method = sw.runs.empty() ? "" : sw.runs.front().method;
  mean.metrics = sw.mean;
  mean.ok = sw.failures < static_cast<int>(sw.runs.size());
  if (!mean.ok) mean.error = "every run failed";
  print_summary(mean);
  if (sw.failures) std::cout << sw.failures << " of " << sw.runs.size() << " runs failed\n";
  return mean.ok ? 0 : 1;
}

int cmd_sweep(const Common& c, const std::vector<Scenario>& members, const std::string& name) {
  const fs::path dir(c.out);
  const SweepResult sw = run_sweep(members, [&](std::size_t, const ScenarioResult& r) { write_run(r, dir / "runs"); });
  return finish_sweep(sw, name, dir);
}

int cmd_report(const std::string& dir, const std::string& out_path) {
  struct Group {
    std::vector<RunRecord> runs;
    int failures = 0;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string fname = entry.path().filename().string();
    const std::string suffix = "_report.csv";
    if (!entry.is_regular_file() || fname.size() < suffix.size() ||
        fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    ++files;
    std::ifstream in(entry.path());
    for (auto& r : read_report(in)) {
      // sweep members differ only in their trailing index
      const std::string base = r.scenario.substr(0, r.scenario.find_last_not_of("0123456789") + 1);
      Group& grp = groups[{base, r.method}];
      if (!r.ok) ++grp.failures;
      grp.runs.push_back(std::move(r));
    }
  }
  if (files == 0) throw std::runtime_error("no *_report.csv files under '" + dir + "'");
  std::vector<RunRecord> summary;
  for (const auto& [key, grp] : groups) {
    RunRecord m;
    m.scenario = key.first;
    m.method = key.second;
    m.metrics = mean_metrics(grp.runs);
    m.ok = grp.failures < static_cast<int>(grp.runs.size());
    summary.push_back(m);
    std::cout << key.first << " [" << key.second << "]: " << grp.runs.size() - grp.failures << " runs, "
              << grp.failures << " failed\n";
    print_summary(m);
  }
  if (!out_path.empty()) emit_report(summary, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identification and steering of controlled game dynamics"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", common.config, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the scenario seed")->each([&](const std::string&) { common.seed = seed; });
    sub->add_option("--method", common.method, "Override the identification method")
        ->check(CLI::IsMember({"siarc", "sindy", "pinn"}));
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  };

  CLI::App* identify_cmd = app.add_subcommand("identify", "Collect data and fit a model");
  add_common(identify_cmd);
  CLI::App* steer_cmd = app.add_subcommand("steer", "Run identification, evaluation and steering");
  add_common(steer_cmd);

  int n = 20;
  CLI::App* sweep_ic_cmd = app.add_subcommand("sweep-ic", "Sweep sampled initial conditions");
  add_common(sweep_ic_cmd);
  sweep_ic_cmd->add_option("--n", n, "Number of initial conditions")->check(CLI::PositiveNumber)->capture_default_str();

  std::string kind = "stag_hunt";
  CLI::App* sweep_pay_cmd = app.add_subcommand("sweep-payoffs", "Sweep random payoff matrices");
  add_common(sweep_pay_cmd);
  sweep_pay_cmd->add_option("--n", n, "Number of payoff matrices")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_pay_cmd->add_option("--kind", kind, "Game class")
      ->check(CLI::IsMember({"stag_hunt", "zero_sum"}))
      ->capture_default_str();

  std::string report_dir, report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "Aggregate *_report.csv files under a directory");
  report_cmd->add_option("dir", report_dir, "Directory to scan")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "Summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*identify_cmd) return cmd_identify(common);
    if (*steer_cmd) return cmd_steer(common);
    if (*sweep_ic_cmd) {
      const Scenario s = load(common);
      return cmd_sweep(common, initial_condition_members(s, n), s.name);
    }
    if (*sweep_pay_cmd) {
      const Scenario s = load(common);
      const GameClass gc = kind == "stag_hunt" ? GameClass::StagHuntClass : GameClass::ZeroSum2x2InteriorNE;
      return cmd_sweep(common, payoff_members(gc, n, s), s.name + "_payoffs");
    }
    if (*report_cmd) return cmd_report(report_dir, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
