// tether: command-line front end for the closed-loop simulator.
//
// Exit codes: 0 ok, 1 check failed, 2 config error, 3 diverged, 4 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tether/angles.hpp"
#include "tether/config.hpp"
#include "tether/sim.hpp"

namespace fs = std::filesystem;
using namespace tether;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kDiverged = 3, kIo = 4 };

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
  auto* opt = cmd->add_option("--config", o.config, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.sets, "override: key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "noise seed (overrides the config)");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const auto& s : o.sets) {
    try {
      const auto [key, value] = split_assignment(s);
      apply_setting(cfg, key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, "--set " + s + ": " + e.message());
    }
  }
  if (o.seed) cfg.sim.seed = *o.seed;
  validate(cfg.sim);
  return cfg;
}

/// Writes via a sibling temporary so readers never see a partial file.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open '" + tmp.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot move output into '" + path.string() + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_metrics(std::ostream& out, const Metrics& m, std::uint64_t seed) {
  out << "# seed " << seed << "\n";
  out << "phase,t0_s,tf_s,mean,stddev\n";
  for (std::size_t i = 0; i < m.phases.size(); ++i) {
    const auto& p = m.phases[i];
    out << i + 1 << ',' << fmt(p.t0) << ',' << fmt(p.tf) << ',' << fmt(p.mean) << ',' << fmt(p.stddev) << '\n';
  }
  out << "overall," << fmt(m.overall.t0) << ',' << fmt(m.overall.tf) << ',' << fmt(m.overall.mean) << ','
      << fmt(m.overall.stddev) << '\n';
}

void print_metrics(const Metrics& m) {
  std::printf("%-8s %10s %10s %14s %14s\n", "phase", "t0 [s]", "tf [s]", "mean e", "sigma e");
  for (std::size_t i = 0; i < m.phases.size(); ++i) {
    const auto& p = m.phases[i];
    std::printf("%-8zu %10.3f %10.3f %14.6e %14.6e\n", i + 1, p.t0, p.tf, p.mean, p.stddev);
  }
  std::printf("%-8s %10.3f %10.3f %14.6e %14.6e\n", "overall", m.overall.t0, m.overall.tf, m.overall.mean,
              m.overall.stddev);
}

int cmd_simulate(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  std::printf("# seed %llu\n", static_cast<unsigned long long>(cfg.sim.seed));
  const Trace trace = run_closed_loop(cfg.sim);
  const fs::path out_dir(o.out);
  write_atomically(out_dir / cfg.trace_csv, [&](std::ostream& s) { write_trace_csv(s, trace); });
  if (trace.diverged) {
    std::fprintf(stderr, "diverged at t = %.3f s: %s\n", trace.abort_time, trace.abort_reason.c_str());
    return kDiverged;
  }
  const Metrics m = tracking_metrics(trace, phase_bounds(cfg.sim));
  write_atomically(out_dir / cfg.metrics_csv, [&](std::ostream& s) { write_metrics(s, m, cfg.sim.seed); });
  print_metrics(m);
  return kOk;
}

int cmd_sweep(const CommonOptions& o, const std::vector<std::string>& grid, unsigned threads,
              const std::string& file) {
  const ExperimentConfig cfg = resolve(o);
  std::vector<SweepAxis> axes;
  for (const auto& g : grid) axes.push_back(parse_grid_axis(g));
  if (axes.empty()) throw Error(ErrorCode::ConfigError, "sweep needs at least one --grid axis");
  // every cell must be a valid config before anything runs
  std::vector<std::vector<double>> bounds;
  {
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    for (std::size_t i = 0; i < total; ++i) {
      SimConfig c = cfg.sim;
      std::size_t rem = i;
      std::vector<double> vals(axes.size());
      for (std::size_t a = axes.size(); a-- > 0;) {
        vals[a] = axes[a].values[rem % axes[a].values.size()];
        rem /= axes[a].values.size();
      }
      for (std::size_t a = 0; a < axes.size(); ++a) axes[a].apply(c, vals[a]);
      validate(c);
      bounds.push_back(phase_bounds(c));
    }
  }
  std::printf("# seed %llu\n", static_cast<unsigned long long>(cfg.sim.seed));
  const auto cells = sweep(cfg.sim, axes, threads);
  std::size_t diverged = 0;
  write_atomically(fs::path(o.out) / file, [&](std::ostream& s) {
    s << "# seed " << cfg.sim.seed << "\n";
    for (const auto& a : axes) s << a.name << ',';
    s << "seed,phase,t0_s,tf_s,mean,stddev,diverged\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& cell = cells[i];
      diverged += cell.diverged;
      const std::size_t phases = bounds[i].size() - 1;
      for (std::size_t p = 0; p < phases; ++p) {
        for (double v : cell.values) s << fmt(v) << ',';
        s << cell.seed << ',' << p + 1 << ',' << fmt(bounds[i][p]) << ',' << fmt(bounds[i][p + 1]) << ',';
        if (cell.diverged) {
          s << "nan,nan,1\n";
        } else {
          s << fmt(cell.metrics.phases[p].mean) << ',' << fmt(cell.metrics.phases[p].stddev) << ",0\n";
        }
      }
    }
  });
  std::printf("%zu cells, %zu diverged\n", cells.size(), diverged);
  return kOk;
}

int cmd_flatness(const std::string& which) {
  std::vector<std::string> names = which == "all" ? flatness_scenario_names() : std::vector<std::string>{which};
  bool all_ok = true;
  std::printf("%-20s %14s %14s %14s  %s\n", "scenario", "max dy1", "max dy2", "min |u1| [N]", "result");
  for (const auto& name : names) {
    const FlatnessScenario sc = flatness_scenario(name);
    const FlatnessReport r = flatness_round_trip(sc);
    all_ok = all_ok && r.passed;
    std::printf("%-20s %14.3e %14.3e %14.4f  %s\n", name.c_str(), r.max_y1_error, r.max_y2_error,
                r.min_thrust_magnitude, r.passed ? "pass" : "FAIL");
  }
  return all_ok ? kOk : kCheckFailed;
}

int cmd_observer_demo(const CommonOptions& o) {
  ExperimentConfig cfg = resolve(o);
  if (cfg.sim.feedback == FeedbackKind::TrueState) cfg.sim.passive_observer = true;
  validate(cfg.sim);
  std::printf("# seed %llu\n", static_cast<unsigned long long>(cfg.sim.seed));
  const Trace trace = run_closed_loop(cfg.sim);
  if (!o.out.empty() && o.out != ".") {
    write_atomically(fs::path(o.out) / cfg.trace_csv, [&](std::ostream& s) { write_trace_csv(s, trace); });
  }
  double converged = -1.0;
  int last = 0;
  std::printf("%8s %10s %12s\n", "t [s]", "selected", "|xhat - x|");
  for (const auto& r : trace.rows) {
    Vector4<double> e = r.x_hat - r.x;
    e(0) = wrap_angle(e(0));
    e(2) = wrap_angle(e(2));
    const double rel = e.norm() / std::max(1e-12, r.x.norm());
    if (rel < 0.01) {
      if (converged < 0) converged = r.t;
    } else {
      converged = -1.0;
    }
    if (r.selected != last) {
      std::printf("%8.3f %10s %12.4e\n", r.t, r.selected > 0 ? "plus" : "minus", e.norm());
      last = r.selected;
    }
  }
  if (converged >= 0) {
    std::printf("estimate within 1%% of the state from t = %.3f s on\n", converged);
  } else {
    std::printf("estimate not within 1%% of the state at the end of the run\n");
  }
  if (trace.diverged) {
    std::fprintf(stderr, "diverged at t = %.3f s: %s\n", trace.abort_time, trace.abort_reason.c_str());
    return kDiverged;
  }
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument: return kConfig;
    case ErrorCode::IoError: return kIo;
    case ErrorCode::Diverged:
    case ErrorCode::NonFiniteState: return kDiverged;
    default: return kCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tethered aerial vehicle: flatness-based control and IMU observer simulator"};
  app.require_subcommand(1);

  CommonOptions sim_opts, sweep_opts, demo_opts;
  auto* simulate = app.add_subcommand("simulate", "run one closed-loop simulation");
  add_common(simulate, sim_opts, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep over a grid");
  add_common(sweep_cmd, sweep_opts, true);
  std::vector<std::string> grid;
  unsigned threads = 0;
  std::string sweep_file = "sweep.csv";
  sweep_cmd->add_option("--grid", grid, "axis: key=v1,v2,... or key=start:stop:count (repeatable)")->required();
  sweep_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  sweep_cmd->add_option("--file", sweep_file, "output file name inside --out");

  auto* flat = app.add_subcommand("flatness-check", "open-loop flat-input round trips");
  std::string scenario = "all";
  flat->add_option("--scenario", scenario, "scenario name or 'all'");

  auto* demo = app.add_subcommand("observer-demo", "observer convergence and hypothesis selection");
  add_common(demo, demo_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, grid, threads, sweep_file);
    if (*flat) return cmd_flatness(scenario);
    if (*demo) return cmd_observer_demo(demo_opts);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kOk;
}
