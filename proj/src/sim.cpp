#include "tether/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "tether/angles.hpp"
#include "tether/integrator.hpp"
#include "tether/trajectory.hpp"

namespace tether {

namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;

constexpr double kGridSlack = 1e-9;

int default_y1_continuity(ControllerKind c) {
  switch (c) {
    case ControllerKind::GammaA: return 2;
    case ControllerKind::GammaAPrime: return 3;
    case ControllerKind::GammaB: return 4;
  }
  return 4;
}

int default_y2_continuity(ControllerKind) { return 2; }

std::size_t expected_y1_poles(ControllerKind c) {
  switch (c) {
    case ControllerKind::GammaA: return 2;
    case ControllerKind::GammaAPrime: return 3;
    case ControllerKind::GammaB: return 4;
  }
  return 4;
}

struct References {
  SmoothStep<double> y1;
  SmoothStep<double> y2;
};

References make_references(const SimConfig& cfg) {
  const auto& r = cfg.reference;
  const double t1 = r.step_start + r.step_duration;
  const int k1 = r.y1_continuity > 0 ? r.y1_continuity : default_y1_continuity(cfg.controller);
  const int k2 = r.y2_continuity > 0 ? r.y2_continuity : default_y2_continuity(cfg.controller);
  return {SmoothStep<double>(r.step_start, t1, r.y1_start, r.y1_end, k1),
          SmoothStep<double>(r.step_start, t1, r.y2_start, r.y2_end, k2)};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) {
  // (0, 1]: never zero so the logarithm below stays finite
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Plant tracking of the true physical quantities at one instant.
struct PlantEval {
  Vector4<double> rate;
  Vector2<double> q_ddot;
};

PlantEval plant_eval(const SimConfig& cfg, const State<double>& x, const Input<double>& u) {
  if (cfg.plant == PlantKind::General) {
    const Vector4<double> rate = general_state_derivative(cfg.params, cfg.general, x, u);
    return {rate, {rate(1), rate(3)}};
  }
  const Vector4<double> rate = state_derivative(cfg.params, x, u);
  return {rate, {rate(1), rate(3)}};
}

double true_link_force(const SimConfig& cfg, const State<double>& x, const Input<double>& u) {
  if (cfg.plant == PlantKind::General) {
    return link_force_general(cfg.params, cfg.general, x, u, plant_eval(cfg, x, u).q_ddot);
  }
  return link_force(cfg.params, x, u);
}

ImuReading<double> true_imu(const SimConfig& cfg, const State<double>& x, const Input<double>& u) {
  if (cfg.plant == PlantKind::General) {
    return imu_measure_general(cfg.params, cfg.general, x, plant_eval(cfg, x, u).q_ddot);
  }
  return imu_measure(cfg.params, x, u);
}

double relative_error(double error, double reference, double eps_ref) {
  if (!(std::abs(reference) >= eps_ref)) return std::numeric_limits<double>::infinity();
  return std::abs(error) / std::abs(reference);
}

ObserverBankConfig<double> bank_config(const ObserverSettings& s) {
  ObserverBankConfig<double> out;
  out.gains = HgoGains<double>::from_roots(s.epsilon, s.alpha_roots);
  out.bounds = s.bounds;
  out.lambda = s.lambda;
  out.confidence_threshold = s.confidence_threshold;
  out.confidence_dwell = s.confidence_dwell;
  out.allow_freeze = s.allow_freeze;
  return out;
}

}  // namespace

void validate(const SimConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (!(cfg.dt > 0)) fail("dt must be > 0");
  if (!(cfg.duration >= cfg.dt)) fail("duration must be >= dt");
  for (int i = 0; i < 3; ++i) {
    if (!(cfg.variation(i) > -1.0)) fail("parametric variations must be > -1");
  }
  if (cfg.controller == ControllerKind::GammaA &&
      (cfg.feedback == FeedbackKind::Observer || cfg.passive_observer)) {
    fail("the static (phi, theta) law cannot run with the observer: it needs the thrust rate");
  }
  if (cfg.y1_poles.size() != expected_y1_poles(cfg.controller) || cfg.y2_poles.size() != 2) {
    fail("pole count does not match the controller's relative degrees");
  }
  if (cfg.noise && (cfg.noise->var_acc < 0 || cfg.noise->var_gyro < 0)) fail("noise variances must be >= 0");
  if (cfg.motor && !(cfg.motor->time_constant > 0)) fail("motor time constant must be > 0");
  if (cfg.motor && cfg.motor->time_constant < 0.5 * cfg.dt) fail("motor time constant must be >= dt / 2");
  if (!(cfg.reference.step_duration > 0)) fail("step duration must be > 0");
  if (!(cfg.divergence_bound > 0)) fail("divergence bound must be > 0");
  if (!(cfg.dls.damping >= 0) || !(cfg.dls.activation > 0)) fail("DLS damping must be >= 0 and activation > 0");
  const auto& o = cfg.observer;
  if (!(o.epsilon > 0)) fail("observer epsilon must be > 0");
  if (!(o.alpha_roots.maxCoeff() < 0)) fail("observer alpha roots must be negative");
  if (!(o.lambda > 0)) fail("observer lambda must be > 0");
  if (!(o.confidence_dwell >= 0)) fail("observer confidence dwell must be >= 0");
  if (!cfg.phases.empty()) {
    if (cfg.phases.size() < 2) fail("phases need at least two boundaries");
    if (!std::is_sorted(cfg.phases.begin(), cfg.phases.end())) fail("phase boundaries must be sorted");
  }
}

VehicleParams<double> controller_params(const SimConfig& cfg) {
  return cfg.params.perturbed(cfg.variation(0), cfg.variation(1), cfg.variation(2));
}

double gaussian_noise(std::uint64_t seed, std::uint64_t step, unsigned channel) {
  const std::uint64_t key = splitmix64(seed) ^ ((step * 3 + channel) * 2);
  const double u1 = unit_open(splitmix64(key));
  const double u2 = unit_open(splitmix64(key + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> phase_bounds(const SimConfig& cfg) {
  if (!cfg.phases.empty()) return cfg.phases;
  const double a = std::clamp(cfg.reference.step_start, 0.0, cfg.duration);
  const double b = std::clamp(cfg.reference.step_start + cfg.reference.step_duration, a, cfg.duration);
  return {0.0, a, b, cfg.duration};
}

Trace run_closed_loop(const SimConfig& cfg) {
  validate(cfg);
  const VehicleParams<double>& p = cfg.params;
  const VehicleParams<double> pc = controller_params(cfg);
  const References refs = make_references(cfg);
  const PolePlacement<double> y1_design(cfg.y1_poles);
  const PolePlacement<double> y2_design(cfg.y2_poles);
  const bool is_b = cfg.controller == ControllerKind::GammaB;
  const int y1_order = static_cast<int>(cfg.y1_poles.size());

  Trace trace;
  trace.y2_is_angle = !is_b;

  // Initial plant state on the reference (true parameters), compensator from
  // the controller's model.
  State<double> x0;
  double thrust0 = 0.0, thrust_rate0 = 0.0;
  {
    const double t = 0.0;
    if (is_b) {
      OutputPointB<double> pt;
      pt.elevation = refs.y1.eval(t, 4);
      pt.link_force = refs.y2.eval(t, 2);
      const auto truth = flat_map_b(p, pt);
      const auto model = flat_map_b(pc, pt, truth);
      x0 = truth.state;
      thrust0 = model.input.thrust;
      thrust_rate0 = model.thrust_rate;
    } else {
      OutputPointA<double> pt;
      pt.elevation = refs.y1.eval(t, 3);
      pt.attitude = refs.y2.eval(t, 2);
      const auto truth = flat_map_a(p, pt);
      const auto model = flat_map_a(pc, pt);
      x0 = truth.state;
      thrust0 = model.input.thrust;
      thrust_rate0 = model.thrust_rate;
    }
  }

  Vec7 s = Vec7::Zero();
  s.head<4>() = x0.vector() + cfg.initial_state_offset;
  s(4) = thrust0;
  s(5) = is_b ? thrust_rate0 : 0.0;
  s(6) = thrust0;

  std::optional<ObserverBank<double>> bank;
  const bool use_observer = cfg.feedback == FeedbackKind::Observer || cfg.passive_observer;
  if (use_observer) bank.emplace(pc, bank_config(cfg.observer));

  std::optional<ControllerA<double>> ctrl_a;
  std::optional<ControllerAPrime<double>> ctrl_ap;
  std::optional<ControllerB<double>> ctrl_b;
  switch (cfg.controller) {
    case ControllerKind::GammaA: ctrl_a.emplace(y1_design, y2_design, cfg.dls); break;
    case ControllerKind::GammaAPrime: ctrl_ap.emplace(y1_design, y2_design, cfg.dls); break;
    case ControllerKind::GammaB: ctrl_b.emplace(y1_design, y2_design, cfg.dls); break;
  }

  const long steps = std::lround(cfg.duration / cfg.dt);
  trace.rows.reserve(static_cast<std::size_t>(steps) + 1);
  double torque_prev = 0.0;
  std::optional<double> estimated_tracking_error;

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const State<double> x = State<double>::from_vector(s.head<4>());

    const Jet<double> r1 = refs.y1.eval(t, y1_order);
    const Jet<double> r2 = refs.y2.eval(t, 2);

    TraceRow row;
    row.t = t;
    row.x = x.vector();

    try {
      // static law: the command also sets the thrust seen by the sensor
      std::optional<Input<double>> static_cmd;
      if (ctrl_a) {
        const Vector2<double> v = ctrl_a->virtual_input(x, r1, r2);
        static_cmd = ctrl_a->command(pc, x, v);
        row.v = v;
        s(4) = static_cmd->thrust;
        s(6) = cfg.motor ? s(6) : s(4);
      }
      const double thrust_known = s(4);
      const double thrust_real = cfg.motor ? s(6) : s(4);

      ImuReading<double> imu =
          true_imu(cfg, x, Input<double>{thrust_real, static_cmd ? static_cmd->torque : torque_prev});
      if (cfg.noise) {
        const auto step = static_cast<std::uint64_t>(k);
        imu.a_x += std::sqrt(cfg.noise->var_acc) * gaussian_noise(cfg.seed, step, 0);
        imu.a_z += std::sqrt(cfg.noise->var_acc) * gaussian_noise(cfg.seed, step, 1);
        imu.omega += std::sqrt(cfg.noise->var_gyro) * gaussian_noise(cfg.seed, step, 2);
      }

      State<double> x_fb = x;
      if (bank) {
        if (k == 0) {
          bank->initialize(imu, thrust_known);
          bank->set_estimates(bank->plus().z_hat + cfg.observer.initial_offset,
                              bank->minus().z_hat + cfg.observer.initial_offset);
          const double bias = 0.5;
          if (cfg.observer.initial_selection == InitialSelection::Plus) bank->set_prediction_errors(0.0, bias);
          if (cfg.observer.initial_selection == InitialSelection::Minus) bank->set_prediction_errors(bias, 0.0);
        }
        const State<double> x_hat = bank->measure(imu, thrust_known, cfg.dt, estimated_tracking_error);
        if (cfg.feedback == FeedbackKind::Observer) x_fb = x_hat;
        row.x_hat = x_hat.vector();
        row.etilde_plus = bank->plus().prediction_error;
        row.etilde_minus = bank->minus().prediction_error;
        row.selected = bank->selected() == Hypothesis::Plus ? 1 : -1;
      } else {
        row.x_hat = x.vector();
      }

      double command_rate = 0.0;  // f' (Gamma a') or f'' (Gamma b)
      double torque = 0.0;
      double thrust_rate_known = 0.0;
      if (static_cmd) {
        torque = static_cmd->torque;
      } else if (ctrl_ap) {
        const Vector2<double> v = ctrl_ap->virtual_input(pc, x_fb, thrust_known, r1, r2);
        const auto cmd = ctrl_ap->command(pc, x_fb, thrust_known, v);
        command_rate = cmd.thrust_derivative;
        torque = cmd.torque;
        thrust_rate_known = cmd.thrust_derivative;
        row.v = v;
      } else {
        const ExtendedState<double> xs{x_fb, thrust_known, s(5)};
        const Vector2<double> v = ctrl_b->virtual_input(pc, xs, r1, r2);
        const auto cmd = ctrl_b->command(pc, xs, v);
        command_rate = cmd.thrust_derivative;
        torque = cmd.torque;
        thrust_rate_known = s(5);
        row.v = v;
      }
      torque_prev = torque;

      if (bank) {
        bank->propagate(thrust_rate_known, cfg.dt);
        // tracking error of the estimated outputs drives the freeze
        const State<double> xe = State<double>::from_vector(row.x_hat);
        const double y2_hat = is_b ? link_force(pc, xe, Input<double>{thrust_known, 0.0}) : xe.theta;
        TraceRow est;
        est.y1 = xe.phi;
        est.y1_ref = r1(0);
        est.y2 = y2_hat;
        est.y2_ref = r2(0);
        estimated_tracking_error = tracking_error(est, !is_b);
      }

      const Input<double> applied{thrust_real, torque};
      row.u1_cmd = thrust_known;
      row.u1_real = thrust_real;
      row.u2 = torque;
      row.y1 = x.phi;
      row.y1_ref = r1(0);
      row.y2 = is_b ? true_link_force(cfg, x, applied) : x.theta;
      row.y2_ref = r2(0);
      trace.rows.push_back(row);

      if (k == steps) break;

      auto rate = [&](const Vec7& v) {
        const State<double> xv = State<double>::from_vector(v.head<4>());
        const double thrust = cfg.motor ? v(6) : v(4);
        Vec7 out = Vec7::Zero();
        out.head<4>() = plant_eval(cfg, xv, Input<double>{thrust, torque}).rate;
        if (ctrl_ap) {
          out(4) = command_rate;
        } else if (ctrl_b) {
          out(4) = v(5);
          out(5) = command_rate;
        }
        if (cfg.motor) out(6) = (v(4) - v(6)) / cfg.motor->time_constant;
        return out;
      };
      s = rk4_step(rate, s, cfg.dt);
      if (s.head<5>().cwiseAbs().maxCoeff() > cfg.divergence_bound) {
        throw Error(ErrorCode::Diverged, "state exceeded the divergence bound");
      }
    } catch (const Error& e) {
      trace.diverged = true;
      trace.abort_time = t;
      trace.abort_reason = e.what();
      break;
    }
  }
  if (!trace.diverged) trace.abort_time = trace.rows.empty() ? 0.0 : trace.rows.back().t;
  return trace;
}

double tracking_error(const TraceRow& row, bool y2_is_angle, double eps_ref) {
  const double e1 = wrap_angle(row.y1_ref - row.y1);
  const double e2 = y2_is_angle ? wrap_angle(row.y2_ref - row.y2) : row.y2_ref - row.y2;
  return relative_error(e1, row.y1_ref, eps_ref) + relative_error(e2, row.y2_ref, eps_ref);
}

Metrics tracking_metrics(const Trace& trace, const std::vector<double>& bounds, double eps_ref) {
  if (bounds.size() < 2 || !std::is_sorted(bounds.begin(), bounds.end())) {
    throw Error(ErrorCode::InvalidArgument, "phase bounds must be sorted with at least two entries");
  }
  const auto& rows = trace.rows;
  std::vector<double> e(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) e[i] = tracking_error(rows[i], trace.y2_is_angle, eps_ref);
  // isolated zero crossings of a reference are bridged; sustained ones are errors
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (std::isfinite(e[i])) continue;
    const bool prev_bad = i > 0 && !std::isfinite(e[i - 1]);
    const bool next_bad = i + 1 < e.size() && !std::isfinite(e[i + 1]);
    if (prev_bad || next_bad || e.size() == 1) {
      throw Error(ErrorCode::DegenerateReference, "reference magnitude below threshold over an interval");
    }
    const double left = i > 0 ? e[i - 1] : e[i + 1];
    const double right = i + 1 < e.size() ? e[i + 1] : e[i - 1];
    e[i] = 0.5 * (left + right);
  }

  auto integrate = [&](double a, double b) {
    PhaseMetrics m;
    m.t0 = a;
    m.tf = b;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].t >= a - kGridSlack && rows[i].t <= b + kGridSlack) idx.push_back(i);
    }
    if (idx.size() < 2) {
      m.mean = idx.empty() ? std::numeric_limits<double>::quiet_NaN() : e[idx[0]];
      m.stddev = idx.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
      return m;
    }
    const double span = rows[idx.back()].t - rows[idx.front()].t;
    double sum = 0.0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
      sum += 0.5 * (e[idx[j]] + e[idx[j - 1]]) * (rows[idx[j]].t - rows[idx[j - 1]].t);
    }
    m.mean = sum / span;
    double var = 0.0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
      const double a2 = (e[idx[j]] - m.mean) * (e[idx[j]] - m.mean);
      const double b2 = (e[idx[j - 1]] - m.mean) * (e[idx[j - 1]] - m.mean);
      var += 0.5 * (a2 + b2) * (rows[idx[j]].t - rows[idx[j - 1]].t);
    }
    m.stddev = std::sqrt(std::max(0.0, var / span));
    return m;
  };

  Metrics out;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) out.phases.push_back(integrate(bounds[i], bounds[i + 1]));
  out.overall = integrate(bounds.front(), bounds.back());
  return out;
}

std::vector<SweepCell> sweep(const SimConfig& base, const std::vector<SweepAxis>& axes, unsigned threads) {
  if (axes.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one axis");
  std::size_t total = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw Error(ErrorCode::InvalidArgument, "sweep axis '" + a.name + "' is empty");
    total *= a.values.size();
  }
  std::vector<SweepCell> cells(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    cells[i].values.resize(axes.size());
    // last axis varies fastest
    for (std::size_t a = axes.size(); a-- > 0;) {
      cells[i].values[a] = axes[a].values[rem % axes[a].values.size()];
      rem /= axes[a].values.size();
    }
    cells[i].seed = base.seed + i;
  }

  auto run_cell = [&](std::size_t i) {
    SweepCell& cell = cells[i];
    try {
      SimConfig cfg = base;
      for (std::size_t a = 0; a < axes.size(); ++a) axes[a].apply(cfg, cell.values[a]);
      cfg.seed = cell.seed;
      const Trace trace = run_closed_loop(cfg);
      cell.diverged = trace.diverged;
      cell.abort_time = trace.abort_time;
      if (!trace.diverged) cell.metrics = tracking_metrics(trace, phase_bounds(cfg));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      cell.diverged = true;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    for (std::size_t i = 0; i < total; ++i) run_cell(i);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < total; i = next++) run_cell(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return cells;
}

// --- trace CSV ----------------------------------------------------------------

namespace {

const char* const kTraceColumns[] = {"t",      "x1",      "x2",     "x3",          "x4",           "xhat1",
                                     "xhat2",  "xhat3",   "xhat4",  "u1_cmd",      "u1_real",      "u2",
                                     "y1",     "y1_ref",  "y2",     "y2_ref",      "etilde_plus",  "etilde_minus",
                                     "selected"};
constexpr std::size_t kTraceColumnCount = sizeof(kTraceColumns) / sizeof(kTraceColumns[0]);

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  const char* y2_unit = trace.y2_is_angle ? "rad" : "N";
  out << "# units: t[s] x1[rad] x2[rad/s] x3[rad] x4[rad/s] xhat1[rad] xhat2[rad/s] xhat3[rad] "
         "xhat4[rad/s] u1_cmd[N] u1_real[N] u2[N m] y1[rad] y1_ref[rad] y2["
      << y2_unit << "] y2_ref[" << y2_unit << "] etilde_plus[m/s^2] etilde_minus[m/s^2] selected[+1|-1]";
  if (trace.diverged) out << "; diverged at t=" << std::setprecision(9) << trace.abort_time;
  out << '\n';
  for (std::size_t i = 0; i < kTraceColumnCount; ++i) out << (i ? "," : "") << kTraceColumns[i];
  out << '\n';
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  for (const auto& r : trace.rows) {
    out << num(r.t);
    for (int i = 0; i < 4; ++i) out << ',' << num(r.x(i));
    for (int i = 0; i < 4; ++i) out << ',' << num(r.x_hat(i));
    for (double v : {r.u1_cmd, r.u1_real, r.u2, r.y1, r.y1_ref, r.y2, r.y2_ref, r.etilde_plus, r.etilde_minus}) {
      out << ',' << num(v);
    }
    out << ',' << r.selected << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed to write trace");
}

Trace read_trace_csv(std::istream& in) {
  Trace trace;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("y2[rad]") != std::string::npos) trace.y2_is_angle = true;
      if (line.find("diverged") != std::string::npos) trace.diverged = true;
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != kTraceColumnCount) throw Error(ErrorCode::IoError, "trace row has the wrong column count");
    TraceRow r;
    r.t = v[0];
    for (int i = 0; i < 4; ++i) r.x(i) = v[1 + i];
    for (int i = 0; i < 4; ++i) r.x_hat(i) = v[5 + i];
    r.u1_cmd = v[9];
    r.u1_real = v[10];
    r.u2 = v[11];
    r.y1 = v[12];
    r.y1_ref = v[13];
    r.y2 = v[14];
    r.y2_ref = v[15];
    r.etilde_plus = v[16];
    r.etilde_minus = v[17];
    r.selected = static_cast<int>(v[18]);
    trace.rows.push_back(r);
  }
  if (!trace.rows.empty()) trace.abort_time = trace.rows.back().t;
  return trace;
}

// --- flatness round trips -------------------------------------------------------

std::vector<std::string> flatness_scenario_names() {
  return {"gamma_a_step", "gamma_b_step", "gamma_b_dls_stress"};
}

FlatnessScenario flatness_scenario(const std::string& name) {
  constexpr double deg = std::numbers::pi / 180.0;
  FlatnessScenario s;
  s.name = name;
  if (name == "gamma_a_step") {
    s.output = FlatOutput::A;
    s.y1_start = 10 * deg;
    s.y1_end = 50 * deg;
    s.y2_start = 30 * deg;
    s.y2_end = 5 * deg;
  } else if (name == "gamma_b_step") {
    s.y1_start = 45 * deg;
    s.y1_end = 135 * deg;
    s.y2_start = 3.0;
    s.y2_end = 5.0;
  } else if (name == "gamma_b_dls_stress") {
    // compression close to the weight of the vehicle: the thrust nearly vanishes
    s.y1_start = 85 * deg;
    s.y1_end = 95 * deg;
    s.y2_start = -9.3;
    s.y2_end = -9.7;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown flatness scenario '" + name + "'");
  }
  return s;
}

FlatnessReport flatness_round_trip(const FlatnessScenario& sc) {
  const auto& p = sc.params;
  FlatnessReport rep;
  rep.min_thrust_magnitude = std::numeric_limits<double>::infinity();
  const long steps = std::lround(sc.duration / sc.dt);

  if (sc.output == FlatOutput::A) {
    const SmoothStep<double> y1(sc.t0, sc.tf, sc.y1_start, sc.y1_end, 3);
    const SmoothStep<double> y2(sc.t0, sc.tf, sc.y2_start, sc.y2_end, 2);
    auto sample = [&](double t) {
      OutputPointA<double> pt;
      pt.elevation = y1.eval(t, 3);
      pt.attitude = y2.eval(t, 2);
      return flat_map_a(p, pt);
    };
    Vector4<double> x = sample(0.0).state.vector();
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * sc.dt;
      const Input<double> u0 = sample(t).input;
      const Input<double> uh = sample(t + sc.dt / 2).input;
      const Input<double> u1 = sample(t + sc.dt).input;
      rep.min_thrust_magnitude = std::min(rep.min_thrust_magnitude, std::abs(u0.thrust));
      auto f = [&](const Vector4<double>& v, const Input<double>& u) {
        return Vector4<double>(state_derivative(p, State<double>::from_vector(v), u));
      };
      const Vector4<double> k1 = f(x, u0);
      const Vector4<double> k2 = f(x + sc.dt / 2 * k1, uh);
      const Vector4<double> k3 = f(x + sc.dt / 2 * k2, uh);
      const Vector4<double> k4 = f(x + sc.dt * k3, u1);
      x += sc.dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      const double tn = t + sc.dt;
      rep.max_y1_error = std::max(rep.max_y1_error, std::abs(x(0) - y1.eval(tn, 0)(0)));
      rep.max_y2_error = std::max(rep.max_y2_error, std::abs(x(2) - y2.eval(tn, 0)(0)));
    }
    rep.passed = rep.max_y1_error <= sc.tolerance_angle && rep.max_y2_error <= sc.tolerance_angle;
    return rep;
  }

  const SmoothStep<double> y1(sc.t0, sc.tf, sc.y1_start, sc.y1_end, 4);
  const SmoothStep<double> y2(sc.t0, sc.tf, sc.y2_start, sc.y2_end, 2);
  std::optional<FlatSample<double>> prev;
  auto sample = [&](double t) {
    OutputPointB<double> pt;
    pt.elevation = y1.eval(t, 4);
    pt.link_force = y2.eval(t, 2);
    return flat_map_b(p, pt, prev);
  };
  prev = sample(0.0);
  Vector4<double> x = prev->state.vector();
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    const FlatSample<double> s0 = sample(t);
    prev = s0;
    const Input<double> uh = sample(t + sc.dt / 2).input;
    const FlatSample<double> s1 = sample(t + sc.dt);
    rep.min_thrust_magnitude = std::min(rep.min_thrust_magnitude, std::abs(s0.input.thrust));
    auto f = [&](const Vector4<double>& v, const Input<double>& u) {
      return Vector4<double>(state_derivative(p, State<double>::from_vector(v), u));
    };
    const Vector4<double> k1 = f(x, s0.input);
    const Vector4<double> k2 = f(x + sc.dt / 2 * k1, uh);
    const Vector4<double> k3 = f(x + sc.dt / 2 * k2, uh);
    const Vector4<double> k4 = f(x + sc.dt * k3, s1.input);
    x += sc.dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    const double tn = t + sc.dt;
    const double t_l = link_force(p, State<double>::from_vector(x), s1.input);
    rep.max_y1_error = std::max(rep.max_y1_error, std::abs(x(0) - y1.eval(tn, 0)(0)));
    rep.max_y2_error = std::max(rep.max_y2_error, std::abs(t_l - y2.eval(tn, 0)(0)));
  }
  rep.passed = rep.max_y1_error <= sc.tolerance_angle && rep.max_y2_error <= sc.tolerance_force;
  return rep;
}

}  // namespace tether
