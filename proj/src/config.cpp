#include "tether/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace tether {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    config_error("'" + key + "': expected a number, got '" + text + "'");
  }
  if (!std::isfinite(v)) config_error("'" + key + "': value must be finite");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  if (out.empty()) config_error("'" + key + "': expected a comma-separated list");
  return out;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "on" || t == "1") return true;
  if (t == "false" || t == "off" || t == "0") return false;
  config_error("'" + key + "': expected true/false, got '" + text + "'");
}

template <typename E>
E to_enum(const std::string& key, const std::string& text, const std::map<std::string, E>& choices) {
  const auto it = choices.find(trim(text));
  if (it == choices.end()) {
    std::string names;
    for (const auto& [name, value] : choices) names += (names.empty() ? "" : "|") + name;
    config_error("'" + key + "': expected one of " + names + ", got '" + text + "'");
  }
  return it->second;
}

VehicleParams<double> with(VehicleParams<double> p, const std::function<void(VehicleParams<double>&)>& f) {
  try {
    f(p);
  } catch (const Error& e) {
    config_error(e.message());
  }
  return p;
}

void set_general(SimConfig& c, double mass, Vector2<double> offset, GeneralModelForm form) {
  if (mass < 0) config_error("link_mass_kg must be >= 0");
  c.general = GeneralParams<double>(mass, c.params.link_length(), offset, form);
}

using NumericSetter = std::function<void(SimConfig&, double)>;
using TextSetter = std::function<void(ExperimentConfig&, const std::string& key, const std::string&)>;

struct KeyEntry {
  std::string description;
  NumericSetter numeric;  // empty for non-numeric keys
  TextSetter text;
};

std::vector<std::pair<std::string, KeyEntry>> build_table() {
  std::vector<std::pair<std::string, KeyEntry>> t;
  auto num = [&t](std::string name, std::string doc, NumericSetter f) {
    KeyEntry e{std::move(doc), f, nullptr};
    e.text = [f](ExperimentConfig& c, const std::string& key, const std::string& v) { f(c.sim, to_double(key, v)); };
    t.emplace_back(std::move(name), std::move(e));
  };
  auto txt = [&t](std::string name, std::string doc, TextSetter f) {
    t.emplace_back(std::move(name), KeyEntry{std::move(doc), nullptr, std::move(f)});
  };

  num("dt_s", "integration step", [](SimConfig& c, double v) { c.dt = v; });
  num("duration_s", "simulated time", [](SimConfig& c, double v) { c.duration = v; });
  num("mass_kg", "vehicle mass m_R (true plant)",
      [](SimConfig& c, double v) { c.params = with(c.params, [v](auto& p) { p.set_mass(v); }); });
  num("inertia_kgm2", "vehicle inertia J_R",
      [](SimConfig& c, double v) { c.params = with(c.params, [v](auto& p) { p.set_inertia(v); }); });
  num("link_length_m", "link length l", [](SimConfig& c, double v) {
    c.params = with(c.params, [v](auto& p) { p.set_link_length(v); });
    set_general(c, c.general.link_mass(), c.general.offset(), c.general.form());
  });
  num("gravity_ms2", "gravitational acceleration",
      [](SimConfig& c, double v) { c.params = with(c.params, [v](auto& p) { p.set_gravity(v); }); });

  txt("plant", "nominal | general", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.plant = to_enum<PlantKind>(k, v, {{"nominal", PlantKind::Nominal}, {"general", PlantKind::General}});
  });
  num("link_mass_kg", "link mass m_L (general plant)", [](SimConfig& c, double v) {
    set_general(c, v, c.general.offset(), c.general.form());
  });
  num("offset_x_m", "attachment offset r_x in the body frame (general plant)", [](SimConfig& c, double v) {
    set_general(c, c.general.link_mass(), {v, c.general.offset()(1)}, c.general.form());
  });
  num("offset_z_m", "attachment offset r_z in the body frame (general plant)", [](SimConfig& c, double v) {
    set_general(c, c.general.link_mass(), {c.general.offset()(0), v}, c.general.form());
  });
  txt("general_form", "printed | first_principles",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
        const auto form = to_enum<GeneralModelForm>(
            k, v, {{"printed", GeneralModelForm::Printed}, {"first_principles", GeneralModelForm::FirstPrinciples}});
        set_general(c.sim, c.sim.general.link_mass(), c.sim.general.offset(), form);
      });

  txt("controller", "gamma_a | gamma_a_prime | gamma_b",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.sim.controller = to_enum<ControllerKind>(k, v,
                                                   {{"gamma_a", ControllerKind::GammaA},
                                                    {"gamma_a_prime", ControllerKind::GammaAPrime},
                                                    {"gamma_b", ControllerKind::GammaB}});
      });
  txt("feedback", "true_state | observer", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    c.sim.feedback = to_enum<FeedbackKind>(
        k, v, {{"true_state", FeedbackKind::TrueState}, {"observer", FeedbackKind::Observer}});
  });
  txt("passive_observer", "run the observer bank alongside true-state feedback",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.passive_observer = to_bool(k, v); });
  txt("y1_poles_per_s", "comma-separated outer-loop poles for y1",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.y1_poles = to_list(k, v); });
  txt("y2_poles_per_s", "comma-separated outer-loop poles for y2",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.y2_poles = to_list(k, v); });
  num("dls_damping", "damping c of the DLS inverse", [](SimConfig& c, double v) { c.dls.damping = v; });
  num("dls_activation", "|det E| / ||E||_F^2 below which DLS is active",
      [](SimConfig& c, double v) { c.dls.activation = v; });

  txt("noise", "off | on (white Gaussian IMU noise)", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    if (to_bool(k, v)) {
      if (!c.sim.noise) c.sim.noise = NoiseModel{};
    } else {
      c.sim.noise.reset();
    }
  });
  num("var_acc_m2s4", "accelerometer noise variance per axis (enables noise)", [](SimConfig& c, double v) {
    if (!c.noise) c.noise = NoiseModel{};
    c.noise->var_acc = v;
  });
  num("var_gyro_rad2s2", "gyroscope noise variance (enables noise)", [](SimConfig& c, double v) {
    if (!c.noise) c.noise = NoiseModel{};
    c.noise->var_gyro = v;
  });
  num("motor_time_constant_s", "first-order thrust lag; 0 disables", [](SimConfig& c, double v) {
    if (v == 0.0) {
      c.motor.reset();
    } else {
      c.motor = MotorModel{v};
    }
  });
  txt("seed", "noise seed (unsigned integer)", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
    const std::string s = trim(v);
    std::uint64_t seed{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      config_error("'" + k + "': expected an unsigned integer, got '" + v + "'");
    }
    c.sim.seed = seed;
  });
  num("var_mass", "relative error of the controller's mass", [](SimConfig& c, double v) { c.variation(0) = v; });
  num("var_link_length", "relative error of the controller's link length",
      [](SimConfig& c, double v) { c.variation(1) = v; });
  num("var_inertia", "relative error of the controller's inertia", [](SimConfig& c, double v) { c.variation(2) = v; });

  num("ref_phi_start_deg", "elevation before the step", [](SimConfig& c, double v) { c.reference.y1_start = v * kDeg; });
  num("ref_phi_end_deg", "elevation after the step", [](SimConfig& c, double v) { c.reference.y1_end = v * kDeg; });
  num("ref_theta_start_deg", "attitude before the step ((phi, theta) laws)",
      [](SimConfig& c, double v) { c.reference.y2_start = v * kDeg; });
  num("ref_theta_end_deg", "attitude after the step ((phi, theta) laws)",
      [](SimConfig& c, double v) { c.reference.y2_end = v * kDeg; });
  num("ref_link_force_start_n", "link force before the step ((phi, t_L) law)",
      [](SimConfig& c, double v) { c.reference.y2_start = v; });
  num("ref_link_force_end_n", "link force after the step ((phi, t_L) law)",
      [](SimConfig& c, double v) { c.reference.y2_end = v; });
  num("ref_step_start_s", "start time of the smooth step", [](SimConfig& c, double v) { c.reference.step_start = v; });
  num("ref_step_duration_s", "duration of the smooth step",
      [](SimConfig& c, double v) { c.reference.step_duration = v; });
  num("ref_y1_continuity", "continuity order of the y1 step; 0 = controller default",
      [](SimConfig& c, double v) { c.reference.y1_continuity = static_cast<int>(v); });
  num("ref_y2_continuity", "continuity order of the y2 step; 0 = controller default",
      [](SimConfig& c, double v) { c.reference.y2_continuity = static_cast<int>(v); });

  num("observer_epsilon", "HGO gain scale epsilon", [](SimConfig& c, double v) { c.observer.epsilon = v; });
  txt("observer_alpha_roots", "three comma-separated roots of s^3 + a1 s^2 + a2 s + a3",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
        const auto roots = to_list(k, v);
        if (roots.size() != 3) config_error("'" + k + "': expected three roots");
        c.sim.observer.alpha_roots = {roots[0], roots[1], roots[2]};
      });
  num("observer_lambda_per_s", "discount rate of the prediction errors", [](SimConfig& c, double v) { c.observer.lambda = v; });
  num("observer_confidence_threshold", "tracking error under which the loser may be switched off",
      [](SimConfig& c, double v) { c.observer.confidence_threshold = v; });
  num("observer_confidence_dwell_s", "time under the threshold before switching off",
      [](SimConfig& c, double v) { c.observer.confidence_dwell = v; });
  txt("observer_allow_freeze", "switch off the losing observer once confident",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.observer.allow_freeze = to_bool(k, v); });
  txt("observer_initial_selection", "auto | plus | minus",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.sim.observer.initial_selection = to_enum<InitialSelection>(
            k, v, {{"auto", InitialSelection::Auto}, {"plus", InitialSelection::Plus}, {"minus", InitialSelection::Minus}});
      });
  num("observer_offset_z1_rad", "initial estimation offset of z1", [](SimConfig& c, double v) { c.observer.initial_offset(0) = v; });
  num("observer_offset_z2_rads", "initial estimation offset of z2", [](SimConfig& c, double v) { c.observer.initial_offset(1) = v; });
  num("observer_offset_z3_rads2", "initial estimation offset of z3", [](SimConfig& c, double v) { c.observer.initial_offset(2) = v; });

  num("init_offset_phi_rad", "initial plant offset of phi", [](SimConfig& c, double v) { c.initial_state_offset(0) = v; });
  num("init_offset_phi_dot_rads", "initial plant offset of phi'", [](SimConfig& c, double v) { c.initial_state_offset(1) = v; });
  num("init_offset_theta_rad", "initial plant offset of theta", [](SimConfig& c, double v) { c.initial_state_offset(2) = v; });
  num("init_offset_theta_dot_rads", "initial plant offset of theta'", [](SimConfig& c, double v) { c.initial_state_offset(3) = v; });
  num("divergence_bound", "abort when |state| or |thrust| exceeds this", [](SimConfig& c, double v) { c.divergence_bound = v; });
  txt("phases_s", "comma-separated phase boundaries; default [0, step start, step end, duration]",
      [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.sim.phases = to_list(k, v); });

  txt("trace_csv", "trace file name, relative to --out", [](ExperimentConfig& c, const std::string&, const std::string& v) {
    c.trace_csv = trim(v);
  });
  txt("metrics_csv", "metrics file name, relative to --out",
      [](ExperimentConfig& c, const std::string&, const std::string& v) { c.metrics_csv = trim(v); });
  return t;
}

const std::vector<std::pair<std::string, KeyEntry>>& table() {
  static const auto t = build_table();
  return t;
}

const KeyEntry& lookup(const std::string& key) {
  for (const auto& [name, entry] : table()) {
    if (name == key) return entry;
  }
  config_error("unknown key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& [name, entry] : table()) out.push_back({name, entry.description});
    return out;
  }();
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  lookup(trim(key)).text(cfg, trim(key), value);
}

void apply_numeric_setting(SimConfig& cfg, const std::string& key, double value) {
  const KeyEntry& e = lookup(key);
  if (!e.numeric) config_error("'" + key + "' is not a numeric key");
  e.numeric(cfg, value);
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) config_error("expected key=value, got '" + text + "'");
  const std::string key = trim(text.substr(0, eq));
  if (key.empty()) config_error("empty key in '" + text + "'");
  return {key, trim(text.substr(eq + 1))};
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      const auto [key, value] = split_assignment(line);
      apply_setting(cfg, key, value);
    } catch (const Error& e) {
      config_error(source + ":" + std::to_string(number) + ": " + e.message());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config '" + path + "'");
  return parse_config(in, path);
}

SweepAxis parse_grid_axis(const std::string& spec) {
  const auto [key, values] = split_assignment(spec);
  if (!lookup(key).numeric) config_error("grid key '" + key + "' is not numeric");
  SweepAxis axis;
  axis.name = key;
  if (values.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(values);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(to_double(key, item));
    if (parts.size() != 3 || parts[2] < 1 || parts[2] != std::floor(parts[2])) {
      config_error("grid '" + spec + "': expected start:stop:count");
    }
    const int n = static_cast<int>(parts[2]);
    for (int i = 0; i < n; ++i) {
      axis.values.push_back(n == 1 ? parts[0] : parts[0] + (parts[1] - parts[0]) * i / (n - 1));
    }
  } else {
    axis.values = to_list(key, values);
  }
  const std::string name = key;
  axis.apply = [name](SimConfig& c, double v) { apply_numeric_setting(c, name, v); };
  return axis;
}

}  // namespace tether
