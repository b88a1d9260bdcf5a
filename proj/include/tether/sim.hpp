#pragma once

// Fixed-step closed-loop simulation: plant variants, IMU noise, motor lag,
// tracing, tracking metrics and parameter sweeps.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tether/control.hpp"
#include "tether/flatness.hpp"
#include "tether/model.hpp"
#include "tether/observer.hpp"

namespace tether {

enum class PlantKind { Nominal, General };
enum class ControllerKind { GammaA, GammaAPrime, GammaB };
enum class FeedbackKind { TrueState, Observer };
enum class InitialSelection { Auto, Plus, Minus };

struct NoiseModel {
  double var_acc = 0.1;    ///< (m/s^2)^2 per axis
  double var_gyro = 0.01;  ///< (rad/s)^2
};

struct MotorModel {
  double time_constant = 0.08;  ///< s
};

/// Smooth steps on both outputs. y2 is an attitude (rad) for the (phi, theta)
/// laws and a link force (N) for the (phi, t_L) law.
struct ReferenceSpec {
  double y1_start = 0.7853981633974483;
  double y1_end = 2.356194490192345;
  double y2_start = 3.0;
  double y2_end = 5.0;
  double step_start = 5.0;
  double step_duration = 5.0;
  /// Continuity orders; 0 picks the controller's requirement.
  int y1_continuity = 0;
  int y2_continuity = 0;
};

struct ObserverSettings {
  double epsilon = 0.1;
  Vector3<double> alpha_roots{-6.0, -4.5, -3.0};
  double lambda = 5.0;
  double confidence_threshold = 0.02;
  double confidence_dwell = 1.0;
  bool allow_freeze = true;
  OperativeBounds<double> bounds{};
  /// Added to both hypotheses after the (w, 0, 0) initialisation.
  Vector3<double> initial_offset = Vector3<double>::Zero();
  InitialSelection initial_selection = InitialSelection::Auto;
};

struct SimConfig {
  double dt = 1e-3;
  double duration = 20.0;
  VehicleParams<double> params = VehicleParams<double>::nominal();
  PlantKind plant = PlantKind::Nominal;
  GeneralParams<double> general{};
  ControllerKind controller = ControllerKind::GammaB;
  FeedbackKind feedback = FeedbackKind::TrueState;
  /// Runs the observer bank alongside true-state feedback (logged only).
  bool passive_observer = false;
  std::optional<NoiseModel> noise;
  std::optional<MotorModel> motor;
  std::uint64_t seed = 42;
  /// Relative errors (mass, link length, inertia) of the controller's model.
  Vector3<double> variation = Vector3<double>::Zero();
  std::vector<double> y1_poles{-1.0, -1.5, -2.0, -2.5};
  std::vector<double> y2_poles{-1.0, -1.5};
  DlsConfig<double> dls{};
  ReferenceSpec reference{};
  ObserverSettings observer{};
  /// Added to the flat initial state of the plant.
  Vector4<double> initial_state_offset = Vector4<double>::Zero();
  double divergence_bound = 1e3;
  /// Phase boundaries; empty gives [0, step start, step end, duration].
  std::vector<double> phases;
};

/// Throws InvalidArgument / ConfigError on inconsistent settings.
void validate(const SimConfig& cfg);

/// Controller-side parameters: the true ones scaled by (1 + variation).
VehicleParams<double> controller_params(const SimConfig& cfg);

struct TraceRow {
  double t{};
  Vector4<double> x = Vector4<double>::Zero();
  Vector4<double> x_hat = Vector4<double>::Zero();
  double u1_cmd{};
  double u1_real{};
  double u2{};
  double y1{};
  double y1_ref{};
  double y2{};
  double y2_ref{};
  double etilde_plus{};
  double etilde_minus{};
  int selected{1};
  /// Virtual inputs of the outer loop.
  Vector2<double> v = Vector2<double>::Zero();
};

struct Trace {
  std::vector<TraceRow> rows;
  bool diverged = false;
  double abort_time = 0.0;
  std::string abort_reason;
  /// True when y2 is an angle (wrapped in error metrics).
  bool y2_is_angle = false;
};

Trace run_closed_loop(const SimConfig& cfg);

/// IMU noise sample i of stream `channel` at step k; deterministic in the seed.
double gaussian_noise(std::uint64_t seed, std::uint64_t step, unsigned channel);

struct PhaseMetrics {
  double t0{};
  double tf{};
  double mean{};
  double stddev{};
};

struct Metrics {
  std::vector<PhaseMetrics> phases;
  PhaseMetrics overall;
};

/// Per-sample tracking error |dy1|/|y1_ref| + |dy2|/|y2_ref|.
double tracking_error(const TraceRow& row, bool y2_is_angle, double eps_ref = 1e-6);

/// Trapezoidal mean and standard deviation of the tracking error per phase.
Metrics tracking_metrics(const Trace& trace, const std::vector<double>& phase_bounds,
                         double eps_ref = 1e-6);

/// Phase boundaries of a config (explicit or derived from the reference).
std::vector<double> phase_bounds(const SimConfig& cfg);

struct SweepAxis {
  std::string name;
  std::vector<double> values;
  std::function<void(SimConfig&, double)> apply;
};

struct SweepCell {
  std::vector<double> values;  ///< one per axis
  std::uint64_t seed{};
  bool diverged = false;
  double abort_time = 0.0;
  Metrics metrics;
};

/// Cartesian product of the axes, one run per cell with seed + cell index.
/// Cells run on up to `threads` workers and are returned in grid order.
std::vector<SweepCell> sweep(const SimConfig& base, const std::vector<SweepAxis>& axes,
                             unsigned threads = 0);

void write_trace_csv(std::ostream& out, const Trace& trace);
Trace read_trace_csv(std::istream& in);

// --- flatness round trips -----------------------------------------------------

enum class FlatOutput { A, B };

struct FlatnessScenario {
  std::string name;
  FlatOutput output = FlatOutput::B;
  VehicleParams<double> params = VehicleParams<double>::nominal();
  double y1_start{}, y1_end{}, y2_start{}, y2_end{};
  double t0 = 0.0;
  double tf = 5.0;
  double duration = 5.0;
  double dt = 1e-3;
  double tolerance_angle = 1e-3;
  double tolerance_force = 1e-2;
};

struct FlatnessReport {
  double max_y1_error{};
  double max_y2_error{};
  double min_thrust_magnitude{};
  bool passed{};
};

FlatnessScenario flatness_scenario(const std::string& name);
std::vector<std::string> flatness_scenario_names();
FlatnessReport flatness_round_trip(const FlatnessScenario& scenario);

}  // namespace tether
