#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "tether/sim.hpp"

using namespace tether;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SimConfig gamma_a_prime() {
  SimConfig c;
  c.controller = ControllerKind::GammaAPrime;
  c.y1_poles = {-0.5, -1.0, -1.5};
  c.y2_poles = {-0.5, -1.0};
  c.reference.y1_start = 10 * kDeg;
  c.reference.y1_end = 50 * kDeg;
  c.reference.y2_start = 30 * kDeg;
  c.reference.y2_end = 5 * kDeg;
  return c;
}

TraceRow row_at(double t, double y1, double y1_ref, double y2, double y2_ref) {
  TraceRow r;
  r.t = t;
  r.y1 = y1;
  r.y1_ref = y1_ref;
  r.y2 = y2;
  r.y2_ref = y2_ref;
  return r;
}

}  // namespace

TEST_CASE("gaussian noise has unit moments and uncorrelated channels") {
  const int n = 200000;
  double s0 = 0, s1 = 0, q0 = 0, q1 = 0, c01 = 0;
  for (int k = 0; k < n; ++k) {
    const double a = gaussian_noise(42, k, 0);
    const double b = gaussian_noise(42, k, 1);
    s0 += a;
    s1 += b;
    q0 += a * a;
    q1 += b * b;
    c01 += a * b;
  }
  CHECK(std::abs(s0 / n) < 0.01);
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(q0 / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(q1 / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(c01 / n) < 0.01);
  CHECK(gaussian_noise(42, 17, 2) == gaussian_noise(42, 17, 2));
  CHECK(gaussian_noise(42, 17, 2) != gaussian_noise(43, 17, 2));
}

TEST_CASE("closed loop is deterministic in the seed") {
  SimConfig c;
  c.duration = 6.0;
  c.feedback = FeedbackKind::Observer;
  c.noise = NoiseModel{};
  c.observer.epsilon = 1.5;
  c.observer.initial_selection = InitialSelection::Plus;
  const Trace a = run_closed_loop(c);
  const Trace b = run_closed_loop(c);
  REQUIRE(a.rows.size() == b.rows.size());
  bool same = true;
  for (std::size_t i = 0; i < a.rows.size(); ++i) same = same && a.rows[i].x == b.rows[i].x && a.rows[i].x_hat == b.rows[i].x_hat;
  CHECK(same);
  c.seed = 7;
  const Trace d = run_closed_loop(c);
  CHECK(d.rows.back().x_hat != a.rows.back().x_hat);
}

TEST_CASE("trace has one row per step and starts on the reference") {
  SimConfig c;
  c.duration = 2.0;
  const Trace tr = run_closed_loop(c);
  CHECK(tr.rows.size() == 2001);
  CHECK(tr.rows.front().y1 == doctest::Approx(c.reference.y1_start).epsilon(1e-12));
  CHECK(tr.rows.front().y2 == doctest::Approx(c.reference.y2_start).epsilon(1e-9));
  CHECK(tr.rows.back().t == doctest::Approx(2.0));
  CHECK_FALSE(tr.y2_is_angle);
  CHECK(run_closed_loop(gamma_a_prime()).y2_is_angle);
}

TEST_CASE("true-state tracking of both dynamic laws") {
  for (const SimConfig& c : {SimConfig{}, gamma_a_prime()}) {
    const Trace tr = run_closed_loop(c);
    REQUIRE_FALSE(tr.diverged);
    const Metrics m = tracking_metrics(tr, phase_bounds(c));
    CHECK(m.phases[0].mean < 1e-9);
    CHECK(m.phases[2].mean < 1e-3);
  }
}

TEST_CASE("motor lag tends to the ideal actuator") {
  SimConfig ideal;
  ideal.duration = 12.0;
  const Trace a = run_closed_loop(ideal);
  auto deviation = [&](double tau) {
    SimConfig lagged = ideal;
    lagged.motor = MotorModel{tau};
    const Trace b = run_closed_loop(lagged);
    CHECK(b.rows[6000].u1_real != b.rows[6000].u1_cmd);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) worst = std::max(worst, (a.rows[i].x - b.rows[i].x).norm());
    return worst;
  };
  const double d8 = deviation(8e-3), d2 = deviation(2e-3), d1 = deviation(1e-3);
  CHECK(d2 < d8);
  CHECK(d1 < d2);
  CHECK(d1 < 1e-3);
  SimConfig stiff = ideal;
  stiff.motor = MotorModel{1e-4};
  CHECK_THROWS_AS(validate(stiff), Error);
}

TEST_CASE("controller mismatch scales the controller model only") {
  SimConfig c;
  c.variation = {0.1, -0.2, 0.05};
  const auto p = controller_params(c);
  CHECK(p.mass() == doctest::Approx(1.1));
  CHECK(p.link_length() == doctest::Approx(1.6));
  CHECK(p.inertia() == doctest::Approx(0.2625));
  CHECK(c.params.mass() == 1.0);
}

TEST_CASE("validate rejects inconsistent configs") {
  SimConfig c;
  c.controller = ControllerKind::GammaA;
  c.y1_poles = {-1.0, -2.0};
  c.y2_poles = {-1.0, -2.0};
  CHECK_NOTHROW(validate(c));
  c.feedback = FeedbackKind::Observer;
  CHECK_THROWS_AS(validate(c), Error);
  SimConfig d;
  d.y1_poles = {-1.0, -2.0};
  CHECK_THROWS_AS(validate(d), Error);
  SimConfig e;
  e.dt = 0.0;
  CHECK_THROWS_AS(validate(e), Error);
  SimConfig f;
  f.phases = {0.0, 5.0, 3.0};
  CHECK_THROWS_AS(validate(f), Error);
  SimConfig g;
  g.observer.alpha_roots = {-1.0, 2.0, -3.0};
  CHECK_THROWS_AS(validate(g), Error);
}

TEST_CASE("phase bounds follow the reference unless given") {
  SimConfig c;
  CHECK(phase_bounds(c) == std::vector<double>{0.0, 5.0, 10.0, 20.0});
  c.duration = 8.0;
  CHECK(phase_bounds(c) == std::vector<double>{0.0, 5.0, 8.0, 8.0});
  c.phases = {0.0, 1.0, 8.0};
  CHECK(phase_bounds(c) == c.phases);
}

TEST_CASE("tracking error of a sample") {
  const TraceRow r = row_at(0.0, 1.1, 1.0, 2.5, 2.0);
  CHECK(tracking_error(r, false) == doctest::Approx(0.1 + 0.25));
  // attitude error is wrapped
  const TraceRow w = row_at(0.0, 1.0, 1.0, std::numbers::pi - 0.01, -std::numbers::pi + 0.01);
  CHECK(tracking_error(w, true) == doctest::Approx(0.02 / (std::numbers::pi - 0.01)));
  CHECK(std::isinf(tracking_error(row_at(0.0, 1.0, 0.0, 1.0, 1.0), false)));
}

TEST_CASE("metrics: constant error has zero spread") {
  Trace tr;
  for (int i = 0; i <= 100; ++i) tr.rows.push_back(row_at(0.01 * i, 2.2, 2.0, 3.0, 3.0));
  const Metrics m = tracking_metrics(tr, {0.0, 0.5, 1.0});
  REQUIRE(m.phases.size() == 2);
  for (const auto& p : m.phases) {
    CHECK(p.mean == doctest::Approx(0.1));
    CHECK(p.stddev == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(m.overall.t0 == 0.0);
  CHECK(m.overall.tf == 1.0);
}

TEST_CASE("metrics: three-sample trapezoid by hand") {
  Trace tr;
  tr.rows = {row_at(0.0, 1.0, 1.0, 1.0, 1.0), row_at(1.0, 1.2, 1.0, 1.0, 1.0), row_at(2.0, 1.0, 1.0, 1.4, 1.0)};
  const double e[3] = {0.0, 0.2, 0.4};
  const double mean = (0.5 * (e[0] + e[1]) + 0.5 * (e[1] + e[2])) / 2.0;
  const auto sq = [&](int i) { return (e[i] - mean) * (e[i] - mean); };
  const double var = (0.5 * (sq(0) + sq(1)) + 0.5 * (sq(1) + sq(2))) / 2.0;
  const Metrics m = tracking_metrics(tr, {0.0, 2.0});
  CHECK(m.phases[0].mean == doctest::Approx(mean));
  CHECK(m.phases[0].stddev == doctest::Approx(std::sqrt(var)));
}

TEST_CASE("metrics: reference through zero") {
  Trace tr;
  for (int i = 0; i <= 4; ++i) tr.rows.push_back(row_at(i, 1.1, 1.0, 1.0, 1.0));
  tr.rows[2].y1_ref = 0.0;
  tr.rows[2].y1 = 0.1;
  const Metrics m = tracking_metrics(tr, {0.0, 4.0});
  CHECK(m.phases[0].mean == doctest::Approx(0.1));
  tr.rows[3].y1_ref = 0.0;
  CHECK_THROWS_AS(tracking_metrics(tr, {0.0, 4.0}), Error);
  try {
    tracking_metrics(tr, {0.0, 4.0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateReference);
  }
}

TEST_CASE("trace CSV round trip") {
  SimConfig c;
  c.duration = 0.05;
  c.passive_observer = true;
  const Trace tr = run_closed_loop(c);
  std::stringstream ss;
  write_trace_csv(ss, tr);
  const std::string text = ss.str();
  CHECK(text.rfind("# ", 0) == 0);
  CHECK(text.find("t,x1,x2,x3,x4,xhat1,xhat2,xhat3,xhat4,u1_cmd,u1_real,u2,y1,y1_ref,y2,y2_ref,etilde_plus,"
                  "etilde_minus,selected") != std::string::npos);
  const Trace back = read_trace_csv(ss);
  REQUIRE(back.rows.size() == tr.rows.size());
  for (std::size_t i = 0; i < tr.rows.size(); ++i) {
    CHECK(back.rows[i].t == doctest::Approx(tr.rows[i].t).epsilon(1e-8));
    CHECK((back.rows[i].x - tr.rows[i].x).norm() <= 1e-8 * (1.0 + tr.rows[i].x.norm()));
    CHECK(back.rows[i].y2 == doctest::Approx(tr.rows[i].y2).epsilon(1e-8));
    CHECK(back.rows[i].selected == tr.rows[i].selected);
  }
}

TEST_CASE("sweep returns cells in grid order with seed offsets") {
  SimConfig base;
  base.duration = 8.0;
  base.reference.step_duration = 2.0;
  std::vector<SweepAxis> axes{
      {"mass", {-0.1, 0.1}, [](SimConfig& c, double v) { c.variation(0) = v; }},
      {"length", {0.0, 0.05, 0.1}, [](SimConfig& c, double v) { c.variation(1) = v; }}};
  const auto cells = sweep(base, axes, 2);
  REQUIRE(cells.size() == 6);
  CHECK(cells[0].values == std::vector<double>{-0.1, 0.0});
  CHECK(cells[1].values == std::vector<double>{-0.1, 0.05});
  CHECK(cells[3].values == std::vector<double>{0.1, 0.0});
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].seed == base.seed + i);
  // same result regardless of worker count
  const auto serial = sweep(base, axes, 1);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(serial[i].metrics.overall.mean == cells[i].metrics.overall.mean);
}

TEST_CASE("sweep marks a divergent cell and continues") {
  SimConfig base;
  base.duration = 15.0;
  // a step far beyond the closed-loop bandwidth
  std::vector<SweepAxis> axes{{"dt", {0.01, 0.4}, [](SimConfig& c, double v) { c.dt = v; }}};
  const auto cells = sweep(base, axes, 1);
  CHECK_FALSE(cells[0].diverged);
  CHECK(cells[1].diverged);
}

TEST_CASE("bundled flatness scenarios round trip") {
  for (const auto& name : flatness_scenario_names()) {
    CAPTURE(name);
    const FlatnessReport r = flatness_round_trip(flatness_scenario(name));
    CHECK(r.passed);
    CHECK(r.max_y1_error < 1e-3);
  }
  CHECK_THROWS_AS(flatness_scenario("nope"), Error);
}
