#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tether/config.hpp"

using namespace tether;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty config keeps the defaults") {
  const ExperimentConfig c = parse("# nothing\n\n");
  CHECK(c.sim.dt == 1e-3);
  CHECK(c.sim.controller == ControllerKind::GammaB);
  CHECK(c.sim.seed == 42);
  CHECK_FALSE(c.sim.noise.has_value());
  CHECK(c.trace_csv == "trace.csv");
}

TEST_CASE("keys map onto the simulation config") {
  const ExperimentConfig c = parse(
      "controller = gamma_a_prime\n"
      "feedback = observer   # trailing comment\n"
      "dt_s = 0.002\n"
      "mass_kg = 1.5\n"
      "link_length_m = 3\n"
      "y1_poles_per_s = -0.5, -1, -1.5\n"
      "y2_poles_per_s = -0.5, -1\n"
      "ref_phi_start_deg = 10\n"
      "ref_theta_end_deg = 5\n"
      "noise = on\n"
      "var_acc_m2s4 = 0.2\n"
      "motor_time_constant_s = 0.05\n"
      "observer_alpha_roots = -6, -4.5, -3\n"
      "observer_initial_selection = minus\n"
      "var_mass = 0.1\n"
      "seed = 9\n"
      "trace_csv = run.csv\n");
  CHECK(c.sim.controller == ControllerKind::GammaAPrime);
  CHECK(c.sim.feedback == FeedbackKind::Observer);
  CHECK(c.sim.dt == 0.002);
  CHECK(c.sim.params.mass() == 1.5);
  CHECK(c.sim.params.link_length() == 3.0);
  CHECK(c.sim.y1_poles == std::vector<double>{-0.5, -1.0, -1.5});
  CHECK(c.sim.reference.y1_start == doctest::Approx(10 * std::numbers::pi / 180));
  CHECK(c.sim.reference.y2_end == doctest::Approx(5 * std::numbers::pi / 180));
  REQUIRE(c.sim.noise.has_value());
  CHECK(c.sim.noise->var_acc == 0.2);
  REQUIRE(c.sim.motor.has_value());
  CHECK(c.sim.motor->time_constant == 0.05);
  CHECK(c.sim.observer.initial_selection == InitialSelection::Minus);
  CHECK(c.sim.variation(0) == 0.1);
  CHECK(c.sim.seed == 9);
  CHECK(c.trace_csv == "run.csv");
  CHECK_NOTHROW(validate(c.sim));
}

TEST_CASE("motor time constant zero disables the lag") {
  CHECK_FALSE(parse("motor_time_constant_s = 0\n").sim.motor.has_value());
}

TEST_CASE("errors name the source line") {
  CHECK(error_of("dt_s = 0.001\nbogus_key = 1\n").find("test.cfg:2:") != std::string::npos);
  CHECK(error_of("dt_s = fast\n").find("test.cfg:1:") != std::string::npos);
  CHECK_FALSE(error_of("controller = pid\n").empty());
  CHECK_FALSE(error_of("noise = maybe\n").empty());
  CHECK_FALSE(error_of("just text\n").empty());
  CHECK_FALSE(error_of("dt_s = 1e-3x\n").empty());
  CHECK_FALSE(error_of("mass_kg = -1\n").empty());
  CHECK_FALSE(error_of("y1_poles_per_s = -1,,-2\n").empty());
}

TEST_CASE("every documented key is accepted") {
  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    CHECK_FALSE(k.description.empty());
    CHECK(names.insert(k.name).second);
  }
  CHECK(names.count("var_acc_m2s4"));
  CHECK(names.count("link_length_m"));
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), Error);
}

TEST_CASE("grid axes") {
  const SweepAxis list = parse_grid_axis("var_mass=-0.1,0,0.1");
  CHECK(list.name == "var_mass");
  CHECK(list.values == std::vector<double>{-0.1, 0.0, 0.1});
  const SweepAxis span = parse_grid_axis("ref_step_duration_s=3:7:3");
  CHECK(span.values == std::vector<double>{3.0, 5.0, 7.0});
  SimConfig c;
  span.apply(c, 4.0);
  CHECK(c.reference.step_duration == 4.0);
  list.apply(c, -0.1);
  CHECK(c.variation(0) == -0.1);
  CHECK_THROWS_AS(parse_grid_axis("controller=1,2"), Error);
  CHECK_THROWS_AS(parse_grid_axis("var_mass=1:2"), Error);
  CHECK_THROWS_AS(parse_grid_axis("var_mass=1:2:0.5"), Error);
  CHECK_THROWS_AS(parse_grid_axis("nokey"), Error);
}

TEST_CASE("overrides") {
  const auto [k, v] = split_assignment(" seed = 12 ");
  CHECK(k == "seed");
  CHECK(v == "12");
  ExperimentConfig c;
  apply_setting(c, k, v);
  CHECK(c.sim.seed == 12);
  CHECK_THROWS_AS(split_assignment("=3"), Error);
}
