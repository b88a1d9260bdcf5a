#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "tether/integrator.hpp"
#include "tether/model.hpp"

using namespace tether;
using namespace tether::testing;

namespace {

constexpr double kPi = std::numbers::pi;

// Specific acceleration from the force balance on the vehicle, projected on
// the body axes. Written without the observer-coordinate factorisation.
Vector2<double> newton_accelerometer(const P& p, const S& x, const U& u) {
  const double t_l = link_force(p, x, u);
  const Vector2<double> thrust = -u.thrust * body_z_axis(x.theta);
  const Vector2<double> specific = (thrust - t_l * link_direction(x.phi)) / p.mass();
  return {body_x_axis(x.theta).dot(specific), body_z_axis(x.theta).dot(specific)};
}

Vector2<double> attachment_offset_world(const GeneralParams<double>& gp, double theta) {
  return rotate_to_world(theta, gp.offset());
}

double general_energy(const P& p, const GeneralParams<double>& gp, const S& x) {
  const double l = p.link_length();
  const Vector2<double> velocity = l * link_normal(x.phi) * x.phi_dot -
                                   rotate_to_world_derivative(x.theta, gp.offset()) * x.theta_dot;
  const Vector2<double> position = l * link_direction(x.phi) - attachment_offset_world(gp, x.theta);
  const double link_inertia_pivot = gp.link_mass() * l * l / 3.0;
  return 0.5 * p.mass() * velocity.squaredNorm() + 0.5 * p.inertia() * x.theta_dot * x.theta_dot +
         0.5 * link_inertia_pivot * x.phi_dot * x.phi_dot + p.mass() * p.gravity() * position(1) +
         gp.link_mass() * p.gravity() * 0.5 * l * std::sin(x.phi);
}

}  // namespace

TEST_CASE("vehicle parameters keep derived coefficients in sync") {
  P p = P::nominal();
  CHECK(p.a1() == doctest::Approx(-4.905));
  CHECK(p.a2() == doctest::Approx(0.5));
  CHECK(p.a3() == doctest::Approx(4.0));
  p.set_link_length(4.0);
  CHECK(p.a1() == -9.81 / 4.0);
  CHECK(p.a2() == 1.0 / 4.0);
  p.set_inertia(0.5);
  CHECK(p.a3() == 2.0);
  CHECK_THROWS_AS(P(0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(p.set_mass(-1.0), Error);

  const P q = P::nominal().perturbed(0.1, -0.2, 0.3);
  CHECK(q.mass() == doctest::Approx(1.1));
  CHECK(q.link_length() == doctest::Approx(1.6));
  CHECK(q.inertia() == doctest::Approx(0.325));
}

TEST_CASE("state derivative examples") {
  const P p = P::nominal();
  CHECK(state_derivative(p, S{kPi / 2, 0, 0, 0}, U{0, 0}).norm() < 1e-15);
  CHECK(state_derivative(p, S{0, 0, 0, 0}, U{9.81, 0}).norm() < 1e-15);
  const Vector4<double> d = state_derivative(p, S{0, 0, 0, 0}, U{0, 1});
  CHECK(d(1) == doctest::Approx(-4.905));
  CHECK(d(3) == doctest::Approx(4.0));
}

TEST_CASE("link force examples") {
  const P p = P::nominal();
  CHECK(std::abs(link_force(p, S{kPi / 2, 0, 0, 0}, U{9.81, 0})) < 1e-12);
  CHECK(link_force(p, S{kPi / 2, 0, 0, 0}, U{0, 0}) == doctest::Approx(-9.81));
  CHECK(link_force(p, S{0, 0, 0, 0}, U{0, 0}) == 0.0);
}

TEST_CASE("accelerometer model") {
  const P p = P::nominal();
  std::mt19937_64 rng(7);

  SUBCASE("zero link force gives zero eta") {
    const auto imu = imu_measure(p, S{kPi / 2, 0, 0, 0}, U{9.81, 0});
    CHECK(std::hypot(imu.a_x, imu.a_z + 9.81 / p.mass()) < 1e-12);
  }
  SUBCASE("gyro reads the attitude rate") {
    CHECK(imu_measure(p, S{0.1, 0.2, 0.3, 0.3}, U{1, 0}).omega == 0.3);
  }
  SUBCASE("matches the vehicle force balance") {
    for (int i = 0; i < 100; ++i) {
      const S x = random_state(rng);
      const U u = random_input(rng);
      const auto imu = imu_measure(p, x, u);
      const Vector2<double> oracle = newton_accelerometer(p, x, u);
      CHECK(imu.a_x == doctest::Approx(oracle(0)).epsilon(1e-12));
      CHECK(imu.a_z == doctest::Approx(oracle(1)).epsilon(1e-12));
    }
  }
  SUBCASE("eta magnitude equals |t_L| / m") {
    for (int i = 0; i < 100; ++i) {
      const S x = random_state(rng);
      const U u = random_input(rng);
      const auto imu = imu_measure(p, x, u);
      const double eta = std::hypot(imu.a_x, imu.a_z + u.thrust / p.mass());
      CHECK(std::abs(eta - std::abs(link_force(p, x, u)) / p.mass()) < 1e-10);
    }
  }
  SUBCASE("observer-coordinate form reproduces the reading") {
    const S x{0.4, -0.7, 1.2, 0.1};
    const U u{6.0, 0.0};
    const auto imu = imu_measure(p, x, u);
    const Vector2<double> again = accelerometer_map(p, x.phi + x.theta, x.phi_dot, std::sin(x.phi), u.thrust);
    CHECK(again(0) == imu.a_x);
    CHECK(again(1) == imu.a_z);
  }
}

TEST_CASE("pendulum energy is conserved with zero input") {
  const P p = P::nominal();
  const double m = p.mass(), l = p.link_length(), g = p.gravity();
  auto energy = [&](const Vector4<double>& v) {
    return 0.5 * m * l * l * v(1) * v(1) + m * g * l * std::sin(v(0));
  };
  Vector4<double> x{0.3, 0.5, 0.0, 0.0};
  const double e0 = energy(x);
  auto f = [&](const Vector4<double>& v) {
    return Vector4<double>(state_derivative(p, S::from_vector(v), U{0, 0}));
  };
  for (int i = 0; i < 10000; ++i) x = rk4_step(f, x, 1e-3);
  CHECK(std::abs(energy(x) - e0) / std::abs(e0) < 1e-6);
}

TEST_CASE("general model reduces to the nominal one") {
  const P p = P::nominal();
  const GeneralParams<double> zero(0.0, p.link_length(), Vector2<double>::Zero());
  const GeneralParams<double> zero_fp(0.0, p.link_length(), Vector2<double>::Zero(),
                                      GeneralModelForm::FirstPrinciples);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const S x = random_state(rng);
    const U u = random_input(rng);
    const Vector4<double> nominal = state_derivative(p, x, u);
    CHECK((general_state_derivative(p, zero, x, u) - nominal).norm() < 1e-12);
    CHECK((general_state_derivative(p, zero_fp, x, u) - nominal).norm() < 1e-12);

    const Vector2<double> q_ddot{nominal(1), nominal(3)};
    const auto a = imu_measure_general(p, zero, x, q_ddot);
    const auto b = imu_measure(p, x, u);
    CHECK(std::abs(a.a_x - b.a_x) < 1e-10);
    CHECK(std::abs(a.a_z - b.a_z) < 1e-10);
    CHECK(a.omega == b.omega);
    CHECK(std::abs(link_force_general(p, zero, x, u, q_ddot) - link_force(p, x, u)) < 1e-10);
  }
}

TEST_CASE("thin-rod link inertia") {
  const GeneralParams<double> gp(0.2, 2.0, Vector2<double>{0.03, 0.03});
  CHECK(gp.link_inertia() == doctest::Approx(0.2 * 4.0 / 12.0));
  CHECK_THROWS_AS(GeneralParams<double>(-0.1, 2.0, Vector2<double>::Zero()), Error);
}

TEST_CASE("first-principles general model obeys the energy balance") {
  // dE/dt equals the power of thrust (applied at the CoM) plus torque.
  const P p = P::nominal();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const GeneralParams<double> gp(0.3, p.link_length(), Vector2<double>{0.05, -0.04},
                                   GeneralModelForm::FirstPrinciples);
    const S x = random_state(rng);
    const U u = random_input(rng);
    const Vector4<double> xd = general_state_derivative(p, gp, x, u);
    const double h = 1e-6;
    const S fwd = S::from_vector(x.vector() + h * xd);
    const S bwd = S::from_vector(x.vector() - h * xd);
    const double de_dt = (general_energy(p, gp, fwd) - general_energy(p, gp, bwd)) / (2 * h);
    const double l = p.link_length();
    const Vector2<double> velocity = l * link_normal(x.phi) * x.phi_dot -
                                     rotate_to_world_derivative(x.theta, gp.offset()) * x.theta_dot;
    const double power = (-u.thrust * body_z_axis(x.theta)).dot(velocity) + u.torque * x.theta_dot;
    CHECK(de_dt == doctest::Approx(power).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("massless link with offset: Newton-Euler on the vehicle") {
  const P p = P::nominal();
  const GeneralParams<double> gp(0.0, p.link_length(), Vector2<double>{0.03, 0.03},
                                 GeneralModelForm::FirstPrinciples);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const S x = random_state(rng);
    const U u = random_input(rng);
    const Vector4<double> xd = general_state_derivative(p, gp, x, u);
    const Vector2<double> q_ddot{xd(1), xd(3)};
    const double t_l = link_force_general(p, gp, x, u, q_ddot);

    // a massless link transmits force along d only
    Vector2<double> residual = p.mass() * vehicle_acceleration(p, gp, x, q_ddot) +
                               u.thrust * body_z_axis(x.theta) + t_l * link_direction(x.phi);
    residual(1) += p.mass() * p.gravity();
    CHECK(residual.norm() < 1e-9);

    // attitude: J theta'' = tau + moment of the link force at the attachment
    const Vector2<double> lever = rotate_to_world(x.theta, gp.offset());
    const Vector2<double> force = -t_l * link_direction(x.phi);
    const double moment = lever(1) * force(0) - lever(0) * force(1);
    CHECK(p.inertia() * xd(3) == doctest::Approx(u.torque + moment).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("general accelerometer matches finite-differenced kinematics") {
  const P p = P::nominal();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> offset(-0.1, 0.1);
  for (int trial = 0; trial < 10; ++trial) {
    const GeneralParams<double> gp(0.05, p.link_length(), Vector2<double>{offset(rng), offset(rng)});
    const U u{12.0, 0.1};
    auto f = [&](const Vector4<double>& v) {
      return Vector4<double>(general_state_derivative(p, gp, S::from_vector(v), u));
    };
    auto position = [&](const Vector4<double>& v) {
      return Vector2<double>(p.link_length() * link_direction(v(0)) - rotate_to_world(v(2), gp.offset()));
    };
    const double dt = 1e-4;
    Vector4<double> x0 = random_state(rng).vector();
    x0(1) *= 0.3;
    x0(3) *= 0.3;
    const Vector4<double> x1 = rk4_step(f, x0, dt);
    const Vector4<double> x2 = rk4_step(f, x1, dt);
    const Vector2<double> accel_fd = (position(x2) - 2 * position(x1) + position(x0)) / (dt * dt);
    const S mid = S::from_vector(x1);
    const Vector4<double> xd = f(x1);
    const Vector2<double> accel = vehicle_acceleration(p, gp, mid, Vector2<double>{xd(1), xd(3)});
    CHECK((accel_fd - accel).norm() < 1e-4);

    Vector2<double> specific = accel;
    specific(1) += p.gravity();
    const auto imu = imu_measure_general(p, gp, mid, Vector2<double>{xd(1), xd(3)});
    CHECK(imu.a_x == doctest::Approx(body_x_axis(mid.theta).dot(specific)));
    CHECK(imu.a_z == doctest::Approx(body_z_axis(mid.theta).dot(specific)));
  }
}
