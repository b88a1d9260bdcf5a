#pragma once

// Flat maps for the two output pairs y^a = (phi, theta) and y^b = (phi, t_L):
// state and input as algebraic functions of the output jets.

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <type_traits>

#include "tether/angles.hpp"
#include "tether/errors.hpp"
#include "tether/model.hpp"

namespace tether {

template <typename Scalar = double>
struct OutputPointA {
  Eigen::Matrix<Scalar, 4, 1> elevation = Eigen::Matrix<Scalar, 4, 1>::Zero();  ///< phi .. phi'''
  Eigen::Matrix<Scalar, 3, 1> attitude = Eigen::Matrix<Scalar, 3, 1>::Zero();   ///< theta .. theta''
};

template <typename Scalar = double>
struct OutputPointB {
  Eigen::Matrix<Scalar, 5, 1> elevation = Eigen::Matrix<Scalar, 5, 1>::Zero();  ///< phi .. phi''''
  Eigen::Matrix<Scalar, 3, 1> link_force = Eigen::Matrix<Scalar, 3, 1>::Zero(); ///< t_L .. t_L''
};

template <typename Scalar = double>
struct FlatSample {
  State<Scalar> state;
  Input<Scalar> input;
  Scalar thrust_rate{};
  int thrust_sign{1};
};

template <typename Scalar = double>
struct FlatnessTolerances {
  /// Minimum |cos(phi + theta)| accepted by the y^a map.
  Scalar singularity = Scalar(1e-6);
  /// Threshold on ||r|| (and ||r'||) for the vanishing-thrust cases.
  Scalar vanishing_thrust = Scalar(1e-9);
};

template <typename Scalar>
FlatSample<Scalar> flat_map_a(const VehicleParams<Scalar>& p, const OutputPointA<Scalar>& pt,
                              const FlatnessTolerances<Scalar>& tol = {}) {
  using std::abs;
  using std::cos;
  using std::sin;
  const auto& y = pt.elevation;
  const auto& th = pt.attitude;
  const Scalar sum = y(0) + th(0);
  if (!(abs(cos(sum)) > tol.singularity)) {
    throw Error(ErrorCode::FlatSingularityA, "phi + theta is at pi/2 + k pi");
  }
  const Scalar num = y(2) - p.a1() * cos(y(0));
  const Scalar num_dot = y(3) + p.a1() * sin(y(0)) * y(1);
  const Scalar den = p.a2() * cos(sum);
  const Scalar den_dot = -p.a2() * sin(sum) * (y(1) + th(1));

  FlatSample<Scalar> out;
  out.state = {y(0), y(1), th(0), th(1)};
  out.input.thrust = num / den;
  out.input.torque = th(2) / p.a3();
  out.thrust_rate = (num_dot * den - num * den_dot) / (den * den);
  out.thrust_sign = out.input.thrust >= 0 ? 1 : -1;
  return out;
}

namespace detail {

/// Time derivatives of r = -m p_R'' - t_L d - m g z_W, each written as
/// A d + B d_perp (the gravity term only enters the undifferentiated vector).
template <typename Scalar>
struct ForceJets {
  Vector2<Scalar> r;
  Vector2<Scalar> r_dot;
  Vector2<Scalar> r_ddot;
  /// Third derivative with phi^(5) and t_L''' taken as zero (the jets
  /// carried by OutputPointB stop before them).
  Vector2<Scalar> r_dddot_truncated;
};

template <typename Scalar>
ForceJets<Scalar> force_jets(const VehicleParams<Scalar>& p, const OutputPointB<Scalar>& pt) {
  const Scalar ml = p.mass() * p.link_length();
  const auto& y = pt.elevation;
  const auto& f = pt.link_force;

  const Scalar a0 = ml * y(1) * y(1) - f(0);
  const Scalar b0 = -ml * y(2);
  const Scalar a1 = Scalar(3) * ml * y(1) * y(2) - f(1);
  const Scalar b1 = -ml * (y(3) - y(1) * y(1) * y(1)) - f(0) * y(1);
  const Scalar a1_dot = Scalar(3) * ml * (y(2) * y(2) + y(1) * y(3)) - f(2);
  const Scalar b1_dot = -ml * (y(4) - Scalar(3) * y(1) * y(1) * y(2)) - f(1) * y(1) - f(0) * y(2);
  const Scalar a2 = a1_dot - b1 * y(1);
  const Scalar b2 = b1_dot + a1 * y(1);
  const Scalar a1_ddot = Scalar(3) * ml * (Scalar(3) * y(2) * y(3) + y(1) * y(4));
  const Scalar b1_ddot = -ml * (-Scalar(6) * y(1) * y(2) * y(2) - Scalar(3) * y(1) * y(1) * y(3)) -
                         f(2) * y(1) - Scalar(2) * f(1) * y(2) - f(0) * y(3);
  const Scalar a2_dot = a1_ddot - b1_dot * y(1) - b1 * y(2);
  const Scalar b2_dot = b1_ddot + a1_dot * y(1) + a1 * y(2);
  const Scalar a3 = a2_dot - b2 * y(1);
  const Scalar b3 = b2_dot + a2 * y(1);

  const Vector2<Scalar> d = link_direction(y(0));
  const Vector2<Scalar> n = link_normal(y(0));
  ForceJets<Scalar> out;
  out.r = a0 * d + b0 * n;
  out.r(1) -= p.mass() * p.gravity();
  out.r_dot = a1 * d + b1 * n;
  out.r_ddot = a2 * d + b2 * n;
  out.r_dddot_truncated = a3 * d + b3 * n;
  return out;
}

template <typename Scalar>
Scalar cross2(const Vector2<Scalar>& a, const Vector2<Scalar>& b) {
  // z-component convention matching d/dt atan2(-r_x, -r_z).
  return a(1) * b(0) - a(0) * b(1);
}

}  // namespace detail

/// r of the force balance as a world 3-vector; the y entry is always zero.
template <typename Scalar>
Vector3<Scalar> r_vector(const VehicleParams<Scalar>& p, const OutputPointB<Scalar>& pt) {
  const Vector2<Scalar> r = detail::force_jets(p, pt).r;
  return {r(0), Scalar(0), r(1)};
}

/// Thrust and attitude from (phi, t_L) jets. The thrust sign branch follows
/// `prev` (closest attitude) when supplied and is positive otherwise.
template <typename Scalar>
FlatSample<Scalar> flat_map_b(const VehicleParams<Scalar>& p, const OutputPointB<Scalar>& pt,
                              const std::optional<std::type_identity_t<FlatSample<Scalar>>>& prev = std::nullopt,
                              const FlatnessTolerances<Scalar>& tol = {}) {
  using std::atan2;
  using std::abs;
  using std::sqrt;
  const auto jets = detail::force_jets(p, pt);
  const Scalar norm_r = jets.r.norm();
  const Scalar norm_r_dot = jets.r_dot.norm();
  const bool regular = norm_r > tol.vanishing_thrust;
  if (!regular && !(norm_r_dot > tol.vanishing_thrust)) {
    throw Error(ErrorCode::VanishingThrust, "r and its first derivative both vanish");
  }

  // Direction of z_B scaled by the thrust sign is +-r (or +-r' at the zero).
  const Vector2<Scalar>& dir = regular ? jets.r : jets.r_dot;
  const Scalar up_attitude = atan2(-dir(0), -dir(1));

  int sign = 1;
  Scalar attitude = up_attitude;
  if (prev) {
    const Scalar down_attitude = up_attitude + std::numbers::pi_v<Scalar>;
    const Scalar up_gap = abs(wrap_angle(up_attitude - prev->state.theta));
    const Scalar down_gap = abs(wrap_angle(down_attitude - prev->state.theta));
    sign = up_gap <= down_gap ? 1 : -1;
    attitude = unwrap_near(sign > 0 ? up_attitude : down_attitude, prev->state.theta);
  }

  FlatSample<Scalar> out;
  out.thrust_sign = sign;
  out.state.phi = pt.elevation(0);
  out.state.phi_dot = pt.elevation(1);
  out.state.theta = attitude;

  if (regular) {
    const Scalar norm2 = norm_r * norm_r;
    const Scalar num = detail::cross2(jets.r, jets.r_dot);
    const Scalar num_dot = detail::cross2(jets.r, jets.r_ddot);
    const Scalar norm2_dot = Scalar(2) * jets.r.dot(jets.r_dot);
    out.state.theta_dot = num / norm2;
    out.input.thrust = Scalar(sign) * norm_r;
    out.thrust_rate = Scalar(sign) * jets.r.dot(jets.r_dot) / norm_r;
    out.input.torque = p.inertia() * (num_dot * norm2 - num * norm2_dot) / (norm2 * norm2);
  } else {
    // Limit of the regular formulas along r(t) ~ r' (t - t0) + r'' (t - t0)^2 / 2 + ...
    const Scalar norm2 = norm_r_dot * norm_r_dot;
    const Scalar num = detail::cross2(jets.r_dot, jets.r_ddot) / Scalar(2);
    const Scalar num_dot = detail::cross2(jets.r_dot, jets.r_dddot_truncated) / Scalar(3);
    const Scalar norm2_dot = jets.r_dot.dot(jets.r_ddot);
    out.state.theta_dot = num / norm2;
    out.input.thrust = Scalar(sign) * norm_r;
    out.thrust_rate = Scalar(sign) * norm_r_dot;
    out.input.torque = p.inertia() * (num_dot * norm2 - num * norm2_dot) / (norm2 * norm2);
  }
  return out;
}

}  // namespace tether
