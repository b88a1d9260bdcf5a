#pragma once

// Planar aerial vehicle tethered to the ground by a passive link.
//
// Frames: world x_W horizontal, z_W up (gravity is -g z_W). The link direction
// is d(phi) = [cos phi, sin phi] in the (x, z) world plane and d_perp is its
// derivative w.r.t. phi. The body axes are x_B = [-cos theta, sin theta] and
// z_B = [-sin theta, -cos theta]; thrust acts along -z_B so theta = 0 is
// hover with z_B pointing down.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "tether/errors.hpp"

namespace tether {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

/// Physical constants of the vehicle/link pair plus the derived model
/// coefficients a1 = -g/l, a2 = 1/(m l), a3 = 1/J. The derived values are
/// recomputed on every mutation so they never go stale.
template <typename Scalar = double>
class VehicleParams {
 public:
  VehicleParams(Scalar mass, Scalar inertia, Scalar link_length, Scalar gravity = Scalar(9.81))
      : mass_(mass), inertia_(inertia), link_length_(link_length), gravity_(gravity) {
    refresh();
  }

  /// m_R = 1 kg, J_R = 0.25 kg m^2, l = 2 m, g = 9.81 m/s^2.
  static VehicleParams nominal() { return VehicleParams(Scalar(1), Scalar(0.25), Scalar(2)); }

  Scalar mass() const { return mass_; }
  Scalar inertia() const { return inertia_; }
  Scalar link_length() const { return link_length_; }
  Scalar gravity() const { return gravity_; }
  Scalar a1() const { return a1_; }
  Scalar a2() const { return a2_; }
  Scalar a3() const { return a3_; }

  void set_mass(Scalar value) { mass_ = value; refresh(); }
  void set_inertia(Scalar value) { inertia_ = value; refresh(); }
  void set_link_length(Scalar value) { link_length_ = value; refresh(); }
  void set_gravity(Scalar value) { gravity_ = value; refresh(); }

  /// Parameters scaled by (1 + delta) per quantity, as believed by a
  /// controller that mis-identified the plant.
  VehicleParams perturbed(Scalar delta_mass, Scalar delta_length, Scalar delta_inertia) const {
    return VehicleParams(mass_ * (Scalar(1) + delta_mass), inertia_ * (Scalar(1) + delta_inertia),
                         link_length_ * (Scalar(1) + delta_length), gravity_);
  }

 private:
  void refresh() {
    if (!(mass_ > 0) || !(inertia_ > 0) || !(link_length_ > 0) || !(gravity_ > 0)) {
      throw Error(ErrorCode::InvalidArgument, "vehicle parameters must be strictly positive");
    }
    a1_ = -gravity_ / link_length_;
    a2_ = Scalar(1) / (mass_ * link_length_);
    a3_ = Scalar(1) / inertia_;
  }

  Scalar mass_;
  Scalar inertia_;
  Scalar link_length_;
  Scalar gravity_;
  Scalar a1_{};
  Scalar a2_{};
  Scalar a3_{};
};

/// [phi, phi_dot, theta, theta_dot]; angles are kept unwrapped.
template <typename Scalar = double>
struct State {
  Scalar phi{};
  Scalar phi_dot{};
  Scalar theta{};
  Scalar theta_dot{};

  Vector4<Scalar> vector() const { return {phi, phi_dot, theta, theta_dot}; }

  static State from_vector(const Vector4<Scalar>& v) { return {v(0), v(1), v(2), v(3)}; }

  bool finite() const {
    return std::isfinite(phi) && std::isfinite(phi_dot) && std::isfinite(theta) &&
           std::isfinite(theta_dot);
  }
};

/// Thrust intensity f (N, either sign) and torque tau (N m).
template <typename Scalar = double>
struct Input {
  Scalar thrust{};
  Scalar torque{};
};

/// State augmented with the thrust and its rate carried by a dynamic compensator.
template <typename Scalar = double>
struct ExtendedState {
  State<Scalar> state;
  Scalar thrust{};
  Scalar thrust_rate{};
};

template <typename Scalar = double>
struct ImuReading {
  Scalar a_x{};
  Scalar a_z{};
  Scalar omega{};
};

/// Which disturbance terms the general (massive link, offset attachment)
/// plant uses. `Printed` keeps the published gravity and input-matrix
/// corrections verbatim; `FirstPrinciples` uses the Euler-Lagrange terms that
/// follow from the attachment geometry p_B = l d - R r_BL.
enum class GeneralModelForm { Printed, FirstPrinciples };

/// Link mass and CoM-to-attachment offset for the general plant. The link
/// inertia is that of a thin uniform rod, m_L l^2 / 12.
template <typename Scalar = double>
class GeneralParams {
 public:
  GeneralParams() = default;
  GeneralParams(Scalar link_mass, Scalar link_length, Vector2<Scalar> offset,
                GeneralModelForm form = GeneralModelForm::Printed)
      : link_mass_(link_mass), offset_(offset), form_(form) {
    if (link_mass < 0) throw Error(ErrorCode::InvalidArgument, "link mass must be >= 0");
    link_inertia_ = link_mass * link_length * link_length / Scalar(12);
  }

  Scalar link_mass() const { return link_mass_; }
  Scalar link_inertia() const { return link_inertia_; }
  /// Attachment point in the body frame, (r_x, r_z).
  const Vector2<Scalar>& offset() const { return offset_; }
  GeneralModelForm form() const { return form_; }

 private:
  Scalar link_mass_{};
  Scalar link_inertia_{};
  Vector2<Scalar> offset_{Vector2<Scalar>::Zero()};
  GeneralModelForm form_{GeneralModelForm::Printed};
};

// --- geometry -------------------------------------------------------------

template <typename Scalar>
Vector2<Scalar> link_direction(Scalar phi) {
  using std::cos;
  using std::sin;
  return {cos(phi), sin(phi)};
}

template <typename Scalar>
Vector2<Scalar> link_normal(Scalar phi) {
  using std::cos;
  using std::sin;
  return {-sin(phi), cos(phi)};
}

template <typename Scalar>
Vector2<Scalar> body_x_axis(Scalar theta) {
  using std::cos;
  using std::sin;
  return {-cos(theta), sin(theta)};
}

template <typename Scalar>
Vector2<Scalar> body_z_axis(Scalar theta) {
  using std::cos;
  using std::sin;
  return {-sin(theta), -cos(theta)};
}

/// World coordinates of a body-frame offset, R_B^W r.
template <typename Scalar>
Vector2<Scalar> rotate_to_world(Scalar theta, const Vector2<Scalar>& r) {
  return r(0) * body_x_axis(theta) + r(1) * body_z_axis(theta);
}

/// d/dtheta of R_B^W r.
template <typename Scalar>
Vector2<Scalar> rotate_to_world_derivative(Scalar theta, const Vector2<Scalar>& r) {
  using std::cos;
  using std::sin;
  return {r(0) * sin(theta) - r(1) * cos(theta), r(0) * cos(theta) + r(1) * sin(theta)};
}

// --- nominal plant ----------------------------------------------------------

template <typename Scalar>
Vector4<Scalar> state_derivative(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                 const Input<Scalar>& u) {
  using std::cos;
  return {x.phi_dot, p.a1() * cos(x.phi) + p.a2() * cos(x.phi + x.theta) * u.thrust, x.theta_dot,
          p.a3() * u.torque};
}

/// Internal link force; positive is tension.
template <typename Scalar>
Scalar link_force(const VehicleParams<Scalar>& p, const State<Scalar>& x, const Input<Scalar>& u) {
  using std::sin;
  return x.phi_dot * x.phi_dot / p.a2() + p.a1() / p.a2() * sin(x.phi) +
         sin(x.phi + x.theta) * u.thrust;
}

/// Accelerometer model written in the observer coordinates: z1 = phi + theta,
/// z2 = phi_dot, and sin(phi) supplied separately. The common factor
/// l (z2^2 + a1 sin phi + a2 sin z1 u1) equals t_L / m_R.
template <typename Scalar>
Vector2<Scalar> accelerometer_map(const VehicleParams<Scalar>& p, Scalar z1, Scalar z2,
                                  Scalar sin_phi, Scalar thrust) {
  using std::cos;
  using std::sin;
  const Scalar specific_link_force =
      p.link_length() * (z2 * z2 + p.a1() * sin_phi + p.a2() * sin(z1) * thrust);
  return {cos(z1) * specific_link_force,
          sin(z1) * specific_link_force - p.link_length() * p.a2() * thrust};
}

/// Specific acceleration R_W^B (p_B'' + g z_W) and gyro rate.
template <typename Scalar>
ImuReading<Scalar> imu_measure(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                               const Input<Scalar>& u) {
  using std::sin;
  const Vector2<Scalar> acc =
      accelerometer_map(p, x.phi + x.theta, x.phi_dot, Scalar(sin(x.phi)), u.thrust);
  return {acc(0), acc(1), x.theta_dot};
}

// --- general plant ----------------------------------------------------------

/// Solves (M + M_bar) q'' + c_bar + g + g_bar = (Q + Q_bar) u for q''.
template <typename Scalar>
Vector2<Scalar> general_accelerations(const VehicleParams<Scalar>& p,
                                      const GeneralParams<Scalar>& gp, const State<Scalar>& x,
                                      const Input<Scalar>& u) {
  using std::abs;
  using std::cos;
  using std::sin;
  const Scalar m = p.mass();
  const Scalar l = p.link_length();
  const Scalar g = p.gravity();
  const Scalar rx = gp.offset()(0);
  const Scalar rz = gp.offset()(1);
  const Scalar z = x.phi + x.theta;

  const Vector2<Scalar> d_rot = rotate_to_world_derivative(x.theta, gp.offset());
  const Scalar coupling = -m * l * d_rot.dot(link_normal(x.phi));
  const Scalar centripetal = m * l * d_rot.dot(link_direction(x.phi));

  Matrix2<Scalar> mass_matrix;
  mass_matrix << m * l * l + gp.link_mass() * l * l / Scalar(3), coupling, coupling,
      p.inertia() + m * gp.offset().squaredNorm();

  Vector2<Scalar> rhs;
  rhs(0) = l * cos(z) * u.thrust - centripetal * x.theta_dot * x.theta_dot -
           (m + gp.link_mass() / Scalar(2)) * g * l * cos(x.phi);
  if (gp.form() == GeneralModelForm::Printed) {
    rhs(1) = u.torque - rz * u.thrust - centripetal * x.phi_dot * x.phi_dot +
             m * l * g * d_rot(1);
  } else {
    rhs(1) = u.torque - rx * u.thrust - centripetal * x.phi_dot * x.phi_dot + m * g * d_rot(1);
  }

  const Scalar det = mass_matrix.determinant();
  if (!(abs(det) >= Scalar(1e-12))) {
    throw Error(ErrorCode::SingularMassMatrix, "general model mass matrix is singular");
  }
  Matrix2<Scalar> inverse;
  inverse << mass_matrix(1, 1), -mass_matrix(0, 1), -mass_matrix(1, 0), mass_matrix(0, 0);
  return inverse * rhs / det;
}

template <typename Scalar>
Vector4<Scalar> general_state_derivative(const VehicleParams<Scalar>& p,
                                         const GeneralParams<Scalar>& gp, const State<Scalar>& x,
                                         const Input<Scalar>& u) {
  const Vector2<Scalar> q_ddot = general_accelerations(p, gp, x, u);
  return {x.phi_dot, q_ddot(0), x.theta_dot, q_ddot(1)};
}

/// World acceleration of the vehicle CoM, p_B = l d(phi) - R_B^W r_BL
/// differentiated twice.
template <typename Scalar>
Vector2<Scalar> vehicle_acceleration(const VehicleParams<Scalar>& p,
                                     const GeneralParams<Scalar>& gp, const State<Scalar>& x,
                                     const Vector2<Scalar>& q_ddot) {
  const Scalar l = p.link_length();
  return l * (link_normal(x.phi) * q_ddot(0) - link_direction(x.phi) * x.phi_dot * x.phi_dot) -
         rotate_to_world_derivative(x.theta, gp.offset()) * q_ddot(1) +
         rotate_to_world(x.theta, gp.offset()) * x.theta_dot * x.theta_dot;
}

template <typename Scalar>
ImuReading<Scalar> imu_measure_general(const VehicleParams<Scalar>& p,
                                       const GeneralParams<Scalar>& gp, const State<Scalar>& x,
                                       const Vector2<Scalar>& q_ddot) {
  Vector2<Scalar> specific = vehicle_acceleration(p, gp, x, q_ddot);
  specific(1) += p.gravity();
  return {body_x_axis(x.theta).dot(specific), body_z_axis(x.theta).dot(specific), x.theta_dot};
}

/// Link force recovered from the vehicle's translational balance,
/// m p_B'' = -t_L d - f z_B - m g z_W, projected on d.
template <typename Scalar>
Scalar link_force_general(const VehicleParams<Scalar>& p, const GeneralParams<Scalar>& gp,
                          const State<Scalar>& x, const Input<Scalar>& u,
                          const Vector2<Scalar>& q_ddot) {
  Vector2<Scalar> link_on_vehicle = p.mass() * vehicle_acceleration(p, gp, x, q_ddot) +
                                    u.thrust * body_z_axis(x.theta);
  link_on_vehicle(1) += p.mass() * p.gravity();
  return -link_on_vehicle.dot(link_direction(x.phi));
}

}  // namespace tether
