#pragma once

// Feedback-linearizing tracking laws for the tethered vehicle.
//
//   gamma_a_static   u   = E_a^-1 (-b_a + v),  y^a'' = v
//   gamma_a_dynamic  [f', tau] = E_a^-1 (-b_a_bar + v),  (phi''', theta'') = v
//   gamma_b          [f'', tau] = E_b^-1 (-b_b + v),     (phi'''', t_L'') = v
//
// Near a singular decoupling matrix the inverse is replaced by the damped
// least-squares inverse E^T (E E^T + c^2 I)^-1.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "tether/errors.hpp"
#include "tether/model.hpp"
#include "tether/trajectory.hpp"

namespace tether {

/// Linear error-dynamics design: gains are the coefficients of
/// prod(s - pole_i) below the leading one, ordered k0, k1, ...
template <typename Scalar = double>
class PolePlacement {
 public:
  explicit PolePlacement(std::vector<Scalar> poles) : poles_(std::move(poles)) {
    if (poles_.empty()) throw Error(ErrorCode::InvalidArgument, "at least one pole required");
    for (Scalar pole : poles_) {
      if (!(pole < 0)) throw Error(ErrorCode::InvalidArgument, "poles must be strictly negative");
    }
    std::vector<Scalar> coeffs{Scalar(1)};  // ascending powers
    for (Scalar pole : poles_) {
      std::vector<Scalar> next(coeffs.size() + 1, Scalar(0));
      for (std::size_t i = 0; i < coeffs.size(); ++i) {
        next[i + 1] += coeffs[i];
        next[i] -= pole * coeffs[i];
      }
      coeffs = std::move(next);
    }
    gains_ = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(static_cast<Eigen::Index>(poles_.size()));
    for (std::size_t i = 0; i < poles_.size(); ++i) gains_(static_cast<Eigen::Index>(i)) = coeffs[i];
  }

  const std::vector<Scalar>& poles() const { return poles_; }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& gains() const { return gains_; }
  /// Relative degree served by this design.
  int order() const { return static_cast<int>(poles_.size()); }

 private:
  std::vector<Scalar> poles_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gains_;
};

/// v = y_d^(r) + sum_i k_i (y_d^(i) - y^(i)). `reference` holds orders 0..r,
/// `measured` orders 0..r-1.
template <typename Scalar, typename RefDerived, typename MeasDerived>
Scalar outer_loop(const Eigen::MatrixBase<RefDerived>& reference,
                  const Eigen::MatrixBase<MeasDerived>& measured,
                  const PolePlacement<Scalar>& design) {
  const Eigen::Index r = design.order();
  if (reference.size() < r + 1 || measured.size() < r) {
    throw Error(ErrorCode::InvalidArgument, "jet orders do not match the relative degree");
  }
  return reference(r) + design.gains().dot(reference.head(r) - measured.head(r));
}

template <typename Scalar = double>
struct DlsConfig {
  /// Damping c of the damped least-squares inverse.
  Scalar damping = Scalar(0.05);
  /// Damping ramps in when |det E| / ||E||_F^2 drops below this value.
  Scalar activation = Scalar(1e-3);
};

/// E^T (E E^T + c^2 I)^-1 exactly as written.
template <typename Scalar>
Matrix2<Scalar> dls_inverse(const Matrix2<Scalar>& e, Scalar damping) {
  if (damping < 0) throw Error(ErrorCode::InvalidArgument, "damping must be >= 0");
  const Matrix2<Scalar> gram = e * e.transpose() + damping * damping * Matrix2<Scalar>::Identity();
  return e.transpose() * gram.inverse();
}

/// Plain inverse away from the singularity, variable-damping DLS inverse
/// inside the activation region (damping^2 scaled by 1 - (m / m0)^2 so the
/// switch is continuous).
template <typename Scalar>
Matrix2<Scalar> robust_inverse(const Matrix2<Scalar>& e, const DlsConfig<Scalar>& cfg) {
  using std::abs;
  const Scalar scale = e.squaredNorm();
  const Scalar measure = scale > 0 ? abs(e.determinant()) / scale : Scalar(0);
  if (measure >= cfg.activation) return e.inverse();
  const Scalar ratio = measure / cfg.activation;
  const Scalar damping2 = cfg.damping * cfg.damping * (Scalar(1) - ratio * ratio);
  using std::sqrt;
  return dls_inverse(e, Scalar(sqrt(damping2)));
}

template <typename Scalar>
bool dls_active(const Matrix2<Scalar>& e, const DlsConfig<Scalar>& cfg) {
  using std::abs;
  const Scalar scale = e.squaredNorm();
  return !(scale > 0 && abs(e.determinant()) / scale >= cfg.activation);
}

template <typename Scalar>
struct DecouplingPair {
  Vector2<Scalar> drift;
  Matrix2<Scalar> decoupling;
};

/// y^a'' = b_a(x) + E_a(x) u.
template <typename Scalar>
DecouplingPair<Scalar> decoupling_a(const VehicleParams<Scalar>& p, const State<Scalar>& x) {
  using std::cos;
  DecouplingPair<Scalar> out;
  out.drift << p.a1() * cos(x.phi), Scalar(0);
  out.decoupling << p.a2() * cos(x.phi + x.theta), Scalar(0), Scalar(0), p.a3();
  return out;
}

/// (phi''', theta'') = b_a_bar(x, f) + E_a(x) [f', tau].
template <typename Scalar>
DecouplingPair<Scalar> decoupling_a_dynamic(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                            Scalar thrust) {
  using std::sin;
  DecouplingPair<Scalar> out = decoupling_a(p, x);
  out.drift << -p.a1() * sin(x.phi) * x.phi_dot -
                   p.a2() * sin(x.phi + x.theta) * (x.phi_dot + x.theta_dot) * thrust,
      Scalar(0);
  return out;
}

/// (phi'''', t_L'') = b_b(xs) + E_b(xs) [f'', tau], with the drift obtained by
/// differentiating phi'' = a1 cos phi + a2 cos(phi + theta) f and t_L along
/// the plant with f, f' as compensator states.
template <typename Scalar>
DecouplingPair<Scalar> decoupling_b(const VehicleParams<Scalar>& p, const ExtendedState<Scalar>& xs) {
  using std::cos;
  using std::sin;
  const auto& x = xs.state;
  const Scalar a1 = p.a1();
  const Scalar a2 = p.a2();
  const Scalar a3 = p.a3();
  const Scalar f = xs.thrust;
  const Scalar f_dot = xs.thrust_rate;
  const Scalar c = cos(x.phi + x.theta);
  const Scalar s = sin(x.phi + x.theta);
  const Scalar w = x.phi_dot + x.theta_dot;  // d/dt (phi + theta)
  const Scalar phi_ddot = a1 * cos(x.phi) + a2 * c * f;
  const Scalar phi_dddot = -a1 * sin(x.phi) * x.phi_dot + a2 * c * f_dot - a2 * s * w * f;

  DecouplingPair<Scalar> out;
  out.drift(0) = -a1 * cos(x.phi) * x.phi_dot * x.phi_dot - a1 * sin(x.phi) * phi_ddot -
                 Scalar(2) * a2 * s * w * f_dot - a2 * c * w * w * f - a2 * s * phi_ddot * f;
  out.drift(1) = Scalar(2) * phi_ddot * phi_ddot / a2 + Scalar(2) * x.phi_dot * phi_dddot / a2 +
                 a1 / a2 * (cos(x.phi) * phi_ddot - sin(x.phi) * x.phi_dot * x.phi_dot) -
                 s * w * w * f + c * phi_ddot * f + Scalar(2) * c * w * f_dot;
  out.decoupling << a2 * c, -a2 * a3 * s * f, s, a3 * c * f;
  return out;
}

/// Output jets reconstructed from the extended state.
template <typename Scalar>
struct OutputJetsB {
  Vector4<Scalar> elevation;   ///< phi .. phi'''
  Vector2<Scalar> link_force;  ///< t_L, t_L'
};

template <typename Scalar>
OutputJetsB<Scalar> output_jets_b(const VehicleParams<Scalar>& p, const ExtendedState<Scalar>& xs) {
  using std::cos;
  using std::sin;
  const auto& x = xs.state;
  const Scalar a1 = p.a1();
  const Scalar a2 = p.a2();
  const Scalar c = cos(x.phi + x.theta);
  const Scalar s = sin(x.phi + x.theta);
  const Scalar w = x.phi_dot + x.theta_dot;
  const Scalar phi_ddot = a1 * cos(x.phi) + a2 * c * xs.thrust;
  OutputJetsB<Scalar> out;
  out.elevation << x.phi, x.phi_dot, phi_ddot,
      -a1 * sin(x.phi) * x.phi_dot + a2 * c * xs.thrust_rate - a2 * s * w * xs.thrust;
  out.link_force << link_force(p, x, Input<Scalar>{xs.thrust, Scalar(0)}),
      Scalar(2) * x.phi_dot * phi_ddot / a2 + a1 / a2 * cos(x.phi) * x.phi_dot + c * w * xs.thrust +
          s * xs.thrust_rate;
  return out;
}

template <typename Scalar>
struct OutputJetsA {
  Vector3<Scalar> elevation;  ///< phi .. phi''
  Vector2<Scalar> attitude;   ///< theta, theta'
};

template <typename Scalar>
OutputJetsA<Scalar> output_jets_a(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                  Scalar thrust) {
  using std::cos;
  OutputJetsA<Scalar> out;
  out.elevation << x.phi, x.phi_dot, p.a1() * cos(x.phi) + p.a2() * cos(x.phi + x.theta) * thrust;
  out.attitude << x.theta, x.theta_dot;
  return out;
}

/// Command of a dynamic-compensator law: a derivative of the thrust plus torque.
template <typename Scalar>
struct CompensatedCommand {
  Scalar thrust_derivative{};
  Scalar torque{};
};

template <typename Scalar>
Input<Scalar> gamma_a_static(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                             const Vector2<Scalar>& v, const DlsConfig<Scalar>& dls = {}) {
  const auto pair = decoupling_a(p, x);
  const Vector2<Scalar> u = robust_inverse(pair.decoupling, dls) * (v - pair.drift);
  return {u(0), u(1)};
}

template <typename Scalar>
CompensatedCommand<Scalar> gamma_a_dynamic(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                           Scalar thrust, const Vector2<Scalar>& v,
                                           const DlsConfig<Scalar>& dls = {}) {
  const auto pair = decoupling_a_dynamic(p, x, thrust);
  const Vector2<Scalar> u = robust_inverse(pair.decoupling, dls) * (v - pair.drift);
  return {u(0), u(1)};
}

template <typename Scalar>
CompensatedCommand<Scalar> gamma_b(const VehicleParams<Scalar>& p, const ExtendedState<Scalar>& xs,
                                   const Vector2<Scalar>& v, const DlsConfig<Scalar>& dls = {}) {
  const auto pair = decoupling_b(p, xs);
  const Vector2<Scalar> u = robust_inverse(pair.decoupling, dls) * (v - pair.drift);
  return {u(0), u(1)};
}

/// Static law for (phi, theta): relative degrees 2 + 2.
template <typename Scalar = double>
class ControllerA {
 public:
  ControllerA(PolePlacement<Scalar> elevation, PolePlacement<Scalar> attitude,
              DlsConfig<Scalar> dls = {})
      : elevation_(std::move(elevation)), attitude_(std::move(attitude)), dls_(dls) {
    if (elevation_.order() != 2 || attitude_.order() != 2) {
      throw Error(ErrorCode::InvalidArgument, "static (phi, theta) law needs 2 + 2 poles");
    }
  }

  Vector2<Scalar> virtual_input(const State<Scalar>& x, const Jet<Scalar>& elevation_ref,
                                const Jet<Scalar>& attitude_ref) const {
    const Vector2<Scalar> elevation{x.phi, x.phi_dot};
    const Vector2<Scalar> attitude{x.theta, x.theta_dot};
    return {outer_loop(elevation_ref, elevation, elevation_),
            outer_loop(attitude_ref, attitude, attitude_)};
  }

  Input<Scalar> command(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                        const Vector2<Scalar>& v) const {
    return gamma_a_static(p, x, v, dls_);
  }

 private:
  PolePlacement<Scalar> elevation_;
  PolePlacement<Scalar> attitude_;
  DlsConfig<Scalar> dls_;
};

/// (phi, theta) law with the thrust rate as input: relative degrees 3 + 2.
template <typename Scalar = double>
class ControllerAPrime {
 public:
  ControllerAPrime(PolePlacement<Scalar> elevation, PolePlacement<Scalar> attitude,
                   DlsConfig<Scalar> dls = {})
      : elevation_(std::move(elevation)), attitude_(std::move(attitude)), dls_(dls) {
    if (elevation_.order() != 3 || attitude_.order() != 2) {
      throw Error(ErrorCode::InvalidArgument, "dynamic (phi, theta) law needs 3 + 2 poles");
    }
  }

  Vector2<Scalar> virtual_input(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                Scalar thrust, const Jet<Scalar>& elevation_ref,
                                const Jet<Scalar>& attitude_ref) const {
    const auto jets = output_jets_a(p, x, thrust);
    return {outer_loop(elevation_ref, jets.elevation, elevation_),
            outer_loop(attitude_ref, jets.attitude, attitude_)};
  }

  CompensatedCommand<Scalar> command(const VehicleParams<Scalar>& p, const State<Scalar>& x,
                                     Scalar thrust, const Vector2<Scalar>& v) const {
    return gamma_a_dynamic(p, x, thrust, v, dls_);
  }

  const DlsConfig<Scalar>& dls() const { return dls_; }

 private:
  PolePlacement<Scalar> elevation_;
  PolePlacement<Scalar> attitude_;
  DlsConfig<Scalar> dls_;
};

/// (phi, t_L) law with the thrust acceleration as input: relative degrees 4 + 2.
template <typename Scalar = double>
class ControllerB {
 public:
  ControllerB(PolePlacement<Scalar> elevation, PolePlacement<Scalar> link_force,
              DlsConfig<Scalar> dls = {})
      : elevation_(std::move(elevation)), link_force_(std::move(link_force)), dls_(dls) {
    if (elevation_.order() != 4 || link_force_.order() != 2) {
      throw Error(ErrorCode::InvalidArgument, "(phi, t_L) law needs 4 + 2 poles");
    }
  }

  Vector2<Scalar> virtual_input(const VehicleParams<Scalar>& p, const ExtendedState<Scalar>& xs,
                                const Jet<Scalar>& elevation_ref,
                                const Jet<Scalar>& link_force_ref) const {
    const auto jets = output_jets_b(p, xs);
    return {outer_loop(elevation_ref, jets.elevation, elevation_),
            outer_loop(link_force_ref, jets.link_force, link_force_)};
  }

  CompensatedCommand<Scalar> command(const VehicleParams<Scalar>& p,
                                     const ExtendedState<Scalar>& xs,
                                     const Vector2<Scalar>& v) const {
    return gamma_b(p, xs, v, dls_);
  }

  const DlsConfig<Scalar>& dls() const { return dls_; }

 private:
  PolePlacement<Scalar> elevation_;
  PolePlacement<Scalar> link_force_;
  DlsConfig<Scalar> dls_;
};

}  // namespace tether
