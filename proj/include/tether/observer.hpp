#pragma once

// IMU-only state estimation.
//
// Coordinates z = (phi + theta, phi_dot, phi_ddot) put the reduced plant in
// triangular form z' = A z + B sigma(z, zeta) + [u3, 0, 0], with a measure of
// z1 extracted from the accelerometer up to the sign of eta = t_L / m_R. Two
// high-gain observers run on the eta > 0 and eta < 0 hypotheses and the one
// with the smaller smoothed prediction error is selected.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <type_traits>

#include "tether/angles.hpp"
#include "tether/errors.hpp"
#include "tether/model.hpp"

namespace tether {

template <typename Scalar = double>
class HgoGains {
 public:
  HgoGains(Scalar epsilon, Vector3<Scalar> alpha) : epsilon_(epsilon), alpha_(alpha) {
    if (!(epsilon > 0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
    // Routh-Hurwitz for s^3 + a1 s^2 + a2 s + a3.
    if (!(alpha(0) > 0 && alpha(2) > 0 && alpha(0) * alpha(1) > alpha(2))) {
      throw Error(ErrorCode::InvalidArgument, "observer polynomial is not Hurwitz");
    }
  }

  /// alpha from three real negative roots of s^3 + a1 s^2 + a2 s + a3.
  static HgoGains from_roots(Scalar epsilon, const Vector3<Scalar>& roots) {
    const Scalar r0 = roots(0), r1 = roots(1), r2 = roots(2);
    return HgoGains(epsilon, Vector3<Scalar>{-(r0 + r1 + r2), r0 * r1 + r0 * r2 + r1 * r2,
                                             -(r0 * r1 * r2)});
  }

  Scalar epsilon() const { return epsilon_; }
  const Vector3<Scalar>& alpha() const { return alpha_; }
  Vector3<Scalar> injection() const {
    return {alpha_(0) / epsilon_, alpha_(1) / (epsilon_ * epsilon_),
            alpha_(2) / (epsilon_ * epsilon_ * epsilon_)};
  }

 private:
  Scalar epsilon_;
  Vector3<Scalar> alpha_;
};

/// Box the estimate is saturated to after every step.
template <typename Scalar = double>
struct OperativeBounds {
  Vector3<Scalar> lower{Scalar(-1e6), Scalar(-20), Scalar(-200)};
  Vector3<Scalar> upper{Scalar(1e6), Scalar(20), Scalar(200)};
};

template <typename Scalar = double>
struct HgoState {
  Vector3<Scalar> z_hat = Vector3<Scalar>::Zero();
  Scalar prediction_error{};
  int sign{1};
};

/// Known quantities zeta = (u1, u1', u3, eta) for one hypothesis.
template <typename Scalar = double>
struct ObserverInputs {
  Scalar thrust{};
  Scalar thrust_rate{};
  Scalar gyro{};
  Scalar eta{};
};

template <typename Scalar = double>
struct MeasureTransform {
  Scalar eta{};  ///< signed specific link force, m/s^2
  Scalar w{};    ///< measure of z1 (mod 2 pi under the right hypothesis)
};

template <typename Scalar>
Scalar eta_magnitude(const ImuReading<Scalar>& imu, Scalar thrust, const VehicleParams<Scalar>& p) {
  using std::hypot;
  return hypot(imu.a_x, imu.a_z + p.link_length() * p.a2() * thrust);
}

template <typename Scalar>
std::optional<MeasureTransform<Scalar>> try_transform_measure(const ImuReading<Scalar>& imu,
                                                              Scalar thrust,
                                                              const VehicleParams<Scalar>& p,
                                                              int sign,
                                                              Scalar eta_min = Scalar(1e-6)) {
  using std::atan2;
  const Scalar magnitude = eta_magnitude(imu, thrust, p);
  if (!(magnitude > eta_min)) return std::nullopt;
  const Scalar s = Scalar(sign);
  const Scalar along = imu.a_z + p.link_length() * p.a2() * thrust;
  // a_x = cos(z1) eta and a_z + f/m = sin(z1) eta.
  return MeasureTransform<Scalar>{s * magnitude, atan2(s * along / magnitude, s * imu.a_x / magnitude)};
}

template <typename Scalar>
MeasureTransform<Scalar> transform_measure(const ImuReading<Scalar>& imu, Scalar thrust,
                                           const VehicleParams<Scalar>& p, int sign,
                                           Scalar eta_min = Scalar(1e-6)) {
  auto out = try_transform_measure(imu, thrust, p, sign, eta_min);
  if (!out) throw Error(ErrorCode::ZeroLinkForce, "accelerometer carries no link-force direction");
  return *out;
}

/// sin(phi) recovered from the accelerometer, clamped to [-1, 1].
template <typename Scalar>
Scalar sin_elevation_from_eta(const Vector3<Scalar>& z, Scalar thrust, Scalar eta,
                              const VehicleParams<Scalar>& p) {
  using std::sin;
  const Scalar raw = (eta / p.link_length() - z(1) * z(1) - p.a2() * sin(z(0)) * thrust) / p.a1();
  return raw > Scalar(1) ? Scalar(1) : (raw < Scalar(-1) ? Scalar(-1) : raw);
}

/// Last-row nonlinearity: d/dt of z3 = a1 cos(phi) + a2 cos(z1) u1.
template <typename Scalar>
Scalar sigma(const Vector3<Scalar>& z, const ObserverInputs<Scalar>& zeta,
             const VehicleParams<Scalar>& p) {
  using std::cos;
  using std::sin;
  const Scalar sin_phi = sin_elevation_from_eta(z, zeta.thrust, zeta.eta, p);
  return -p.a1() * z(1) * sin_phi + p.a2() * cos(z(0)) * zeta.thrust_rate -
         p.a2() * sin(z(0)) * (z(1) + zeta.gyro) * zeta.thrust;
}

namespace detail {

template <typename Scalar>
Vector3<Scalar> hgo_rate(const Vector3<Scalar>& z, const HgoGains<Scalar>& gains,
                         const ObserverInputs<Scalar>& zeta, const std::optional<Scalar>& w,
                         const VehicleParams<Scalar>& p) {
  Vector3<Scalar> rate{z(1) + zeta.gyro, z(2), sigma(z, zeta, p)};
  if (w) rate += gains.injection() * wrap_angle(*w - z(0));
  return rate;
}

}  // namespace detail

/// One RK4 step of the high-gain observer with zeta and w held over dt. An
/// absent w (no link force) drops the correction term.
template <typename Scalar>
HgoState<Scalar> hgo_step(const HgoState<Scalar>& h, const HgoGains<Scalar>& gains,
                          const ObserverInputs<Scalar>& zeta,
                          const std::optional<std::type_identity_t<Scalar>>& w,
                          std::type_identity_t<Scalar> dt, const VehicleParams<Scalar>& p,
                          const OperativeBounds<Scalar>& bounds = {}) {
  if (!(dt > 0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  const Vector3<Scalar>& z = h.z_hat;
  const Vector3<Scalar> k1 = detail::hgo_rate(z, gains, zeta, w, p);
  const Vector3<Scalar> k2 = detail::hgo_rate<Scalar>(z + dt / 2 * k1, gains, zeta, w, p);
  const Vector3<Scalar> k3 = detail::hgo_rate<Scalar>(z + dt / 2 * k2, gains, zeta, w, p);
  const Vector3<Scalar> k4 = detail::hgo_rate<Scalar>(z + dt * k3, gains, zeta, w, p);
  HgoState<Scalar> out = h;
  out.z_hat = (z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  return out;
}

/// Original state from the observer coordinates and the measured eta.
template <typename Scalar>
State<Scalar> recover_state(const Vector3<Scalar>& z_hat, Scalar thrust, Scalar eta, Scalar gyro,
                            const VehicleParams<Scalar>& p) {
  using std::atan2;
  using std::cos;
  using std::hypot;
  using std::sin;
  const Scalar cos_phi = (z_hat(2) - p.a2() * cos(z_hat(0)) * thrust) / p.a1();
  const Scalar sin_phi =
      (eta / p.link_length() - z_hat(1) * z_hat(1) - p.a2() * sin(z_hat(0)) * thrust) / p.a1();
  if (!(hypot(cos_phi, sin_phi) >= Scalar(1e-9))) {
    throw Error(ErrorCode::DegenerateRecovery, "elevation direction vector vanishes");
  }
  const Scalar phi = atan2(sin_phi, cos_phi);
  return {phi, z_hat(1), z_hat(0) - phi, gyro};
}

/// Accelerometer reading predicted at an estimate.
template <typename Scalar>
Vector2<Scalar> predicted_accel(const State<Scalar>& x_hat, Scalar thrust,
                                const VehicleParams<Scalar>& p) {
  using std::sin;
  return accelerometer_map(p, x_hat.phi + x_hat.theta, x_hat.phi_dot, Scalar(sin(x_hat.phi)), thrust);
}

/// Exact step of e' = lambda (residual - e) with the residual held over dt.
template <typename Scalar>
Scalar update_prediction_error(Scalar e, Scalar residual_norm, Scalar lambda, Scalar dt) {
  using std::exp;
  if (!(lambda > 0) || !(dt > 0)) {
    throw Error(ErrorCode::InvalidArgument, "lambda and dt must be > 0");
  }
  return residual_norm + (e - residual_norm) * exp(-lambda * dt);
}

enum class Hypothesis { Plus, Minus };

template <typename Scalar = double>
struct ObserverBankConfig {
  HgoGains<Scalar> gains = HgoGains<Scalar>::from_roots(Scalar(0.1), {Scalar(-6), Scalar(-4.5), Scalar(-3)});
  OperativeBounds<Scalar> bounds{};
  /// Discount rate of the smoothed prediction errors, 1/s.
  Scalar lambda = Scalar(5);
  /// Output tracking error under which the selected hypothesis is trusted.
  Scalar confidence_threshold = Scalar(0.02);
  /// Time the tracking error must stay under the threshold before freezing.
  Scalar confidence_dwell = Scalar(1);
  bool allow_freeze = true;
  Scalar eta_min = Scalar(1e-6);
};

/// Two HGOs on the +eta / -eta hypotheses with prediction-error selection.
///
/// Stepping is split in two so a controller can use the estimate before its
/// own output (the thrust rate) is known: `measure` consumes the IMU sample
/// and returns the selected estimate at the current time, `propagate` then
/// advances the observers to the next sample.
template <typename Scalar = double>
class ObserverBank {
 public:
  struct Candidate {
    State<Scalar> estimate;
    bool valid{false};
  };

  explicit ObserverBank(VehicleParams<Scalar> params, ObserverBankConfig<Scalar> cfg = {})
      : params_(std::move(params)), cfg_(std::move(cfg)) {
    plus_.sign = 1;
    minus_.sign = -1;
  }

  /// z_hat = (w, 0, 0) for each hypothesis from the first sample.
  void initialize(const ImuReading<Scalar>& imu, Scalar thrust) {
    for (HgoState<Scalar>* h : {&plus_, &minus_}) {
      if (auto m = try_transform_measure(imu, thrust, params_, h->sign, cfg_.eta_min)) {
        h->z_hat = {m->w, Scalar(0), Scalar(0)};
      }
    }
  }

  void set_estimates(const Vector3<Scalar>& plus, const Vector3<Scalar>& minus) {
    plus_.z_hat = plus;
    minus_.z_hat = minus;
  }

  void set_prediction_errors(Scalar plus, Scalar minus) {
    plus_.prediction_error = plus;
    minus_.prediction_error = minus;
    selected_ = plus <= minus ? Hypothesis::Plus : Hypothesis::Minus;
  }

  /// Consume one IMU sample; `tracking_error` (if known) drives the freeze.
  State<Scalar> measure(const ImuReading<Scalar>& imu, Scalar thrust, Scalar dt,
                        std::optional<Scalar> tracking_error = std::nullopt) {
    last_imu_ = imu;
    last_thrust_ = thrust;
    for (HgoState<Scalar>* h : {&plus_, &minus_}) {
      if (frozen_ && h != &active()) continue;
      Candidate& cand = candidate(*h);
      const auto m = try_transform_measure(imu, thrust, params_, h->sign, cfg_.eta_min);
      Scalar& eta = h == &plus_ ? eta_plus_ : eta_minus_;
      std::optional<Scalar>& w = h == &plus_ ? w_plus_ : w_minus_;
      eta = Scalar(h->sign) * eta_magnitude(imu, thrust, params_);
      w = m ? std::optional<Scalar>(m->w) : std::nullopt;
      try {
        State<Scalar> x = recover_state(h->z_hat, thrust, eta, imu.omega, params_);
        if (cand.valid) {
          // keep the elevation continuous across the atan2 branch cut
          const Scalar phi = unwrap_near(x.phi, cand.estimate.phi);
          x.theta -= phi - x.phi;
          x.phi = phi;
        }
        cand.estimate = x;
        cand.valid = true;
      } catch (const Error&) {
        // keep the previous candidate estimate through a degenerate sample
      }
      if (cand.valid) {
        const Vector2<Scalar> predicted = predicted_accel(cand.estimate, thrust, params_);
        const Scalar residual = (Vector2<Scalar>{imu.a_x, imu.a_z} - predicted).norm();
        h->prediction_error = update_prediction_error(h->prediction_error, residual, cfg_.lambda, dt);
      }
    }
    if (!frozen_) {
      selected_ = plus_.prediction_error <= minus_.prediction_error ? Hypothesis::Plus
                                                                     : Hypothesis::Minus;
      if (cfg_.allow_freeze && tracking_error && *tracking_error < cfg_.confidence_threshold) {
        if (selected_ == confident_) {
          confident_time_ += dt;
        } else {
          confident_ = selected_;
          confident_time_ = dt;
        }
        if (confident_time_ >= cfg_.confidence_dwell) frozen_ = true;
      } else {
        confident_time_ = Scalar(0);
      }
    }
    return estimate();
  }

  /// Advance the active observers to the next sample.
  void propagate(Scalar thrust_rate, Scalar dt) {
    for (HgoState<Scalar>* h : {&plus_, &minus_}) {
      if (frozen_ && h != &active()) continue;
      const bool is_plus = h == &plus_;
      const ObserverInputs<Scalar> zeta{last_thrust_, thrust_rate, last_imu_.omega,
                                        is_plus ? eta_plus_ : eta_minus_};
      *h = hgo_step(*h, cfg_.gains, zeta, is_plus ? w_plus_ : w_minus_, dt, params_, cfg_.bounds);
    }
  }

  /// measure + propagate for callers that know the thrust rate up front.
  State<Scalar> step(const ImuReading<Scalar>& imu, Scalar thrust, Scalar thrust_rate, Scalar dt,
                     std::optional<Scalar> tracking_error = std::nullopt) {
    const State<Scalar> x = measure(imu, thrust, dt, tracking_error);
    propagate(thrust_rate, dt);
    return x;
  }

  State<Scalar> estimate() const {
    return selected_ == Hypothesis::Plus ? plus_candidate_.estimate : minus_candidate_.estimate;
  }
  const Candidate& candidate(Hypothesis which) const {
    return which == Hypothesis::Plus ? plus_candidate_ : minus_candidate_;
  }

  Hypothesis selected() const { return selected_; }
  bool frozen() const { return frozen_; }
  const HgoState<Scalar>& plus() const { return plus_; }
  const HgoState<Scalar>& minus() const { return minus_; }
  const ObserverBankConfig<Scalar>& config() const { return cfg_; }

 private:
  HgoState<Scalar>& active() { return selected_ == Hypothesis::Plus ? plus_ : minus_; }
  Candidate& candidate(const HgoState<Scalar>& h) {
    return &h == &plus_ ? plus_candidate_ : minus_candidate_;
  }

  VehicleParams<Scalar> params_;
  ObserverBankConfig<Scalar> cfg_;
  HgoState<Scalar> plus_;
  HgoState<Scalar> minus_;
  Candidate plus_candidate_;
  Candidate minus_candidate_;
  Hypothesis selected_{Hypothesis::Plus};
  Hypothesis confident_{Hypothesis::Plus};
  Scalar confident_time_{};
  bool frozen_{false};

  ImuReading<Scalar> last_imu_{};
  Scalar last_thrust_{};
  Scalar eta_plus_{};
  Scalar eta_minus_{};
  std::optional<Scalar> w_plus_;
  std::optional<Scalar> w_minus_;
};

}  // namespace tether
