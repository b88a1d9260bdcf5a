#pragma once

#include <Eigen/Core>

#include "tether/errors.hpp"

namespace tether {

/// Classical fourth-order Runge-Kutta step of x' = f(x).
template <typename Derived, typename F>
typename Derived::PlainObject rk4_step(F&& f, const Eigen::MatrixBase<Derived>& x,
                                       typename Derived::Scalar dt) {
  using Vec = typename Derived::PlainObject;
  if (!(dt > 0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  const Vec x0 = x;
  const Vec k1 = f(x0);
  const Vec k2 = f(Vec(x0 + dt / 2 * k1));
  const Vec k3 = f(Vec(x0 + dt / 2 * k2));
  const Vec k4 = f(Vec(x0 + dt * k3));
  Vec out = x0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  if (!out.allFinite()) throw Error(ErrorCode::NonFiniteState, "integrator produced a non-finite state");
  return out;
}

}  // namespace tether
