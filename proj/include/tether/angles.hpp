#pragma once

#include <cmath>
#include <numbers>

namespace tether {

/// Unique representative of `angle` in (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  using std::floor;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar two_pi = Scalar(2) * pi;
  Scalar wrapped = angle - two_pi * floor((angle + pi) / two_pi);
  // floor maps the half-open interval to [-pi, pi); move -pi to +pi.
  if (wrapped <= -pi) wrapped += two_pi;
  return wrapped;
}

/// `angle` shifted by a multiple of 2*pi to lie closest to `reference`.
template <typename Scalar>
Scalar unwrap_near(Scalar angle, Scalar reference) {
  return reference + wrap_angle(angle - reference);
}

}  // namespace tether
