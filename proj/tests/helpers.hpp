#pragma once

#include <random>

#include "tether/model.hpp"

namespace tether::testing {

using P = VehicleParams<double>;
using S = State<double>;
using U = Input<double>;

inline S random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-3.0, 3.0);
  std::uniform_real_distribution<double> rate(-2.0, 2.0);
  return {angle(rng), rate(rng), angle(rng), rate(rng)};
}

inline U random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> thrust(-20.0, 20.0);
  std::uniform_real_distribution<double> torque(-2.0, 2.0);
  return {thrust(rng), torque(rng)};
}

}  // namespace tether::testing
