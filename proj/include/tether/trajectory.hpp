#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "tether/errors.hpp"

namespace tether {

template <typename Scalar>
using Jet = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Polynomial blend from y0 (t <= t0) to yf (t >= tf). With continuity k the
/// blend is the odd-degree 2k+1 polynomial whose derivatives 1..k vanish at
/// both ends; derivative k+1 is still available but jumps at the ends.
template <typename Scalar = double>
class SmoothStep {
 public:
  SmoothStep(Scalar t0, Scalar tf, Scalar y0, Scalar yf, int continuity)
      : t0_(t0), tf_(tf), y0_(y0), yf_(yf), continuity_(continuity) {
    if (!(tf > t0)) throw Error(ErrorCode::InvalidArgument, "smooth step needs tf > t0");
    if (continuity < 1) throw Error(ErrorCode::InvalidArgument, "continuity order must be >= 1");
    build_derivative_table();
  }

  Scalar start_time() const { return t0_; }
  Scalar end_time() const { return tf_; }
  Scalar start_value() const { return y0_; }
  Scalar end_value() const { return yf_; }
  int continuity() const { return continuity_; }

  /// Value followed by derivatives 1..max_order at time t.
  Jet<Scalar> eval(Scalar t, int max_order) const {
    if (max_order < 0 || max_order > continuity_ + 1) {
      throw Error(ErrorCode::OrderUnavailable,
                  "requested order " + std::to_string(max_order) + " exceeds continuity + 1 = " +
                      std::to_string(continuity_ + 1));
    }
    Jet<Scalar> jet = Jet<Scalar>::Zero(max_order + 1);
    if (t <= t0_) {
      jet(0) = y0_;
      return jet;
    }
    if (t >= tf_) {
      jet(0) = yf_;
      return jet;
    }
    const Scalar span = tf_ - t0_;
    const Scalar tau = (t - t0_) / span;
    const Scalar amplitude = yf_ - y0_;
    Scalar time_scale = Scalar(1);
    for (int order = 0; order <= max_order; ++order) {
      const Scalar blend = horner(derivatives_[order], tau);
      jet(order) = amplitude * blend / time_scale;
      time_scale *= span;
    }
    jet(0) += y0_;
    return jet;
  }

 private:
  static Scalar horner(const std::vector<Scalar>& coeffs, Scalar tau) {
    Scalar acc = Scalar(0);
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * tau + *it;
    return acc;
  }

  // s(tau) = tau^(k+1) * sum_j C(k+j, j) (1 - tau)^j, expanded in monomials.
  void build_derivative_table() {
    const int k = continuity_;
    std::vector<Scalar> blend(2 * k + 2, Scalar(0));
    std::vector<Scalar> one_minus_pow{Scalar(1)};
    Scalar binom = Scalar(1);
    for (int j = 0; j <= k; ++j) {
      for (std::size_t i = 0; i < one_minus_pow.size(); ++i) {
        blend[i + k + 1] += binom * one_minus_pow[i];
      }
      std::vector<Scalar> next(one_minus_pow.size() + 1, Scalar(0));
      for (std::size_t i = 0; i < one_minus_pow.size(); ++i) {
        next[i] += one_minus_pow[i];
        next[i + 1] -= one_minus_pow[i];
      }
      one_minus_pow = std::move(next);
      binom = binom * Scalar(k + j + 1) / Scalar(j + 1);
    }
    derivatives_.clear();
    derivatives_.push_back(blend);
    for (int order = 1; order <= k + 1; ++order) {
      const auto& prev = derivatives_.back();
      std::vector<Scalar> next(prev.size() > 1 ? prev.size() - 1 : 1, Scalar(0));
      for (std::size_t i = 1; i < prev.size(); ++i) next[i - 1] = prev[i] * Scalar(i);
      derivatives_.push_back(std::move(next));
    }
  }

  Scalar t0_;
  Scalar tf_;
  Scalar y0_;
  Scalar yf_;
  int continuity_;
  std::vector<std::vector<Scalar>> derivatives_;
};

}  // namespace tether
