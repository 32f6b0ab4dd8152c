#pragma once

#include "cmeta/core.hpp"

#include <cmath>

namespace cmeta {

/// Population-level contrast Phi(x, y) between the treated event probability
/// x and the control event probability y.
template <typename Scalar>
Scalar contrast_value(Measure m, Scalar x, Scalar y) {
  using std::log;
  switch (m) {
    case Measure::RD: return x - y;
    case Measure::RR: return x / y;
    case Measure::LogRR: return log(x) - log(y);
    case Measure::OR: return (x * (Scalar(1) - y)) / ((Scalar(1) - x) * y);
    case Measure::LogOR: return (log(x) - log(Scalar(1) - x)) - (log(y) - log(Scalar(1) - y));
  }
  return Scalar(0);
}

/// (dPhi/dx, dPhi/dy).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> contrast_gradient(Measure m, Scalar x, Scalar y) {
  Eigen::Matrix<Scalar, 2, 1> g;
  const Scalar one(1);
  switch (m) {
    case Measure::RD:
      g << one, -one;
      break;
    case Measure::RR:
      g << one / y, -x / (y * y);
      break;
    case Measure::LogRR:
      g << one / x, -one / y;
      break;
    case Measure::OR: {
      const Scalar odds_x = x / (one - x);
      const Scalar inv_odds_y = (one - y) / y;
      g << inv_odds_y / ((one - x) * (one - x)), -odds_x / (y * y);
      break;
    }
    case Measure::LogOR:
      g << one / (x * (one - x)), -one / (y * (one - y));
      break;
  }
  return g;
}

/// Whether (x, y) lies where Phi and its gradient are finite. RD accepts the
/// closed square; the RR family needs positive rates and the OR family needs
/// rates strictly inside (0, 1).
bool in_domain(Measure m, double x, double y);

/// Value-semantic handle bundling a measure with its value and gradient.
struct ContrastFunction {
  Measure kind = Measure::RD;

  template <typename Scalar>
  Scalar value(Scalar x, Scalar y) const {
    return contrast_value(kind, x, y);
  }
  template <typename Scalar>
  Eigen::Matrix<Scalar, 2, 1> gradient(Scalar x, Scalar y) const {
    return contrast_gradient(kind, x, y);
  }
  bool contains(double x, double y) const { return in_domain(kind, x, y); }
};

}  // namespace cmeta
