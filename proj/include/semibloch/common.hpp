#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace semibloch {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Thrown for violated preconditions that depend on data rather than on
// programming errors (off-lattice frequencies, degenerate bands, ...).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Componentwise Brillouin folding into [-pi, pi).
inline double fold(double eta) {
  double r = eta - kTwoPi * std::floor((eta + kPi) / kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  return r;
}

template <typename Derived>
double hermitian_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace semibloch
