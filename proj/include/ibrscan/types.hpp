#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace ibrscan {

// A dq-frame quantity packed as a complex number: real part = d axis,
// imaginary part = q axis. Rotating a vector into a frame that leads by
// angle a is multiplication by exp(-j*a).
using Dq = std::complex<double>;
using Complex = std::complex<double>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat2c = Eigen::Matrix2cd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kNominalHz = 60.0;
inline constexpr double kOmega0 = kTwoPi * kNominalHz;

inline Dq rotate(Dq x, double angle) { return x * std::polar(1.0, angle); }

}  // namespace ibrscan
