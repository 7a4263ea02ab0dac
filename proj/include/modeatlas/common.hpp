#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace modeatlas {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSqrtTwoPi = 2.50662827463100050242;
inline constexpr double kInvSqrtTwoPi = 1.0 / kSqrtTwoPi;

// Gaussian kernel support truncation, in units of the bandwidth. Beyond
// 10 bandwidths the kernel factor is below e^{-50} ~ 2e-22, far under every
// tolerance in the test suite.
inline constexpr double kKernelWindow = 10.0;

struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct invalid_moment : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct insufficient_data : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct diverged_start : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Symmetric 2x2 matrix.
struct Sym2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  double det() const { return a11 * a22 - a12 * a12; }
  double trace() const { return a11 + a22; }
  bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }
};

// Lower-triangular-free 2x2 (general) matrix, used for whitening transforms.
struct Mat2 {
  double m11 = 0.0, m12 = 0.0, m21 = 0.0, m22 = 0.0;

  Vec2 apply(Vec2 v) const {
    return {m11 * v.x + m12 * v.y, m21 * v.x + m22 * v.y};
  }
  double at(int r, int c) const {
    return r == 0 ? (c == 0 ? m11 : m12) : (c == 0 ? m21 : m22);
  }
};

// Symmetric inverse square root of a positive-definite 2x2 matrix.
// sqrt(M) = (M + sI)/r with s = sqrt(det M), r = sqrt(tr M + 2s).
inline Mat2 inverse_sqrt(const Sym2& m) {
  if (!m.positive_definite()) {
    throw invalid_moment("inverse_sqrt: matrix not positive definite");
  }
  const double s = std::sqrt(m.det());
  const double r = std::sqrt(m.trace() + 2.0 * s);
  const double b11 = (m.a11 + s) / r;
  const double b12 = m.a12 / r;
  const double b22 = (m.a22 + s) / r;
  const double det = b11 * b22 - b12 * b12;
  return {b22 / det, -b12 / det, -b12 / det, b11 / det};
}

inline double norm_pdf(double x) { return kInvSqrtTwoPi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Standard bivariate normal density on R^2 (identity covariance).
inline double norm2_pdf(Vec2 x) {
  return std::exp(-0.5 * (x.x * x.x + x.y * x.y)) / kTwoPi;
}

// exp with explicit flush of deeply negative arguments; keeps windowed and
// unwindowed kernel sums bit-comparable.
inline double gauss_exp(double arg) { return arg < -745.0 ? 0.0 : std::exp(arg); }

}  // namespace modeatlas
