#pragma once

#include <cmath>
#include <cstddef>

#include "modeatlas/common.hpp"
#include "modeatlas/quadrature.hpp"

namespace modeatlas {

// First two moments of the field pair (F_n(t), F_n'(t)). `exact` packs carry
// the closed forms of the single-kernel moments; asymptotic packs carry the
// leading-order expressions, which the belt parameters are built from.
struct MomentPack {
  double t = 0.0;
  double beta = 0.0;
  std::size_t n = 0;
  Vec2 mu;     // (E F_n, E F_n')
  Sym2 sigma;  // covariance of (F_n, F_n')
  bool exact = true;
};

// Closed-form single-kernel moments E[G^a G'^b] for a + b <= 2, where
// G = (t - X) e^{-beta (t-X)^2/2}, G' = (1 - beta (t-X)^2) e^{-beta (t-X)^2/2},
// X ~ N(0,1). Odd-in-t factors are kept multiplicative so parity is exact.
inline double exact_kernel_moment(int a, int b, double t, double beta) {
  const double t2 = t * t;
  if (a + b <= 1) {
    const double lam = beta + 1.0;
    const double e = std::exp(-0.5 * beta * t2 / lam);
    if (a == 1 && b == 0) return t * e / (lam * std::sqrt(lam));
    if (a == 0 && b == 1) return (1.0 + beta - beta * t2) * e / (lam * lam * std::sqrt(lam));
    if (a == 0 && b == 0) return 1.0;
  } else {
    const double lam = 2.0 * beta + 1.0;
    const double e = std::exp(-beta * t2 / lam);
    const double lam2 = lam * lam;
    if (a == 2 && b == 0) return (t2 + lam) * e / (lam2 * std::sqrt(lam));
    if (a == 1 && b == 1) {
      return t * (1.0 + beta - 2.0 * beta * beta - beta * t2) * e / (lam2 * lam * std::sqrt(lam));
    }
    if (a == 0 && b == 2) {
      const double b2 = beta * beta;
      const double poly = 12.0 * b2 * b2 + 4.0 * b2 * beta * (t2 + 5.0) +
                          b2 * (t2 * t2 - 2.0 * t2 + 15.0) - 2.0 * beta * (t2 - 3.0) + 1.0;
      return poly * e / (lam2 * lam2 * std::sqrt(lam));
    }
  }
  throw invalid_input("exact_kernel_moment: unsupported order");
}

inline MomentPack exact_moments(double t, double beta, std::size_t n) {
  if (!(beta > 0.0) || !std::isfinite(beta) || n < 1 || !std::isfinite(t)) {
    throw invalid_input("exact_moments: need finite t, beta > 0, n >= 1");
  }
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double eg = exact_kernel_moment(1, 0, t, beta);
  const double egp = exact_kernel_moment(0, 1, t, beta);
  MomentPack mp;
  mp.t = t;
  mp.beta = beta;
  mp.n = n;
  mp.mu = {sqrt_n * eg, sqrt_n * egp};
  mp.sigma.a11 = exact_kernel_moment(2, 0, t, beta) - eg * eg;
  mp.sigma.a12 = exact_kernel_moment(1, 1, t, beta) - eg * egp;
  mp.sigma.a22 = exact_kernel_moment(0, 2, t, beta) - egp * egp;
  mp.exact = true;
  return mp;
}

// Leading-order moments:
//   mu ~ n^{1/2} beta^{-3/2} e^{-t^2/2} (t, 1 - t^2)
//   sigma ~ 2^{-5/2} beta^{-3/2} e^{-t^2/2} [[2, -t], [-t, 3 beta]].
inline MomentPack asymptotic_moments(double t, double beta, std::size_t n) {
  if (!(beta > 0.0) || !std::isfinite(beta) || n < 1 || !std::isfinite(t)) {
    throw invalid_input("asymptotic_moments: need finite t, beta > 0, n >= 1");
  }
  const double scale = std::pow(beta, -1.5) * std::exp(-0.5 * t * t);
  const double mu_scale = std::sqrt(static_cast<double>(n)) * scale;
  const double sig_scale = 0.17677669529663688110 * scale;  // 2^{-5/2}
  MomentPack mp;
  mp.t = t;
  mp.beta = beta;
  mp.n = n;
  mp.mu = {mu_scale * t, mu_scale * (1.0 - t * t)};
  mp.sigma.a11 = sig_scale * 2.0;
  mp.sigma.a12 = sig_scale * -t;
  mp.sigma.a22 = sig_scale * 3.0 * beta;
  mp.exact = false;
  return mp;
}

// Belt parameters, built from the leading-order moments with their explicit
// prefactors: alpha_t is twice the prefactor of Sigma_t^{-1}, A_t is the
// constant term (3/2) beta alpha_t mu_{t,1}^2 of the completed square, and
// delta_t = (mu_{t,1}/t)(1 - t^2/2) with its removable singularity cancelled.
struct BeltParams {
  double A = 0.0;      // exponential decay rate of the mode density
  double alpha = 0.0;  // curvature of the conditional Gaussian in y
  double delta = 0.0;  // center of that Gaussian
  double Delta = 0.0;  // delta + sqrt(A/alpha), the Edgeworth case split
};

inline BeltParams belt_params(double t, double beta, std::size_t n) {
  if (!(beta > 0.0) || !std::isfinite(beta) || n < 1 || !std::isfinite(t)) {
    throw invalid_input("belt_params: need finite t, beta > 0, n >= 1");
  }
  const double t2 = t * t;
  const double nd = static_cast<double>(n);
  const double mu1_over_t = std::sqrt(nd) * std::pow(beta, -1.5) * std::exp(-0.5 * t2);
  const double mu1 = mu1_over_t * t;
  BeltParams bp;
  // (3/2) beta alpha mu1^2 collapses to 2^{3/2} beta^{-3/2} n t^2 e^{-t^2/2};
  // composing the factors directly would overflow e^{t^2/2} for large |t|.
  bp.A = 2.82842712474619009760 * std::pow(beta, -1.5) * nd * t2 * std::exp(-0.5 * t2);
  bp.alpha = (1.88561808316412671022) * std::sqrt(beta) * std::exp(0.5 * t2);  // 2^{5/2}/3
  bp.delta = mu1_over_t * (1.0 - 0.5 * t2);
  bp.Delta = bp.delta + std::sqrt(1.5 * beta) * std::fabs(mu1);  // sqrt(A/alpha)
  return bp;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;

  double length() const { return empty ? 0.0 : hi - lo; }
  bool contains(double t) const { return !empty && t >= lo && t <= hi; }
};

// Localization intervals: T has endpoint^2 = 2 log n - log beta - omega(beta),
// T' has endpoint^2 = 2 log n - 3 log beta and is empty once beta > n^{2/3}.
struct Belts {
  Interval T;
  Interval Tprime;
  double omega = 0.0;
};

// omega(beta) = max(1, sqrt(log log beta)); slowly growing and well defined
// for every positive beta (the max clips the small-beta branch to 1).
inline double omega_rule(double beta) {
  if (!(beta > 0.0)) throw invalid_input("omega_rule: beta must be positive");
  if (beta <= 15.154262241479262) return 1.0;  // e^e; below this sqrt(loglog) <= 1
  return std::sqrt(std::log(std::log(beta)));
}

inline Belts intervals_T(std::size_t n, double beta) {
  if (n < 2) throw invalid_input("intervals_T: n must be at least 2");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw invalid_input("intervals_T: beta must be positive and finite");
  }
  Belts b;
  b.omega = omega_rule(beta);
  const double log_n = std::log(static_cast<double>(n));
  const double log_b = std::log(beta);
  const double rad_T = 2.0 * log_n - log_b - b.omega;
  if (rad_T > 0.0) {
    const double end = std::sqrt(rad_T);
    b.T = {-end, end, false};
  }
  const double rad_Tp = 2.0 * log_n - 3.0 * log_b;
  if (rad_Tp >= 0.0) {  // beta <= n^{2/3}
    const double end = std::sqrt(rad_Tp);
    b.Tprime = {-end, end, false};
  }
  return b;
}

// Inner Kac-Rice integral under the bivariate normal approximation:
// integral over y in (0, inf) of y phi_{mu,Sigma}(0, y) dy, via the
// conditional distribution of F' given F = 0. With m, s the conditional mean
// and standard deviation, the value is pdf_F(0) (s phi(m/s) + m Phi(m/s)).
inline double kr_density(const MomentPack& mp) {
  const Sym2& s = mp.sigma;
  if (!s.positive_definite()) {
    throw invalid_moment("kr_density: sigma must be positive definite");
  }
  const double pdf0 =
      std::exp(-0.5 * mp.mu.x * mp.mu.x / s.a11) / (std::sqrt(s.a11) * kSqrtTwoPi);
  const double m = mp.mu.y - s.a12 * mp.mu.x / s.a11;
  const double var = s.a22 - s.a12 * s.a12 / s.a11;
  if (!(var > 0.0)) throw invalid_moment("kr_density: degenerate conditional variance");
  const double sd = std::sqrt(var);
  const double z = m / sd;
  return pdf0 * (sd * norm_pdf(z) + m * norm_cdf(z));
}

// Expected mode count over a bounded region, using exact moments.
inline double kr_integral(std::size_t n, double beta, const Interval& region) {
  if (region.empty || region.length() == 0.0) return 0.0;
  const double abs_tol = 1e-6 * std::sqrt(beta) * region.length();
  return integrate_adaptive(
      [&](double t) { return kr_density(exact_moments(t, beta, n)); }, region.lo,
      region.hi, abs_tol);
}

// integral over u in (0, inf) of u^k e^{-alpha u^2} du; the oracle every
// quadrature routine in the test suite is checked against.
inline double gaussian_moment(unsigned k, double alpha) {
  if (!(alpha > 0.0)) throw invalid_input("gaussian_moment: alpha must be positive");
  const double half = 0.5 * (k + 1.0);
  return 0.5 * std::tgamma(half) * std::pow(alpha, -half);
}

}  // namespace modeatlas
