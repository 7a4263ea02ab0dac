#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "modeatlas/common.hpp"

namespace modeatlas {

namespace detail {

// Implicit-shift QL iteration for a symmetric tridiagonal matrix, tracking
// only the first row of the eigenvector matrix (Golub-Welsch needs nothing
// else). d: diagonal, e: subdiagonal (e[i] couples i and i+1).
inline void tridiag_eigen_first_row(std::vector<double>& d, std::vector<double>& e,
                                    std::vector<double>& z) {
  const std::size_t n = d.size();
  z.assign(n, 0.0);
  z[0] = 1.0;
  if (n == 1) return;
  e.resize(n, 0.0);
  const double eps = 2.22e-16;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (++iter > 60) throw numeric_error("tridiagonal QL failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflowed = false;
        for (std::size_t ii = m; ii-- > l;) {
          double f = s * e[ii];
          const double b = c * e[ii];
          r = std::hypot(f, g);
          e[ii + 1] = r;
          if (r == 0.0) {
            d[ii + 1] -= p;
            e[m] = 0.0;
            underflowed = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[ii + 1] - p;
          r = (d[ii] - g) * s + 2.0 * c * b;
          p = s * r;
          d[ii + 1] = g + p;
          g = c * r - b;
          f = z[ii + 1];
          z[ii + 1] = s * z[ii] + c * f;
          z[ii] = c * z[ii] - s * f;
        }
        if (underflowed) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

// Gauss-Hermite rule for the weight e^{-x^2}, stored as mirrored node pairs
// so that symmetric integrands cancel odd parts exactly.
struct GaussHermite {
  std::vector<double> pos_nodes;    // strictly positive nodes, ascending
  std::vector<double> pos_weights;  // matching weights
  double center_weight = 0.0;       // weight at x = 0 (odd rules only)
  bool has_center = false;

  // E[f(U)] for U ~ N(0,1); summed over mirrored pairs.
  template <class F>
  double normal_expectation(F&& f) const {
    double acc = has_center ? center_weight * f(0.0) : 0.0;
    for (std::size_t i = 0; i < pos_nodes.size(); ++i) {
      const double u = 1.41421356237309504880 * pos_nodes[i];
      acc += pos_weights[i] * (f(u) + f(-u));
    }
    return acc / 1.77245385090551602730;  // sqrt(pi)
  }
};

inline GaussHermite gauss_hermite(std::size_t n) {
  if (n == 0) throw invalid_input("gauss_hermite: order must be positive");
  std::vector<double> d(n, 0.0), e(n, 0.0), z;
  for (std::size_t k = 0; k + 1 < n; ++k) e[k] = std::sqrt(0.5 * (k + 1));
  detail::tridiag_eigen_first_row(d, e, z);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  const double mu0 = 1.77245385090551602730;  // integral of e^{-x^2}
  GaussHermite rule;
  rule.pos_nodes.reserve(n / 2);
  rule.pos_weights.reserve(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t lo = idx[i], hi = idx[n - 1 - i];
    const double x = 0.5 * (d[hi] - d[lo]);
    const double w = 0.5 * mu0 * (z[lo] * z[lo] + z[hi] * z[hi]);
    rule.pos_nodes.push_back(x);
    rule.pos_weights.push_back(w);
  }
  std::reverse(rule.pos_nodes.begin(), rule.pos_nodes.end());
  std::reverse(rule.pos_weights.begin(), rule.pos_weights.end());
  if (n % 2 == 1) {
    rule.has_center = true;
    rule.center_weight = mu0 * z[idx[n / 2]] * z[idx[n / 2]];
  }
  return rule;
}

// Shared 200-node rule; enough for every polynomial moment in this project.
inline const GaussHermite& gh200() {
  static const GaussHermite rule = gauss_hermite(200);
  return rule;
}

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr double kGK15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kGK15WeightsK[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kGK15WeightsG[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
void gk15(F&& f, double a, double b, double& integral, double& error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double resk = 0.0, resg = 0.0;
  for (int j = 0; j < 8; ++j) {
    const double dx = h * kGK15Nodes[j];
    const double fsum = (j == 7) ? f(c) : f(c - dx) + f(c + dx);
    resk += kGK15WeightsK[j] * fsum;
    if (j % 2 == 1) resg += kGK15WeightsG[j / 2] * fsum;
  }
  integral = resk * h;
  error = std::fabs((resk - resg) * h);
}

template <class F>
double adaptive_gk_rec(F&& f, double a, double b, double abs_tol, double rel_tol,
                       int depth) {
  double integral, error;
  gk15(f, a, b, integral, error);
  if (error <= abs_tol || error <= rel_tol * std::fabs(integral)) return integral;
  if (depth >= 52) {
    throw numeric_error("adaptive quadrature: depth limit reached on [" +
                        std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  const double c = 0.5 * (a + b);
  return adaptive_gk_rec(f, a, c, 0.5 * abs_tol, rel_tol, depth + 1) +
         adaptive_gk_rec(f, c, b, 0.5 * abs_tol, rel_tol, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Kronrod integration over a bounded interval. Accepts a
// subinterval when the Kronrod-vs-Gauss discrepancy falls below the local
// share of abs_tol or below rel_tol relative to the local integral.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol,
                          double rel_tol = 1e-12) {
  if (!(a <= b)) throw invalid_input("integrate_adaptive: bad interval");
  if (a == b) return 0.0;
  if (!(abs_tol > 0.0)) abs_tol = 1e-14;
  return detail::adaptive_gk_rec(f, a, b, abs_tol, rel_tol, 0);
}

}  // namespace modeatlas
