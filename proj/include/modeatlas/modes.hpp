#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "modeatlas/common.hpp"
#include "modeatlas/gkde.hpp"
#include "modeatlas/kacrice.hpp"

namespace modeatlas {

enum class CritKind { maximum, minimum };

struct CriticalPoint {
  double location = 0.0;
  CritKind kind = CritKind::maximum;
  double value = 0.0;  // KDE height
};

struct ModeReport {
  std::vector<CriticalPoint> criticals;  // ascending, alternating max/min
  int mode_count = 0;                    // number of maxima
  int in_tprime = 0;                     // maxima with |t| inside T'
  int in_t_not_tprime = 0;               // maxima in T \ T'
  int outside_t = 0;                     // maxima outside T
};

namespace detail {

// Bisection refinement of a bracketed sign change of the KDE derivative.
inline double refine_root(const SampleSet& s, double a, double b, double fa) {
  // Invariant: sign(f(a)) == sign(fa) != sign(f(b)), fa != 0.
  while (b - a > 1e-12 * std::max(1.0, std::fabs(0.5 * (a + b)))) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;  // interval at rounding resolution
    const double fm = kde_eval(s, mid, 1);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (fa > 0.0)) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

inline CriticalPoint classify(const SampleSet& s, double root, bool falling) {
  const double d2 = kde_eval(s, root, 2);
  CritKind kind;
  if (d2 < 0.0) {
    kind = CritKind::maximum;
  } else if (d2 > 0.0) {
    kind = CritKind::minimum;
  } else {
    kind = falling ? CritKind::maximum : CritKind::minimum;
  }
  return {root, kind, kde_eval(s, root, 0)};
}

}  // namespace detail

// Every sign change of the KDE derivative on [min X - 3h, max X + 3h], found
// on a grid of step h/8 and refined by bisection. A Gaussian mixture with
// common width h cannot oscillate below scale h, so h/8 over-resolves; the
// dense-grid oracle in the tests guards this on small instances. Tangential
// (double) roots have probability zero under continuous sampling and are not
// handled. Region counts follow the localization intervals when n >= 2.
inline ModeReport find_modes(const SampleSet& s) {
  if (s.samples.empty()) throw invalid_input("find_modes: empty sample set");
  const double h = s.bandwidth;
  const double lo = s.samples.front() - 3.0 * h;
  const double hi = s.samples.back() + 3.0 * h;
  const double step = h / 8.0;
  const auto grid_points = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;

  ModeReport report;
  double prev_t = lo;
  double prev_f = kde_eval(s, lo, 1);
  bool pending_zero = prev_f == 0.0;
  for (std::size_t k = 1; k < grid_points; ++k) {
    const double t = (k + 1 == grid_points) ? hi : lo + static_cast<double>(k) * step;
    const double f = kde_eval(s, t, 1);
    if (f == 0.0) {
      if (!pending_zero) {
        report.criticals.push_back(detail::classify(s, t, prev_f > 0.0));
        pending_zero = true;
      }
      continue;
    }
    if (pending_zero) {
      // The sign flip across an exact grid zero belongs to that critical point.
      pending_zero = false;
    } else if (prev_f != 0.0 && (f > 0.0) != (prev_f > 0.0)) {
      const double root = detail::refine_root(s, prev_t, t, prev_f);
      report.criticals.push_back(detail::classify(s, root, prev_f > 0.0));
    }
    prev_t = t;
    prev_f = f;
  }

  Belts belts;
  if (s.n >= 2) belts = intervals_T(s.n, s.beta);
  for (const CriticalPoint& c : report.criticals) {
    if (c.kind != CritKind::maximum) continue;
    ++report.mode_count;
    if (belts.Tprime.contains(c.location)) {
      ++report.in_tprime;
    } else if (belts.T.contains(c.location)) {
      ++report.in_t_not_tprime;
    } else {
      ++report.outside_t;
    }
  }
  return report;
}

// Kernel-weighted averaging toward a mode: t <- sum_i X_i w_i / sum_i w_i
// with w_i = e^{-beta (t - X_i)^2 / 2}. The KDE is non-decreasing along the
// trajectory. Defaults: tol = 1e-10 h, max_iters = 1e5.
inline double mean_shift(const SampleSet& s, double start, int max_iters = 100000,
                         double tol = -1.0) {
  if (s.samples.empty()) throw invalid_input("mean_shift: empty sample set");
  if (!std::isfinite(start)) throw invalid_input("mean_shift: non-finite start");
  if (tol < 0.0) tol = 1e-10 * s.bandwidth;
  if (!(tol > 0.0)) throw invalid_input("mean_shift: tol must be positive");
  double t = start;
  for (int it = 0; it < max_iters; ++it) {
    const auto [lo, hi] = detail::sample_window(s, t, kKernelWindow);
    double num = 0.0, den = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = t - s.samples[i];
      const double w = gauss_exp(-0.5 * s.beta * d * d);
      num += s.samples[i] * w;
      den += w;
    }
    if (den == 0.0) {
      throw diverged_start("mean_shift: all kernel weights vanished at t = " +
                           std::to_string(t));
    }
    const double next = num / den;
    const double delta = std::fabs(next - t);
    t = next;
    if (delta < tol) return t;
  }
  return t;
}

// Scale-space bound: the number of modes beyond a (on either side) is at most
// the number of samples there.
inline bool scale_space_check(const SampleSet& s, const ModeReport& report, double a) {
  int max_right = 0, max_left = 0;
  for (const CriticalPoint& c : report.criticals) {
    if (c.kind != CritKind::maximum) continue;
    if (c.location > a) ++max_right;
    if (c.location < -a) ++max_left;
  }
  const auto right = s.samples.end() -
                     std::lower_bound(s.samples.begin(), s.samples.end(), a);
  const auto left = std::upper_bound(s.samples.begin(), s.samples.end(), -a) -
                    s.samples.begin();
  return max_right <= right && max_left <= left;
}

}  // namespace modeatlas
