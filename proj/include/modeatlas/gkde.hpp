#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "modeatlas/common.hpp"
#include "modeatlas/rng.hpp"

namespace modeatlas {

// A realized draw X_1..X_n together with the inverse-squared-bandwidth beta
// (kernel width h = beta^{-1/2}). Samples are kept sorted so that windowed
// evaluation can binary-search its support. Immutable after construction.
struct SampleSet {
  std::vector<double> samples;  // ascending
  std::size_t n = 0;
  double beta = 0.0;
  double bandwidth = 0.0;  // beta^{-1/2}
};

inline SampleSet make_sample_set(std::vector<double> xs, double beta) {
  if (xs.empty()) throw invalid_input("SampleSet: empty sample list");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw invalid_input("SampleSet: beta must be positive and finite");
  }
  for (double x : xs) {
    if (!std::isfinite(x)) throw invalid_input("SampleSet: non-finite sample");
  }
  std::sort(xs.begin(), xs.end());
  SampleSet s;
  s.n = xs.size();
  s.samples = std::move(xs);
  s.beta = beta;
  s.bandwidth = 1.0 / std::sqrt(beta);
  return s;
}

// n iid standard normal variates keyed by (seed, index); the stream is a pure
// function of the seed, so identical seeds yield identical sets under any
// thread schedule.
inline SampleSet draw_samples(std::size_t n, double beta, std::uint64_t seed) {
  if (n == 0) throw invalid_input("draw_samples: n must be at least 1");
  std::vector<double> xs(n);
  SplitMix rng(derive_seed(seed, 0x5a6d));
  for (std::size_t i = 0; i < n; ++i) xs[i] = draw_normal(rng);
  return make_sample_set(std::move(xs), beta);
}

namespace detail {

// Index range of samples within |t - X_i| <= window * h.
inline std::pair<std::size_t, std::size_t> sample_window(const SampleSet& s, double t,
                                                         double window) {
  if (!(window > 0.0) || !std::isfinite(window)) {
    return {0, s.samples.size()};
  }
  const double half = window * s.bandwidth;
  const auto lo = std::lower_bound(s.samples.begin(), s.samples.end(), t - half);
  const auto hi = std::upper_bound(lo, s.samples.end(), t + half);
  return {static_cast<std::size_t>(lo - s.samples.begin()),
          static_cast<std::size_t>(hi - s.samples.begin())};
}

inline void check_eval_input(const SampleSet& s, double t) {
  if (s.samples.empty()) throw invalid_input("kde: empty sample set");
  if (!std::isfinite(t)) throw invalid_input("kde: non-finite evaluation point");
}

}  // namespace detail

// KDE value (order 0) or its first/second derivative at t. Evaluation
// truncates to samples within `window` bandwidths; the dropped mass is at
// most n^{-1} sqrt(beta/2pi) e^{-window^2/2} poly(window). Pass an infinite
// window for the untruncated sum.
inline double kde_eval(const SampleSet& s, double t, int order,
                       double window = kKernelWindow) {
  detail::check_eval_input(s, t);
  if (order < 0 || order > 2) throw invalid_input("kde_eval: order must be 0, 1 or 2");
  const double beta = s.beta;
  const auto [lo, hi] = detail::sample_window(s, t, window);
  double acc = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double d = t - s.samples[i];
    const double e = gauss_exp(-0.5 * beta * d * d);
    switch (order) {
      case 0: acc += e; break;
      case 1: acc += -beta * d * e; break;
      default: acc += beta * (beta * d * d - 1.0) * e; break;
    }
  }
  return std::sqrt(beta) * kInvSqrtTwoPi / static_cast<double>(s.n) * acc;
}

struct FieldValue {
  double f = 0.0;       // F_n(t)
  double fprime = 0.0;  // F_n'(t)
};

// The rescaled field whose zero-upcrossings are exactly the KDE modes:
// F_n(t) = n^{-1/2} sum_i (t - X_i) e^{-beta (t - X_i)^2 / 2}.
inline FieldValue field_f(const SampleSet& s, double t, double window = kKernelWindow) {
  detail::check_eval_input(s, t);
  const double beta = s.beta;
  const auto [lo, hi] = detail::sample_window(s, t, window);
  double f = 0.0, fp = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double d = t - s.samples[i];
    const double e = gauss_exp(-0.5 * beta * d * d);
    f += d * e;
    fp += (1.0 - beta * d * d) * e;
  }
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(s.n));
  return {f * inv_sqrt_n, fp * inv_sqrt_n};
}

}  // namespace modeatlas
