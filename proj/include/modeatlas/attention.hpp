#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "modeatlas/common.hpp"
#include "modeatlas/rng.hpp"

namespace modeatlas {

// Particle positions on the unit circle, stored as angles in [0, 2pi).
// Positions are x_i = (cos a_i, sin a_i); keeping the angle representation
// makes the renormalization to the circle after each step exact.
struct ParticleState {
  std::vector<double> angles;
  double beta = 0.0;  // temperature
  double time = 0.0;
};

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

inline ParticleState make_state(std::vector<double> angles, double beta) {
  if (angles.empty()) throw invalid_input("ParticleState: need at least one particle");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw invalid_input("ParticleState: beta must be positive and finite");
  }
  for (double& a : angles) {
    if (!std::isfinite(a)) throw invalid_input("ParticleState: non-finite angle");
    a = wrap_angle(a);
  }
  return {std::move(angles), beta, 0.0};
}

inline ParticleState make_uniform_state(std::size_t n, double beta, std::uint64_t seed) {
  if (n == 0) throw invalid_input("make_uniform_state: n must be at least 1");
  std::vector<double> angles(n);
  SplitMix rng(derive_seed(seed, 0xa77e));
  for (double& a : angles) a = kTwoPi * rng.uniform01();
  return make_state(std::move(angles), beta);
}

namespace detail {

// Softmax-weighted angular drift at every particle:
//   V(a_i) = sum_j e^{beta(cos(a_j - a_i) - 1)} sin(a_j - a_i) / sum_j e^{...}.
// Subtracting beta in the exponent is exact max-subtraction: the self term
// attains cos = 1, so each denominator is >= 1.
inline void angular_velocity_direct(const std::vector<double>& angles, double beta,
                                    std::vector<double>& v) {
  const std::size_t n = angles.size();
  std::vector<double> c(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = std::cos(angles[i]);
    s[i] = std::sin(angles[i]);
  }
  v.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double cosd = c[i] * c[j] + s[i] * s[j];
      const double sind = c[i] * s[j] - s[i] * c[j];  // sin(a_j - a_i)
      const double w = gauss_exp(beta * (cosd - 1.0));
      num += w * sind;
      den += w;
    }
    v[i] = num / den;
  }
}

// Ratios I_m(x)/I_0(x) of modified Bessel functions by Miller's downward
// recurrence, rescaled on the fly to avoid overflow.
inline std::vector<double> bessel_ratio_table(double x, int m_max) {
  const int start = std::max(m_max, static_cast<int>(std::ceil(x))) + 40;
  std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
  v[static_cast<std::size_t>(start)] = 1e-280;
  for (int m = start; m >= 1; --m) {
    v[m - 1] = v[m + 1] + (2.0 * m / x) * v[m];
    if (v[m - 1] > 1e280) {
      for (int j = m - 1; j <= start + 1; ++j) v[j] *= 1e-280;
    }
  }
  std::vector<double> r(static_cast<std::size_t>(m_max) + 1);
  for (int m = 0; m <= m_max; ++m) r[m] = v[m] / v[0];
  return r;
}

// Same drift via the Fourier expansion of the circular kernel,
// e^{beta cos d} = sum_m I_m(beta) e^{i m d}; O(n m_max) instead of O(n^2).
// Truncation at m_max ~ 10 sqrt(beta) leaves a relative tail below e^{-50}.
inline void angular_velocity_fourier(const std::vector<double>& angles, double beta,
                                     std::vector<double>& v) {
  const std::size_t n = angles.size();
  const int m_max = std::max(16, static_cast<int>(std::ceil(10.0 * std::sqrt(beta)))) + 8;
  static thread_local double cached_beta = -1.0;
  static thread_local std::vector<double> ratios;
  if (cached_beta != beta) {
    ratios = bessel_ratio_table(beta, m_max);
    cached_beta = beta;
  }

  std::vector<double> sr(m_max + 1, 0.0), si(m_max + 1, 0.0);  // S_m = sum_k e^{-i m a_k}
  for (std::size_t k = 0; k < n; ++k) {
    const double ur = std::cos(angles[k]);
    const double ui = -std::sin(angles[k]);
    double zr = 1.0, zi = 0.0;
    for (int m = 1; m <= m_max; ++m) {
      const double nzr = zr * ur - zi * ui;
      zi = zr * ui + zi * ur;
      zr = nzr;
      sr[m] += zr;
      si[m] += zi;
    }
  }
  for (int m = 1; m <= m_max; ++m) {
    sr[m] *= ratios[m];
    si[m] *= ratios[m];
  }

  v.assign(n, 0.0);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ur = std::cos(angles[i]);
    const double ui = std::sin(angles[i]);
    double zr = 1.0, zi = 0.0;
    double den = nd, num = 0.0;
    for (int m = 1; m <= m_max; ++m) {
      const double nzr = zr * ur - zi * ui;
      zi = zr * ui + zi * ur;
      zr = nzr;
      const double re = sr[m] * zr - si[m] * zi;
      const double im = sr[m] * zi + si[m] * zr;
      den += 2.0 * re;
      num -= 2.0 * static_cast<double>(m) * im;
    }
    v[i] = num / (beta * den);
  }
}

inline bool fourier_pays_off(std::size_t n, double beta) {
  const int m_max = std::max(16, static_cast<int>(std::ceil(10.0 * std::sqrt(beta)))) + 8;
  return n >= 96 && 2 * static_cast<std::size_t>(m_max) < n;
}

}  // namespace detail

enum class RhsMethod { direct, fourier, auto_select };

inline void angular_velocity(const std::vector<double>& angles, double beta,
                             std::vector<double>& v,
                             RhsMethod method = RhsMethod::auto_select) {
  if (method == RhsMethod::auto_select) {
    method = detail::fourier_pays_off(angles.size(), beta) ? RhsMethod::fourier
                                                           : RhsMethod::direct;
  }
  if (method == RhsMethod::fourier) {
    detail::angular_velocity_fourier(angles, beta, v);
  } else {
    detail::angular_velocity_direct(angles, beta, v);
  }
}

// Velocity of every particle under the self-attention flow, as tangent
// vectors in R^2. On the circle the projected drift is purely tangential,
// so <v_i, x_i> = 0 holds by construction.
inline std::vector<Vec2> attention_rhs(const ParticleState& state) {
  std::vector<double> v;
  angular_velocity(state.angles, state.beta, v, RhsMethod::direct);
  std::vector<Vec2> out(state.angles.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = std::cos(state.angles[i]);
    const double s = std::sin(state.angles[i]);
    out[i] = {-s * v[i], c * v[i]};
  }
  return out;
}

// Classical RK4 on the angle representation; every intermediate state lives
// exactly on the circle and angles are rewrapped after each step.
// Stability wants dt <~ 0.1 / sqrt(beta): velocities are O(1) and the
// softmax switches over angular scale beta^{-1/2}.
inline ParticleState integrate(ParticleState state, double dt, int steps,
                               RhsMethod method = RhsMethod::auto_select) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw invalid_input("integrate: dt must be positive and finite");
  }
  if (steps < 0) throw invalid_input("integrate: steps must be nonnegative");
  const std::size_t n = state.angles.size();
  std::vector<double> k1, k2, k3, k4, tmp(n);
  for (int step = 0; step < steps; ++step) {
    angular_velocity(state.angles, state.beta, k1, method);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state.angles[i] + 0.5 * dt * k1[i];
    angular_velocity(tmp, state.beta, k2, method);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state.angles[i] + 0.5 * dt * k2[i];
    angular_velocity(tmp, state.beta, k3, method);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state.angles[i] + dt * k3[i];
    angular_velocity(tmp, state.beta, k4, method);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = state.angles[i] +
                       dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(a)) throw numeric_error("integrate: state became non-finite");
      state.angles[i] = wrap_angle(a);
    }
    state.time += dt;
  }
  return state;
}

struct ClusterReport {
  int count = 0;
  std::vector<double> centers;  // circular means, in [0, 2pi)
  std::vector<int> sizes;
};

// Sorts angles and merges neighbors with circular gap below
// gap_fraction * (2pi / sqrt(beta)); metastable clusters sit about
// 2pi/sqrt(beta) apart, so a quarter-spacing merge radius separates them.
inline ClusterReport count_clusters(const ParticleState& state,
                                    double gap_fraction = 0.25) {
  if (state.angles.empty()) throw invalid_input("count_clusters: empty state");
  if (!(gap_fraction > 0.0)) {
    throw invalid_input("count_clusters: gap_fraction must be positive");
  }
  const std::size_t n = state.angles.size();
  std::vector<double> a = state.angles;
  std::sort(a.begin(), a.end());
  const double threshold = gap_fraction * kTwoPi / std::sqrt(state.beta);

  // Split indices: position i marks a gap between a[i] and a[i+1 mod n].
  std::vector<std::size_t> splits;
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = (i + 1 < n) ? a[i + 1] - a[i] : a[0] + kTwoPi - a[n - 1];
    if (gap >= threshold) splits.push_back(i);
  }

  ClusterReport report;
  if (splits.empty()) {
    report.count = 1;
    double sx = 0.0, sy = 0.0;
    for (double ang : a) {
      sx += std::cos(ang);
      sy += std::sin(ang);
    }
    report.centers.push_back(wrap_angle(std::atan2(sy, sx)));
    report.sizes.push_back(static_cast<int>(n));
    return report;
  }
  report.count = static_cast<int>(splits.size());
  for (std::size_t g = 0; g < splits.size(); ++g) {
    const std::size_t begin = (splits[(g + splits.size() - 1) % splits.size()] + 1) % n;
    const std::size_t end = splits[g];  // inclusive
    double sx = 0.0, sy = 0.0;
    int size = 0;
    for (std::size_t i = begin;; i = (i + 1) % n) {
      sx += std::cos(a[i]);
      sy += std::sin(a[i]);
      ++size;
      if (i == end) break;
    }
    report.centers.push_back(wrap_angle(std::atan2(sy, sx)));
    report.sizes.push_back(size);
  }
  return report;
}

// Metastable cluster protocol: n uniform particles, horizon tau, RK4 step
// 0.05 / sqrt(beta).
inline ParticleState metastable_protocol(std::size_t n, double beta,
                                         std::uint64_t seed, double tau = 20.0) {
  ParticleState state = make_uniform_state(n, beta, seed);
  const double dt = 0.05 / std::sqrt(beta);
  const int steps = static_cast<int>(std::ceil(tau / dt));
  return integrate(std::move(state), dt, steps);
}

// Total interaction sum_{i,j} e^{beta(cos(a_i - a_j) - 1)}, i.e. the raw
// pairwise attention sum scaled by the fixed factor e^{-beta}; monotonicity
// along trajectories is unaffected by the scaling.
inline double interaction_energy(const ParticleState& state) {
  const std::size_t n = state.angles.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = state.angles[i] - state.angles[j];
      acc += gauss_exp(state.beta * (std::cos(d) - 1.0));
    }
  }
  return acc;
}

}  // namespace modeatlas
