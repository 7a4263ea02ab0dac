#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "modeatlas/common.hpp"
#include "modeatlas/kacrice.hpp"
#include "modeatlas/parallel.hpp"
#include "modeatlas/quadrature.hpp"
#include "modeatlas/rng.hpp"

namespace modeatlas {

// Third cumulants of the standardized single-kernel vector
// Y(t) = Sigma_t^{-1/2} (G - EG, G' - EG'), plus moment diagnostics.
// kappa[k] holds the cumulant with k powers of the first coordinate.
struct EdgeworthPack {
  double t = 0.0;
  double beta = 0.0;
  std::array<double, 4> kappa{};  // kappa[k] = kappa^{(k, 3-k)}
  double eta3 = 0.0;              // E ||Y||^3
  double eta_bound3 = 0.0;        // (beta e^{t^2})^{1/4}
};

namespace detail {

// Raw moment E[G^a G'^b] with Z ~ N(t, 1), via the completed square: the
// integrand's Gaussian factor has total weight e^{-lambda u^2 / 2} with
// lambda = (a+b) beta + 1, so a Gauss-Hermite rule in u integrates the
// remaining polynomial exactly. Node pairs are mirrored, which makes
// odd-in-t moments vanish bit-exactly at t = 0.
inline double raw_moment_gh(int a, int b, double t, double beta) {
  const double lam = static_cast<double>(a + b) * beta + 1.0;
  const double center = t / lam;
  const double scale = 1.0 / std::sqrt(lam);
  const double pref = std::exp(-0.5 * (lam - 1.0) / lam * t * t) * scale;
  auto poly = [&](double u) {
    const double z = center + scale * u;
    double out = 1.0;
    for (int i = 0; i < a; ++i) out *= z;
    const double gp = 1.0 - beta * z * z;
    for (int j = 0; j < b; ++j) out *= gp;
    return out;
  };
  return pref * gh200().normal_expectation(poly);
}

inline double binom(int n, int k) {
  static const double table[4][4] = {
      {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  return table[n][k];
}

}  // namespace detail

inline EdgeworthPack standardized_cumulants(double t, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta) || !std::isfinite(t)) {
    throw invalid_input("standardized_cumulants: need finite t and beta > 0");
  }
  double raw[4][4] = {};
  for (int a = 0; a <= 3; ++a) {
    for (int b = 0; a + b <= 3; ++b) {
      raw[a][b] = (a + b == 0) ? 1.0 : detail::raw_moment_gh(a, b, t, beta);
    }
  }
  const double m1 = raw[1][0];
  const double m2 = raw[0][1];
  Sym2 sigma;
  sigma.a11 = raw[2][0] - m1 * m1;
  sigma.a12 = raw[1][1] - m1 * m2;
  sigma.a22 = raw[0][2] - m2 * m2;
  const Mat2 white = inverse_sqrt(sigma);

  // Central third moments of (G - m1, G' - m2) by binomial expansion.
  auto central = [&](int a, int b) {
    double acc = 0.0;
    for (int i = 0; i <= a; ++i) {
      for (int j = 0; j <= b; ++j) {
        double term = detail::binom(a, i) * detail::binom(b, j) * raw[i][j];
        for (int p = 0; p < a - i; ++p) term *= -m1;
        for (int q = 0; q < b - j; ++q) term *= -m2;
        acc += term;
      }
    }
    return acc;
  };
  const double c3[4] = {central(0, 3), central(1, 2), central(2, 1), central(3, 0)};

  EdgeworthPack ep;
  ep.t = t;
  ep.beta = beta;
  // kappa^{(k,3-k)} = E[Y_1^k Y_2^{3-k}]: push the whitening through the
  // third-moment tensor of the centered pair.
  for (int k = 0; k <= 3; ++k) {
    int q[3];
    for (int r = 0; r < 3; ++r) q[r] = r < k ? 0 : 1;
    double acc = 0.0;
    for (int p0 = 0; p0 < 2; ++p0) {
      for (int p1 = 0; p1 < 2; ++p1) {
        for (int p2 = 0; p2 < 2; ++p2) {
          const int ones = p0 + p1 + p2;
          acc += white.at(q[0], p0) * white.at(q[1], p1) * white.at(q[2], p2) *
                 c3[3 - ones];
        }
      }
    }
    ep.kappa[k] = acc;
  }

  // eta3 = E ||Y||^3. Outside |z| <= 12 h the kernel pair vanishes to double
  // precision and ||Y(z)|| is the constant ||Sigma^{-1/2} m||.
  const double zc = 12.0 / std::sqrt(beta);
  const Vec2 tail_y = white.apply({-m1, -m2});
  const double tail_val = std::pow(tail_y.x * tail_y.x + tail_y.y * tail_y.y, 1.5);
  auto norm3 = [&](double z) {
    const double e = gauss_exp(-0.5 * beta * z * z);
    const Vec2 y = white.apply({z * e - m1, (1.0 - beta * z * z) * e - m2});
    return std::pow(y.x * y.x + y.y * y.y, 1.5) * norm_pdf(z - t);
  };
  const double window = integrate_adaptive(norm3, -zc, zc,
                                           1e-9 * (1.0 + std::fabs(tail_val)), 1e-10);
  const double tail_mass = 1.0 - (norm_cdf(zc - t) - norm_cdf(-zc - t));
  ep.eta3 = window + tail_val * tail_mass;
  ep.eta_bound3 = std::pow(beta, 0.25) * std::exp(0.25 * t * t);
  return ep;
}

// Bivariate Hermite polynomial H^{(a1,a2)}(x) = He_{a1}(x_1) He_{a2}(x_2)
// (the identity covariance factorizes the derivative of phi).
inline double hermite2(int a1, int a2, Vec2 x) {
  if (a1 < 0 || a2 < 0 || a1 + a2 > 3) {
    throw invalid_input("hermite2: multi-index order must be between 0 and 3");
  }
  auto he = [](int k, double v) {
    switch (k) {
      case 0: return 1.0;
      case 1: return v;
      case 2: return v * v - 1.0;
      default: return v * v * v - 3.0 * v;
    }
  };
  return he(a1, x.x) * he(a2, x.y);
}

// psi(x) = phi(x) sum_k kappa^{(k,3-k)} / (k! (3-k)!) H^{(k,3-k)}(x).
inline double psi_eval(const EdgeworthPack& ep, Vec2 x) {
  static constexpr double inv_fact[4] = {1.0 / 6.0, 0.5, 0.5, 1.0 / 6.0};
  double sum = 0.0;
  for (int k = 0; k <= 3; ++k) {
    sum += ep.kappa[k] * inv_fact[k] * hermite2(k, 3 - k, x);
  }
  return norm2_pdf(x) * sum;
}

// Two-term Edgeworth model phi + n^{-1/2} psi for the standardized density.
inline double edgeworth_density(const EdgeworthPack& ep, std::size_t n, Vec2 x) {
  if (n < 1) throw invalid_input("edgeworth_density: n must be at least 1");
  return norm2_pdf(x) + psi_eval(ep, x) / std::sqrt(static_cast<double>(n));
}

namespace detail {

// Deterministic binomial sampler: inverse transform enumerated outward from
// the mode, one uniform per draw. Expected work is O(sd).
inline std::size_t binomial_draw(SplitMix& rng, std::size_t n, double p) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  const double u = rng.uniform01();
  const double nd = static_cast<double>(n);
  auto log_pmf = [&](std::size_t k) {
    const double kd = static_cast<double>(k);
    return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
           kd * std::log(p) + (nd - kd) * std::log1p(-p);
  };
  const auto k0 = std::min<std::size_t>(n, static_cast<std::size_t>((nd + 1.0) * p));
  double p_lo = std::exp(log_pmf(k0));
  double p_hi = p_lo;
  std::size_t lo = k0, hi = k0;
  double cum = p_lo;
  if (u <= cum) return k0;
  const double odds = p / (1.0 - p);
  for (;;) {
    bool moved = false;
    if (lo > 0) {
      p_lo *= static_cast<double>(lo) / (odds * (nd - static_cast<double>(lo) + 1.0));
      --lo;
      cum += p_lo;
      if (u <= cum) return lo;
      moved = true;
    }
    if (hi < n) {
      p_hi *= odds * (nd - static_cast<double>(hi)) / (static_cast<double>(hi) + 1.0);
      ++hi;
      cum += p_hi;
      if (u <= cum) return hi;
      moved = true;
    }
    if (!moved) return hi;  // full support exhausted; rounding left u uncovered
  }
}

}  // namespace detail

struct ValidityRecord {
  double t = 0.0;
  double beta = 0.0;
  std::size_t n = 0;
  std::size_t trials = 0;
  int bins_per_axis = 60;
  double l1_phi = 0.0;        // distance to phi alone
  double l1_edgeworth = 0.0;  // distance to phi + n^{-1/2} psi
  bool improved = false;
};

// Simulates `trials` standardized field vectors Sigma^{-1/2}((F_n,F_n') - mu)
// at a fixed t, bins them on [-6,6]^2 (60x60), and measures the L1 distance
// of the empirical histogram to the plain normal model and to the Edgeworth-
// corrected one. Sampling draws only the kernel-window samples per trial:
// the in-window count is Binomial(n, p) and the positions are truncated
// normals, which reproduces the full-sample field to double precision.
inline ValidityRecord validity_diagnostic(std::size_t n, double beta, double t,
                                          std::size_t trials, std::uint64_t seed,
                                          unsigned threads = 0) {
  if (trials < 100) throw invalid_input("validity_diagnostic: need trials >= 100");
  const MomentPack mp = exact_moments(t, beta, n);
  const Mat2 white = inverse_sqrt(mp.sigma);
  const double h = 1.0 / std::sqrt(beta);
  const double x_lo = t - kKernelWindow * h;
  const double x_hi = t + kKernelWindow * h;
  const double cdf_lo = norm_cdf(x_lo);
  const double cdf_hi = norm_cdf(x_hi);
  const double p_window = cdf_hi - cdf_lo;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  constexpr int kBins = 60;
  constexpr double kLo = -6.0, kHi = 6.0;
  constexpr double kBinWidth = (kHi - kLo) / kBins;
  const std::size_t chunk_count = 64;
  std::vector<std::vector<std::uint32_t>> partial(
      chunk_count, std::vector<std::uint32_t>(kBins * kBins, 0));

  parallel_for(
      chunk_count,
      [&](std::size_t chunk) {
        auto& histo = partial[chunk];
        const std::size_t begin = chunk * trials / chunk_count;
        const std::size_t end = (chunk + 1) * trials / chunk_count;
        for (std::size_t trial = begin; trial < end; ++trial) {
          SplitMix rng(derive_seed(seed, 0xed6e, trial));
          const std::size_t k = detail::binomial_draw(rng, n, p_window);
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t i = 0; i < k; ++i) {
            const double u = cdf_lo + rng.uniform01() * (cdf_hi - cdf_lo);
            const double x = norm_quantile(u);
            const double d = t - x;
            const double e = gauss_exp(-0.5 * beta * d * d);
            s1 += d * e;
            s2 += (1.0 - beta * d * d) * e;
          }
          const Vec2 field{s1 * inv_sqrt_n, s2 * inv_sqrt_n};
          const Vec2 y = white.apply({field.x - mp.mu.x, field.y - mp.mu.y});
          const int bx = static_cast<int>(std::floor((y.x - kLo) / kBinWidth));
          const int by = static_cast<int>(std::floor((y.y - kLo) / kBinWidth));
          if (bx >= 0 && bx < kBins && by >= 0 && by < kBins) {
            ++histo[static_cast<std::size_t>(bx) * kBins + by];
          }
        }
      },
      threads);

  std::vector<std::uint64_t> histo(kBins * kBins, 0);
  for (const auto& part : partial) {
    for (std::size_t b = 0; b < histo.size(); ++b) histo[b] += part[b];
  }

  const EdgeworthPack ep = standardized_cumulants(t, beta);
  const double cell = kBinWidth * kBinWidth;
  double l1_phi = 0.0, l1_edge = 0.0;
  for (int bx = 0; bx < kBins; ++bx) {
    const double cx = kLo + (bx + 0.5) * kBinWidth;
    for (int by = 0; by < kBins; ++by) {
      const double cy = kLo + (by + 0.5) * kBinWidth;
      const double emp = static_cast<double>(histo[static_cast<std::size_t>(bx) * kBins + by]) /
                         static_cast<double>(trials);
      const double phi_mass = norm2_pdf({cx, cy}) * cell;
      const double edge_mass = edgeworth_density(ep, n, {cx, cy}) * cell;
      l1_phi += std::fabs(emp - phi_mass);
      l1_edge += std::fabs(emp - edge_mass);
    }
  }

  ValidityRecord rec;
  rec.t = t;
  rec.beta = beta;
  rec.n = n;
  rec.trials = trials;
  rec.l1_phi = l1_phi;
  rec.l1_edgeworth = l1_edge;
  rec.improved = l1_edge <= l1_phi;
  return rec;
}

}  // namespace modeatlas
