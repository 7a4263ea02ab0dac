#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "modeatlas/common.hpp"
#include "modeatlas/gkde.hpp"
#include "modeatlas/kacrice.hpp"
#include "modeatlas/modes.hpp"
#include "modeatlas/parallel.hpp"
#include "modeatlas/rng.hpp"

namespace modeatlas {

// One Monte Carlo trial of the mode-counting experiment.
struct SweepRecord {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double beta = 0.0;
  int trial = 0;
  int mode_count = 0;
  int in_tprime = 0;
  int in_t_not_tprime = 0;
  int outside_t = 0;
};

struct FitResult {
  double amplitude = 0.0;
  double exponent = 0.0;
  double r2 = 0.0;
  int points = 0;
};

inline std::vector<double> geometric_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) {
    throw invalid_input("geometric_grid: need 0 < lo < hi and points >= 2");
  }
  std::vector<double> grid(points);
  const double log_ratio = std::log(hi / lo);
  for (int i = 0; i < points; ++i) {
    grid[i] = lo * std::exp(log_ratio * i / (points - 1));
  }
  grid.back() = hi;
  return grid;
}

// Runs trials at every beta in the grid. Per-trial seeds derive from
// (master_seed, beta index, trial index), so the record list is a pure
// function of the arguments under any thread schedule. Records are ordered
// beta-major, trial-minor.
inline std::vector<SweepRecord> run_sweep(std::size_t n,
                                          const std::vector<double>& beta_grid,
                                          int trials, std::uint64_t master_seed,
                                          unsigned threads = 0) {
  if (trials < 1) throw invalid_input("run_sweep: need trials >= 1");
  if (beta_grid.empty()) throw invalid_input("run_sweep: empty beta grid");
  for (double b : beta_grid) {
    if (!(b > 0.0)) throw invalid_input("run_sweep: beta must be positive");
  }
  std::vector<SweepRecord> records(beta_grid.size() * static_cast<std::size_t>(trials));
  parallel_for(
      records.size(),
      [&](std::size_t idx) {
        const std::size_t bi = idx / static_cast<std::size_t>(trials);
        const int trial = static_cast<int>(idx % static_cast<std::size_t>(trials));
        const std::uint64_t seed =
            derive_seed(master_seed, bi, static_cast<std::uint64_t>(trial));
        const SampleSet s = draw_samples(n, beta_grid[bi], seed);
        const ModeReport report = find_modes(s);
        records[idx] = {seed,
                        n,
                        beta_grid[bi],
                        trial,
                        report.mode_count,
                        report.in_tprime,
                        report.in_t_not_tprime,
                        report.outside_t};
      },
      threads);
  return records;
}

// Mean mode count per beta; integer sums keep the means exact under record
// permutations.
inline std::map<double, double> mean_counts_by_beta(const std::vector<SweepRecord>& records) {
  std::map<double, std::pair<long long, long long>> acc;
  for (const SweepRecord& r : records) {
    auto& [sum, count] = acc[r.beta];
    sum += r.mode_count;
    ++count;
  }
  std::map<double, double> means;
  for (const auto& [beta, sc] : acc) {
    means[beta] = static_cast<double>(sc.first) / static_cast<double>(sc.second);
  }
  return means;
}

// Ordinary least squares of log(mean mode count) on log beta.
inline FitResult power_law_fit(const std::vector<SweepRecord>& records) {
  const auto means = mean_counts_by_beta(records);
  if (means.size() < 3) {
    throw insufficient_data("power_law_fit: need at least 3 distinct beta values");
  }
  const auto m = static_cast<double>(means.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [beta, mean] : means) {
    sx += std::log(beta);
    sy += std::log(mean);
  }
  const double xbar = sx / m, ybar = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [beta, mean] : means) {
    const double dx = std::log(beta) - xbar;
    const double dy = std::log(mean) - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw insufficient_data("power_law_fit: beta values coincide");
  FitResult fit;
  fit.exponent = sxy / sxx;
  fit.amplitude = std::exp(ybar - fit.exponent * xbar);
  fit.points = static_cast<int>(means.size());
  if (syy > 0.0) {
    double sse = 0.0;
    for (const auto& [beta, mean] : means) {
      const double resid = std::log(mean) - (ybar + fit.exponent * (std::log(beta) - xbar));
      sse += resid * resid;
    }
    fit.r2 = std::min(1.0, std::max(0.0, 1.0 - sse / syy));
  } else {
    fit.r2 = 1.0;
  }
  return fit;
}

struct SweepSummary {
  std::size_t n = 0;
  std::vector<double> betas;
  std::vector<double> means;
  std::vector<double> stderrs;
  FitResult fit;
};

inline SweepSummary summarize_sweep(const std::vector<SweepRecord>& records,
                                    std::size_t n) {
  std::map<double, std::vector<int>> by_beta;
  for (const SweepRecord& r : records) by_beta[r.beta].push_back(r.mode_count);
  SweepSummary summary;
  summary.n = n;
  for (const auto& [beta, counts] : by_beta) {
    long long sum = 0;
    for (int c : counts) sum += c;
    const double mean = static_cast<double>(sum) / static_cast<double>(counts.size());
    double ss = 0.0;
    for (int c : counts) ss += (c - mean) * (c - mean);
    const double var = counts.size() > 1 ? ss / (static_cast<double>(counts.size()) - 1.0) : 0.0;
    summary.betas.push_back(beta);
    summary.means.push_back(mean);
    summary.stderrs.push_back(std::sqrt(var / static_cast<double>(counts.size())));
  }
  summary.fit = power_law_fit(records);
  return summary;
}

// Tail bound check: mean mode count outside T against three times the
// explicit bound 2 sqrt(beta e^{omega(beta)}).
inline bool tail_check(const std::vector<SweepRecord>& records, std::size_t n,
                       double beta) {
  long long sum = 0, count = 0;
  for (const SweepRecord& r : records) {
    if (r.n == n && r.beta == beta) {
      sum += r.outside_t;
      ++count;
    }
  }
  if (count == 0) throw insufficient_data("tail_check: no records at (n, beta)");
  const double mean_outside = static_cast<double>(sum) / static_cast<double>(count);
  const double bound = 2.0 * std::sqrt(beta * std::exp(omega_rule(beta)));
  return mean_outside <= 3.0 * bound;
}

struct ModeHistogram {
  std::size_t n = 0;
  double beta = 0.0;
  int trials = 0;
  Belts belts;
  double limit = 0.0;  // bins cover [-limit, limit]
  std::vector<double> bin_centers;
  std::vector<std::uint64_t> counts;    // pooled mode locations per bin
  std::vector<double> empirical;        // counts normalized to unit mass over T
  std::vector<double> kr_overlay;       // kr_density at centers, same normalization
  double l1_over_T = 0.0;               // L1 distance restricted to T bins
  std::uint64_t pooled_modes = 0;
};

// Pools mode locations over seeded trials and bins them against the
// Kac-Rice density evaluated at the bin centers.
inline ModeHistogram mode_histogram(std::size_t n, double beta, int trials, int bins,
                                    std::uint64_t master_seed, unsigned threads = 0) {
  if (bins < 20) throw invalid_input("mode_histogram: need bins >= 20");
  if (trials < 1) throw invalid_input("mode_histogram: need trials >= 1");
  const Belts belts = intervals_T(n, beta);
  if (belts.T.empty) {
    throw invalid_input("mode_histogram: localization interval T is empty at (n, beta)");
  }
  const double limit = belts.T.hi + 1.0;
  const double width = 2.0 * limit / bins;

  const std::size_t chunk_count = 64;
  std::vector<std::vector<std::uint32_t>> partial(
      chunk_count, std::vector<std::uint32_t>(bins, 0));
  parallel_for(
      chunk_count,
      [&](std::size_t chunk) {
        auto& histo = partial[chunk];
        const auto t = static_cast<std::size_t>(trials);
        const std::size_t begin = chunk * t / chunk_count;
        const std::size_t end = (chunk + 1) * t / chunk_count;
        for (std::size_t trial = begin; trial < end; ++trial) {
          const std::uint64_t seed = derive_seed(master_seed, 0, trial);
          const SampleSet s = draw_samples(n, beta, seed);
          const ModeReport report = find_modes(s);
          for (const CriticalPoint& c : report.criticals) {
            if (c.kind != CritKind::maximum) continue;
            const int b = static_cast<int>(std::floor((c.location + limit) / width));
            if (b >= 0 && b < bins) ++histo[static_cast<std::size_t>(b)];
          }
        }
      },
      threads);

  ModeHistogram out;
  out.n = n;
  out.beta = beta;
  out.trials = trials;
  out.belts = belts;
  out.limit = limit;
  out.counts.assign(bins, 0);
  for (const auto& part : partial) {
    for (int b = 0; b < bins; ++b) out.counts[b] += part[b];
  }
  out.bin_centers.resize(bins);
  out.kr_overlay.resize(bins);
  out.empirical.resize(bins);
  double emp_mass_T = 0.0, kr_mass_T = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double center = -limit + (b + 0.5) * width;
    out.bin_centers[b] = center;
    out.kr_overlay[b] = kr_density(exact_moments(center, beta, n));
    out.pooled_modes += out.counts[b];
    if (belts.T.contains(center)) {
      emp_mass_T += static_cast<double>(out.counts[b]);
      kr_mass_T += out.kr_overlay[b];
    }
  }
  if (emp_mass_T <= 0.0 || kr_mass_T <= 0.0) {
    throw insufficient_data("mode_histogram: no mass inside T");
  }
  for (int b = 0; b < bins; ++b) {
    out.empirical[b] = static_cast<double>(out.counts[b]) / emp_mass_T;
    out.kr_overlay[b] /= kr_mass_T;
    if (belts.T.contains(out.bin_centers[b])) {
      out.l1_over_T += std::fabs(out.empirical[b] - out.kr_overlay[b]);
    }
  }
  return out;
}

// ---- plain-text serialization -------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kSweepCsvHeader =
    "seed,n,beta,trial,mode_count,in_tprime,in_t_not_tprime,outside_t";

inline std::string sweep_csv(const std::vector<SweepRecord>& records) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const SweepRecord& r : records) {
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += format_double(r.beta);
    out += ',';
    out += std::to_string(r.trial);
    out += ',';
    out += std::to_string(r.mode_count);
    out += ',';
    out += std::to_string(r.in_tprime);
    out += ',';
    out += std::to_string(r.in_t_not_tprime);
    out += ',';
    out += std::to_string(r.outside_t);
    out += '\n';
  }
  return out;
}

inline std::vector<SweepRecord> parse_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kSweepCsvHeader, 0) != 0) {
    throw invalid_input("sweep CSV: missing or unexpected header row");
  }
  std::vector<SweepRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 8) throw invalid_input("sweep CSV: malformed row: " + line);
    SweepRecord r;
    r.seed = std::stoull(fields[0]);
    r.n = std::stoull(fields[1]);
    r.beta = std::stod(fields[2]);
    r.trial = std::stoi(fields[3]);
    r.mode_count = std::stoi(fields[4]);
    r.in_tprime = std::stoi(fields[5]);
    r.in_t_not_tprime = std::stoi(fields[6]);
    r.outside_t = std::stoi(fields[7]);
    records.push_back(r);
  }
  return records;
}

// Writes through a temp file plus rename, so interrupted runs never leave a
// truncated artifact at the destination.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& payload) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << payload;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("rename failed for " + path.string() + ": " + ec.message());
  }
}

}  // namespace modeatlas
