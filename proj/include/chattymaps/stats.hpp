#ifndef CHATTYMAPS_STATS_HPP
#define CHATTYMAPS_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "chattymaps/core.hpp"

// Rank statistics. Spearman is Pearson on average ranks. Significance against
// spatial data uses an effective sample size estimated from the rank
// autocorrelation of both series over binned pair distances; positive spatial
// smoothing shrinks the effective n and inflates p accordingly.

namespace chattymaps::stats {

// Average ranks, 1-based; tied values share the mean of their positions.
inline std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> out(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = mean_rank;
    i = j + 1;
  }
  return out;
}

// nullopt when either side is constant.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InputError("pearson needs two equal series");
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

// nullopt when a series is constant (undefined rather than zero).
inline std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("spearman inputs differ in length");
  if (a.size() < 3) throw InputError("spearman needs at least 3 observations");
  auto ra = ranks(a), rb = ranks(b);
  return pearson(ra, rb);
}

inline double students_t_cdf(double t, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::cdf(dist, t);
}

// Two-sided p for a correlation under a t test with the given df.
inline double p_from_rho(double rho, double df) {
  if (df <= 0) return 1.0;
  double denom = 1.0 - rho * rho;
  if (denom <= 0) return 0.0;
  double t = std::abs(rho) * std::sqrt(df / denom);
  return 2.0 * (1.0 - students_t_cdf(t, df));
}

struct CliffordResult {
  double rho = 0;
  double n_eff = 0;
  double p = 1;
  double p_classical = 1;
  bool classical_fallback = false;  // coincident locations left no distance classes
};

struct CliffordOptions {
  std::size_t distance_classes = 20;
  std::size_t pair_cap = 1'000'000;  // pairs are subsampled beyond this
};

// Spearman with a spatially corrected significance test. The rank series'
// autocorrelation is estimated over equal-width distance classes spanning up
// to the 90th percentile of pairwise distances; the effective sample size is
//   n_eff = 1 + n^2 / (n + sum_d W_d r_a(d) r_b(d))
// clamped to at most n, and the t test runs on n_eff - 2 degrees of freedom.
// The n term is the zero-lag class, so independent series give n_eff near n.
inline std::optional<CliffordResult> clifford_spearman(std::span<const double> a,
                                                       std::span<const double> b,
                                                       std::span<const double> xs,
                                                       std::span<const double> ys,
                                                       CliffordOptions opt = {}) {
  const std::size_t n = a.size();
  if (b.size() != n || xs.size() != n || ys.size() != n)
    throw InputError("clifford inputs differ in length");
  if (n < 20) throw InputError("clifford needs at least 20 observations");
  if (opt.distance_classes < 1) throw InputError("clifford needs at least one distance class");

  auto ra = ranks(a), rb = ranks(b);
  auto rho_opt = pearson(ra, rb);
  if (!rho_opt) return std::nullopt;
  const double rho = *rho_opt;

  CliffordResult res;
  res.rho = rho;
  res.p_classical = p_from_rho(rho, static_cast<double>(n) - 2.0);

  double mean_a = 0, mean_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double var_a = 0, var_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    var_a += (ra[i] - mean_a) * (ra[i] - mean_a);
    var_b += (rb[i] - mean_b) * (rb[i] - mean_b);
  }
  var_a /= n;
  var_b /= n;

  const std::uint64_t total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  if (total_pairs <= opt.pair_cap) {
    pairs.reserve(total_pairs);
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  } else {
    // fixed-seed subsample keeps the estimate deterministic
    std::mt19937_64 rng(0x9E3779B97F4A7C15ull);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    pairs.reserve(opt.pair_cap);
    while (pairs.size() < opt.pair_cap) {
      std::uint32_t i = pick(rng), j = pick(rng);
      if (i != j) pairs.emplace_back(i, j);
    }
  }

  std::vector<double> dist(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto [i, j] = pairs[k];
    dist[k] = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
  }
  std::vector<double> sorted = dist;
  std::size_t p90_idx = (sorted.size() * 9) / 10;
  if (p90_idx >= sorted.size()) p90_idx = sorted.size() - 1;
  std::nth_element(sorted.begin(), sorted.begin() + p90_idx, sorted.end());
  const double p90 = sorted[p90_idx];

  if (!(p90 > 0)) {
    // coincident locations: no usable classes, fall back to the plain test
    res.classical_fallback = true;
    res.n_eff = static_cast<double>(n);
    res.p = res.p_classical;
    return res;
  }

  const std::size_t k_classes = opt.distance_classes;
  const double width = p90 / static_cast<double>(k_classes);
  std::vector<double> num_a(k_classes, 0), num_b(k_classes, 0);
  std::vector<std::uint64_t> cnt(k_classes, 0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (dist[k] > p90) continue;
    std::size_t c = std::min(k_classes - 1, static_cast<std::size_t>(dist[k] / width));
    auto [i, j] = pairs[k];
    num_a[c] += (ra[i] - mean_a) * (ra[j] - mean_a);
    num_b[c] += (rb[i] - mean_b) * (rb[j] - mean_b);
    ++cnt[c];
  }

  const double scale = static_cast<double>(total_pairs) / static_cast<double>(pairs.size());
  double sum = static_cast<double>(n);  // zero-lag class: W = n, r_a = r_b = 1
  for (std::size_t c = 0; c < k_classes; ++c) {
    if (cnt[c] == 0) continue;
    double r_a = (num_a[c] / static_cast<double>(cnt[c])) / var_a;
    double r_b = (num_b[c] / static_cast<double>(cnt[c])) / var_b;
    double w = 2.0 * static_cast<double>(cnt[c]) * scale;  // ordered pairs
    sum += w * r_a * r_b;
  }

  double n_eff = sum > 0 ? 1.0 + static_cast<double>(n) * static_cast<double>(n) / sum
                         : static_cast<double>(n);
  n_eff = std::min(n_eff, static_cast<double>(n));
  n_eff = std::max(n_eff, 3.0);
  res.n_eff = n_eff;
  res.p = p_from_rho(rho, n_eff - 2.0);
  return res;
}

struct QuartileFlags {
  std::vector<bool> flags;
  double q3 = 0;
  std::size_t flagged = 0;
  bool degenerate = false;  // all values equal; everything flagged
};

// Flags values in the top quartile: v >= Q3, where Q3 is the nearest-rank
// 75th percentile (the (floor(3n/4)+1)-th smallest value). Boundary ties are
// all flagged.
inline QuartileFlags quartile_flags(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) throw InputError("quartile_flags needs at least 4 values");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  QuartileFlags out;
  out.q3 = sorted[(3 * n) / 4];
  out.degenerate = sorted.front() == sorted.back();
  out.flags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.flags[i] = xs[i] >= out.q3;
    out.flagged += out.flags[i] ? 1 : 0;
  }
  return out;
}

struct ZNorm {
  double mean = 0;
  double sigma = 0;       // population
  bool degenerate = false;  // sigma == 0; z defined as 0
};

inline ZNorm znorm(std::span<const double> xs) {
  if (xs.size() < 2) throw InputError("znorm needs at least 2 values");
  ZNorm out;
  for (double v : xs) out.mean += v;
  out.mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double v : xs) ss += (v - out.mean) * (v - out.mean);
  out.sigma = std::sqrt(ss / static_cast<double>(xs.size()));
  out.degenerate = out.sigma == 0.0;
  return out;
}

inline double zval(double x, const ZNorm& z) {
  return z.degenerate ? 0.0 : (x - z.mean) / z.sigma;
}

struct MeanCI {
  double mean = 0;
  double half95 = 0;  // 1.96 * sample std / sqrt(n); valid when has_ci
  std::size_t n = 0;
  bool has_ci = false;
};

inline MeanCI mean_ci(std::span<const double> xs) {
  MeanCI out;
  out.n = xs.size();
  if (out.n == 0) return out;
  for (double v : xs) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  if (out.n >= 2) {
    double ss = 0;
    for (double v : xs) ss += (v - out.mean) * (v - out.mean);
    double s = std::sqrt(ss / static_cast<double>(out.n - 1));
    out.half95 = 1.96 * s / std::sqrt(static_cast<double>(out.n));
    out.has_ci = true;
  }
  return out;
}

}  // namespace chattymaps::stats

#endif
