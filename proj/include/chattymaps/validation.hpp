#ifndef CHATTYMAPS_VALIDATION_HPP
#define CHATTYMAPS_VALIDATION_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "chattymaps/core.hpp"
#include "chattymaps/stats.hpp"

// Noise-map cross-validation: the day-evening-night weighted level and the
// correlation sweep between measured noise and sound-category fractions at
// increasing tag-count thresholds.

namespace chattymaps::validation {

// Energetic 24h mean over day 7-21, evening 21-23 and night 23-7, with the
// usual annoyance penalties added to evening and night.
inline double ewl(double l_day, double l_evening, double l_night, double evening_penalty = 5.0,
                  double night_penalty = 10.0) {
  double energy = 14.0 * std::pow(10.0, l_day / 10.0) +
                  2.0 * std::pow(10.0, (l_evening + evening_penalty) / 10.0) +
                  8.0 * std::pow(10.0, (l_night + night_penalty) / 10.0);
  return 10.0 * std::log10(energy / 24.0);
}

inline std::vector<std::uint64_t> default_thresholds() { return {1, 5, 10, 25, 50, 100, 200}; }

struct SweepPoint {
  std::uint64_t threshold = 0;
  SoundCategory category{};
  bool defined = false;  // rank variance present in both series
  double rho = 0;
  double p = 1;
  double n_eff = 0;
  std::size_t n = 0;
  bool spatial = false;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::string> warnings;
};

// For each threshold N, keep segments with at least N matched tags and
// correlate each category fraction against the noise metric with the
// spatially corrected test. Thresholds with fewer than 20 surviving
// segments yield no points, only a warning.
inline SweepResult noise_correlation_sweep(
    const std::vector<std::array<double, kSoundCategoryCount>>& fractions,
    const std::vector<std::uint64_t>& tag_totals, const std::vector<double>& metric,
    const std::vector<double>& xs, const std::vector<double>& ys,
    const std::vector<std::uint64_t>& thresholds = default_thresholds()) {
  const std::size_t n = fractions.size();
  if (tag_totals.size() != n || metric.size() != n || xs.size() != n || ys.size() != n)
    throw InputError("noise sweep inputs do not align");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw InputError("noise sweep thresholds must be strictly ascending");

  SweepResult out;
  std::vector<double> frac, noise, px, py;
  for (auto thr : thresholds) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
      if (tag_totals[i] >= thr) keep.push_back(i);
    if (keep.size() < 20) {
      out.warnings.push_back("threshold " + std::to_string(thr) + ": only " +
                             std::to_string(keep.size()) + " segments, point omitted");
      continue;
    }
    noise.resize(keep.size());
    px.resize(keep.size());
    py.resize(keep.size());
    frac.resize(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      noise[k] = metric[keep[k]];
      px[k] = xs[keep[k]];
      py[k] = ys[keep[k]];
    }
    for (std::size_t c = 0; c < kSoundCategoryCount; ++c) {
      for (std::size_t k = 0; k < keep.size(); ++k) frac[k] = fractions[keep[k]][c];
      SweepPoint pt;
      pt.threshold = thr;
      pt.category = static_cast<SoundCategory>(c);
      pt.n = keep.size();
      if (auto r = stats::clifford_spearman(frac, noise, px, py)) {
        pt.defined = true;
        pt.rho = r->rho;
        pt.p = r->p;
        pt.n_eff = r->n_eff;
        pt.spatial = !r->classical_fallback;
      }
      out.points.push_back(pt);
    }
  }
  return out;
}

}  // namespace chattymaps::validation

#endif
