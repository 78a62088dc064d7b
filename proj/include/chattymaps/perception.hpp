#ifndef CHATTYMAPS_PERCEPTION_HPP
#define CHATTYMAPS_PERCEPTION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chattymaps/csv.hpp"
#include "chattymaps/layers.hpp"
#include "chattymaps/stats.hpp"
#include "chattymaps/types.hpp"

// Soundwalk survey analysis and the bridge from observed sound profiles to
// predicted perceptions: quartile co-occurrence probabilities, their Bayes
// inversion, PCA of the perception scores, and the per-segment projection.

namespace chattymaps::perception {

struct CrossCorrelations {
  layers::CorrMatrix<kWalkCategoryCount, kWalkCategoryCount> sounds;
  layers::CorrMatrix<kPerceptionCount, kPerceptionCount> perceptions;
};

// Pairwise Spearman over the survey columns, classical significance. Survey
// locations are few and repeated, so no spatial correction here.
inline CrossCorrelations soundwalk_cross_correlations(const std::vector<SoundwalkRecord>& recs) {
  const std::size_t n = recs.size();
  if (n < 10) throw InputError("cross-correlations need at least 10 soundwalk records");
  CrossCorrelations out;
  out.sounds.n = out.perceptions.n = n;

  auto fill = [n](auto& matrix, auto getter, std::size_t k) {
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t r = 0; r < n; ++r) {
          a[r] = getter(r, i);
          b[r] = getter(r, j);
        }
        auto& cell = matrix.cells[i][j];
        if (auto rho = stats::spearman(a, b)) {
          cell.defined = true;
          cell.rho = *rho;
          cell.p = stats::p_from_rho(*rho, static_cast<double>(n) - 2.0);
          cell.n_eff = static_cast<double>(n);
        }
      }
  };
  fill(out.sounds, [&](std::size_t r, std::size_t c) { return static_cast<double>(recs[r].sounds[c]); },
       kWalkCategoryCount);
  fill(out.perceptions,
       [&](std::size_t r, std::size_t c) { return static_cast<double>(recs[r].perceptions[c]); },
       kPerceptionCount);
  return out;
}

// Fourth-quartile co-occurrence counts and the probabilities derived from
// them. Probabilities are a pure function of the counts; rebuilding from the
// stored counts reproduces them bit for bit.
struct ConditionalTable {
  std::size_t n = 0;
  std::array<std::uint64_t, kWalkCategoryCount> q4_sound{};
  std::array<std::uint64_t, kPerceptionCount> q4_perception{};
  std::array<std::array<std::uint64_t, kPerceptionCount>, kWalkCategoryCount> q4_joint{};
  std::uint64_t q4_sound_total = 0;
  std::uint64_t q4_perception_total = 0;

  std::array<double, kWalkCategoryCount> p_c{};
  std::array<double, kPerceptionCount> p_f{};
  std::array<std::array<double, kPerceptionCount>, kWalkCategoryCount> p_c_given_f{};
  std::array<std::array<double, kPerceptionCount>, kWalkCategoryCount> p_f_given_c{};

  std::array<bool, kWalkCategoryCount> degenerate_sound{};
  std::array<bool, kPerceptionCount> degenerate_perception{};
  std::vector<std::string> warnings;
};

inline void derive_probabilities(ConditionalTable& t) {
  for (std::size_t c = 0; c < kWalkCategoryCount; ++c)
    t.p_c[c] = t.q4_sound_total > 0
                   ? static_cast<double>(t.q4_sound[c]) / static_cast<double>(t.q4_sound_total)
                   : 0.0;
  for (std::size_t f = 0; f < kPerceptionCount; ++f)
    t.p_f[f] = t.q4_perception_total > 0 ? static_cast<double>(t.q4_perception[f]) /
                                               static_cast<double>(t.q4_perception_total)
                                         : 0.0;
  for (std::size_t c = 0; c < kWalkCategoryCount; ++c)
    for (std::size_t f = 0; f < kPerceptionCount; ++f) {
      if (t.q4_perception[f] == 0) {
        t.p_c_given_f[c][f] = 0;
        t.p_f_given_c[c][f] = 0;
        if (c == 0)
          t.warnings.push_back(std::string("no fourth-quartile mass for ") +
                               std::string(kPerceptionNames[f]) + "; its conditionals set to 0");
        continue;
      }
      t.p_c_given_f[c][f] =
          static_cast<double>(t.q4_joint[c][f]) / static_cast<double>(t.q4_perception[f]);
      t.p_f_given_c[c][f] =
          t.p_c[c] > 0 ? t.p_c_given_f[c][f] * t.p_f[f] / t.p_c[c] : 0.0;
    }
}

inline ConditionalTable conditional_probabilities(const std::vector<SoundwalkRecord>& recs) {
  const std::size_t n = recs.size();
  if (n < 8) throw InputError("conditional probabilities need at least 8 soundwalk records");
  ConditionalTable t;
  t.n = n;

  std::array<std::vector<bool>, kWalkCategoryCount> sflags;
  std::array<std::vector<bool>, kPerceptionCount> pflags;
  std::vector<double> col(n);
  for (std::size_t c = 0; c < kWalkCategoryCount; ++c) {
    for (std::size_t r = 0; r < n; ++r) col[r] = static_cast<double>(recs[r].sounds[c]);
    auto qf = stats::quartile_flags(col);
    sflags[c] = std::move(qf.flags);
    t.degenerate_sound[c] = qf.degenerate;
    if (qf.degenerate)
      t.warnings.push_back(std::string("sound column ") + std::string(kWalkCategoryNames[c]) +
                           " is constant; all records flagged");
  }
  for (std::size_t f = 0; f < kPerceptionCount; ++f) {
    for (std::size_t r = 0; r < n; ++r) col[r] = static_cast<double>(recs[r].perceptions[f]);
    auto qf = stats::quartile_flags(col);
    pflags[f] = std::move(qf.flags);
    t.degenerate_perception[f] = qf.degenerate;
    if (qf.degenerate)
      t.warnings.push_back(std::string("perception column ") + std::string(kPerceptionNames[f]) +
                           " is constant; all records flagged");
  }

  for (std::size_t c = 0; c < kWalkCategoryCount; ++c) {
    for (std::size_t r = 0; r < n; ++r)
      if (sflags[c][r]) ++t.q4_sound[c];
    t.q4_sound_total += t.q4_sound[c];
  }
  for (std::size_t f = 0; f < kPerceptionCount; ++f) {
    for (std::size_t r = 0; r < n; ++r)
      if (pflags[f][r]) ++t.q4_perception[f];
    t.q4_perception_total += t.q4_perception[f];
  }
  for (std::size_t c = 0; c < kWalkCategoryCount; ++c)
    for (std::size_t f = 0; f < kPerceptionCount; ++f)
      for (std::size_t r = 0; r < n; ++r)
        if (sflags[c][r] && pflags[f][r]) ++t.q4_joint[c][f];

  derive_probabilities(t);
  return t;
}

struct PcaResult {
  std::array<double, kPerceptionCount> mean{};
  std::array<double, kPerceptionCount> eigenvalues{};   // descending
  std::array<double, kPerceptionCount> explained{};     // ratios, sum 1 unless degenerate
  std::array<std::array<double, kPerceptionCount>, kPerceptionCount> components{};  // [k][column]
  bool rank_deficient = false;
  bool degenerate = false;  // zero total variance
};

// PCA of the 8 perception columns: covariance eigendecomposition, components
// ordered by eigenvalue, each flipped so its first nonzero loading is
// positive.
inline PcaResult principal_components(const std::vector<SoundwalkRecord>& recs) {
  const std::size_t n = recs.size();
  if (n < 9) throw InputError("principal components need at least 9 soundwalk records");
  constexpr std::size_t K = kPerceptionCount;

  Eigen::MatrixXd x(n, K);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < K; ++j) x(r, j) = static_cast<double>(recs[r].perceptions[j]);

  PcaResult out;
  Eigen::RowVectorXd mu = x.colwise().mean();
  for (std::size_t j = 0; j < K; ++j) out.mean[j] = mu(j);
  x.rowwise() -= mu;
  Eigen::Matrix<double, K, K> cov = (x.transpose() * x) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, K, K>> es(cov);
  if (es.info() != Eigen::Success) throw InternalError("eigendecomposition failed");

  double total = 0;
  for (std::size_t k = 0; k < K; ++k) {
    double ev = es.eigenvalues()(static_cast<Eigen::Index>(K - 1 - k));
    if (ev < 0 && ev > -1e-9) ev = 0;  // symmetric solver noise
    out.eigenvalues[k] = ev;
    total += ev;
  }
  out.degenerate = !(total > 0);
  out.rank_deficient = out.degenerate || out.eigenvalues[K - 1] <= total * 1e-12;
  for (std::size_t k = 0; k < K; ++k)
    out.explained[k] = out.degenerate ? 0.0 : out.eigenvalues[k] / total;

  for (std::size_t k = 0; k < K; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(static_cast<Eigen::Index>(K - 1 - k));
    double lead = 0;
    for (std::size_t j = 0; j < K; ++j)
      if (std::abs(v(static_cast<Eigen::Index>(j))) > 1e-12) {
        lead = v(static_cast<Eigen::Index>(j));
        break;
      }
    if (lead < 0) v = -v;
    for (std::size_t j = 0; j < K; ++j) out.components[k][j] = v(static_cast<Eigen::Index>(j));
  }
  return out;
}

// Weights from the six taxonomy categories onto the five questionnaire
// categories. Every row is a convex combination.
struct CategoryMap {
  std::array<std::array<double, kWalkCategoryCount>, kSoundCategoryCount> w{};

  static CategoryMap defaults() {
    CategoryMap m;
    auto set = [&m](SoundCategory from, WalkCategory to) {
      m.w[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)] = 1.0;
    };
    set(SoundCategory::transport, WalkCategory::traffic);
    set(SoundCategory::mechanical, WalkCategory::other);
    set(SoundCategory::human, WalkCategory::individuals);
    set(SoundCategory::music, WalkCategory::individuals);
    set(SoundCategory::nature, WalkCategory::nature);
    set(SoundCategory::indoor, WalkCategory::other);
    return m;
  }

  std::array<double, kWalkCategoryCount> apply(
      const std::array<double, kSoundCategoryCount>& fractions) const {
    std::array<double, kWalkCategoryCount> out{};
    for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
      for (std::size_t t = 0; t < kWalkCategoryCount; ++t) out[t] += fractions[c] * w[c][t];
    return out;
  }
};

// CSV with a `category` column naming a taxonomy category and one weight
// column per questionnaire category. All six rows required, each summing
// to 1.
inline CategoryMap parse_category_map(std::istream& in) {
  CategoryMap m;
  std::array<bool, kSoundCategoryCount> seen{};
  std::string line;
  bool have_header = false;
  std::size_t cat_col = 0;
  std::array<std::size_t, kWalkCategoryCount> wcols{};
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char ch : line) blank = blank && (ch == ' ' || ch == '\t' || ch == '\r');
    if (blank) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      cat_col = h.require("category");
      for (std::size_t t = 0; t < kWalkCategoryCount; ++t)
        wcols[t] = h.require(kWalkCategoryNames[t]);
      have_header = true;
      continue;
    }
    auto fields = csv::split(line);
    std::size_t need = cat_col;
    for (auto c : wcols) need = std::max(need, c);
    if (fields.size() <= need)
      throw InputError("category map line " + std::to_string(lineno) + ": too few columns");
    auto cat = sound_category_from(fields[cat_col]);
    if (!cat)
      throw InputError("category map line " + std::to_string(lineno) + ": unknown category '" +
                       fields[cat_col] + "'");
    std::size_t ci = static_cast<std::size_t>(*cat);
    if (seen[ci])
      throw InputError("category map line " + std::to_string(lineno) + ": duplicate category");
    seen[ci] = true;
    double sum = 0;
    for (std::size_t t = 0; t < kWalkCategoryCount; ++t) {
      auto v = csv::to_double(fields[wcols[t]]);
      if (!v) throw InputError("category map line " + std::to_string(lineno) + ": bad weight");
      if (*v < 0) throw InputError("category map line " + std::to_string(lineno) + ": negative weight");
      m.w[ci][t] = *v;
      sum += *v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InputError("category map line " + std::to_string(lineno) + ": weights sum to " +
                       std::to_string(sum) + ", expected 1");
  }
  for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
    if (!seen[c])
      throw InputError(std::string("category map is missing ") + std::string(kSoundCategoryNames[c]));
  return m;
}

inline CategoryMap parse_category_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_category_map(in);
}

struct PerceptionRow {
  std::array<double, kPerceptionCount> p{};
  std::optional<Perception> argmax;  // empty when the segment had too few matched tags
  bool degenerate = false;           // all perception values equal
};

// p_j(f) = sum_c p(f|c) p_j(c) with p_j(c) the profile pushed through the
// category map. Values are not renormalized; the argmax is scale-free.
inline PerceptionRow segment_perception(const std::array<double, kSoundCategoryCount>& fractions,
                                        std::uint64_t tag_total, const ConditionalTable& table,
                                        const CategoryMap& map, std::uint64_t min_tags = 5) {
  PerceptionRow row;
  auto pc = map.apply(fractions);
  for (std::size_t f = 0; f < kPerceptionCount; ++f)
    for (std::size_t c = 0; c < kWalkCategoryCount; ++c)
      row.p[f] += table.p_f_given_c[c][f] * pc[c];
  if (tag_total < min_tags) return row;
  std::size_t best = 0;
  bool all_equal = true;
  for (std::size_t f = 1; f < kPerceptionCount; ++f) {
    if (row.p[f] > row.p[best]) best = f;
    all_equal = all_equal && row.p[f] == row.p[0];
  }
  row.argmax = static_cast<Perception>(best);
  row.degenerate = all_equal;
  return row;
}

}  // namespace chattymaps::perception

#endif
