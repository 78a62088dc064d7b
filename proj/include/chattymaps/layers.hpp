#ifndef CHATTYMAPS_LAYERS_HPP
#define CHATTYMAPS_LAYERS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chattymaps/lexicon.hpp"
#include "chattymaps/stats.hpp"
#include "chattymaps/types.hpp"

// Per-segment map layers: sound category profiles, emotion profiles, their
// z-scores across the city, street-type aggregates, dominant categories and
// Shannon diversity.

namespace chattymaps::layers {

// Term -> sound categories. A taxonomy gives each term exactly one category;
// a raw label lexicon may put a term in several, which downstream profiles
// renormalize and flag.
class CategoryLookup {
 public:
  static CategoryLookup from_taxonomy(const lexicon::Taxonomy& tax) {
    CategoryLookup cl;
    for (auto& [term, path] : tax.terms()) {
      auto c = sound_category_from(path.front());
      if (!c) throw InputError("taxonomy head is not a sound category: " + path.front());
      cl.cats_[term] = {*c};
    }
    return cl;
  }

  static CategoryLookup from_lexicon(const lexicon::LexiconFile& lex) {
    CategoryLookup cl;
    for (const auto& e : lex.entries()) {
      std::vector<SoundCategory> cs;
      for (const auto& l : e.labels)
        if (auto c = sound_category_from(l); c && std::find(cs.begin(), cs.end(), *c) == cs.end())
          cs.push_back(*c);
      if (!cs.empty()) {
        std::sort(cs.begin(), cs.end());
        cl.cats_[e.term] = std::move(cs);
      }
    }
    return cl;
  }

  const std::vector<SoundCategory>* categories_of(const std::string& term) const {
    auto it = cats_.find(term);
    return it == cats_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return cats_.size(); }

 private:
  std::map<std::string, std::vector<SoundCategory>> cats_;
};

struct SoundProfile {
  std::uint32_t segment = 0;  // index into the segment collection
  std::array<double, kSoundCategoryCount> fractions{};
  std::array<std::uint64_t, kSoundCategoryCount> counts{};
  std::uint64_t tag_total = 0;   // tags matched to any sound category
  bool multi_label = false;      // some tag fell in several categories
};

// Fractions are matched-category counts over the number of sound-matched
// tags. A tag in k categories adds its multiplicity to each; the fractions
// are then renormalized so they still sum to 1.
inline std::optional<SoundProfile> sound_profile_from_counts(
    const std::vector<std::pair<std::string, std::uint32_t>>& tag_counts,
    const CategoryLookup& lookup) {
  SoundProfile p;
  std::uint64_t cross = 0;
  for (auto& [tag, mult] : tag_counts) {
    const auto* cs = lookup.categories_of(tag);
    if (!cs) continue;
    p.tag_total += mult;
    if (cs->size() > 1) p.multi_label = true;
    for (auto c : *cs) {
      p.counts[static_cast<std::size_t>(c)] += mult;
      cross += mult;
    }
  }
  if (p.tag_total == 0) return std::nullopt;
  for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
    p.fractions[c] = static_cast<double>(p.counts[c]) / static_cast<double>(cross);
  return p;
}

inline std::optional<SoundProfile> sound_profile(const SegmentTagTable& table, std::size_t seg,
                                                 const CategoryLookup& lookup) {
  auto p = sound_profile_from_counts(table.sorted_counts(seg), lookup);
  if (p) p->segment = static_cast<std::uint32_t>(seg);
  return p;
}

inline std::vector<SoundProfile> sound_profiles(const SegmentTagTable& table,
                                                const CategoryLookup& lookup) {
  std::vector<SoundProfile> out;
  for (std::size_t seg = 0; seg < table.counts.size(); ++seg)
    if (auto p = sound_profile(table, seg, lookup)) out.push_back(*p);
  return out;
}

struct EmotionProfile {
  std::uint32_t segment = 0;
  std::array<double, kEmotionCount> fractions{};
  std::array<std::uint64_t, kEmotionCount> counts{};
  std::uint64_t tag_total = 0;  // every tag on the segment, matched or not
};

// Emotion fractions divide by all tags on the segment, so the vector need
// not sum to 1 and an all-zero vector is a real observation.
inline std::optional<EmotionProfile> emotion_profile_from_counts(
    const std::vector<std::pair<std::string, std::uint32_t>>& tag_counts,
    const lexicon::LexiconFile& emotions) {
  EmotionProfile p;
  for (auto& [tag, mult] : tag_counts) {
    p.tag_total += mult;
    if (const auto* labels = emotions.labels_of(tag))
      for (const auto& l : *labels)
        if (auto e = emotion_from(l)) p.counts[static_cast<std::size_t>(*e)] += mult;
  }
  if (p.tag_total == 0) return std::nullopt;
  for (std::size_t e = 0; e < kEmotionCount; ++e)
    p.fractions[e] = static_cast<double>(p.counts[e]) / static_cast<double>(p.tag_total);
  return p;
}

inline std::vector<EmotionProfile> emotion_profiles(const SegmentTagTable& table,
                                                    const lexicon::LexiconFile& emotions) {
  std::vector<EmotionProfile> out;
  for (std::size_t seg = 0; seg < table.counts.size(); ++seg)
    if (auto p = emotion_profile_from_counts(table.sorted_counts(seg), emotions)) {
      p->segment = static_cast<std::uint32_t>(seg);
      out.push_back(std::move(*p));
    }
  return out;
}

// Column-wise z-scores over segments, population sigma. A constant column
// gets z = 0 everywhere and a degenerate mark.
template <std::size_t K>
struct ZMatrix {
  std::vector<std::array<double, K>> z;
  std::array<stats::ZNorm, K> norms{};
};

template <std::size_t K>
inline ZMatrix<K> zscores(const std::vector<std::array<double, K>>& rows) {
  if (rows.size() < 2) throw InputError("z-scores need at least 2 segments");
  ZMatrix<K> out;
  std::vector<double> col(rows.size());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][k];
    out.norms[k] = stats::znorm(col);
  }
  out.z.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < K; ++k) out.z[i][k] = stats::zval(rows[i][k], out.norms[k]);
  return out;
}

struct TypeAverage {
  StreetType type{};
  SoundCategory category{};
  stats::MeanCI stat;
};

// Mean z per (street type, category) with a normal 95% interval. Types with
// no segments produce no rows.
inline std::vector<TypeAverage> street_type_averages(
    const std::vector<std::array<double, kSoundCategoryCount>>& z,
    const std::vector<StreetType>& types) {
  if (types.size() != z.size()) throw InputError("street types do not align with z rows");
  std::vector<TypeAverage> out;
  std::vector<double> vals;
  for (std::size_t t = 0; t < kStreetTypeCount; ++t)
    for (std::size_t c = 0; c < kSoundCategoryCount; ++c) {
      vals.clear();
      for (std::size_t i = 0; i < z.size(); ++i)
        if (static_cast<std::size_t>(types[i]) == t) vals.push_back(z[i][c]);
      if (vals.empty()) continue;
      out.push_back({static_cast<StreetType>(t), static_cast<SoundCategory>(c), stats::mean_ci(vals)});
    }
  return out;
}

// Highest z wins; exact ties go to the first category in declaration order.
// Too few matched tags means no call at all.
inline std::optional<SoundCategory> dominant_category(
    const std::array<double, kSoundCategoryCount>& z, std::uint64_t tag_total,
    std::uint64_t min_tags = 5) {
  if (tag_total < min_tags) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t c = 1; c < kSoundCategoryCount; ++c)
    if (z[c] > z[best]) best = c;
  return static_cast<SoundCategory>(best);
}

// Shannon index over the category fractions, natural log. 0 is a
// monoculture, ln 6 the even mix.
inline double diversity(const std::array<double, kSoundCategoryCount>& fractions) {
  double h = 0;
  for (double p : fractions)
    if (p > 0) h -= p * std::log(p);
  return h;
}

struct DiversityBin {
  double lo = 0;
  std::size_t count = 0;
};

struct TagCountBucket {
  std::uint64_t tag_total = 0;
  std::size_t n = 0;
  double mean = 0;
};

struct DiversityReport {
  std::size_t segments = 0;
  std::size_t zero_segments = 0;
  double zero_fraction = 0;
  double bin_width = 0.1;
  std::vector<DiversityBin> hist;          // zero-diversity segments excluded
  std::vector<TagCountBucket> by_tags;     // mean diversity per exact matched-tag count
};

inline DiversityReport diversity_report(const std::vector<SoundProfile>& profiles,
                                        double bin_width = 0.1) {
  if (!(bin_width > 0)) throw InputError("diversity bin width must be positive");
  DiversityReport rep;
  rep.bin_width = bin_width;
  rep.segments = profiles.size();
  const double h_max = std::log(static_cast<double>(kSoundCategoryCount));
  const std::size_t nbins = static_cast<std::size_t>(std::ceil(h_max / bin_width));
  rep.hist.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) rep.hist[b].lo = static_cast<double>(b) * bin_width;

  std::map<std::uint64_t, std::pair<std::size_t, double>> buckets;
  for (const auto& p : profiles) {
    double h = diversity(p.fractions);
    auto& [n, sum] = buckets[p.tag_total];
    ++n;
    sum += h;
    if (h <= 0) {
      ++rep.zero_segments;
      continue;
    }
    std::size_t b = std::min(static_cast<std::size_t>(h / bin_width), nbins - 1);
    ++rep.hist[b].count;
  }
  if (rep.segments > 0)
    rep.zero_fraction = static_cast<double>(rep.zero_segments) / static_cast<double>(rep.segments);
  for (auto& [tags, acc] : buckets)
    rep.by_tags.push_back({tags, acc.first, acc.second / static_cast<double>(acc.first)});
  return rep;
}

struct CorrCell {
  bool defined = false;   // both series had rank variance
  double rho = 0;
  double p = 1;
  double n_eff = 0;
  bool spatial = false;   // p from the spatially corrected test
};

template <std::size_t A, std::size_t B>
struct CorrMatrix {
  std::array<std::array<CorrCell, B>, A> cells{};
  std::size_t n = 0;
};

// Pairwise Spearman between two layer matrices over the same segments, with
// spatially corrected significance where the sample is large enough for the
// correction to be estimable.
template <std::size_t A, std::size_t B>
inline CorrMatrix<A, B> spatial_cross_correlations(const std::vector<std::array<double, A>>& ra,
                                                   const std::vector<std::array<double, B>>& rb,
                                                   const std::vector<double>& xs,
                                                   const std::vector<double>& ys,
                                                   std::size_t min_n = 10) {
  const std::size_t n = ra.size();
  if (rb.size() != n || xs.size() != n || ys.size() != n)
    throw InputError("correlation layers do not align");
  if (n < min_n)
    throw InputError("correlation needs at least " + std::to_string(min_n) + " shared segments");
  CorrMatrix<A, B> out;
  out.n = n;
  std::vector<double> ca(n), cb(n);
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        ca[k] = ra[k][i];
        cb[k] = rb[k][j];
      }
      CorrCell& cell = out.cells[i][j];
      if (n >= 20) {
        if (auto r = stats::clifford_spearman(ca, cb, xs, ys)) {
          cell.defined = true;
          cell.rho = r->rho;
          cell.p = r->p;
          cell.n_eff = r->n_eff;
          cell.spatial = !r->classical_fallback;
        }
      } else if (auto rho = stats::spearman(ca, cb)) {
        cell.defined = true;
        cell.rho = *rho;
        cell.p = stats::p_from_rho(*rho, static_cast<double>(n) - 2.0);
        cell.n_eff = static_cast<double>(n);
      }
    }
  return out;
}

}  // namespace chattymaps::layers

#endif
