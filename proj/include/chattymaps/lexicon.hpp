#ifndef CHATTYMAPS_LEXICON_HPP
#define CHATTYMAPS_LEXICON_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "chattymaps/types.hpp"

// Tag normalization and lexicon matching. Matching is exact whole-tag lookup
// on normalized text: no stemming, no substrings. Normalization is idempotent
// so lexicon terms and photo tags meet in the same space.

namespace chattymaps::lexicon {

namespace detail {

// Tiny UTF-8 walker; an invalid byte is passed through as its own unit.
inline std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = s[i];
  if (c < 0x80) {
    ++i;
    return c;
  }
  std::size_t len = (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return 0x80000000u | c;  // marker: raw byte, re-emitted unchanged
  }
  std::uint32_t cp = c & (0xFFu >> (len + 1));
  for (std::size_t k = 1; k < len; ++k) {
    unsigned char cc = s[i + k];
    if ((cc >> 6) != 0x2) {
      ++i;
      return 0x80000000u | c;
    }
    cp = (cp << 6) | (cc & 0x3F);
  }
  i += len;
  return cp;
}

inline void encode_utf8(std::uint32_t cp, std::string& out) {
  if (cp & 0x80000000u) {
    out += static_cast<char>(cp & 0xFF);
  } else if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool is_space_cp(std::uint32_t cp) {
  switch (cp) {
    case ' ': case '\t': case '\r': case '\n': case '\f': case '\v':
    case 0x00A0: case 0x202F: case 0x3000: case 0x200B:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline bool is_hyphen_cp(std::uint32_t cp) {
  return cp == '-' || (cp >= 0x2010 && cp <= 0x2015) || cp == 0x2212;
}

inline bool is_punct_cp(std::uint32_t cp) {
  if (cp < 0x80) {
    char c = static_cast<char>(cp);
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D: case 0x201E:
    case 0x00AB: case 0x00BB: case 0x2039: case 0x203A:
    case 0x2026: case 0x00A1: case 0x00BF: case 0x00B7:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

// Lowercases ASCII, turns hyphens and whitespace runs into single spaces,
// strips surrounding punctuation, preserves everything else (including
// non-ASCII). Returns nullopt when nothing is left.
inline std::optional<std::string> normalize(const std::string& raw) {
  std::vector<std::uint32_t> cps;
  cps.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    std::uint32_t cp = detail::decode_utf8(raw, i);
    if (detail::is_hyphen_cp(cp) || detail::is_space_cp(cp)) cp = ' ';
    if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
    cps.push_back(cp);
  }
  std::size_t b = 0, e = cps.size();
  while (b < e && (cps[b] == ' ' || detail::is_punct_cp(cps[b]))) ++b;
  while (e > b && (cps[e - 1] == ' ' || detail::is_punct_cp(cps[e - 1]))) --e;
  if (b == e) return std::nullopt;
  std::string out;
  bool pending_space = false;
  for (std::size_t i = b; i < e; ++i) {
    if (cps[i] == ' ') {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    detail::encode_utf8(cps[i], out);
  }
  return out;
}

// Term -> labels lookup over normalized, unique terms.
class LexiconFile {
 public:
  LexiconFile() = default;

  LexiconFile(std::string name, std::vector<LexiconEntry> entries)
      : name_(std::move(name)), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].labels.empty()) throw InternalError("lexicon entry without labels: " + entries_[i].term);
      if (!index_.emplace(entries_[i].term, i).second)
        throw InternalError("duplicate lexicon term: " + entries_[i].term);
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const std::vector<std::string>* labels_of(const std::string& term) const {
    auto it = index_.find(term);
    return it == index_.end() ? nullptr : &entries_[it->second].labels;
  }

  bool contains(const std::string& term) const { return index_.count(term) != 0; }

 private:
  std::string name_;
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline const std::vector<std::string>& canonical_top_levels() {
  static const std::vector<std::string> tops = []{
    std::vector<std::string> v;
    for (auto n : kSoundCategoryNames) v.emplace_back(n);
    return v;
  }();
  return tops;
}

// Term -> category path; every path head must be one of the allowed
// top-level labels. Parsed taxonomies use the six canonical ones; taxonomies
// assembled from clustering may carry generated labels until merge naming.
class Taxonomy {
 public:
  Taxonomy() = default;

  Taxonomy(std::vector<TaxonomyEntry> entries, std::vector<std::string> top_levels = canonical_top_levels())
      : top_levels_(std::move(top_levels)) {
    for (auto& e : entries) {
      if (e.path.empty() || e.path.size() > 4) throw InternalError("taxonomy path depth out of range: " + e.term);
      bool known = false;
      for (auto& t : top_levels_) known = known || t == e.path.front();
      if (!known) throw InternalError("taxonomy path head not a top level: " + e.path.front());
      if (!terms_.emplace(e.term, e.path).second) throw InternalError("duplicate taxonomy term: " + e.term);
    }
  }

  const std::map<std::string, std::vector<std::string>>& terms() const { return terms_; }
  const std::vector<std::string>& top_levels() const { return top_levels_; }
  std::size_t size() const { return terms_.size(); }

  const std::vector<std::string>* path_of(const std::string& term) const {
    auto it = terms_.find(term);
    return it == terms_.end() ? nullptr : &it->second;
  }

  bool canonical() const {
    for (auto& [term, path] : terms_)
      if (!sound_category_from(path.front())) return false;
    return true;
  }

  std::optional<SoundCategory> category_of(const std::string& term) const {
    auto* p = path_of(term);
    if (!p) return std::nullopt;
    return sound_category_from(p->front());
  }

 private:
  std::map<std::string, std::vector<std::string>> terms_;
  std::vector<std::string> top_levels_;
};

struct FrequencyFilter {
  std::vector<std::string> kept;  // sorted
  std::uint64_t total_volume = 0;
  std::uint64_t kept_volume = 0;

  double volume_fraction() const {
    return total_volume == 0 ? 0.0 : static_cast<double>(kept_volume) / static_cast<double>(total_volume);
  }
};

// Keeps terms occurring strictly more than min_count times.
inline FrequencyFilter filter_by_frequency(const std::map<std::string, std::uint64_t>& counts,
                                           std::uint64_t min_count) {
  FrequencyFilter out;
  for (auto& [term, c] : counts) {
    out.total_volume += c;
    if (c > min_count) {
      out.kept.push_back(term);
      out.kept_volume += c;
    }
  }
  return out;
}

// Label -> matched tag instances over a normalized-tag multiset. A tag whose
// term carries several labels increments each of them.
inline std::map<std::string, std::uint64_t> match(
    const std::vector<std::pair<std::string, std::uint32_t>>& tag_counts, const LexiconFile& lex) {
  std::map<std::string, std::uint64_t> out;
  for (auto& [tag, mult] : tag_counts) {
    if (const auto* labels = lex.labels_of(tag))
      for (auto& l : *labels) out[l] += mult;
  }
  return out;
}

struct CoverageStats {
  std::string lexicon;
  std::uint64_t tag_instances = 0;        // photo tag instances matching the lexicon
  std::uint64_t photos_with_match = 0;
  std::uint64_t segments_with_match = 0;
  std::map<std::uint64_t, std::uint64_t> per_segment_matches;  // matched instances -> segment count
};

inline std::vector<CoverageStats> coverage_report(const std::vector<PhotoRecord>& photos,
                                                  const SegmentTagTable& table,
                                                  const std::vector<const LexiconFile*>& lexicons) {
  std::vector<CoverageStats> out;
  for (const auto* lex : lexicons) {
    CoverageStats s;
    s.lexicon = lex->name();
    for (const auto& p : photos) {
      bool any = false;
      for (const auto& raw : p.tags) {
        auto norm = normalize(raw);
        if (norm && lex->contains(*norm)) {
          ++s.tag_instances;
          any = true;
        }
      }
      if (any) ++s.photos_with_match;
    }
    for (std::size_t seg = 0; seg < table.counts.size(); ++seg) {
      std::uint64_t matched = 0;
      for (auto& [id, c] : table.counts[seg])
        if (lex->contains(table.tags.text(id))) matched += c;
      if (matched) ++s.segments_with_match;
      ++s.per_segment_matches[matched];
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace chattymaps::lexicon

#endif
