#ifndef CHATTYMAPS_TYPES_HPP
#define CHATTYMAPS_TYPES_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "chattymaps/core.hpp"

// Domain records as they come off the parsers, plus the parse-report wrapper
// shared by every reader: each consumed line is either a record or a reported
// rejection, never silently dropped.

namespace chattymaps {

struct LonLat {
  double lon = 0;
  double lat = 0;
  bool operator==(const LonLat&) const = default;
};

struct PhotoRecord {
  std::string id;
  double lon = 0;
  double lat = 0;
  std::vector<std::string> tags;  // raw, as uploaded; normalization happens downstream
  std::optional<std::int64_t> timestamp;
  bool operator==(const PhotoRecord&) const = default;
};

struct StreetSegment {
  std::string id;
  StreetType type = StreetType::other;
  std::vector<LonLat> polyline;  // >= 2 vertices, consecutive vertices distinct
  bool operator==(const StreetSegment&) const = default;
};

struct NoiseRecord {
  std::string segment_id;
  double l_day = 0;
  double l_evening = 0;
  double l_night = 0;
  std::optional<double> ewl;  // used verbatim when present
  bool operator==(const NoiseRecord&) const = default;
};

struct SoundwalkRecord {
  std::string walk_id;
  std::string participant_id;
  std::string location_id;
  std::array<int, kWalkCategoryCount> sounds{};       // WalkCategory order, each in [1,10]
  std::array<int, kPerceptionCount> perceptions{};    // Perception order, each in [1,10]
  bool operator==(const SoundwalkRecord&) const = default;
};

struct LexiconEntry {
  std::string term;                 // normalized
  std::vector<std::string> labels;  // non-empty; single "unclassified" for plain word lists
  bool operator==(const LexiconEntry&) const = default;
};

struct TaxonomyEntry {
  std::string term;               // normalized
  std::vector<std::string> path;  // head is a top-level category label
  bool operator==(const TaxonomyEntry&) const = default;
};

// index is the 1-based input line, or the 0-based feature index when
// `unit` is "feature".
struct Rejection {
  std::size_t index = 0;
  std::string reason;
};

template <class T>
struct Parsed {
  std::vector<T> records;
  std::vector<Rejection> rejected;
  std::vector<std::string> warnings;
  std::size_t consumed = 0;        // non-blank data lines (or features) seen
  const char* unit = "line";

  // records + rejections account for every consumed line
  bool total() const { return records.size() + rejected.size() == consumed; }

  void report(std::ostream& os) const {
    for (const auto& r : rejected) os << unit << ":" << r.index << " reason:" << r.reason << "\n";
  }
};

// Interned tag strings; ids are assigned in first-seen order, so tables built
// from the same photo stream agree and emitted output is re-sorted by text.
class TagPool {
 public:
  std::uint32_t intern(const std::string& s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    std::uint32_t id = static_cast<std::uint32_t>(strings_.size());
    strings_.push_back(s);
    index_.emplace(strings_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& text(std::uint32_t id) const { return strings_[id]; }
  std::size_t size() const { return strings_.size(); }

 private:
  std::vector<std::string> strings_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Per-segment multiset of normalized tags after photo assignment. Indices
// parallel the segment collection the index was built from.
struct SegmentTagTable {
  TagPool tags;
  std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> counts;  // per segment: tag -> multiplicity
  std::vector<std::uint32_t> photos;                                     // per segment: photos contained
  std::uint64_t photos_seen = 0;
  std::uint64_t photos_assigned = 0;   // photos contained in at least one buffer
  std::uint64_t photos_unassigned = 0;

  std::uint64_t tag_multiplicity(std::size_t seg) const {
    std::uint64_t n = 0;
    for (auto& [_, c] : counts[seg]) n += c;
    return n;
  }

  // (tag text, count) sorted by text; the deterministic emit order
  std::vector<std::pair<std::string, std::uint32_t>> sorted_counts(std::size_t seg) const {
    std::vector<std::pair<std::string, std::uint32_t>> out;
    out.reserve(counts[seg].size());
    for (auto& [id, c] : counts[seg]) out.emplace_back(tags.text(id), c);
    std::sort(out.begin(), out.end());
    return out;
  }
};

}  // namespace chattymaps

#endif
