#ifndef CHATTYMAPS_INGEST_HPP
#define CHATTYMAPS_INGEST_HPP

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "chattymaps/csv.hpp"
#include "chattymaps/lexicon.hpp"
#include "chattymaps/types.hpp"

// Readers for every input format. Photos arrive as JSON Lines, segments as a
// GeoJSON feature collection, everything else as headed CSV. Malformed rows
// become positional rejections; only structural problems (unreadable file,
// duplicate segment ids, bad header) throw.

namespace chattymaps::ingest {

namespace detail {

inline bool blank(const std::string& line) {
  for (char c : line)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}

inline std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
  return out;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

}  // namespace detail

// One JSON Lines photo. Keys: id (string or integer), lon, lat, tags
// (array of strings), optional integer timestamp.
inline std::optional<PhotoRecord> photo_from_json_line(const std::string& line, std::string& err) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    err = "not a JSON object";
    return std::nullopt;
  }
  PhotoRecord p;
  auto id = j.find("id");
  if (id == j.end()) {
    err = "missing id";
    return std::nullopt;
  }
  if (id->is_string()) {
    p.id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    p.id = std::to_string(id->get<std::int64_t>());
  } else {
    err = "id must be a string or integer";
    return std::nullopt;
  }
  if (p.id.empty()) {
    err = "empty id";
    return std::nullopt;
  }
  auto lon = j.find("lon"), lat = j.find("lat");
  if (lon == j.end() || lat == j.end() || !lon->is_number() || !lat->is_number()) {
    err = "missing or non-numeric lon/lat";
    return std::nullopt;
  }
  p.lon = lon->get<double>();
  p.lat = lat->get<double>();
  if (!(p.lon >= -180.0 && p.lon <= 180.0 && p.lat >= -90.0 && p.lat <= 90.0)) {
    err = "lon/lat out of range";
    return std::nullopt;
  }
  auto tags = j.find("tags");
  if (tags != j.end() && !tags->is_null()) {
    if (!tags->is_array()) {
      err = "tags must be an array";
      return std::nullopt;
    }
    for (auto& t : *tags) {
      if (!t.is_string()) {
        err = "tag element is not a string";
        return std::nullopt;
      }
      p.tags.push_back(t.get<std::string>());
    }
  }
  auto ts = j.find("timestamp");
  if (ts != j.end() && !ts->is_null()) {
    if (!ts->is_number_integer()) {
      err = "timestamp not an integer";
      return std::nullopt;
    }
    p.timestamp = ts->get<std::int64_t>();
  }
  return p;
}

inline Parsed<PhotoRecord> parse_photos(std::istream& in) {
  Parsed<PhotoRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    ++out.consumed;
    std::string err;
    auto p = photo_from_json_line(line, err);
    if (!p) {
      out.rejected.push_back({lineno, err});
      continue;
    }
    if (!seen.insert(p->id).second) {
      out.rejected.push_back({lineno, "duplicate photo id " + p->id + " (first occurrence kept)"});
      continue;
    }
    out.records.push_back(std::move(*p));
  }
  return out;
}

inline Parsed<PhotoRecord> parse_photos_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_photos(in);
}

inline void write_photos(std::ostream& os, const std::vector<PhotoRecord>& photos) {
  for (const auto& p : photos) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["lon"] = p.lon;
    j["lat"] = p.lat;
    j["tags"] = p.tags;
    if (p.timestamp) j["timestamp"] = *p.timestamp;
    os << j.dump() << '\n';
  }
}

// GeoJSON FeatureCollection of LineString features. The street kind is read
// from properties.highway (falling back to street_type, then type); a feature
// id may live at feature.id, properties.segment_id, or properties.id.
inline Parsed<StreetSegment> parse_segments(std::istream& in) {
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw InputError("segments input is not a GeoJSON FeatureCollection");

  Parsed<StreetSegment> out;
  out.unit = "feature";
  std::unordered_set<std::string> seen;
  std::size_t idx = 0;
  for (auto& f : doc["features"]) {
    std::size_t i = idx++;
    ++out.consumed;
    if (!f.is_object() || f.value("type", "") != "Feature") {
      out.rejected.push_back({i, "not a Feature object"});
      continue;
    }
    StreetSegment s;
    const auto props = f.contains("properties") && f["properties"].is_object()
                           ? f["properties"]
                           : nlohmann::json::object();
    auto id = f.find("id");
    if (id != f.end() && id->is_string()) {
      s.id = id->get<std::string>();
    } else if (id != f.end() && id->is_number_integer()) {
      s.id = std::to_string(id->get<std::int64_t>());
    } else if (props.contains("segment_id") && props["segment_id"].is_string()) {
      s.id = props["segment_id"].get<std::string>();
    } else if (props.contains("id") && props["id"].is_string()) {
      s.id = props["id"].get<std::string>();
    }
    if (s.id.empty()) {
      out.rejected.push_back({i, "missing feature id"});
      continue;
    }
    std::string kind;
    for (const char* key : {"highway", "street_type", "type"})
      if (kind.empty() && props.contains(key) && props[key].is_string()) kind = props[key].get<std::string>();
    s.type = street_type_from(detail::lower_trim(kind));

    auto geom = f.find("geometry");
    if (geom == f.end() || !geom->is_object() || geom->value("type", "") != "LineString") {
      out.rejected.push_back({i, "geometry is not a LineString"});
      continue;
    }
    auto coords = geom->find("coordinates");
    bool ok = coords != geom->end() && coords->is_array() && coords->size() >= 2;
    if (ok) {
      for (auto& c : *coords) {
        if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
          ok = false;
          break;
        }
        LonLat v{c[0].get<double>(), c[1].get<double>()};
        if (!(v.lon >= -180.0 && v.lon <= 180.0 && v.lat >= -90.0 && v.lat <= 90.0)) {
          ok = false;
          break;
        }
        s.polyline.push_back(v);
      }
    }
    if (!ok) {
      out.rejected.push_back({i, "malformed coordinates"});
      continue;
    }
    bool repeated = false;
    for (std::size_t k = 1; k < s.polyline.size(); ++k)
      repeated = repeated || s.polyline[k] == s.polyline[k - 1];
    if (repeated) {
      out.rejected.push_back({i, "repeated consecutive vertex"});
      continue;
    }
    if (!seen.insert(s.id).second) throw InputError("duplicate segment id " + s.id);
    out.records.push_back(std::move(s));
  }
  return out;
}

inline Parsed<StreetSegment> parse_segments_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_segments(in);
}

// CSV with a `term` column and an optional pipe-separated `labels` column.
// A missing column or empty cell means the single label "unclassified", so
// plain word lists pass through. Terms are normalized on the way in.
inline Parsed<LexiconEntry> parse_lexicon(std::istream& in) {
  Parsed<LexiconEntry> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t term_col = 0;
  std::optional<std::size_t> labels_col;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      term_col = h.require("term");
      labels_col = h.find("labels");
      have_header = true;
      continue;
    }
    ++out.consumed;
    auto fields = csv::split(line);
    if (fields.size() <= std::max(term_col, labels_col.value_or(0))) {
      out.rejected.push_back({lineno, "too few columns"});
      continue;
    }
    auto term = lexicon::normalize(fields[term_col]);
    if (!term) {
      out.rejected.push_back({lineno, "term empty after normalization"});
      continue;
    }
    LexiconEntry e;
    e.term = *term;
    std::string labels = labels_col ? fields[*labels_col] : std::string();
    std::size_t pos = 0;
    while (pos <= labels.size()) {
      std::size_t bar = labels.find('|', pos);
      std::string_view piece(labels.data() + pos, (bar == std::string::npos ? labels.size() : bar) - pos);
      std::string l = detail::lower_trim(piece);
      if (!l.empty()) e.labels.push_back(std::move(l));
      if (bar == std::string::npos) break;
      pos = bar + 1;
    }
    if (e.labels.empty()) e.labels.push_back("unclassified");
    if (!seen.insert(e.term).second) {
      out.rejected.push_back({lineno, "duplicate term " + e.term + " (first occurrence kept)"});
      continue;
    }
    out.records.push_back(std::move(e));
  }
  if (!have_header) throw InputError("lexicon file has no header");
  return out;
}

inline Parsed<LexiconEntry> parse_lexicon_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_lexicon(in);
}

inline void write_lexicon(std::ostream& os, const std::vector<LexiconEntry>& entries) {
  csv::Writer w(os);
  w.row({"term", "labels"});
  for (const auto& e : entries) {
    std::string labels;
    for (std::size_t i = 0; i < e.labels.size(); ++i) {
      if (i) labels += '|';
      labels += e.labels[i];
    }
    w.row({e.term, labels});
  }
}

// CSV `term,path` where path is slash-separated, head being one of the six
// top-level categories.
inline Parsed<TaxonomyEntry> parse_taxonomy_file_stream(std::istream& in) {
  Parsed<TaxonomyEntry> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t term_col = 0, path_col = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      term_col = h.require("term");
      path_col = h.require("path");
      have_header = true;
      continue;
    }
    ++out.consumed;
    auto fields = csv::split(line);
    if (fields.size() <= std::max(term_col, path_col)) {
      out.rejected.push_back({lineno, "too few columns"});
      continue;
    }
    auto term = lexicon::normalize(fields[term_col]);
    if (!term) {
      out.rejected.push_back({lineno, "term empty after normalization"});
      continue;
    }
    TaxonomyEntry e;
    e.term = *term;
    const std::string& path = fields[path_col];
    std::size_t pos = 0;
    bool bad = false;
    while (pos <= path.size()) {
      std::size_t slash = path.find('/', pos);
      std::string_view piece(path.data() + pos, (slash == std::string::npos ? path.size() : slash) - pos);
      std::string label = detail::lower_trim(piece);
      if (label.empty()) bad = true;
      e.path.push_back(std::move(label));
      if (slash == std::string::npos) break;
      pos = slash + 1;
    }
    if (bad || e.path.empty() || e.path.size() > 4) {
      out.rejected.push_back({lineno, "malformed path"});
      continue;
    }
    if (!sound_category_from(e.path.front())) {
      out.rejected.push_back({lineno, "path head '" + e.path.front() + "' is not a top-level category"});
      continue;
    }
    if (!seen.insert(e.term).second) {
      out.rejected.push_back({lineno, "duplicate term " + e.term + " (first occurrence kept)"});
      continue;
    }
    out.records.push_back(std::move(e));
  }
  if (!have_header) throw InputError("taxonomy file has no header");
  return out;
}

inline Parsed<TaxonomyEntry> parse_taxonomy_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_taxonomy_file_stream(in);
}

inline void write_taxonomy(std::ostream& os, const lexicon::Taxonomy& tax) {
  csv::Writer w(os);
  w.row({"term", "path"});
  for (const auto& [term, path] : tax.terms()) {
    std::string joined;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) joined += '/';
      joined += path[i];
    }
    w.row({term, joined});
  }
}

// CSV `segment_id,l_day,l_evening,l_night[,ewl]`, levels in dB within [0,130].
inline Parsed<NoiseRecord> parse_noise(std::istream& in) {
  Parsed<NoiseRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t id_col = 0, day_col = 0, eve_col = 0, night_col = 0;
  std::optional<std::size_t> ewl_col;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      id_col = h.require("segment_id");
      day_col = h.require("l_day");
      eve_col = h.require("l_evening");
      night_col = h.require("l_night");
      ewl_col = h.find("ewl");
      have_header = true;
      continue;
    }
    ++out.consumed;
    auto fields = csv::split(line);
    std::size_t maxcol = std::max(std::max(id_col, day_col), std::max(eve_col, night_col));
    if (ewl_col) maxcol = std::max(maxcol, *ewl_col);
    if (fields.size() <= maxcol) {
      out.rejected.push_back({lineno, "too few columns"});
      continue;
    }
    NoiseRecord r;
    r.segment_id = fields[id_col];
    if (r.segment_id.empty()) {
      out.rejected.push_back({lineno, "empty segment_id"});
      continue;
    }
    auto day = csv::to_double(fields[day_col]);
    auto eve = csv::to_double(fields[eve_col]);
    auto night = csv::to_double(fields[night_col]);
    auto in_range = [](std::optional<double> v) { return v && *v >= 0.0 && *v <= 130.0; };
    if (!in_range(day) || !in_range(eve) || !in_range(night)) {
      out.rejected.push_back({lineno, "level missing or outside [0,130] dB"});
      continue;
    }
    r.l_day = *day;
    r.l_evening = *eve;
    r.l_night = *night;
    if (ewl_col && !fields[*ewl_col].empty()) {
      auto e = csv::to_double(fields[*ewl_col]);
      if (!in_range(e)) {
        out.rejected.push_back({lineno, "ewl outside [0,130] dB"});
        continue;
      }
      r.ewl = *e;
    }
    if (!seen.insert(r.segment_id).second) {
      out.rejected.push_back({lineno, "duplicate segment_id " + r.segment_id + " (first occurrence kept)"});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  if (!have_header) throw InputError("noise file has no header");
  return out;
}

inline Parsed<NoiseRecord> parse_noise_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_noise(in);
}

inline void write_noise(std::ostream& os, const std::vector<NoiseRecord>& records) {
  csv::Writer w(os);
  w.row({"segment_id", "l_day", "l_evening", "l_night", "ewl"});
  for (const auto& r : records)
    w.row({r.segment_id, csv::fmt_exact(r.l_day), csv::fmt_exact(r.l_evening),
           csv::fmt_exact(r.l_night), r.ewl ? csv::fmt_exact(*r.ewl) : std::string()});
}

// CSV with id columns walk_id, participant_id, location_id and the thirteen
// integer score columns named after the walk categories and perceptions.
inline Parsed<SoundwalkRecord> parse_soundwalk(std::istream& in) {
  Parsed<SoundwalkRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t walk_col = 0, part_col = 0, loc_col = 0;
  std::array<std::size_t, kWalkCategoryCount> sound_cols{};
  std::array<std::size_t, kPerceptionCount> perc_cols{};
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    if (!have_header) {
      csv::Header h{csv::split(line)};
      walk_col = h.require("walk_id");
      part_col = h.require("participant_id");
      loc_col = h.require("location_id");
      for (std::size_t i = 0; i < kWalkCategoryCount; ++i) sound_cols[i] = h.require(kWalkCategoryNames[i]);
      for (std::size_t i = 0; i < kPerceptionCount; ++i) perc_cols[i] = h.require(kPerceptionNames[i]);
      have_header = true;
      continue;
    }
    ++out.consumed;
    auto fields = csv::split(line);
    std::size_t maxcol = std::max(std::max(walk_col, part_col), loc_col);
    for (auto c : sound_cols) maxcol = std::max(maxcol, c);
    for (auto c : perc_cols) maxcol = std::max(maxcol, c);
    if (fields.size() <= maxcol) {
      out.rejected.push_back({lineno, "too few columns"});
      continue;
    }
    SoundwalkRecord r;
    r.walk_id = fields[walk_col];
    r.participant_id = fields[part_col];
    r.location_id = fields[loc_col];
    bool ok = !r.walk_id.empty() && !r.participant_id.empty() && !r.location_id.empty();
    auto score = [&](std::size_t col, int& slot) {
      auto v = csv::to_int(fields[col]);
      if (!v || *v < 1 || *v > 10) return false;
      slot = static_cast<int>(*v);
      return true;
    };
    for (std::size_t i = 0; ok && i < kWalkCategoryCount; ++i) ok = score(sound_cols[i], r.sounds[i]);
    for (std::size_t i = 0; ok && i < kPerceptionCount; ++i) ok = score(perc_cols[i], r.perceptions[i]);
    if (!ok) {
      out.rejected.push_back({lineno, "score missing or outside [1,10]"});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  if (!have_header) throw InputError("soundwalk file has no header");
  return out;
}

inline Parsed<SoundwalkRecord> parse_soundwalk_file(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return parse_soundwalk(in);
}

inline void write_soundwalk(std::ostream& os, const std::vector<SoundwalkRecord>& records) {
  csv::Writer w(os);
  std::vector<std::string> header = {"walk_id", "participant_id", "location_id"};
  for (auto n : kWalkCategoryNames) header.emplace_back(n);
  for (auto n : kPerceptionNames) header.emplace_back(n);
  w.row(header);
  for (const auto& r : records) {
    std::vector<std::string> row = {r.walk_id, r.participant_id, r.location_id};
    for (int v : r.sounds) row.push_back(std::to_string(v));
    for (int v : r.perceptions) row.push_back(std::to_string(v));
    w.row(row);
  }
}

}  // namespace chattymaps::ingest

#endif
