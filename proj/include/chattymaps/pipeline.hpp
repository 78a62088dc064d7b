#ifndef CHATTYMAPS_PIPELINE_HPP
#define CHATTYMAPS_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "chattymaps/community.hpp"
#include "chattymaps/geo.hpp"
#include "chattymaps/geojson.hpp"
#include "chattymaps/graph.hpp"
#include "chattymaps/ingest.hpp"
#include "chattymaps/layers.hpp"
#include "chattymaps/perception.hpp"
#include "chattymaps/validation.hpp"

// Stage orchestration. Every subcommand reads its inputs and the artifacts
// of earlier stages from the output directory, then writes its own artifacts
// plus a manifest snapshot. All emission is sorted and fixed-format, so a
// rerun with the same manifest reproduces the same bytes.

namespace chattymaps::pipeline {

struct RunManifest {
  std::string photos;
  std::string segments;
  std::string noise;
  std::string soundwalk;
  std::string sound_lexicon;
  std::string emotion_lexicon;
  std::string taxonomy_file;   // overrides the taxonomy stage artifact
  std::string category_map;
  std::string merge_map;
  std::string out = "out";
  double buffer_m = 22.5;
  std::optional<double> ref_lon, ref_lat;  // projection reference; segment centroid otherwise
  std::uint64_t seed = 1;
  std::size_t size_threshold = 50;
  std::uint64_t min_tags = 5;
  std::uint64_t min_count = 0;  // graph term frequency floor, strict >
  unsigned threads = 1;
  bool dedup_photos = false;
};

inline RunManifest parse_manifest(std::istream& in) {
  RunManifest m;
  std::string line;
  std::size_t lineno = 0;
  auto need_double = [&](const std::string& v, const char* key) {
    auto d = csv::to_double(v);
    if (!d) throw InputError("manifest line " + std::to_string(lineno) + ": bad number for " + key);
    return *d;
  };
  auto need_uint = [&](const std::string& v, const char* key) {
    auto i = csv::to_int(v);
    if (!i || *i < 0)
      throw InputError("manifest line " + std::to_string(lineno) + ": bad count for " + key);
    return static_cast<std::uint64_t>(*i);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    auto eq = line.find('=', start);
    if (eq == std::string::npos)
      throw InputError("manifest line " + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      std::size_t b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    std::string key = strip(line.substr(start, eq - start));
    std::string val = strip(line.substr(eq + 1));
    if (key == "version")
      ;  // informational
    else if (key == "photos")
      m.photos = val;
    else if (key == "segments")
      m.segments = val;
    else if (key == "noise")
      m.noise = val;
    else if (key == "soundwalk")
      m.soundwalk = val;
    else if (key == "sound_lexicon")
      m.sound_lexicon = val;
    else if (key == "emotion_lexicon")
      m.emotion_lexicon = val;
    else if (key == "taxonomy_file")
      m.taxonomy_file = val;
    else if (key == "category_map")
      m.category_map = val;
    else if (key == "merge_map")
      m.merge_map = val;
    else if (key == "out")
      m.out = val;
    else if (key == "buffer_m")
      m.buffer_m = need_double(val, "buffer_m");
    else if (key == "ref_lon")
      m.ref_lon = need_double(val, "ref_lon");
    else if (key == "ref_lat")
      m.ref_lat = need_double(val, "ref_lat");
    else if (key == "seed")
      m.seed = need_uint(val, "seed");
    else if (key == "size_threshold")
      m.size_threshold = static_cast<std::size_t>(need_uint(val, "size_threshold"));
    else if (key == "min_tags")
      m.min_tags = need_uint(val, "min_tags");
    else if (key == "min_count")
      m.min_count = need_uint(val, "min_count");
    else if (key == "threads") {
      m.threads = static_cast<unsigned>(need_uint(val, "threads"));
      if (m.threads == 0) throw InputError("manifest: threads must be at least 1");
    } else if (key == "dedup_photos") {
      if (val == "true" || val == "1")
        m.dedup_photos = true;
      else if (val == "false" || val == "0")
        m.dedup_photos = false;
      else
        throw InputError("manifest line " + std::to_string(lineno) + ": bad boolean for dedup_photos");
    } else {
      throw InputError("manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!(m.buffer_m > 0)) throw InputError("manifest: buffer_m must be positive");
  if (m.ref_lon.has_value() != m.ref_lat.has_value())
    throw InputError("manifest: ref_lon and ref_lat must be given together");
  return m;
}

inline RunManifest parse_manifest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return parse_manifest(in);
}

// CHATTYMAPS_SEED sits between the manifest file and explicit flags.
inline void apply_env(RunManifest& m) {
  if (const char* s = std::getenv("CHATTYMAPS_SEED")) {
    auto v = csv::to_int(s);
    if (!v || *v < 0) throw InputError("CHATTYMAPS_SEED is not a nonnegative integer");
    m.seed = static_cast<std::uint64_t>(*v);
  }
}

inline void serialize_manifest(std::ostream& os, const RunManifest& m) {
  os << "version=" << kVersion << "\n";
  os << "photos=" << m.photos << "\n";
  os << "segments=" << m.segments << "\n";
  os << "noise=" << m.noise << "\n";
  os << "soundwalk=" << m.soundwalk << "\n";
  os << "sound_lexicon=" << m.sound_lexicon << "\n";
  os << "emotion_lexicon=" << m.emotion_lexicon << "\n";
  os << "taxonomy_file=" << m.taxonomy_file << "\n";
  os << "category_map=" << m.category_map << "\n";
  os << "merge_map=" << m.merge_map << "\n";
  os << "out=" << m.out << "\n";
  os << "buffer_m=" << csv::fmt_exact(m.buffer_m) << "\n";
  if (m.ref_lon) os << "ref_lon=" << csv::fmt_exact(*m.ref_lon) << "\n";
  if (m.ref_lat) os << "ref_lat=" << csv::fmt_exact(*m.ref_lat) << "\n";
  os << "seed=" << m.seed << "\n";
  os << "size_threshold=" << m.size_threshold << "\n";
  os << "min_tags=" << m.min_tags << "\n";
  os << "min_count=" << m.min_count << "\n";
  os << "threads=" << m.threads << "\n";
  os << "dedup_photos=" << (m.dedup_photos ? "true" : "false") << "\n";
}

namespace detail {

struct StageInfo {
  const char* name;
  std::vector<const char*> artifacts;
  std::vector<const char*> prereqs;  // checked in order; the order decides which gap is reported
};

inline const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> t = {
      {"ingest-check", {"ingest_report.csv", "ingest_rejections.csv"}, {}},
      {"assign", {"segments_meta.csv", "segment_tags.csv", "assign_summary.csv"}, {}},
      {"taxonomy",
       {"taxonomy.csv", "partition.csv", "cooccurrence_edges.csv", "taxonomy_summary.csv"},
       {}},
      {"sound-map",
       {"sound_profiles.csv", "zscores.csv", "type_averages.csv", "sound_summary.csv",
        "sound_map.geojson"},
       {"taxonomy", "assign"}},
      {"emotion-map", {"emotion_profiles.csv", "emotion_zscores.csv", "emotion_summary.csv"}, {"assign"}},
      {"perception-map",
       {"perception_table.csv", "perception_pca.csv", "perception_map.geojson",
        "perception_summary.csv"},
       {"sound-map", "assign"}},
      {"diversity-map",
       {"diversity.csv", "diversity_hist.csv", "diversity_by_tags.csv", "diversity_summary.csv"},
       {"sound-map"}},
      {"validate-noise",
       {"ewl.csv", "noise_correlation.csv", "noise_correlation_periods.csv", "noise_summary.csv"},
       {"sound-map", "assign"}},
      {"report", {"coverage.csv", "coverage_hist.csv", "tags_per_segment_hist.csv", "report_summary.csv"}, {"assign"}},
  };
  return t;
}

inline const StageInfo& stage_info(const std::string& name) {
  for (const auto& s : stage_table())
    if (name == s.name) return s;
  throw InputError("unknown stage '" + name + "'");
}

inline bool artifacts_present(const RunManifest& m, const StageInfo& s) {
  for (const auto* a : s.artifacts)
    if (!std::filesystem::exists(std::filesystem::path(m.out) / a)) return false;
  return true;
}

// Reports the deepest stage whose artifacts are missing, so the user is told
// where the pipeline actually has to restart. A taxonomy_file override
// removes the taxonomy stage from every prerequisite chain.
inline void require_stage(const RunManifest& m, const std::string& name) {
  const StageInfo& s = stage_info(name);
  if (artifacts_present(m, s)) return;
  for (const auto* pre : s.prereqs) {
    if (std::string_view(pre) == "taxonomy" && !m.taxonomy_file.empty()) continue;
    if (!artifacts_present(m, stage_info(pre))) {
      require_stage(m, pre);  // recurses until the deepest gap, then throws there
    }
  }
  throw MissingArtifactError(name, "missing artifacts from stage '" + name + "' in " + m.out +
                                       "; run `chattymaps " + name + "` first");
}

inline void ensure_out(const RunManifest& m) {
  std::filesystem::create_directories(m.out);
  std::ofstream os(std::filesystem::path(m.out) / "manifest.txt", std::ios::binary);
  if (!os) throw InternalError("cannot write manifest to " + m.out);
  serialize_manifest(os, m);
}

inline std::ofstream open_artifact(const RunManifest& m, const char* name) {
  std::ofstream os(std::filesystem::path(m.out) / name, std::ios::binary);
  if (!os) throw InternalError(std::string("cannot write ") + name + " in " + m.out);
  return os;
}

inline void need_input(const std::string& path, const char* what) {
  if (path.empty()) throw InputError(std::string(what) + " input not configured");
}

struct Table {
  csv::Header header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_artifact_csv(const RunManifest& m, const char* name) {
  std::ifstream in(std::filesystem::path(m.out) / name, std::ios::binary);
  if (!in) throw InternalError(std::string("cannot read artifact ") + name);
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::split(line);
    if (!have_header) {
      t.header = csv::Header{std::move(fields)};
      have_header = true;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw InternalError(std::string("artifact ") + name + " is empty");
  return t;
}

inline const std::string& cell(const std::vector<std::string>& row, std::size_t col,
                               const char* artifact) {
  if (col >= row.size()) throw InternalError(std::string("artifact ") + artifact + " row is short");
  return row[col];
}

inline double num_cell(const std::vector<std::string>& row, std::size_t col, const char* artifact) {
  auto v = csv::to_double(cell(row, col, artifact));
  if (!v) throw InternalError(std::string("artifact ") + artifact + " holds a bad number");
  return *v;
}

inline std::uint64_t int_cell(const std::vector<std::string>& row, std::size_t col,
                              const char* artifact) {
  auto v = csv::to_int(cell(row, col, artifact));
  if (!v || *v < 0) throw InternalError(std::string("artifact ") + artifact + " holds a bad count");
  return static_cast<std::uint64_t>(*v);
}

struct MetaRow {
  std::string id;
  StreetType type = StreetType::other;
  double length_m = 0, area_m2 = 0;
  double mid_lon = 0, mid_lat = 0, x = 0, y = 0;
  std::uint64_t photos = 0, tag_total = 0;
};

inline std::vector<MetaRow> read_segments_meta(const RunManifest& m) {
  auto t = read_artifact_csv(m, "segments_meta.csv");
  std::size_t c_id = t.header.require("segment_id"), c_type = t.header.require("street_type"),
              c_len = t.header.require("length_m"), c_area = t.header.require("area_m2"),
              c_mlon = t.header.require("mid_lon"), c_mlat = t.header.require("mid_lat"),
              c_x = t.header.require("x"), c_y = t.header.require("y"),
              c_ph = t.header.require("photos"), c_tt = t.header.require("tag_total");
  std::vector<MetaRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    MetaRow mr;
    mr.id = cell(r, c_id, "segments_meta.csv");
    mr.type = street_type_from(cell(r, c_type, "segments_meta.csv"));
    mr.length_m = num_cell(r, c_len, "segments_meta.csv");
    mr.area_m2 = num_cell(r, c_area, "segments_meta.csv");
    mr.mid_lon = num_cell(r, c_mlon, "segments_meta.csv");
    mr.mid_lat = num_cell(r, c_mlat, "segments_meta.csv");
    mr.x = num_cell(r, c_x, "segments_meta.csv");
    mr.y = num_cell(r, c_y, "segments_meta.csv");
    mr.photos = int_cell(r, c_ph, "segments_meta.csv");
    mr.tag_total = int_cell(r, c_tt, "segments_meta.csv");
    out.push_back(std::move(mr));
  }
  return out;
}

// Meta rows joined with their tag multisets; segments without tags get an
// empty list.
struct SegmentCounts {
  std::vector<MetaRow> meta;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> counts;
  std::map<std::string, std::size_t> index;
};

inline SegmentCounts load_segment_counts(const RunManifest& m) {
  SegmentCounts sc;
  sc.meta = read_segments_meta(m);
  sc.counts.resize(sc.meta.size());
  for (std::size_t i = 0; i < sc.meta.size(); ++i) sc.index[sc.meta[i].id] = i;
  auto t = read_artifact_csv(m, "segment_tags.csv");
  std::size_t c_id = t.header.require("segment_id"), c_tag = t.header.require("tag"),
              c_n = t.header.require("count");
  for (const auto& r : t.rows) {
    auto it = sc.index.find(cell(r, c_id, "segment_tags.csv"));
    if (it == sc.index.end())
      throw InternalError("segment_tags.csv references a segment missing from segments_meta.csv");
    sc.counts[it->second].emplace_back(
        cell(r, c_tag, "segment_tags.csv"),
        static_cast<std::uint32_t>(int_cell(r, c_n, "segment_tags.csv")));
  }
  return sc;
}

struct SoundRow {
  std::string id;
  std::array<double, kSoundCategoryCount> fractions{};
  std::uint64_t tag_total = 0;
  bool multi_label = false;
};

inline std::vector<SoundRow> read_sound_profiles(const RunManifest& m) {
  auto t = read_artifact_csv(m, "sound_profiles.csv");
  std::size_t c_id = t.header.require("segment_id");
  std::array<std::size_t, kSoundCategoryCount> c_f{};
  for (std::size_t c = 0; c < kSoundCategoryCount; ++c) c_f[c] = t.header.require(kSoundCategoryNames[c]);
  std::size_t c_tt = t.header.require("tag_total"), c_ml = t.header.require("multi_label");
  std::vector<SoundRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    SoundRow s;
    s.id = cell(r, c_id, "sound_profiles.csv");
    for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
      s.fractions[c] = num_cell(r, c_f[c], "sound_profiles.csv");
    s.tag_total = int_cell(r, c_tt, "sound_profiles.csv");
    s.multi_label = int_cell(r, c_ml, "sound_profiles.csv") != 0;
    out.push_back(std::move(s));
  }
  return out;
}

template <std::size_t K, class NameArray>
inline std::vector<std::pair<std::string, std::array<double, K>>> read_wide_rows(
    const RunManifest& m, const char* artifact, const NameArray& names, const char* prefix) {
  auto t = read_artifact_csv(m, artifact);
  std::size_t c_id = t.header.require("segment_id");
  std::array<std::size_t, K> cols{};
  for (std::size_t k = 0; k < K; ++k) cols[k] = t.header.require(std::string(prefix) + std::string(names[k]));
  std::vector<std::pair<std::string, std::array<double, K>>> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    std::array<double, K> v{};
    for (std::size_t k = 0; k < K; ++k) v[k] = num_cell(r, cols[k], artifact);
    out.emplace_back(cell(r, c_id, artifact), v);
  }
  return out;
}

inline std::map<std::string, const StreetSegment*> geometry_by_id(
    const std::vector<StreetSegment>& segments) {
  std::map<std::string, const StreetSegment*> out;
  for (const auto& s : segments) out[s.id] = &s;
  return out;
}

inline std::vector<StreetSegment> load_geometry(const RunManifest& m) {
  need_input(m.segments, "segments");
  auto parsed = ingest::parse_segments_file(m.segments);
  return std::move(parsed.records);
}

inline lexicon::Taxonomy load_taxonomy(const RunManifest& m) {
  std::string path;
  if (!m.taxonomy_file.empty()) {
    path = m.taxonomy_file;
  } else {
    require_stage(m, "taxonomy");
    path = (std::filesystem::path(m.out) / "taxonomy.csv").string();
  }
  auto parsed = ingest::parse_taxonomy_file(path);
  if (!parsed.rejected.empty())
    throw InputError("taxonomy " + path + ": " + std::to_string(parsed.rejected.size()) +
                     " unusable rows, first: " + parsed.rejected.front().reason);
  // Top levels are whatever the file uses; callers that need the canonical
  // sound categories check canonical() and report the gap as an input problem.
  std::set<std::string> tops;
  for (const auto& r : parsed.records)
    if (!r.path.empty()) tops.insert(r.path.front());
  return lexicon::Taxonomy(std::move(parsed.records),
                           std::vector<std::string>(tops.begin(), tops.end()));
}

inline std::string bool_str(bool b) { return b ? "1" : "0"; }

}  // namespace detail

// Parses every configured input and reports per-source totals; nothing else
// depends on its artifacts.
inline void run_ingest_check(const RunManifest& m) {
  detail::need_input(m.photos, "photos");
  detail::need_input(m.segments, "segments");
  detail::ensure_out(m);

  auto report = detail::open_artifact(m, "ingest_report.csv");
  auto rejects = detail::open_artifact(m, "ingest_rejections.csv");
  csv::Writer rw(report), xw(rejects);
  rw.row({"source", "unit", "total", "kept", "rejected", "warnings"});
  xw.row({"source", "unit", "index", "reason"});

  auto record = [&](const char* source, const auto& parsed) {
    rw.row({source, parsed.unit, std::to_string(parsed.consumed), std::to_string(parsed.records.size()),
            std::to_string(parsed.rejected.size()), std::to_string(parsed.warnings.size())});
    for (const auto& r : parsed.rejected)
      xw.row({source, parsed.unit, std::to_string(r.index), r.reason});
    for (const auto& w : parsed.warnings) std::cerr << source << ": " << w << "\n";
  };

  record("photos", ingest::parse_photos_file(m.photos));
  record("segments", ingest::parse_segments_file(m.segments));
  if (!m.sound_lexicon.empty()) record("sound_lexicon", ingest::parse_lexicon_file(m.sound_lexicon));
  if (!m.emotion_lexicon.empty())
    record("emotion_lexicon", ingest::parse_lexicon_file(m.emotion_lexicon));
  if (!m.taxonomy_file.empty()) record("taxonomy_file", ingest::parse_taxonomy_file(m.taxonomy_file));
  if (!m.noise.empty()) record("noise", ingest::parse_noise_file(m.noise));
  if (!m.soundwalk.empty()) record("soundwalk", ingest::parse_soundwalk_file(m.soundwalk));
  if (!m.category_map.empty()) perception::parse_category_map_file(m.category_map);
  if (!m.merge_map.empty()) community::parse_merge_file(m.merge_map);
}

// Buffers segments, assigns photos to every capsule containing them and
// writes the per-segment tag multisets plus segment geometry stats.
inline void run_assign(const RunManifest& m) {
  detail::need_input(m.photos, "photos");
  detail::need_input(m.segments, "segments");
  detail::ensure_out(m);

  auto seg_parsed = ingest::parse_segments_file(m.segments);
  if (seg_parsed.records.empty()) throw InputError("no usable segments in " + m.segments);
  auto photo_parsed = ingest::parse_photos_file(m.photos);

  LonLat ref = (m.ref_lon && m.ref_lat) ? LonLat{*m.ref_lon, *m.ref_lat}
                                        : geo::Projector::centroid(seg_parsed.records);
  geo::Projector proj(ref);
  auto buffered = geo::buffer_segments(seg_parsed.records, proj, m.buffer_m);
  geo::SpatialIndex index(std::move(buffered));

  geo::AssignOptions opt;
  opt.dedup_photos = m.dedup_photos;
  opt.threads = m.threads;
  auto table = geo::assign_photos(photo_parsed.records, proj, index, opt);

  const auto& segs = seg_parsed.records;
  std::vector<std::size_t> order(segs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return segs[a].id < segs[b].id; });

  {
    auto os = detail::open_artifact(m, "segments_meta.csv");
    csv::Writer w(os);
    w.row({"segment_id", "street_type", "length_m", "area_m2", "mid_lon", "mid_lat", "x", "y",
           "photos", "tag_total"});
    for (auto i : order) {
      const auto& b = index.segments()[i];
      geo::Point mid = geo::polyline_midpoint(b.line);
      LonLat mid_ll = proj.unproject(mid);
      w.row({segs[i].id, std::string(name_of(segs[i].type)), csv::fmt6(b.length),
             csv::fmt6(b.polygon_area), csv::fmt_exact(mid_ll.lon), csv::fmt_exact(mid_ll.lat),
             csv::fmt_exact(mid.x), csv::fmt_exact(mid.y), std::to_string(table.photos[i]),
             std::to_string(table.tag_multiplicity(i))});
    }
  }
  {
    auto os = detail::open_artifact(m, "segment_tags.csv");
    csv::Writer w(os);
    w.row({"segment_id", "tag", "count"});
    for (auto i : order)
      for (const auto& [tag, count] : table.sorted_counts(i))
        w.row({segs[i].id, tag, std::to_string(count)});
  }
  {
    std::size_t with_photos = 0;
    std::uint64_t total_mult = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (table.photos[i] > 0) ++with_photos;
      total_mult += table.tag_multiplicity(i);
    }
    auto os = detail::open_artifact(m, "assign_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"photos_seen", std::to_string(table.photos_seen)});
    w.row({"photos_assigned", std::to_string(table.photos_assigned)});
    w.row({"photos_unassigned", std::to_string(table.photos_unassigned)});
    w.row({"photos_rejected", std::to_string(photo_parsed.rejected.size())});
    w.row({"segments", std::to_string(segs.size())});
    w.row({"segments_rejected", std::to_string(seg_parsed.rejected.size())});
    w.row({"segments_with_photos", std::to_string(with_photos)});
    w.row({"tag_multiplicity_total", std::to_string(total_mult)});
    w.row({"buffer_m", csv::fmt_exact(m.buffer_m)});
    w.row({"ref_lon", csv::fmt_exact(ref.lon)});
    w.row({"ref_lat", csv::fmt_exact(ref.lat)});
  }
}

// Builds the word co-occurrence graph from photos, finds communities, splits
// oversized ones and applies the merge file, producing the category tree.
inline void run_taxonomy(const RunManifest& m) {
  detail::need_input(m.photos, "photos");
  detail::need_input(m.sound_lexicon, "sound_lexicon");
  detail::ensure_out(m);

  auto lex_parsed = ingest::parse_lexicon_file(m.sound_lexicon);
  lexicon::LexiconFile lex("sound", std::move(lex_parsed.records));
  auto photos = ingest::parse_photos_file(m.photos);

  std::unordered_set<std::string> terms;
  for (const auto& e : lex.entries()) terms.insert(e.term);

  graph::CooccurrenceBuilder builder(terms);
  for (const auto& p : photos.records) builder.add_photo(p.tags);

  double retained_volume = 1.0;
  if (m.min_count > 0) {
    auto ff = lexicon::filter_by_frequency(builder.word_photo_counts(), m.min_count);
    retained_volume = ff.volume_fraction();
    std::unordered_set<std::string> kept(ff.kept.begin(), ff.kept.end());
    graph::CooccurrenceBuilder filtered(kept);
    for (const auto& p : photos.records) filtered.add_photo(p.tags);
    builder = std::move(filtered);
  }
  auto g = builder.build();
  if (g.node_count() == 0) throw InputError("no lexicon terms appear in the photo tags");

  community::InfomapOptions iopt;
  iopt.seed = m.seed;
  auto top = community::infomap_partition(g, iopt);
  double codelength = community::map_equation(g, top);
  auto hier = community::louvain_refine(g, top, m.size_threshold, m.seed);

  std::vector<community::MergeRule> rules;
  if (!m.merge_map.empty()) rules = community::parse_merge_file(m.merge_map);
  auto tax = community::apply_merge(g, hier, rules);

  {
    auto os = detail::open_artifact(m, "cooccurrence_edges.csv");
    csv::Writer w(os);
    w.row({"source", "target", "weight"});
    for (const auto& e : g.edges())
      w.row({g.labels()[e.u], g.labels()[e.v], csv::fmt_exact(e.w)});
  }
  {
    std::vector<std::uint32_t> by_term(g.node_count());
    std::iota(by_term.begin(), by_term.end(), 0);  // labels are already sorted
    auto os = detail::open_artifact(m, "partition.csv");
    csv::Writer w(os);
    w.row({"term", "top", "child", "key"});
    for (auto u : by_term)
      w.row({g.labels()[u], std::to_string(hier.top[u]),
             hier.child[u] < 0 ? std::string() : std::to_string(hier.child[u]), hier.key_of(u)});
  }
  {
    auto os = detail::open_artifact(m, "taxonomy.csv");
    ingest::write_taxonomy(os, tax);
  }
  {
    std::size_t refined = 0;
    for (auto k : hier.child_counts)
      if (k > 0) ++refined;
    std::size_t leaves = 0;
    for (auto k : hier.child_counts) leaves += (k > 0 ? k : 1);
    auto os = detail::open_artifact(m, "taxonomy_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"lexicon_terms", std::to_string(lex.size())});
    w.row({"graph_nodes", std::to_string(g.node_count())});
    w.row({"graph_edges", std::to_string(g.edge_count())});
    w.row({"codelength_bits", csv::fmt6(codelength)});
    w.row({"top_communities", std::to_string(hier.child_counts.size())});
    w.row({"refined_communities", std::to_string(refined)});
    w.row({"leaf_communities", std::to_string(leaves)});
    w.row({"merge_rules", std::to_string(rules.size())});
    w.row({"retained_volume_fraction", csv::fmt6(retained_volume)});
    w.row({"min_count", std::to_string(m.min_count)});
    w.row({"size_threshold", std::to_string(m.size_threshold)});
    w.row({"seed", std::to_string(m.seed)});
  }
}

// Sound profiles, z-scores, street-type aggregates, dominant categories and
// the sound map itself.
inline void run_sound_map(const RunManifest& m) {
  detail::ensure_out(m);
  detail::require_stage(m, "assign");
  auto tax = detail::load_taxonomy(m);
  if (!tax.canonical())
    throw InputError("taxonomy top levels are not the canonical categories; label them via merge rules");
  auto lookup = layers::CategoryLookup::from_taxonomy(tax);

  auto sc = detail::load_segment_counts(m);
  auto geometry = detail::load_geometry(m);
  auto geom_by_id = detail::geometry_by_id(geometry);

  struct Row {
    std::size_t meta = 0;
    layers::SoundProfile profile;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < sc.meta.size(); ++i)
    if (auto p = layers::sound_profile_from_counts(sc.counts[i], lookup))
      rows.push_back({i, *p});
  if (rows.size() < 2)
    throw InputError("fewer than 2 segments have sound profiles; cannot compute z-scores");

  std::vector<std::array<double, kSoundCategoryCount>> fracs(rows.size());
  std::vector<StreetType> types(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    fracs[r] = rows[r].profile.fractions;
    types[r] = sc.meta[rows[r].meta].type;
  }
  auto zm = layers::zscores<kSoundCategoryCount>(fracs);
  auto type_avg = layers::street_type_averages(zm.z, types);

  {
    auto os = detail::open_artifact(m, "sound_profiles.csv");
    csv::Writer w(os);
    std::vector<std::string> head{"segment_id"};
    for (auto n : kSoundCategoryNames) head.emplace_back(n);
    head.emplace_back("tag_total");
    head.emplace_back("multi_label");
    w.row(head);
    for (const auto& r : rows) {
      std::vector<std::string> row{sc.meta[r.meta].id};
      for (double f : r.profile.fractions) row.push_back(csv::fmt6(f));
      row.push_back(std::to_string(r.profile.tag_total));
      row.push_back(detail::bool_str(r.profile.multi_label));
      w.row(row);
    }
  }
  {
    auto os = detail::open_artifact(m, "zscores.csv");
    csv::Writer w(os);
    std::vector<std::string> head{"segment_id"};
    for (auto n : kSoundCategoryNames) head.push_back("z_" + std::string(n));
    w.row(head);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<std::string> row{sc.meta[rows[r].meta].id};
      for (double z : zm.z[r]) row.push_back(csv::fmt6(z));
      w.row(row);
    }
  }
  {
    auto os = detail::open_artifact(m, "type_averages.csv");
    csv::Writer w(os);
    w.row({"street_type", "category", "mean_z", "ci95_half", "n"});
    for (const auto& ta : type_avg)
      w.row({std::string(name_of(ta.type)), std::string(name_of(ta.category)),
             csv::fmt6(ta.stat.mean), ta.stat.has_ci ? csv::fmt6(ta.stat.half95) : std::string(),
             std::to_string(ta.stat.n)});
  }
  {
    std::size_t multi = 0;
    for (const auto& r : rows)
      if (r.profile.multi_label) ++multi;
    auto os = detail::open_artifact(m, "sound_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"segments_profiled", std::to_string(rows.size())});
    w.row({"segments_total", std::to_string(sc.meta.size())});
    w.row({"multi_label_segments", std::to_string(multi)});
    w.row({"min_tags", std::to_string(m.min_tags)});
    for (std::size_t c = 0; c < kSoundCategoryCount; ++c) {
      w.row({"mu_" + std::string(kSoundCategoryNames[c]), csv::fmt6(zm.norms[c].mean)});
      w.row({"sigma_" + std::string(kSoundCategoryNames[c]), csv::fmt6(zm.norms[c].sigma)});
      w.row({"degenerate_" + std::string(kSoundCategoryNames[c]),
             detail::bool_str(zm.norms[c].degenerate)});
    }
  }
  {
    std::map<std::size_t, std::size_t> profiled;  // meta index -> row index
    for (std::size_t r = 0; r < rows.size(); ++r) profiled[rows[r].meta] = r;
    std::vector<geojson::Feature> features;
    for (std::size_t i = 0; i < sc.meta.size(); ++i) {
      auto git = geom_by_id.find(sc.meta[i].id);
      if (git == geom_by_id.end())
        throw InputError("segments input does not match assign artifacts: missing " + sc.meta[i].id);
      geojson::Feature f;
      f.segment = git->second;
      f.properties.emplace_back("segment_id", geojson::str(sc.meta[i].id));
      f.properties.emplace_back("street_type", geojson::str(name_of(sc.meta[i].type)));
      auto it = profiled.find(i);
      if (it == profiled.end()) {
        for (auto n : kSoundCategoryNames) f.properties.emplace_back("f_" + std::string(n), "null");
        f.properties.emplace_back("tag_total", "0");
        f.properties.emplace_back("dominant", geojson::str("insufficient"));
        f.properties.emplace_back("diversity", "null");
      } else {
        const auto& p = rows[it->second].profile;
        for (std::size_t c = 0; c < kSoundCategoryCount; ++c)
          f.properties.emplace_back("f_" + std::string(kSoundCategoryNames[c]),
                                    geojson::num(p.fractions[c]));
        f.properties.emplace_back("tag_total", std::to_string(p.tag_total));
        auto dom = layers::dominant_category(zm.z[it->second], p.tag_total, m.min_tags);
        f.properties.emplace_back("dominant",
                                  geojson::str(dom ? name_of(*dom) : std::string_view("insufficient")));
        f.properties.emplace_back("diversity", geojson::num(layers::diversity(p.fractions)));
      }
      features.push_back(std::move(f));
    }
    auto os = detail::open_artifact(m, "sound_map.geojson");
    geojson::write_feature_collection(os, features);
  }
}

// Emotion fractions over all tags plus their z-scores.
inline void run_emotion_map(const RunManifest& m) {
  detail::need_input(m.emotion_lexicon, "emotion_lexicon");
  detail::ensure_out(m);
  detail::require_stage(m, "assign");

  auto lex_parsed = ingest::parse_lexicon_file(m.emotion_lexicon);
  lexicon::LexiconFile lex("emotion", std::move(lex_parsed.records));
  auto sc = detail::load_segment_counts(m);

  struct Row {
    std::size_t meta = 0;
    layers::EmotionProfile profile;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < sc.meta.size(); ++i)
    if (auto p = layers::emotion_profile_from_counts(sc.counts[i], lex)) rows.push_back({i, *p});
  if (rows.size() < 2)
    throw InputError("fewer than 2 segments have tags; cannot compute emotion z-scores");

  std::vector<std::array<double, kEmotionCount>> fracs(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) fracs[r] = rows[r].profile.fractions;
  auto zm = layers::zscores<kEmotionCount>(fracs);

  {
    auto os = detail::open_artifact(m, "emotion_profiles.csv");
    csv::Writer w(os);
    std::vector<std::string> head{"segment_id"};
    for (auto n : kEmotionNames) head.emplace_back(n);
    head.emplace_back("tag_total");
    w.row(head);
    for (const auto& r : rows) {
      std::vector<std::string> row{sc.meta[r.meta].id};
      for (double f : r.profile.fractions) row.push_back(csv::fmt6(f));
      row.push_back(std::to_string(r.profile.tag_total));
      w.row(row);
    }
  }
  {
    auto os = detail::open_artifact(m, "emotion_zscores.csv");
    csv::Writer w(os);
    std::vector<std::string> head{"segment_id"};
    for (auto n : kEmotionNames) head.push_back("z_" + std::string(n));
    w.row(head);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<std::string> row{sc.meta[rows[r].meta].id};
      for (double z : zm.z[r]) row.push_back(csv::fmt6(z));
      w.row(row);
    }
  }
  {
    auto os = detail::open_artifact(m, "emotion_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"segments_profiled", std::to_string(rows.size())});
    w.row({"segments_total", std::to_string(sc.meta.size())});
    for (std::size_t e = 0; e < kEmotionCount; ++e) {
      w.row({"mu_" + std::string(kEmotionNames[e]), csv::fmt6(zm.norms[e].mean)});
      w.row({"sigma_" + std::string(kEmotionNames[e]), csv::fmt6(zm.norms[e].sigma)});
      w.row({"degenerate_" + std::string(kEmotionNames[e]), detail::bool_str(zm.norms[e].degenerate)});
    }
  }
}

// Soundwalk conditional probabilities, PCA and the projection of sound
// profiles onto predicted perceptions.
inline void run_perception_map(const RunManifest& m) {
  detail::need_input(m.soundwalk, "soundwalk");
  detail::ensure_out(m);
  detail::require_stage(m, "sound-map");
  detail::require_stage(m, "assign");

  auto walk = ingest::parse_soundwalk_file(m.soundwalk);
  for (const auto& r : walk.rejected)
    std::cerr << "soundwalk " << walk.unit << " " << r.index << ": " << r.reason << "\n";
  auto table = perception::conditional_probabilities(walk.records);
  auto pca = perception::principal_components(walk.records);
  perception::CategoryMap catmap = m.category_map.empty()
                                       ? perception::CategoryMap::defaults()
                                       : perception::parse_category_map_file(m.category_map);

  auto profiles = detail::read_sound_profiles(m);
  std::map<std::string, const detail::SoundRow*> prof_by_id;
  for (const auto& p : profiles) prof_by_id[p.id] = &p;
  auto meta = detail::read_segments_meta(m);
  auto geometry = detail::load_geometry(m);
  auto geom_by_id = detail::geometry_by_id(geometry);

  {
    auto os = detail::open_artifact(m, "perception_table.csv");
    csv::Writer w(os);
    w.row({"sound", "perception", "q4_sound", "q4_perception", "q4_joint", "p_c", "p_f",
           "p_c_given_f", "p_f_given_c"});
    for (std::size_t c = 0; c < kWalkCategoryCount; ++c)
      for (std::size_t f = 0; f < kPerceptionCount; ++f)
        w.row({std::string(kWalkCategoryNames[c]), std::string(kPerceptionNames[f]),
               std::to_string(table.q4_sound[c]), std::to_string(table.q4_perception[f]),
               std::to_string(table.q4_joint[c][f]), csv::fmt6(table.p_c[c]),
               csv::fmt6(table.p_f[f]), csv::fmt6(table.p_c_given_f[c][f]),
               csv::fmt6(table.p_f_given_c[c][f])});
  }
  {
    auto os = detail::open_artifact(m, "perception_pca.csv");
    csv::Writer w(os);
    std::vector<std::string> head{"component", "eigenvalue", "explained"};
    for (auto n : kPerceptionNames) head.push_back("loading_" + std::string(n));
    w.row(head);
    for (std::size_t k = 0; k < kPerceptionCount; ++k) {
      std::vector<std::string> row{std::to_string(k + 1), csv::fmt6(pca.eigenvalues[k]),
                                   csv::fmt6(pca.explained[k])};
      for (double v : pca.components[k]) row.push_back(csv::fmt6(v));
      w.row(row);
    }
  }
  {
    auto os = detail::open_artifact(m, "perception_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"records", std::to_string(table.n)});
    w.row({"records_rejected", std::to_string(walk.rejected.size())});
    w.row({"q4_sound_total", std::to_string(table.q4_sound_total)});
    w.row({"q4_perception_total", std::to_string(table.q4_perception_total)});
    w.row({"pca_rank_deficient", detail::bool_str(pca.rank_deficient)});
    w.row({"warnings", std::to_string(table.warnings.size())});
    for (const auto& warning : table.warnings) std::cerr << "perception: " << warning << "\n";
  }
  {
    std::vector<geojson::Feature> features;
    for (const auto& mr : meta) {
      auto git = geom_by_id.find(mr.id);
      if (git == geom_by_id.end())
        throw InputError("segments input does not match assign artifacts: missing " + mr.id);
      geojson::Feature f;
      f.segment = git->second;
      f.properties.emplace_back("segment_id", geojson::str(mr.id));
      auto pit = prof_by_id.find(mr.id);
      if (pit == prof_by_id.end()) {
        for (auto n : kPerceptionNames) f.properties.emplace_back("p_" + std::string(n), "null");
        f.properties.emplace_back("argmax", geojson::str("insufficient"));
        f.properties.emplace_back("degenerate", "false");
      } else {
        auto row = perception::segment_perception(pit->second->fractions, pit->second->tag_total,
                                                  table, catmap, m.min_tags);
        for (std::size_t k = 0; k < kPerceptionCount; ++k)
          f.properties.emplace_back("p_" + std::string(kPerceptionNames[k]), geojson::num(row.p[k]));
        f.properties.emplace_back(
            "argmax", geojson::str(row.argmax ? name_of(*row.argmax) : std::string_view("insufficient")));
        f.properties.emplace_back("degenerate", row.degenerate ? "true" : "false");
      }
      features.push_back(std::move(f));
    }
    auto os = detail::open_artifact(m, "perception_map.geojson");
    geojson::write_feature_collection(os, features);
  }
}

// Shannon diversity per profiled segment plus its distribution.
inline void run_diversity_map(const RunManifest& m) {
  detail::ensure_out(m);
  detail::require_stage(m, "sound-map");

  auto profiles = detail::read_sound_profiles(m);
  std::vector<layers::SoundProfile> lp(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    lp[i].fractions = profiles[i].fractions;
    lp[i].tag_total = profiles[i].tag_total;
  }
  auto rep = layers::diversity_report(lp);

  {
    auto os = detail::open_artifact(m, "diversity.csv");
    csv::Writer w(os);
    w.row({"segment_id", "diversity", "tag_total"});
    for (const auto& p : profiles)
      w.row({p.id, csv::fmt6(layers::diversity(p.fractions)), std::to_string(p.tag_total)});
  }
  {
    auto os = detail::open_artifact(m, "diversity_hist.csv");
    csv::Writer w(os);
    w.row({"bin_lo", "count"});
    for (const auto& b : rep.hist) w.row({csv::fmt6(b.lo), std::to_string(b.count)});
  }
  {
    auto os = detail::open_artifact(m, "diversity_by_tags.csv");
    csv::Writer w(os);
    w.row({"tag_total", "n", "mean_diversity"});
    for (const auto& b : rep.by_tags)
      w.row({std::to_string(b.tag_total), std::to_string(b.n), csv::fmt6(b.mean)});
  }
  {
    auto os = detail::open_artifact(m, "diversity_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"segments", std::to_string(rep.segments)});
    w.row({"zero_segments", std::to_string(rep.zero_segments)});
    w.row({"zero_fraction", csv::fmt6(rep.zero_fraction)});
    w.row({"bin_width", csv::fmt6(rep.bin_width)});
  }
}

// EWL per segment and the correlation sweep against category fractions.
inline void run_validate_noise(const RunManifest& m) {
  detail::need_input(m.noise, "noise");
  detail::ensure_out(m);
  detail::require_stage(m, "sound-map");
  detail::require_stage(m, "assign");

  auto noise = ingest::parse_noise_file(m.noise);
  auto profiles = detail::read_sound_profiles(m);
  auto meta = detail::read_segments_meta(m);
  std::map<std::string, const detail::MetaRow*> meta_by_id;
  for (const auto& mr : meta) meta_by_id[mr.id] = &mr;
  std::map<std::string, const detail::SoundRow*> prof_by_id;
  for (const auto& p : profiles) prof_by_id[p.id] = &p;

  struct Joined {
    const detail::SoundRow* prof;
    const detail::MetaRow* meta;
    const NoiseRecord* noise;
    double ewl;
    bool from_file;
  };
  std::vector<Joined> joined;
  for (const auto& nr : noise.records) {
    auto pit = prof_by_id.find(nr.segment_id);
    auto mit = meta_by_id.find(nr.segment_id);
    if (pit == prof_by_id.end() || mit == meta_by_id.end()) continue;
    Joined j;
    j.prof = pit->second;
    j.meta = mit->second;
    j.noise = &nr;
    j.from_file = nr.ewl.has_value();
    j.ewl = nr.ewl ? *nr.ewl : validation::ewl(nr.l_day, nr.l_evening, nr.l_night);
    joined.push_back(j);
  }
  std::sort(joined.begin(), joined.end(),
            [](const Joined& a, const Joined& b) { return a.prof->id < b.prof->id; });

  {
    auto os = detail::open_artifact(m, "ewl.csv");
    csv::Writer w(os);
    w.row({"segment_id", "ewl", "source"});
    for (const auto& j : joined)
      w.row({j.prof->id, csv::fmt6(j.ewl), j.from_file ? "file" : "computed"});
  }

  std::vector<std::array<double, kSoundCategoryCount>> fracs(joined.size());
  std::vector<std::uint64_t> totals(joined.size());
  std::vector<double> xs(joined.size()), ys(joined.size());
  for (std::size_t i = 0; i < joined.size(); ++i) {
    fracs[i] = joined[i].prof->fractions;
    totals[i] = joined[i].prof->tag_total;
    xs[i] = joined[i].meta->x;
    ys[i] = joined[i].meta->y;
  }

  auto write_points = [](csv::Writer& w, const validation::SweepResult& sweep,
                         const std::string& period) {
    for (const auto& pt : sweep.points) {
      std::vector<std::string> row;
      if (!period.empty()) row.push_back(period);
      row.push_back(std::to_string(pt.threshold));
      row.emplace_back(name_of(pt.category));
      row.push_back(pt.defined ? csv::fmt6(pt.rho) : std::string());
      row.push_back(std::to_string(pt.n));
      row.push_back(pt.defined ? csv::fmt6(pt.n_eff) : std::string());
      row.push_back(pt.defined ? csv::fmt6(pt.p) : std::string());
      w.row(row);
    }
  };

  std::vector<std::string> all_warnings;
  {
    std::vector<double> metric(joined.size());
    for (std::size_t i = 0; i < joined.size(); ++i) metric[i] = joined[i].ewl;
    auto sweep = validation::noise_correlation_sweep(fracs, totals, metric, xs, ys);
    for (const auto& warning : sweep.warnings) all_warnings.push_back("ewl: " + warning);
    auto os = detail::open_artifact(m, "noise_correlation.csv");
    csv::Writer w(os);
    w.row({"N", "category", "rho", "n", "n_eff", "p"});
    write_points(w, sweep, "");
  }
  {
    auto os = detail::open_artifact(m, "noise_correlation_periods.csv");
    csv::Writer w(os);
    w.row({"period", "N", "category", "rho", "n", "n_eff", "p"});
    const std::array<std::pair<const char*, double NoiseRecord::*>, 3> periods = {
        {{"day", &NoiseRecord::l_day},
         {"evening", &NoiseRecord::l_evening},
         {"night", &NoiseRecord::l_night}}};
    for (const auto& [pname, member] : periods) {
      std::vector<double> metric(joined.size());
      for (std::size_t i = 0; i < joined.size(); ++i) metric[i] = joined[i].noise->*member;
      auto sweep = validation::noise_correlation_sweep(fracs, totals, metric, xs, ys);
      for (const auto& warning : sweep.warnings)
        all_warnings.push_back(std::string(pname) + ": " + warning);
      write_points(w, sweep, pname);
    }
  }
  {
    std::size_t from_file = 0;
    for (const auto& j : joined)
      if (j.from_file) ++from_file;
    auto os = detail::open_artifact(m, "noise_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"noise_records", std::to_string(noise.records.size())});
    w.row({"noise_rejected", std::to_string(noise.rejected.size())});
    w.row({"segments_matched", std::to_string(joined.size())});
    w.row({"ewl_from_file", std::to_string(from_file)});
    w.row({"ewl_computed", std::to_string(joined.size() - from_file)});
    w.row({"warnings", std::to_string(all_warnings.size())});
    for (const auto& warning : all_warnings) std::cerr << "validate-noise: " << warning << "\n";
  }
}

// Coverage statistics and the cross-layer correlation matrices that have
// their inputs available.
inline void run_report(const RunManifest& m) {
  detail::need_input(m.photos, "photos");
  detail::ensure_out(m);
  detail::require_stage(m, "assign");

  auto photos = ingest::parse_photos_file(m.photos);
  auto sc = detail::load_segment_counts(m);

  SegmentTagTable table;
  table.counts.resize(sc.counts.size());
  table.photos.resize(sc.counts.size(), 0);
  for (std::size_t i = 0; i < sc.counts.size(); ++i)
    for (const auto& [tag, count] : sc.counts[i]) table.counts[i][table.tags.intern(tag)] = count;

  std::vector<lexicon::LexiconFile> lexicons;
  if (!m.sound_lexicon.empty()) {
    auto parsed = ingest::parse_lexicon_file(m.sound_lexicon);
    lexicons.emplace_back("sound", std::move(parsed.records));
  }
  if (!m.emotion_lexicon.empty()) {
    auto parsed = ingest::parse_lexicon_file(m.emotion_lexicon);
    lexicons.emplace_back("emotion", std::move(parsed.records));
  }
  std::vector<const lexicon::LexiconFile*> lex_ptrs;
  for (const auto& l : lexicons) lex_ptrs.push_back(&l);
  auto coverage = lexicon::coverage_report(photos.records, table, lex_ptrs);

  {
    auto os = detail::open_artifact(m, "coverage.csv");
    csv::Writer w(os);
    w.row({"lexicon", "metric", "value"});
    for (const auto& s : coverage) {
      w.row({s.lexicon, "tag_instances", std::to_string(s.tag_instances)});
      w.row({s.lexicon, "photos_with_match", std::to_string(s.photos_with_match)});
      w.row({s.lexicon, "photos_total", std::to_string(photos.records.size())});
      w.row({s.lexicon, "segments_with_match", std::to_string(s.segments_with_match)});
      w.row({s.lexicon, "segments_total", std::to_string(sc.meta.size())});
    }
  }
  {
    auto os = detail::open_artifact(m, "coverage_hist.csv");
    csv::Writer w(os);
    w.row({"lexicon", "matched_instances", "segments"});
    for (const auto& s : coverage)
      for (const auto& [matched, count] : s.per_segment_matches)
        w.row({s.lexicon, std::to_string(matched), std::to_string(count)});
  }
  {
    std::map<std::uint64_t, std::uint64_t> hist;
    for (std::size_t i = 0; i < sc.meta.size(); ++i) ++hist[sc.meta[i].tag_total];
    auto os = detail::open_artifact(m, "tags_per_segment_hist.csv");
    csv::Writer w(os);
    w.row({"tag_total", "segments"});
    for (const auto& [tags, count] : hist) w.row({std::to_string(tags), std::to_string(count)});
  }

  bool wrote_sound_emotion = false;
  if (std::filesystem::exists(std::filesystem::path(m.out) / "zscores.csv") &&
      std::filesystem::exists(std::filesystem::path(m.out) / "emotion_zscores.csv")) {
    auto zs = detail::read_wide_rows<kSoundCategoryCount>(m, "zscores.csv", kSoundCategoryNames, "z_");
    auto ze = detail::read_wide_rows<kEmotionCount>(m, "emotion_zscores.csv", kEmotionNames, "z_");
    std::map<std::string, const std::array<double, kEmotionCount>*> ze_by_id;
    for (const auto& [id, v] : ze) ze_by_id[id] = &v;
    std::map<std::string, const detail::MetaRow*> meta_by_id;
    for (const auto& mr : sc.meta) meta_by_id[mr.id] = &mr;

    std::vector<std::array<double, kSoundCategoryCount>> a;
    std::vector<std::array<double, kEmotionCount>> b;
    std::vector<double> xs, ys;
    for (const auto& [id, v] : zs) {
      auto eit = ze_by_id.find(id);
      auto mit = meta_by_id.find(id);
      if (eit == ze_by_id.end() || mit == meta_by_id.end()) continue;
      a.push_back(v);
      b.push_back(*eit->second);
      xs.push_back(mit->second->x);
      ys.push_back(mit->second->y);
    }
    if (a.size() >= 10) {
      auto corr = layers::spatial_cross_correlations<kSoundCategoryCount, kEmotionCount>(a, b, xs, ys);
      auto os = detail::open_artifact(m, "sound_emotion_corr.csv");
      csv::Writer w(os);
      w.row({"category", "emotion", "rho", "p", "n_eff", "n", "spatial"});
      for (std::size_t i = 0; i < kSoundCategoryCount; ++i)
        for (std::size_t j = 0; j < kEmotionCount; ++j) {
          const auto& cl = corr.cells[i][j];
          w.row({std::string(kSoundCategoryNames[i]), std::string(kEmotionNames[j]),
                 cl.defined ? csv::fmt6(cl.rho) : std::string(),
                 cl.defined ? csv::fmt6(cl.p) : std::string(),
                 cl.defined ? csv::fmt6(cl.n_eff) : std::string(), std::to_string(corr.n),
                 detail::bool_str(cl.spatial)});
        }
      wrote_sound_emotion = true;
    }
  }

  bool wrote_soundwalk = false;
  if (!m.soundwalk.empty()) {
    auto walk = ingest::parse_soundwalk_file(m.soundwalk);
    if (walk.records.size() >= 10) {
      auto cc = perception::soundwalk_cross_correlations(walk.records);
      auto write_matrix = [&](const char* artifact, const auto& matrix, const auto& names) {
        auto os = detail::open_artifact(m, artifact);
        csv::Writer w(os);
        w.row({"a", "b", "rho", "p"});
        for (std::size_t i = 0; i < names.size(); ++i)
          for (std::size_t j = 0; j < names.size(); ++j) {
            const auto& cl = matrix.cells[i][j];
            w.row({std::string(names[i]), std::string(names[j]),
                   cl.defined ? csv::fmt6(cl.rho) : std::string(),
                   cl.defined ? csv::fmt6(cl.p) : std::string()});
          }
      };
      write_matrix("soundwalk_sound_corr.csv", cc.sounds, kWalkCategoryNames);
      write_matrix("soundwalk_perception_corr.csv", cc.perceptions, kPerceptionNames);
      wrote_soundwalk = true;
    }
  }

  {
    auto os = detail::open_artifact(m, "report_summary.csv");
    csv::Writer w(os);
    w.row({"metric", "value"});
    w.row({"photos", std::to_string(photos.records.size())});
    w.row({"photos_rejected", std::to_string(photos.rejected.size())});
    w.row({"segments", std::to_string(sc.meta.size())});
    w.row({"lexicons_checked", std::to_string(lexicons.size())});
    w.row({"sound_emotion_matrix", detail::bool_str(wrote_sound_emotion)});
    w.row({"soundwalk_matrices", detail::bool_str(wrote_soundwalk)});
  }
}

inline void run(const std::string& subcommand, const RunManifest& m) {
  if (subcommand == "ingest-check")
    run_ingest_check(m);
  else if (subcommand == "assign")
    run_assign(m);
  else if (subcommand == "taxonomy")
    run_taxonomy(m);
  else if (subcommand == "sound-map")
    run_sound_map(m);
  else if (subcommand == "emotion-map")
    run_emotion_map(m);
  else if (subcommand == "perception-map")
    run_perception_map(m);
  else if (subcommand == "diversity-map")
    run_diversity_map(m);
  else if (subcommand == "validate-noise")
    run_validate_noise(m);
  else if (subcommand == "report")
    run_report(m);
  else
    throw InputError("unknown subcommand '" + subcommand + "'");
}

}  // namespace chattymaps::pipeline

#endif
