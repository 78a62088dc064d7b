#ifndef CHATTYMAPS_GEO_HPP
#define CHATTYMAPS_GEO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "chattymaps/lexicon.hpp"
#include "chattymaps/types.hpp"

// Planar geometry around street segments. Coordinates are projected once
// (equirectangular about a fixed reference) and everything downstream works
// in meters. A buffered segment carries both the polygonized capsule outline
// (for emission and area checks) and the exact predicate: a point is inside
// iff its distance to the source polyline is at most the buffer width.

namespace chattymaps::geo {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kDefaultBufferM = 22.5;

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

struct Box {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

class Projector {
 public:
  explicit Projector(LonLat ref) : ref_(ref) {
    cos_ref_ = std::cos(ref_.lat * std::numbers::pi / 180.0);
  }

  LonLat reference() const { return ref_; }

  Point project(LonLat p) const {
    const double rad = std::numbers::pi / 180.0;
    return {kEarthRadiusM * (p.lon - ref_.lon) * rad * cos_ref_,
            kEarthRadiusM * (p.lat - ref_.lat) * rad};
  }

  LonLat unproject(Point p) const {
    const double rad = std::numbers::pi / 180.0;
    return {ref_.lon + p.x / (kEarthRadiusM * rad * cos_ref_),
            ref_.lat + p.y / (kEarthRadiusM * rad)};
  }

  // Mean of all polyline vertices; the default projection reference.
  static LonLat centroid(const std::vector<StreetSegment>& segments) {
    double lon = 0, lat = 0;
    std::size_t n = 0;
    for (const auto& s : segments)
      for (const auto& v : s.polyline) {
        lon += v.lon;
        lat += v.lat;
        ++n;
      }
    if (n == 0) throw InputError("cannot take the centroid of an empty segment set");
    return {lon / n, lat / n};
  }

 private:
  LonLat ref_;
  double cos_ref_;
};

inline double dist2_point_segment(Point p, Point a, Point b) {
  double vx = b.x - a.x, vy = b.y - a.y;
  double wx = p.x - a.x, wy = p.y - a.y;
  double vv = vx * vx + vy * vy;
  double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  double dx = wx - t * vx, dy = wy - t * vy;
  return dx * dx + dy * dy;
}

inline double dist_point_polyline(Point p, const std::vector<Point>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < line.size(); ++i)
    best = std::min(best, dist2_point_segment(p, line[i - 1], line[i]));
  return std::sqrt(best);
}

inline double polyline_length(const std::vector<Point>& line) {
  double len = 0;
  for (std::size_t i = 1; i < line.size(); ++i)
    len += std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
  return len;
}

// Point at half the arc length; the segment's representative location.
inline Point polyline_midpoint(const std::vector<Point>& line) {
  double half = polyline_length(line) / 2.0;
  double walked = 0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    double step = std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
    if (walked + step >= half && step > 0) {
      double t = (half - walked) / step;
      return {line[i - 1].x + t * (line[i].x - line[i - 1].x),
              line[i - 1].y + t * (line[i].y - line[i - 1].y)};
    }
    walked += step;
  }
  return line.back();
}

using Ring = std::vector<Point>;  // closed: first point repeated at the end

struct BufferedSegment {
  std::uint32_t segment = 0;  // index into the source collection
  double width = 0;
  std::vector<Point> line;
  std::vector<Ring> outers;
  std::vector<Ring> holes;
  double polygon_area = 0;
  double length = 0;
  Box bbox{};

  // The capsule predicate itself; exact up to floating point, and within the
  // polygonization tolerance of the emitted outline.
  bool contains(Point p) const {
    return bbox.contains(p) && dist_point_polyline(p, line) <= width;
  }
};

namespace detail {

// Enough arc vertices that the inscribed outline stays within `tol` of the
// true circle, and never fewer than 32 per full turn.
inline std::size_t arc_points(double width, double tol) {
  if (!(tol > 0) || tol >= width) return 32;
  double step = 2.0 * std::acos(1.0 - tol / width);
  return std::max<std::size_t>(32, static_cast<std::size_t>(std::ceil(2.0 * std::numbers::pi / step)));
}

}  // namespace detail

inline BufferedSegment buffer_polyline(const std::vector<Point>& line, double width, double tol = 0.1) {
  if (line.size() < 2) throw InputError("polyline needs at least two vertices");
  if (!(width > 0)) throw InputError("buffer width must be positive");
  if (!(polyline_length(line) > 0)) throw InputError("polyline has zero length");

  namespace bg = boost::geometry;
  using BPoint = bg::model::d2::point_xy<double>;
  using BPoly = bg::model::polygon<BPoint>;

  bg::model::linestring<BPoint> ls;
  for (auto p : line) ls.emplace_back(p.x, p.y);

  const std::size_t n = detail::arc_points(width, tol);
  bg::model::multi_polygon<BPoly> buffered;
  bg::buffer(ls, buffered, bg::strategy::buffer::distance_symmetric<double>(width),
             bg::strategy::buffer::side_straight(), bg::strategy::buffer::join_round(n),
             bg::strategy::buffer::end_round(n), bg::strategy::buffer::point_circle(n));
  if (buffered.empty()) throw InternalError("buffering produced no polygon");

  BufferedSegment out;
  out.width = width;
  out.line = line;
  out.length = polyline_length(line);
  out.polygon_area = bg::area(buffered);
  auto to_ring = [](const auto& bring) {
    Ring r;
    r.reserve(bring.size());
    for (const auto& p : bring) r.push_back({bg::get<0>(p), bg::get<1>(p)});
    return r;
  };
  for (const auto& poly : buffered) {
    out.outers.push_back(to_ring(poly.outer()));
    for (const auto& inner : poly.inners()) out.holes.push_back(to_ring(inner));
  }
  Box b{line[0].x, line[0].y, line[0].x, line[0].y};
  for (auto p : line) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  out.bbox = {b.min_x - width, b.min_y - width, b.max_x + width, b.max_y + width};
  return out;
}

// Uniform grid over capsule bounding boxes. A query hits one cell; every
// capsule whose box overlaps the cell is a candidate, then the exact
// predicate filters. Results equal a linear scan by construction.
class SpatialIndex {
 public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<BufferedSegment> segments) : segs_(std::move(segments)) {
    if (segs_.empty()) return;
    std::vector<double> dims;
    dims.reserve(segs_.size());
    ox_ = segs_[0].bbox.min_x;
    oy_ = segs_[0].bbox.min_y;
    for (const auto& s : segs_) {
      dims.push_back(std::max(s.bbox.max_x - s.bbox.min_x, s.bbox.max_y - s.bbox.min_y));
      ox_ = std::min(ox_, s.bbox.min_x);
      oy_ = std::min(oy_, s.bbox.min_y);
    }
    std::nth_element(dims.begin(), dims.begin() + dims.size() / 2, dims.end());
    cell_ = std::max(1.0, dims[dims.size() / 2]);
    for (std::uint32_t i = 0; i < segs_.size(); ++i) {
      const Box& b = segs_[i].bbox;
      auto [x0, y0] = cell_of({b.min_x, b.min_y});
      auto [x1, y1] = cell_of({b.max_x, b.max_y});
      for (std::int64_t cx = x0; cx <= x1; ++cx)
        for (std::int64_t cy = y0; cy <= y1; ++cy) cells_[key(cx, cy)].push_back(i);
    }
  }

  const std::vector<BufferedSegment>& segments() const { return segs_; }

  // Indices of all capsules containing p, ascending.
  std::vector<std::uint32_t> query(Point p) const {
    std::vector<std::uint32_t> out;
    if (segs_.empty()) return out;
    auto [cx, cy] = cell_of(p);
    auto it = cells_.find(key(cx, cy));
    if (it == cells_.end()) return out;
    for (std::uint32_t i : it->second)
      if (segs_[i].contains(p)) out.push_back(i);
    return out;  // insertion order was ascending
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(Point p) const {
    return {static_cast<std::int64_t>(std::floor((p.x - ox_) / cell_)),
            static_cast<std::int64_t>(std::floor((p.y - oy_) / cell_))};
  }

  static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(cy));
  }

  std::vector<BufferedSegment> segs_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
  double cell_ = 1;
  double ox_ = 0, oy_ = 0;
};

inline std::vector<BufferedSegment> buffer_segments(const std::vector<StreetSegment>& segments,
                                                    const Projector& proj, double width,
                                                    double tol = 0.1) {
  std::vector<BufferedSegment> out;
  out.reserve(segments.size());
  for (std::uint32_t i = 0; i < segments.size(); ++i) {
    std::vector<Point> line;
    line.reserve(segments[i].polyline.size());
    for (auto v : segments[i].polyline) line.push_back(proj.project(v));
    BufferedSegment b;
    try {
      b = buffer_polyline(line, width, tol);
    } catch (const InputError& e) {
      throw InputError("segment " + segments[i].id + ": " + e.what());
    }
    b.segment = i;
    out.push_back(std::move(b));
  }
  return out;
}

struct AssignOptions {
  bool dedup_photos = false;  // collapse identical (position, tag multiset) uploads
  unsigned threads = 1;
};

namespace detail {

inline std::uint64_t dedup_key(const PhotoRecord& p, const std::vector<std::string>& norm_tags) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  mix(&p.lon, sizeof p.lon);
  mix(&p.lat, sizeof p.lat);
  for (const auto& t : norm_tags) {
    mix(t.data(), t.size());
    mix("\x1f", 1);
  }
  return h;
}

}  // namespace detail

// Accumulates photos into a SegmentTagTable. Tags are normalized here; a
// photo inside several capsules counts toward each of them.
class Assigner {
 public:
  Assigner(const Projector& proj, const SpatialIndex& index, AssignOptions opt = {})
      : proj_(&proj), index_(&index), opt_(opt) {
    table_.counts.resize(index.segments().size());
    table_.photos.resize(index.segments().size(), 0);
  }

  void add(const PhotoRecord& photo) {
    ++table_.photos_seen;
    std::vector<std::string> tags;
    tags.reserve(photo.tags.size());
    for (const auto& raw : photo.tags)
      if (auto n = lexicon::normalize(raw)) tags.push_back(std::move(*n));
    if (opt_.dedup_photos) {
      std::sort(tags.begin(), tags.end());
      if (!dedup_seen_.insert(detail::dedup_key(photo, tags)).second) return;
    }
    auto hits = index_->query(proj_->project({photo.lon, photo.lat}));
    if (hits.empty()) {
      ++table_.photos_unassigned;
      return;
    }
    ++table_.photos_assigned;
    for (auto h : hits) {
      std::uint32_t seg = index_->segments()[h].segment;
      ++table_.photos[seg];
      for (const auto& t : tags) ++table_.counts[seg][table_.tags.intern(t)];
    }
  }

  SegmentTagTable take() { return std::move(table_); }

 private:
  const Projector* proj_;
  const SpatialIndex* index_;
  AssignOptions opt_;
  SegmentTagTable table_;
  std::unordered_set<std::uint64_t> dedup_seen_;
};

namespace detail {

inline void merge_tables(SegmentTagTable& into, const SegmentTagTable& from) {
  for (std::size_t seg = 0; seg < from.counts.size(); ++seg) {
    into.photos[seg] += from.photos[seg];
    for (auto& [id, c] : from.counts[seg]) into.counts[seg][into.tags.intern(from.tags.text(id))] += c;
  }
  into.photos_seen += from.photos_seen;
  into.photos_assigned += from.photos_assigned;
  into.photos_unassigned += from.photos_unassigned;
}

}  // namespace detail

// Chunked over threads; per-chunk tables merge in chunk order, and counts are
// commutative, so the result is independent of both thread count and photo
// order.
inline SegmentTagTable assign_photos(const std::vector<PhotoRecord>& photos, const Projector& proj,
                                     const SpatialIndex& index, AssignOptions opt = {}) {
  unsigned threads = std::max(1u, opt.threads);
  if (opt.dedup_photos || threads == 1 || photos.size() < 4096) {
    Assigner a(proj, index, opt);
    for (const auto& p : photos) a.add(p);
    return a.take();
  }
  AssignOptions chunk_opt = opt;
  chunk_opt.dedup_photos = false;
  std::vector<SegmentTagTable> parts(threads);
  std::vector<std::thread> workers;
  std::size_t chunk = (photos.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      Assigner a(proj, index, chunk_opt);
      std::size_t b = t * chunk, e = std::min(photos.size(), b + chunk);
      for (std::size_t i = b; i < e; ++i) a.add(photos[i]);
      parts[t] = a.take();
    });
  }
  for (auto& w : workers) w.join();
  SegmentTagTable out = std::move(parts[0]);
  for (unsigned t = 1; t < threads; ++t) detail::merge_tables(out, parts[t]);
  return out;
}

}  // namespace chattymaps::geo

#endif
