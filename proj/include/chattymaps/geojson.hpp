#ifndef CHATTYMAPS_GEOJSON_HPP
#define CHATTYMAPS_GEOJSON_HPP

#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chattymaps/csv.hpp"
#include "chattymaps/types.hpp"

// Hand-rolled GeoJSON emission. Output bytes are part of the determinism
// contract, so property order and number formatting stay under our control
// rather than a serializer's.

namespace chattymaps::geojson {

inline std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          static const char* hex = "0123456789abcdef";
          out += "\\u00";
          out += hex[c >> 4];
          out += hex[c & 0xF];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

inline std::string str(std::string_view s) { return "\"" + escape(s) + "\""; }
inline std::string num(double v) { return csv::fmt6(v); }
inline std::string coord(double v) { return csv::fmt_exact(v); }

// Property values are preformatted JSON tokens; the writer emits them
// verbatim in the given order.
struct Feature {
  const StreetSegment* segment = nullptr;
  std::vector<std::pair<std::string, std::string>> properties;
};

inline void write_feature(std::ostream& os, const Feature& f) {
  os << "{\"type\":\"Feature\",\"properties\":{";
  for (std::size_t i = 0; i < f.properties.size(); ++i) {
    if (i) os << ',';
    os << str(f.properties[i].first) << ':' << f.properties[i].second;
  }
  os << "},\"geometry\":{\"type\":\"LineString\",\"coordinates\":[";
  const auto& line = f.segment->polyline;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (i) os << ',';
    os << '[' << coord(line[i].lon) << ',' << coord(line[i].lat) << ']';
  }
  os << "]}}";
}

inline void write_feature_collection(std::ostream& os, const std::vector<Feature>& features) {
  os << "{\"type\":\"FeatureCollection\",\"features\":[";
  for (std::size_t i = 0; i < features.size(); ++i) {
    os << (i ? ",\n" : "\n");
    write_feature(os, features[i]);
  }
  os << "\n]}\n";
}

}  // namespace chattymaps::geojson

#endif
