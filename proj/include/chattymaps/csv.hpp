#ifndef CHATTYMAPS_CSV_HPP
#define CHATTYMAPS_CSV_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "chattymaps/core.hpp"

// Minimal CSV plumbing plus the two float formatters used for every emitted
// number: fmt6() for computed statistics (6 significant digits, the
// determinism contract) and fmt_exact() for echoed values such as
// coordinates, where shortest round-trip formatting keeps re-parsing
// lossless. Both are locale-independent and byte-stable.

namespace chattymaps::csv {

// Splits one line into fields. Double quotes delimit fields that contain
// commas or quotes; "" inside a quoted field is a literal quote.
inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline std::string quote_if_needed(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += quote_if_needed(fields[i]);
  }
  return out;
}

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string fmt_exact(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Strict full-string numeric parses; trailing junk fails.
inline std::optional<double> to_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> to_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void row(const std::vector<std::string>& fields) { os_ << join(fields) << '\n'; }

 private:
  std::ostream& os_;
};

// Maps header names to column positions; required names must all be present.
struct Header {
  std::vector<std::string> names;

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require(std::string_view name) const {
    auto i = find(name);
    if (!i) throw InputError("missing required column '" + std::string(name) + "'");
    return *i;
  }
};

}  // namespace chattymaps::csv

#endif
