#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpnls::cli {

using json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// A value for JSON output; non-finite numbers become strings.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<double> values) {
    std::vector<std::string> r;
    r.reserve(values.size());
    for (double v : values) r.push_back(format_number(v));
    rows.push_back(std::move(r));
  }
  void add_text(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      out += (i ? "," : "") + header[i];
    }
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
      out += '\n';
    }
    return out;
  }

  /// Rows as objects; cells that are not plain numbers stay strings.
  json as_json() const {
    json arr = json::array();
    for (const auto& r : rows) {
      json obj = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) {
        double v = 0.0;
        const char* b = r[i].data();
        const auto res = std::from_chars(b, b + r[i].size(), v);
        if (res.ec == std::errc() && res.ptr == b + r[i].size() && std::isfinite(v)) {
          obj[header[i]] = v;
        } else {
          obj[header[i]] = r[i];
        }
      }
      arr.push_back(std::move(obj));
    }
    return arr;
  }
};

}  // namespace dpnls::cli
