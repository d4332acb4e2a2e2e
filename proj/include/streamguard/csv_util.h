#pragma once

#include <cstdio>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace streamguard::csv {

// Fixed three-decimal rendering keeps trace output byte-stable.
inline std::string fmt(double v, int decimals = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string();
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Reads rows as column-name addressable records.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {
    std::string line;
    if (!std::getline(is_, line)) throw std::runtime_error("csv: missing header");
    strip_cr(line);
    header_ = split(line);
  }

  bool next() {
    std::string line;
    while (std::getline(is_, line)) {
      strip_cr(line);
      if (line.empty()) continue;
      row_ = split(line);
      if (row_.size() != header_.size())
        throw std::runtime_error("csv: column count mismatch in row: " + line);
      return true;
    }
    return false;
  }

  const std::string& get(std::string_view col) const {
    for (size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == col) return row_[i];
    throw std::runtime_error("csv: no column " + std::string(col));
  }
  bool has(std::string_view col) const {
    for (const auto& h : header_)
      if (h == col) return true;
    return false;
  }
  double num(std::string_view col) const { return std::stod(get(col)); }
  std::optional<double> opt(std::string_view col) const {
    const auto& s = get(col);
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  }
  long long integer(std::string_view col) const { return std::stoll(get(col)); }
  const std::vector<std::string>& header() const { return header_; }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  std::istream& is_;
  std::vector<std::string> header_;
  std::vector<std::string> row_;
};

}  // namespace streamguard::csv
