#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace evdesign::report {

struct Null {
  friend bool operator==(Null, Null) = default;
};

/// One table cell. `fixed` marks a value held at the base design; only the
/// text renderer shows it, in parentheses.
struct Cell {
  std::variant<Null, std::int64_t, double, std::string> value;
  bool fixed = false;

  Cell() = default;
  Cell(Null) {}
  Cell(int v) : value(std::int64_t{v}) {}
  Cell(std::int64_t v) : value(v) {}
  Cell(double v) : value(v) {}
  Cell(std::string v) : value(std::move(v)) {}
  Cell(const char* v) : value(std::string(v)) {}

  bool is_null() const { return std::holds_alternative<Null>(value); }
};

inline Cell fixed(Cell c) {
  c.fixed = true;
  return c;
}

template <class T>
Cell optional_cell(const std::optional<T>& v) {
  return v ? Cell(*v) : Cell(Null{});
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

/// Six significant digits, C locale; non-finite values spelled out.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string plain_text(const Cell& c) {
  struct {
    std::string operator()(Null) const { return ""; }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(const std::string& v) const { return v; }
  } visit;
  return std::visit(visit, c.value);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    os << (i ? "," : "") << csv_escape(t.columns[i]);
  }
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(plain_text(row[i]));
    os << '\n';
  }
}

/// JSON numbers are parsed back from the CSV text, so both formats carry
/// the same rounded values.
inline nlohmann::ordered_json to_json(const Table& t) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Cell& c = row[i];
      nlohmann::ordered_json v;
      if (const auto* d = std::get_if<double>(&c.value)) {
        v = std::isfinite(*d) ? nlohmann::ordered_json(std::stod(format_number(*d)))
                              : nlohmann::ordered_json(format_number(*d));
      } else if (const auto* n = std::get_if<std::int64_t>(&c.value)) {
        v = *n;
      } else if (const auto* s = std::get_if<std::string>(&c.value)) {
        v = *s;
      }
      obj[t.columns[i]] = std::move(v);
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

inline void write_json(std::ostream& os, const Table& t) { os << to_json(t).dump(2) << '\n'; }

inline void write_text(std::ostream& os, const Table& t) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> width(t.columns.size());
  for (std::size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
  for (const auto& row : t.rows) {
    auto& out = cells.emplace_back();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::string s = row[i].is_null() ? "-" : plain_text(row[i]);
      if (row[i].fixed) s = "(" + s + ")";
      width[i] = std::max(width[i], s.size());
      out.push_back(std::move(s));
    }
  }
  const auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      os << (i ? "  " : "") << v[i];
      if (i + 1 < v.size()) os << std::string(width[i] - v[i].size(), ' ');
    }
    os << '\n';
  };
  line(t.columns);
  for (const auto& row : cells) line(row);
}

inline void write(std::ostream& os, const Table& t, const std::string& format) {
  if (format == "json") {
    write_json(os, t);
  } else if (format == "text") {
    write_text(os, t);
  } else {
    write_csv(os, t);
  }
}

}  // namespace evdesign::report
