#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace omcrow {

// Uniform tabular result: ordered metadata, named columns, numeric rows, and
// an optional scalar report (stop-release summary). Serialization keeps full
// double precision so written files re-read to identical values.
struct ResultTable {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> report;

  void add_meta(const std::string& key, const std::string& value) {
    metadata.emplace_back(key, value);
  }
};

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double_strict(const std::string& s, const std::string& context) {
  const char* c = s.c_str();
  char* end = nullptr;
  const double x = std::strtod(c, &end);
  if (end == c || *end != '\0')
    throw std::runtime_error("malformed number \"" + s + "\" in " + context);
  return x;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

// CSV layout: leading "# key = value" metadata lines (report scalars as
// "# report.<key> = <value>"), then the header row, then data rows. LF line
// endings, '.' decimal point, 17 significant digits.
inline std::string to_csv(const ResultTable& t) {
  std::string out;
  for (const auto& [k, v] : t.metadata) out += "# " + k + " = " + v + "\n";
  for (const auto& [k, v] : t.report)
    out += "# report." + k + " = " + detail::format_double(v) + "\n";
  for (size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += detail::format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline ResultTable read_csv(const std::string& text) {
  ResultTable t;
  size_t pos = 0;
  bool header_done = false;
  int line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (line[0] == '#') {
      size_t b = line.find_first_not_of(" \t", 1);
      if (b == std::string::npos) continue;
      const std::string body = line.substr(b);
      const size_t eq = body.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": metadata line lacks '='");
      std::string key = body.substr(0, eq);
      std::string value = body.substr(eq + 1);
      while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
      size_t vb = value.find_first_not_of(" \t");
      value = (vb == std::string::npos) ? "" : value.substr(vb);
      if (key.rfind("report.", 0) == 0)
        t.report.emplace_back(key.substr(7), detail::parse_double_strict(
                                                 value, "csv line " + std::to_string(line_no)));
      else
        t.metadata.emplace_back(key, value);
      continue;
    }

    if (!header_done) {
      t.columns = detail::split_csv_line(line);
      header_done = true;
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != t.columns.size())
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(t.columns.size()) + " cells, got " +
                               std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells)
      row.push_back(detail::parse_double_strict(c, "csv line " + std::to_string(line_no)));
    t.rows.push_back(std::move(row));
  }
  if (!header_done) throw std::runtime_error("csv: missing header row");
  return t;
}

// JSON layout: {"metadata": {...}, "columns": [...], "rows": [[...]]} plus
// "report" when present. Insertion order is preserved for determinism.
inline std::string to_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.metadata) meta[k] = v;
  j["metadata"] = std::move(meta);
  j["columns"] = t.columns;
  j["rows"] = t.rows;
  if (!t.report.empty()) {
    nlohmann::ordered_json rep = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.report) rep[k] = v;
    j["report"] = std::move(rep);
  }
  return j.dump(2) + "\n";
}

inline ResultTable read_json(const std::string& text) {
  const auto j = nlohmann::ordered_json::parse(text);
  ResultTable t;
  if (j.contains("metadata"))
    for (const auto& [k, v] : j.at("metadata").items())
      t.metadata.emplace_back(k, v.get<std::string>());
  if (j.contains("columns")) t.columns = j.at("columns").get<std::vector<std::string>>();
  if (j.contains("rows")) t.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  if (j.contains("report"))
    for (const auto& [k, v] : j.at("report").items()) t.report.emplace_back(k, v.get<double>());
  return t;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open \"" + path + "\" for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing \"" + path + "\"");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open \"" + path + "\" for reading");
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

}  // namespace omcrow
