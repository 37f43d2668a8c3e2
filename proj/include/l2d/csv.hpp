#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "l2d/common.hpp"

namespace l2d::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  int require_column(const std::string& name) const {
    int c = column(name);
    if (c < 0) throw Error("missing required column '" + name + "'");
    return c;
  }
};

inline std::vector<std::string> split_line(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open csv file: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty csv file: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw Error("csv row width mismatch in " + path);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void write_file(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write csv file: " + path);
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

inline double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("cannot parse number: '" + s + "'");
  }
}

inline long to_long(const std::string& s) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw Error("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("cannot parse integer: '" + s + "'");
  }
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Key-value sidecar format: one `key=value` per line, '#' comments.
inline std::unordered_map<std::string, double> read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open key-value file: " + path);
  std::unordered_map<std::string, double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("malformed key-value line: " + line);
    out[line.substr(0, eq)] = to_double(line.substr(eq + 1));
  }
  return out;
}

inline void write_kv(const std::string& path,
                     const std::vector<std::pair<std::string, double>>& kv) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write key-value file: " + path);
  for (const auto& [k, v] : kv) out << k << "=" << format_double(v) << "\n";
}

}  // namespace l2d::csv
