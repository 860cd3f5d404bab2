#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "multisite/errors.hpp"

namespace mst::csv {

// Minimal CSV support for the file formats this library defines: header
// row, comma separator, '.' decimal point, no quoting (site ids must not
// contain commas). Lines starting with '#' are treated as comments.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // leading '#' lines, stripped

  // Column index by name; throws InputError if absent.
  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError("missing CSV column: " + name);
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read(std::istream& in) {
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.substr(1));
      continue;
    }
    auto fields = split_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size())
        throw InputError("CSV row has " + std::to_string(fields.size()) +
                         " fields, header has " +
                         std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw InputError("empty CSV input");
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  return read(in);
}

inline double to_double(const std::string& s) {
  double v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw InputError("not a number: '" + s + "'");
  return v;
}

inline long long to_int(const std::string& s) {
  long long v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw InputError("not an integer: '" + s + "'");
  return v;
}

// Round-trippable double formatting (shortest exact form).
inline std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void comment(const std::string& text) { out_ << '#' << text << '\n'; }

  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    (write_field(fields, first), ...);
    out_ << '\n';
  }

 private:
  void write_field(const std::string& s, bool& first) {
    if (s.find(',') != std::string::npos ||
        s.find('\n') != std::string::npos)
      throw InputError("CSV field contains a separator: '" + s + "'");
    sep(first);
    out_ << s;
  }
  void write_field(const char* s, bool& first) {
    write_field(std::string(s), first);
  }
  void write_field(double v, bool& first) {
    sep(first);
    out_ << fmt(v);
  }
  void write_field(long long v, bool& first) {
    sep(first);
    out_ << v;
  }
  void write_field(int v, bool& first) { write_field((long long)v, first); }
  void write_field(std::size_t v, bool& first) {
    sep(first);
    out_ << v;
  }
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }
  std::ostream& out_;
};

}  // namespace mst::csv
