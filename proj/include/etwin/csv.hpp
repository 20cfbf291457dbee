// Minimal CSV reading/writing.  All numeric output goes through
// format_double (shortest round-trip), which keeps files byte-stable for
// identical inputs.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etwin/core.hpp"

namespace etwin {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  // trim trailing CR from Windows-style lines
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw IoError("CSV column '" + name + "' not found");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path);
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    t.rows.push_back(split_csv_line(line));
  }
  return t;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw IoError("cannot open file for writing: " + path);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
};

}  // namespace etwin
