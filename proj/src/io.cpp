#include "svb/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace svb {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw Error("missing CSV column: " + name);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty CSV: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw Error("ragged CSV row in " + path);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    out += header[i];
    out += (i + 1 == header.size()) ? '\n' : ',';
  }
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out += buf;
      out += (i + 1 == row.size()) ? '\n' : ',';
    }
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  write_text_file(path, csv_to_string(header, rows));
}

}  // namespace svb
