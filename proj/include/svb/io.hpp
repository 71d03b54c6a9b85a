#pragma once

#include <string>
#include <vector>

#include "svb/util.hpp"

namespace svb {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Numeric CSV with a single header line. Values are written with full
/// round-trip precision so reruns are byte-identical.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
std::string csv_to_string(const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& rows);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace svb
