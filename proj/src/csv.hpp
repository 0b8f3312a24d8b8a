#pragma once

// Minimal numeric CSV reading shared by the file formats of the library.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mot/error.hpp"

namespace mot::detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

/// Reads a CSV whose header must equal `header` exactly; returns columns.
inline std::vector<std::vector<double>> read_numeric_csv(
    const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_commas(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw Error(Errc::Io, path.string() + ": expected header '" + want + "'");
  }
  std::vector<std::vector<double>> cols(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw Error(Errc::Io, path.string() + ":" + std::to_string(line_no) +
                                ": wrong number of fields");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        cols[c].push_back(std::stod(cells[c]));
      } catch (const std::exception&) {
        throw Error(Errc::Io, path.string() + ":" + std::to_string(line_no) +
                                  ": not a number '" + cells[c] + "'");
      }
    }
  }
  return cols;
}

}  // namespace mot::detail
