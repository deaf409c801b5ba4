#pragma once

// Minimal CSV support for the pipeline's artifacts. Cells are split on
// commas without quoting; leading lines starting with '#' are preserved as
// comments (artifact metadata rides there). Doubles are written in the
// shortest form that parses back to the same bits.

#include <filesystem>
#include <string>
#include <vector>

namespace mobhsmm::csv {

struct Table {
    std::vector<std::string> comments; // leading '#' lines, without the '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Table& table);

std::vector<std::string> split_line(const std::string& line);

// Shortest round-trip formatting (std::to_chars).
std::string format_double(double v);

double parse_double(const std::string& cell, const std::string& context);
long long parse_int(const std::string& cell, const std::string& context);

} // namespace mobhsmm::csv
