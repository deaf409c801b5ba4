#include "mobhsmm/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "mobhsmm/error.hpp"

namespace mobhsmm::csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());

    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header && !line.empty() && line.front() == '#') {
            table.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
            continue;
        }
        if (line.empty()) continue;
        if (!have_header) {
            table.header = split_line(line);
            have_header = true;
        } else {
            table.rows.push_back(split_line(line));
        }
    }
    if (!have_header) throw DataError("empty CSV file: " + path.string());
    return table;
}

void write_file(const std::filesystem::path& path, const Table& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    for (const auto& c : table.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& context) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw DataError("not a number in " + context + ": '" + cell + "'");
    return v;
}

long long parse_int(const std::string& cell, const std::string& context) {
    long long v = 0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw DataError("not an integer in " + context + ": '" + cell + "'");
    return v;
}

} // namespace mobhsmm::csv
