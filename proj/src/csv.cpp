#include "physres/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "physres/common.hpp"

namespace physres {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);

    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
    table.header = split_line(line);
    if (table.header.empty()) throw DataError("CSV header row is empty: " + path);

    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row_index;
        const auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw DataError("CSV row " + std::to_string(row_index) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.header.size()) + " (" + path + ")");
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
                throw DataError("non-numeric cell '" + cell + "' in column '" + table.header[c] +
                                "' at row " + std::to_string(row_index) + " (" + path + ")");
            }
            row[c] = value;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_double(double value) {
    char buf[40];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw NumericalError("failed to format double");
    return std::string(buf, ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << header[c] << (c + 1 < header.size() ? "," : "\n");
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << format_double(row[c]) << (c + 1 < row.size() ? "," : "\n");
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace physres
