#pragma once

#include <string>
#include <vector>

namespace physres {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Strict numeric CSV: comma separated, one header row, every body cell a
// finite number. Row indices in error messages are 1-based over body rows.
CsvTable read_csv(const std::string& path);

std::string format_double(double value);  // shortest round-trip decimal

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace physres
