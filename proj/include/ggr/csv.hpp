#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ggr {

// Minimal CSV: comma-separated, no quoting, one header row. Numeric cells
// are written with "%.17g" so doubles survive a write/read round trip
// bit-exactly (see docs/formats.md).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);

std::string format_double(double v);                       // %.17g
double parse_double(const std::string& s, const std::string& context);

}  // namespace ggr
