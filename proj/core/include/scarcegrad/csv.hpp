#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scarcegrad {

// Simple CSV table: one header row, string cells, round-trip stable. Floats
// written through these helpers use %.17g so re-reading is exact.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

std::string format_double(double v);
double parse_double(const std::string& s);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace scarcegrad
