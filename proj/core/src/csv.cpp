#include "scarcegrad/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_csv: cannot open " + path.string());
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    };
    emit_row(table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw ContractError("write_csv: row width does not match header");
        emit_row(row);
    }
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("read_csv: cannot open " + path.string());
    CsvTable table;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.empty() || line.back() == ',') cells.push_back("");
        if (line_no == 1) {
            table.header = std::move(cells);
        } else {
            if (cells.size() != table.header.size())
                throw ParseError("read_csv: row width does not match header", line_no);
            table.rows.push_back(std::move(cells));
        }
    }
    if (table.header.empty()) throw ParseError("read_csv: missing header row");
    return table;
}

}  // namespace scarcegrad
