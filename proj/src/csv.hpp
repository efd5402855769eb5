#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pisindy {

/// Shortest decimal representation that round-trips the exact double value.
/// All file output goes through this so repeated runs are byte-identical.
std::string format_double(double value);

/// Strict double parser (whole token must be consumed).
double parse_double(std::string_view token);

struct CsvTable {
    std::vector<std::string> headers;
    std::vector<std::vector<double>> columns; // one vector per header, equal lengths

    [[nodiscard]] std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    [[nodiscard]] const std::vector<double>* find(std::string_view header) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

} // namespace pisindy
