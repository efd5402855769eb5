#include "csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace pisindy {

std::string format_double(double value) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        raise(ErrorCode::malformed_file, "not a number: '" + std::string(token) + "'");
    return value;
}

const std::vector<double>* CsvTable::find(std::string_view header) const {
    for (std::size_t j = 0; j < headers.size(); ++j)
        if (headers[j] == header) return &columns[j];
    return nullptr;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
        // trim surrounding whitespace
        std::size_t b = field.find_first_not_of(" \t\r");
        std::size_t e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

} // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::io_error, "cannot open '" + path + "'");

    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        raise(ErrorCode::malformed_file, "'" + path + "' is empty");
    table.headers = split_line(line);
    if (table.headers.empty() || table.headers.front().empty())
        raise(ErrorCode::malformed_file, "'" + path + "' has no header row");
    table.columns.resize(table.headers.size());

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (fields.size() != table.headers.size())
            raise(ErrorCode::malformed_file,
                  "'" + path + "' line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.headers.size()) + " fields, got " +
                      std::to_string(fields.size()));
        for (std::size_t j = 0; j < fields.size(); ++j)
            table.columns[j].push_back(parse_double(fields[j]));
    }
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ostringstream out;
    for (std::size_t j = 0; j < table.headers.size(); ++j) {
        if (j) out << ',';
        out << table.headers[j];
    }
    out << '\n';
    const std::size_t n = table.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            if (j) out << ',';
            out << format_double(table.columns[j][i]);
        }
        out << '\n';
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) raise(ErrorCode::io_error, "cannot write '" + path + "'");
    file << out.str();
    if (!file) raise(ErrorCode::io_error, "write failed for '" + path + "'");
}

} // namespace pisindy
