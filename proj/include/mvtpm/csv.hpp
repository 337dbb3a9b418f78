#pragma once

// Minimal CSV handling: UTF-8, comma separated, '.' decimal point, optional
// single header row. Numbers are written in shortest round-trip form so
// rewriting a file is byte-stable.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvtpm/types.hpp"

namespace mvtpm {

inline std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& context) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    double value = 0.0;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw DataError(context + ": cannot parse number '" + text + "'");
    return value;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

/// Reads every row as raw string fields. Blank lines are skipped.
inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline Matrix read_csv_matrix(const std::filesystem::path& path, bool has_header,
                              std::vector<std::string>* header_out = nullptr) {
    auto rows = read_csv_rows(path);
    std::size_t first = 0;
    if (has_header) {
        if (rows.empty()) throw DataError(path.string() + ": missing header row");
        if (header_out) {
            header_out->clear();
            for (const auto& f : rows[0]) header_out->push_back(trim(f));
        }
        first = 1;
    }
    if (rows.size() <= first) throw DataError(path.string() + ": no data rows");
    const std::size_t cols = rows[first].size();
    Matrix out(static_cast<Index>(rows.size() - first), static_cast<Index>(cols));
    for (std::size_t r = first; r < rows.size(); ++r) {
        if (rows[r].size() != cols)
            throw DataError(path.string() + ": ragged row " + std::to_string(r + 1) + " (" +
                            std::to_string(rows[r].size()) + " fields, expected " +
                            std::to_string(cols) + ")");
        for (std::size_t c = 0; c < cols; ++c)
            out(static_cast<Index>(r - first), static_cast<Index>(c)) =
                parse_double(rows[r][c], path.string() + " row " + std::to_string(r + 1));
    }
    return out;
}

/// Reads a single-column CSV of raw label strings.
inline std::vector<std::string> read_csv_column(const std::filesystem::path& path,
                                                bool has_header) {
    auto rows = read_csv_rows(path);
    std::size_t first = has_header ? 1 : 0;
    if (rows.size() <= first) throw DataError(path.string() + ": no data rows");
    std::vector<std::string> out;
    out.reserve(rows.size() - first);
    for (std::size_t r = first; r < rows.size(); ++r) {
        if (rows[r].size() != 1)
            throw DataError(path.string() + ": expected a single column, row " +
                            std::to_string(r + 1) + " has " + std::to_string(rows[r].size()));
        out.push_back(trim(rows[r][0]));
    }
    return out;
}

inline void write_csv_matrix(const std::filesystem::path& path, const Matrix& X,
                             const std::vector<std::string>& header = {}) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    if (!header.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j)
            out << (j ? "," : "") << header[j];
        out << '\n';
    }
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j)
            out << (j ? "," : "") << format_double(X(i, j));
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace mvtpm
