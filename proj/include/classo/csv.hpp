#pragma once

// Headerless comma-separated matrices, row-major, LF line endings; a vector is
// one value per line. Values are written with 17 significant digits, which
// round-trips every double.

#include "classo/errors.hpp"
#include "classo/linalg.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace classo {

namespace csv {

inline double parse_double(std::string_view cell, const std::string& where) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
        cell.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw ParseError(where + ": cannot parse '" + std::string(cell) + "' as a number");
    return v;
}

/// Reads rows of equal length; blank lines are skipped. An empty stream gives a 0 x 0 matrix.
inline Matrix read_matrix(std::istream& in, const std::string& name = "csv") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string_view cell(line.data() + start,
                                        (comma == std::string::npos ? line.size() : comma) - start);
            row.push_back(parse_double(cell, name + ":" + std::to_string(lineno)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, found " +
                             std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.front().size()) : 0;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline Matrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_matrix(in, path);
}

/// A single column or a single row.
inline Vector read_vector_file(const std::string& path) {
    const Matrix m = read_matrix_file(path);
    if (m.cols() == 1 || m.size() == 0) return m.size() ? Vector(m.col(0)) : Vector(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw ParseError(path + ": expected a vector, found a " + std::to_string(m.rows()) + " x " +
                     std::to_string(m.cols()) + " matrix");
}

inline std::string format(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format(m(i, j));
        }
        out << '\n';
    }
}

inline void write_vector(std::ostream& out, const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) out << format(v(i)) << '\n';
}

inline void write_matrix_file(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_matrix(out, m);
    if (!out) throw IoError("error writing " + path);
}

inline void write_vector_file(const std::string& path, const Vector& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_vector(out, v);
    if (!out) throw IoError("error writing " + path);
}

}  // namespace csv
}  // namespace classo
