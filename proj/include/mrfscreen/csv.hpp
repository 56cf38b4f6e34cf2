#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mrfscreen {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 17-significant-digit float, enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// RFC-4180 style: comma separated, CRLF line endings, header "x1,...,xp".
inline void write_samples_csv(const RowMatrix& values, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open samples file for writing: " + path);
    for (long j = 0; j < values.cols(); ++j)
        out << (j ? "," : "") << "x" << (j + 1);
    out << "\r\n";
    for (long i = 0; i < values.rows(); ++i) {
        for (long j = 0; j < values.cols(); ++j) {
            if (j) out << ',';
            out << format_double(values(i, j));
        }
        out << "\r\n";
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline RowMatrix read_samples_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open samples file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty samples file: " + path);
    const auto header = split_csv_line(line);
    const long p = static_cast<long>(header.size());
    for (long j = 0; j < p; ++j) {
        if (header[j] != "x" + std::to_string(j + 1))
            throw std::runtime_error("unexpected samples header column: " + header[j]);
    }
    std::vector<double> values;
    long rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (static_cast<long>(fields.size()) != p)
            throw std::runtime_error("ragged samples row in " + path);
        for (const auto& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (end == f.c_str()) throw std::runtime_error("bad number in samples file: " + f);
            values.push_back(v);
        }
        ++rows;
    }
    RowMatrix m(rows, p);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < p; ++j) m(i, j) = values[i * p + j];
    return m;
}

/// Generic CSV writer used for edge lists and experiment curves.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open csv for writing: " + path);
    for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << "\r\n";
    for (const auto& row : rows) {
        for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
        out << "\r\n";
    }
}

}  // namespace mrfscreen
