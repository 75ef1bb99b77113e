#pragma once

#include "koopman/dynamics.hpp"
#include "koopman/types.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace koopman {

/// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

/// FNV-1a over the canonical config text; embedded in artifacts for provenance.
inline std::string config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// CSV artifacts use '.' decimals, ',' separators and LF line endings; an
// optional leading '#' comment line carries the config hash.

inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::vector<std::string>>& rows,
                      const std::string& comment = "") {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    if (!comment.empty())
        out << "# " << comment << "\n";
    out << header << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << "\n";
    }
    if (!out)
        throw std::runtime_error("failed writing: " + path.string());
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                             const std::string& comment = "") {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<size_t>(m.rows()));
    std::string header;
    for (Index j = 0; j < m.cols(); ++j)
        header += (j ? ",c" : "c") + std::to_string(j + 1);
    for (Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<size_t>(m.cols()));
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(format_double(m(i, j)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows, comment);
}

/// One row per time step, columns are the state coordinates, header x1,..,xn.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                                 const std::string& comment = "") {
    std::string header;
    for (Index j = 0; j < traj.dim(); ++j)
        header += (j ? ",x" : "x") + std::to_string(j + 1);
    std::vector<std::vector<std::string>> rows;
    for (const Vector& x : traj.states) {
        std::vector<std::string> row;
        for (Index j = 0; j < x.size(); ++j)
            row.push_back(format_double(x(j)));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows, comment);
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open trajectory file: " + path.string());
    Trajectory traj;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (!header_seen) {
            header_seen = true; // x1,...,xn
            continue;
        }
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            vals.push_back(std::stod(cell));
        Vector x = Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
        if (!traj.states.empty() && x.size() != traj.dim())
            throw std::invalid_argument("ragged trajectory file: " + path.string());
        traj.states.push_back(std::move(x));
    }
    if (traj.states.empty())
        throw std::invalid_argument("empty trajectory file: " + path.string());
    return traj;
}

} // namespace koopman
