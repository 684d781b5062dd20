#pragma once

// Matrix Market coordinate I/O for real symmetric matrices.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

class MatrixMarketError : public std::runtime_error {
public:
    explicit MatrixMarketError(const std::string& what)
        : std::runtime_error("matrix market: " + what) {}
};

namespace detail {

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

/// Reads "coordinate real symmetric" or "coordinate real general" (whose
/// pattern and values must be symmetric; mirrored pairs are compared exactly
/// after duplicate summation). Integer fields are accepted as real.
inline SymSparseMatrix read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw MatrixMarketError("empty input");
    std::istringstream hdr(line);
    std::string banner, object, format, field, symmetry;
    hdr >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") throw MatrixMarketError("malformed header");
    object = detail::lowercase(object);
    format = detail::lowercase(format);
    field = detail::lowercase(field);
    symmetry = detail::lowercase(symmetry);
    if (object != "matrix" || format != "coordinate")
        throw MatrixMarketError("malformed header: expected 'matrix coordinate'");
    if (field != "real" && field != "integer" && field != "double")
        throw MatrixMarketError("unsupported field '" + field + "'");
    if (symmetry != "symmetric" && symmetry != "general")
        throw MatrixMarketError("unsupported symmetry '" + symmetry + "'");

    do {
        if (!std::getline(in, line)) throw MatrixMarketError("missing size line");
    } while (line.empty() || line[0] == '%');

    long long rows = 0, cols = 0, count = 0;
    {
        std::istringstream sz(line);
        if (!(sz >> rows >> cols >> count)) throw MatrixMarketError("malformed size line");
    }
    if (rows != cols) throw MatrixMarketError("matrix is not square");
    if (rows < 0 || count < 0 || rows > std::numeric_limits<Index>::max())
        throw MatrixMarketError("invalid size line");
    const Index n = static_cast<Index>(rows);

    std::map<std::pair<Index, Index>, double> coords;
    for (long long k = 0; k < count; ++k) {
        long long i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v)) throw MatrixMarketError("truncated entry list");
        if (i < 1 || j < 1 || i > n || j > n) throw MatrixMarketError("index out of range");
        if (!std::isfinite(v)) throw MatrixMarketError("non-finite value");
        const auto r = static_cast<Index>(i - 1), c = static_cast<Index>(j - 1);
        if (symmetry == "symmetric" && r < c)
            throw MatrixMarketError("symmetric file lists an upper-triangle entry");
        coords[{r, c}] += v;
    }

    std::vector<Entry> entries;
    entries.reserve(coords.size());
    for (const auto& [ij, v] : coords) {
        const auto [r, c] = ij;
        if (symmetry == "general" && r != c) {
            auto mirror = coords.find({c, r});
            if (mirror == coords.end() || mirror->second != v)
                throw MatrixMarketError("inconsistent mirrored entries at (" +
                                        std::to_string(r + 1) + "," + std::to_string(c + 1) + ")");
            if (r < c) continue;
        }
        entries.push_back({r, c, v});
    }
    return {n, std::move(entries)};
}

inline SymSparseMatrix load_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MatrixMarketError("cannot open '" + path + "'");
    return read_matrix_market(in);
}

inline void write_matrix_market(std::ostream& out, const SymSparseMatrix& a) {
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << a.size() << ' ' << a.size() << ' ' << a.nnz() << '\n';
    out << std::setprecision(17);
    a.for_each([&](Index i, Index j, double v) { out << i + 1 << ' ' << j + 1 << ' ' << v << '\n'; });
}

inline void save_matrix_market(const std::string& path, const SymSparseMatrix& a) {
    std::ofstream out(path);
    if (!out) throw MatrixMarketError("cannot write '" + path + "'");
    write_matrix_market(out, a);
}

}  // namespace kktscale
