#pragma once

// Symmetric sparse storage (lower triangle, compressed by column) and the
// diagonal-scaling algebra shared by the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kktscale {

using Index = std::int32_t;
using DenseVector = std::vector<double>;

class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what)
        : std::invalid_argument("dimension mismatch: " + what) {}
};

inline void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + " (got " + std::to_string(got) +
                             ", expected " + std::to_string(want) + ")");
}

/// One stored coordinate of the lower triangle (row >= col), 0-based.
struct Entry {
    Index row = 0;
    Index col = 0;
    double value = 0.0;
};

/// Symmetric matrix held as its lower triangle in compressed sparse column
/// form. Duplicates are summed at construction; explicit zeros are kept.
/// Row indices within a column are sorted ascending and the diagonal, when
/// present, is the first entry of its column.
class SymSparseMatrix {
public:
    SymSparseMatrix() = default;

    SymSparseMatrix(Index n, std::vector<Entry> entries) : n_(n) {
        if (n < 0) throw std::invalid_argument("negative dimension");
        for (const auto& e : entries) {
            if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n)
                throw std::out_of_range("entry (" + std::to_string(e.row) + "," +
                                        std::to_string(e.col) + ") outside " +
                                        std::to_string(n) + "x" + std::to_string(n));
            if (e.row < e.col)
                throw std::invalid_argument("entry above the diagonal; only the lower "
                                            "triangle may be stored");
            if (!std::isfinite(e.value)) throw std::invalid_argument("non-finite entry value");
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            return a.col != b.col ? a.col < b.col : a.row < b.row;
        });
        colptr_.assign(static_cast<std::size_t>(n) + 1, 0);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            if (!rowind_.empty() && k > 0 && entries[k - 1].col == e.col &&
                entries[k - 1].row == e.row) {
                values_.back() += e.value;
                continue;
            }
            rowind_.push_back(e.row);
            values_.push_back(e.value);
            ++colptr_[static_cast<std::size_t>(e.col) + 1];
        }
        for (Index j = 0; j < n; ++j) colptr_[j + 1] += colptr_[j];
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("duplicate sum overflowed");
    }

    static SymSparseMatrix identity(Index n) {
        std::vector<Entry> e;
        e.reserve(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) e.push_back({i, i, 1.0});
        return {n, std::move(e)};
    }

    Index size() const { return n_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const Index> colptr() const { return colptr_; }
    std::span<const Index> rowind() const { return rowind_; }
    std::span<const double> values() const { return values_; }

    Index col_begin(Index j) const { return colptr_[j]; }
    Index col_end(Index j) const { return colptr_[j + 1]; }
    Index row_of(Index k) const { return rowind_[k]; }
    double value_of(Index k) const { return values_[k]; }

    /// Entries in column-major lower-triangle order.
    std::vector<Entry> entries() const {
        std::vector<Entry> out;
        out.reserve(nnz());
        for (Index j = 0; j < n_; ++j)
            for (Index k = colptr_[j]; k < colptr_[j + 1]; ++k)
                out.push_back({rowind_[k], j, values_[k]});
        return out;
    }

    /// Value at (i,j) of the full symmetric matrix; 0 when not stored.
    double coeff(Index i, Index j) const {
        if (i < j) std::swap(i, j);
        const auto first = rowind_.begin() + colptr_[j];
        const auto last = rowind_.begin() + colptr_[j + 1];
        auto it = std::lower_bound(first, last, i);
        return (it != last && *it == i) ? values_[static_cast<std::size_t>(it - rowind_.begin())]
                                        : 0.0;
    }

    /// Calls f(i, j, value) for every stored entry (i >= j).
    template <typename F>
    void for_each(F&& f) const {
        for (Index j = 0; j < n_; ++j)
            for (Index k = colptr_[j]; k < colptr_[j + 1]; ++k) f(rowind_[k], j, values_[k]);
    }

    /// Full symmetric adjacency (both triangles, diagonal excluded), rows sorted.
    std::vector<std::vector<Index>> adjacency() const {
        std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n_));
        for_each([&](Index i, Index j, double) {
            if (i != j) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        });
        for (auto& row : adj) std::sort(row.begin(), row.end());
        return adj;
    }

    /// Maximum absolute entry per row of the full symmetric matrix.
    std::vector<double> row_max_abs() const {
        std::vector<double> m(static_cast<std::size_t>(n_), 0.0);
        for_each([&](Index i, Index j, double v) {
            m[i] = std::max(m[i], std::abs(v));
            m[j] = std::max(m[j], std::abs(v));
        });
        return m;
    }

    /// Infinity norm of the full symmetric matrix (max absolute row sum).
    double norm_inf() const {
        std::vector<double> s(static_cast<std::size_t>(n_), 0.0);
        for_each([&](Index i, Index j, double v) {
            s[i] += std::abs(v);
            if (i != j) s[j] += std::abs(v);
        });
        return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    friend bool operator==(const SymSparseMatrix&, const SymSparseMatrix&) = default;

private:
    Index n_ = 0;
    std::vector<Index> colptr_{0};
    std::vector<Index> rowind_;
    std::vector<double> values_;
};

/// Positive diagonal scaling S = diag(s).
class ScalingVector {
public:
    ScalingVector() = default;

    explicit ScalingVector(std::vector<double> s) : s_(std::move(s)) {
        for (double v : s_)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("scaling entries must be positive and finite");
    }

    static ScalingVector identity(Index n) {
        return ScalingVector(std::vector<double>(static_cast<std::size_t>(n), 1.0));
    }

    /// exp of a vector of log-scale factors.
    static ScalingVector from_log(std::span<const double> log_s) {
        std::vector<double> s(log_s.size());
        std::transform(log_s.begin(), log_s.end(), s.begin(), [](double e) { return std::exp(e); });
        return ScalingVector(std::move(s));
    }

    Index size() const { return static_cast<Index>(s_.size()); }
    double operator[](std::size_t i) const { return s_[i]; }
    std::span<const double> values() const { return s_; }

    ScalingVector reciprocal() const {
        std::vector<double> r(s_.size());
        std::transform(s_.begin(), s_.end(), r.begin(), [](double v) { return 1.0 / v; });
        return ScalingVector(std::move(r));
    }

    /// Elementwise product, the scaling obtained by applying *this then other.
    ScalingVector compose(const ScalingVector& other) const {
        require_size(other.s_.size(), s_.size(), "scaling composition");
        std::vector<double> r(s_.size());
        for (std::size_t i = 0; i < s_.size(); ++i) r[i] = s_[i] * other.s_[i];
        return ScalingVector(std::move(r));
    }

private:
    std::vector<double> s_;
};

/// Returns SAS: entry (i,j) becomes s_i a_ij s_j, pattern unchanged.
inline SymSparseMatrix apply_symmetric_scaling(const SymSparseMatrix& a, const ScalingVector& s) {
    require_size(static_cast<std::size_t>(s.size()), static_cast<std::size_t>(a.size()),
                 "scaling length vs matrix order");
    std::vector<Entry> out;
    out.reserve(a.nnz());
    a.for_each([&](Index i, Index j, double v) { out.push_back({i, j, s[i] * v * s[j]}); });
    return {a.size(), std::move(out)};
}

/// Full symmetric product y = A x.
inline DenseVector matvec(const SymSparseMatrix& a, std::span<const double> x) {
    require_size(x.size(), static_cast<std::size_t>(a.size()), "matvec operand");
    DenseVector y(x.size(), 0.0);
    a.for_each([&](Index i, Index j, double v) {
        y[i] += v * x[j];
        if (i != j) y[j] += v * x[i];
    });
    return y;
}

/// b_hat = S b; also used to recover y = S z.
inline DenseVector scale_vector(const ScalingVector& s, std::span<const double> v) {
    require_size(v.size(), static_cast<std::size_t>(s.size()), "vector vs scaling length");
    DenseVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = s[i] * v[i];
    return out;
}

inline DenseVector scale_rhs(const ScalingVector& s, std::span<const double> b) {
    return scale_vector(s, b);
}

inline DenseVector unscale_solution(const ScalingVector& s, std::span<const double> z) {
    return scale_vector(s, z);
}

inline double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace kktscale
