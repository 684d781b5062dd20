#pragma once

// Symmetric scalings: Curtis-Reid least squares on log magnitudes, Ruiz
// equilibration in the infinity and one norms, and maximum product matching
// with its symmetrized dual scaling.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

class StructurallySingular : public std::runtime_error {
public:
    explicit StructurallySingular(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Curtis-Reid
// ---------------------------------------------------------------------------

enum class CurtisReidVariant {
    symmetric,            ///< one exponent per index, symmetric CG iteration
    unsymmetric_averaged  ///< independent row/column exponents averaged at the end
};

struct CurtisReidOptions {
    double tol = 1e-8;  ///< relative residual of the normal equations
    int max_iter = 100;
};

struct CurtisReidResult {
    ScalingVector scaling;
    std::vector<double> exponents;  ///< natural-log scale factors, s = exp(e)
    double objective = 0.0;
    double initial_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Objective after each CG iterate (first element is the e = 0 value).
    std::vector<double> history;
};

/// Sum over nonzero entries of the full symmetric matrix (off-diagonals
/// counted twice) of (log|a_ij| + e_i + e_j)^2.
inline double log_objective(const SymSparseMatrix& a, std::span<const double> e) {
    require_size(e.size(), static_cast<std::size_t>(a.size()), "exponent vector");
    double f = 0.0;
    a.for_each([&](Index i, Index j, double v) {
        if (v == 0.0) return;
        const double t = std::log(std::abs(v)) + e[i] + e[j];
        f += (i == j ? 1.0 : 2.0) * t * t;
    });
    return f;
}

namespace detail {

/// Jacobi-preconditioned CG for a consistent positive semidefinite system,
/// started from zero. `on_iterate` sees each new iterate.
template <typename Apply, typename OnIterate>
int pcg(Apply&& apply, std::span<const double> diag, std::span<const double> rhs,
        std::vector<double>& x, double tol, int max_iter, bool& converged, OnIterate&& on_iterate) {
    const std::size_t n = rhs.size();
    x.assign(n, 0.0);
    std::vector<double> r(rhs.begin(), rhs.end()), z(n), p(n), q(n);
    const double rhs_norm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    converged = rhs_norm == 0.0;
    if (converged) return 0;
    auto precondition = [&] {
        for (std::size_t i = 0; i < n; ++i) z[i] = diag[i] > 0.0 ? r[i] / diag[i] : r[i];
    };
    precondition();
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    int it = 0;
    while (it < max_iter) {
        apply(p, q);
        const double pq = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
        if (!(pq > 0.0)) break;
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        ++it;
        on_iterate(x);
        const double rn = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
        if (rn <= tol * rhs_norm) {
            converged = true;
            break;
        }
        precondition();
        const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return it;
}

}  // namespace detail

/// Curtis-Reid scaling: exponents minimizing the squared log magnitudes of
/// the scaled entries. Entries stored as exact zeros are skipped.
inline CurtisReidResult curtis_reid_scale(const SymSparseMatrix& a,
                                          CurtisReidVariant variant = CurtisReidVariant::symmetric,
                                          CurtisReidOptions opts = {}) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("curtis-reid tolerance must be positive");
    const auto n = static_cast<std::size_t>(a.size());
    bool any = false;
    a.for_each([&](Index, Index, double v) { any = any || v != 0.0; });
    if (!any) throw std::invalid_argument("curtis-reid: matrix has no nonzero entries");

    CurtisReidResult res;
    std::vector<double> zeros(n, 0.0);
    res.initial_objective = log_objective(a, zeros);
    res.history.push_back(res.initial_objective);

    if (variant == CurtisReidVariant::symmetric) {
        // (deg_k + 2[a_kk != 0]) e_k + sum_{j ~ k} e_j = -(sum_{j ~ k} l_kj + l_kk)
        std::vector<double> diag(n, 0.0), rhs(n, 0.0);
        a.for_each([&](Index i, Index j, double v) {
            if (v == 0.0) return;
            const double l = std::log(std::abs(v));
            if (i == j) {
                diag[i] += 2.0;
                rhs[i] -= l;
            } else {
                diag[i] += 1.0;
                diag[j] += 1.0;
                rhs[i] -= l;
                rhs[j] -= l;
            }
        });
        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            for (std::size_t k = 0; k < n; ++k) y[k] = diag[k] * x[k];
            a.for_each([&](Index i, Index j, double v) {
                if (v == 0.0 || i == j) return;
                y[i] += x[j];
                y[j] += x[i];
            });
        };
        res.iterations = detail::pcg(apply, diag, rhs, res.exponents, opts.tol, opts.max_iter,
                                     res.converged, [&](const std::vector<double>& x) {
                                         res.history.push_back(log_objective(a, x));
                                     });
    } else {
        // Unknowns [r; c]. Row k: n_k r_k + sum_{j in row k} c_j = -sum_j l_kj,
        // and the same with roles swapped for column k.
        std::vector<double> count(n, 0.0), lsum(n, 0.0);
        a.for_each([&](Index i, Index j, double v) {
            if (v == 0.0) return;
            const double l = std::log(std::abs(v));
            count[i] += 1.0;
            lsum[i] += l;
            if (i != j) {
                count[j] += 1.0;
                lsum[j] += l;
            }
        });
        std::vector<double> diag(2 * n), rhs(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            diag[k] = diag[n + k] = count[k];
            rhs[k] = rhs[n + k] = -lsum[k];
        }
        auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
            for (std::size_t k = 0; k < 2 * n; ++k) y[k] = diag[k] * x[k];
            a.for_each([&](Index i, Index j, double v) {
                if (v == 0.0) return;
                y[i] += x[n + j];
                y[n + j] += x[i];
                if (i != j) {
                    y[j] += x[n + i];
                    y[n + i] += x[j];
                }
            });
        };
        std::vector<double> rc, averaged(n);
        auto average = [&](const std::vector<double>& x) {
            for (std::size_t k = 0; k < n; ++k) averaged[k] = 0.5 * (x[k] + x[n + k]);
        };
        res.iterations = detail::pcg(apply, diag, rhs, rc, opts.tol, opts.max_iter, res.converged,
                                     [&](const std::vector<double>& x) {
                                         average(x);
                                         res.history.push_back(log_objective(a, averaged));
                                     });
        average(rc);
        res.exponents = averaged;
    }
    res.objective = log_objective(a, res.exponents);
    // Never worse than the unscaled start.
    if (res.objective > res.initial_objective) {
        std::fill(res.exponents.begin(), res.exponents.end(), 0.0);
        res.objective = res.initial_objective;
    }
    res.scaling = ScalingVector::from_log(res.exponents);
    return res;
}

// ---------------------------------------------------------------------------
// Ruiz equilibration
// ---------------------------------------------------------------------------

enum class NormChoice { infinity, one };

struct EquilibrationResult {
    ScalingVector scaling;
    int iterations = 0;
    bool converged = false;
    double max_deviation = 0.0;  ///< max_i | ||row_i||_p - 1 | at exit
};

namespace detail {

/// p-norms of the rows of diag(s) A diag(s).
inline std::vector<double> scaled_row_norms(const SymSparseMatrix& a, std::span<const double> s,
                                            NormChoice p) {
    std::vector<double> norm(s.size(), 0.0);
    a.for_each([&](Index i, Index j, double v) {
        const double w = s[i] * std::abs(v) * s[j];
        if (p == NormChoice::infinity) {
            norm[i] = std::max(norm[i], w);
            norm[j] = std::max(norm[j], w);
        } else {
            norm[i] += w;
            if (i != j) norm[j] += w;
        }
    });
    return norm;
}

inline void check_no_zero_rows(const SymSparseMatrix& a) {
    const auto m = a.row_max_abs();
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] == 0.0)
            throw std::invalid_argument("equilibrate: row " + std::to_string(i) + " is zero");
}

inline void equilibration_step(const SymSparseMatrix& a, std::vector<double>& s, NormChoice p) {
    const auto norm = scaled_row_norms(a, s, p);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] /= std::sqrt(norm[i]);
}

/// Lowers s_i and s_j by one ulp wherever the rounded product s_i |a_ij| s_j
/// exceeds one, so the scaled infinity norms are at most one in floating point.
inline void clip_to_unit(const SymSparseMatrix& a, std::vector<double>& s) {
    for (bool changed = true; changed;) {
        changed = false;
        a.for_each([&](Index i, Index j, double v) {
            while (s[i] * std::abs(v) * s[j] > 1.0) {
                s[i] = std::nextafter(s[i], 0.0);
                if (j != i) s[j] = std::nextafter(s[j], 0.0);
                changed = true;
            }
        });
    }
}

}  // namespace detail

/// Symmetric Ruiz iteration s_i <- s_i / sqrt(||row_i(SAS)||_p), stopping once
/// every row norm is within `tol` of one or after `iters` updates. With the
/// infinity norm no rounded scaled entry exceeds one.
inline EquilibrationResult equilibrate(const SymSparseMatrix& a, NormChoice p, int iters,
                                       double tol = 1e-8) {
    if (iters < 1) throw std::invalid_argument("equilibrate: iters must be >= 1");
    detail::check_no_zero_rows(a);
    std::vector<double> s(static_cast<std::size_t>(a.size()), 1.0);
    EquilibrationResult res;
    for (;;) {
        const auto norm = detail::scaled_row_norms(a, s, p);
        double dev = 0.0;
        for (double v : norm) dev = std::max(dev, std::abs(v - 1.0));
        res.max_deviation = dev;
        if (dev <= tol) {
            res.converged = true;
            break;
        }
        if (res.iterations == iters) break;
        for (std::size_t i = 0; i < s.size(); ++i) s[i] /= std::sqrt(norm[i]);
        ++res.iterations;
    }
    if (p == NormChoice::infinity) detail::clip_to_unit(a, s);
    res.scaling = ScalingVector(std::move(s));
    return res;
}

/// One infinity-norm step followed by three one-norm steps.
inline ScalingVector combined_equilibrate(const SymSparseMatrix& a) {
    detail::check_no_zero_rows(a);
    std::vector<double> s(static_cast<std::size_t>(a.size()), 1.0);
    detail::equilibration_step(a, s, NormChoice::infinity);
    for (int k = 0; k < 3; ++k) detail::equilibration_step(a, s, NormChoice::one);
    return ScalingVector(std::move(s));
}

// ---------------------------------------------------------------------------
// Maximum product matching
// ---------------------------------------------------------------------------

/// Row-to-column matching maximizing the product of matched magnitudes,
/// with the optimal assignment duals expressed as log row/column scalings:
/// log r_i + log|a_ij| + log c_j <= 0, with equality on matched entries.
struct Matching {
    std::vector<Index> sigma;            ///< column matched to row i
    std::vector<double> log_row;         ///< log r_i
    std::vector<double> log_col;         ///< log c_j
    std::vector<double> matched_log_abs; ///< log|a_{i,sigma(i)}|
    double log_product = 0.0;
    /// Fraction of unmatched nonzeros whose reduced cost is zero (alternative
    /// optima). Small values mean few competing matchings.
    double tight_fraction = 0.0;
    bool few_alternatives = false;

    Index size() const { return static_cast<Index>(sigma.size()); }

    std::vector<double> row_scale() const {
        std::vector<double> r(log_row.size());
        std::transform(log_row.begin(), log_row.end(), r.begin(), [](double x) { return std::exp(x); });
        return r;
    }
    std::vector<double> col_scale() const {
        std::vector<double> c(log_col.size());
        std::transform(log_col.begin(), log_col.end(), c.begin(), [](double x) { return std::exp(x); });
        return c;
    }
};

/// Solves the assignment problem with costs log(max_k |a_kj|) - log|a_ij| on
/// the full symmetric pattern by successive shortest augmenting paths
/// (Dijkstra with dual potentials). Rows are augmented in ascending order and
/// ties between columns go to the lowest index.
inline Matching max_product_matching(const SymSparseMatrix& a) {
    const Index n = a.size();
    const auto un = static_cast<std::size_t>(n);
    constexpr double inf = std::numeric_limits<double>::infinity();

    // CSR of the full pattern without exact zeros, costs attached.
    std::vector<Index> start(un + 1, 0);
    a.for_each([&](Index i, Index j, double v) {
        if (v == 0.0) return;
        ++start[i + 1];
        if (i != j) ++start[j + 1];
    });
    for (std::size_t i = 0; i < un; ++i) start[i + 1] += start[i];
    std::vector<Index> adj(static_cast<std::size_t>(start[un]));
    std::vector<double> logabs(adj.size());
    {
        std::vector<Index> fill(start.begin(), start.end() - 1);
        a.for_each([&](Index i, Index j, double v) {
            if (v == 0.0) return;
            const double l = std::log(std::abs(v));
            adj[fill[i]] = j;
            logabs[fill[i]++] = l;
            if (i != j) {
                adj[fill[j]] = i;
                logabs[fill[j]++] = l;
            }
        });
    }
    // Sort each row's columns so scanning order is deterministic by index.
    for (std::size_t i = 0; i < un; ++i) {
        std::vector<std::pair<Index, double>> row;
        for (Index k = start[i]; k < start[i + 1]; ++k) row.emplace_back(adj[k], logabs[k]);
        std::sort(row.begin(), row.end());
        for (Index k = start[i]; k < start[i + 1]; ++k) {
            adj[k] = row[static_cast<std::size_t>(k - start[i])].first;
            logabs[k] = row[static_cast<std::size_t>(k - start[i])].second;
        }
    }
    std::vector<double> log_colmax(un, -inf);
    for (std::size_t i = 0; i < un; ++i)
        for (Index k = start[i]; k < start[i + 1]; ++k)
            log_colmax[adj[k]] = std::max(log_colmax[adj[k]], logabs[k]);
    for (std::size_t j = 0; j < un; ++j)
        if (log_colmax[j] == -inf)
            throw StructurallySingular("matching: column " + std::to_string(j) + " has no nonzero");
    auto cost = [&](Index k) { return log_colmax[adj[k]] - logabs[k]; };

    // Reduced cost of (i,j): cost - u_i - v_j >= 0.
    std::vector<double> u(un, 0.0), v(un, 0.0);
    std::vector<Index> row_of_col(un, -1), col_of_row(un, -1);
    std::vector<double> dist(un, inf);
    std::vector<Index> pred(un, -1);
    std::vector<char> done(un, 0);
    std::vector<Index> touched;

    using Item = std::pair<double, Index>;
    for (Index root = 0; root < n; ++root) {
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        touched.clear();
        auto relax = [&](Index i, double di) {
            for (Index k = start[i]; k < start[i + 1]; ++k) {
                const Index j = adj[k];
                if (done[j]) continue;
                const double d = di + std::max(0.0, cost(k) - u[i] - v[j]);
                if (d < dist[j]) {
                    if (dist[j] == inf) touched.push_back(j);
                    dist[j] = d;
                    pred[j] = i;
                    heap.emplace(d, j);
                }
            }
        };
        relax(root, 0.0);
        Index free_col = -1;
        double shortest = inf;
        std::vector<Index> finalized;
        while (!heap.empty()) {
            auto [d, j] = heap.top();
            heap.pop();
            if (done[j] || d > dist[j]) continue;
            done[j] = 1;
            finalized.push_back(j);
            if (row_of_col[j] < 0) {
                free_col = j;
                shortest = d;
                break;
            }
            relax(row_of_col[j], d);
        }
        if (free_col < 0)
            throw StructurallySingular("matching: no perfect matching exists (structurally singular)");

        // Potential update keeps reduced costs nonnegative and makes every
        // edge on the shortest path tight.
        u[root] += shortest;
        for (Index j : finalized) {
            if (j == free_col) continue;
            const double delta = shortest - dist[j];
            v[j] -= delta;
            u[row_of_col[j]] += delta;
        }
        for (Index j = free_col; j >= 0;) {
            const Index i = pred[j];
            const Index next = col_of_row[i];
            col_of_row[i] = j;
            row_of_col[j] = i;
            j = next;
        }
        for (Index j : touched) {
            dist[j] = inf;
            done[j] = 0;
            pred[j] = -1;
        }
    }

    Matching m;
    m.sigma = col_of_row;
    m.log_row = u;
    m.log_col.resize(un);
    for (std::size_t j = 0; j < un; ++j) m.log_col[j] = v[j] - log_colmax[j];
    m.matched_log_abs.resize(un);
    std::size_t unmatched = 0, tight = 0;
    for (std::size_t i = 0; i < un; ++i) {
        for (Index k = start[i]; k < start[i + 1]; ++k) {
            const Index j = adj[k];
            if (j == m.sigma[i]) {
                m.matched_log_abs[i] = logabs[k];
                continue;
            }
            ++unmatched;
            if (cost(k) - u[i] - v[j] <= 1e-10 * (1.0 + std::abs(cost(k)))) ++tight;
        }
        m.log_product += m.matched_log_abs[i];
    }
    m.tight_fraction = unmatched ? static_cast<double>(tight) / static_cast<double>(unmatched) : 0.0;
    m.few_alternatives = unmatched > 0 && m.tight_fraction < 0.01;
    return m;
}

/// s_i = sqrt(r_i c_i), computed in the log domain.
inline ScalingVector symmetrize_matching_scaling(const Matching& m) {
    std::vector<double> log_s(m.log_row.size());
    for (std::size_t i = 0; i < log_s.size(); ++i) {
        const double e = 0.5 * (m.log_row[i] + m.log_col[i]);
        if (!std::isfinite(e)) throw std::logic_error("matching duals are not finite");
        log_s[i] = e;
    }
    return ScalingVector::from_log(log_s);
}

}  // namespace kktscale
