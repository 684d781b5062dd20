#pragma once

// Sparse symmetric indefinite LDL^T with threshold partial pivoting.
//
// The numerical phase is right-looking over a dynamic symmetric structure.
// Columns are visited in the analyse order; a column whose 1x1 pivot and
// 2x2 pivot (with the next column in the queue) both fail the threshold test
// is moved to the back of the queue and counted as delayed. Once every
// remaining column has failed in a row, the rest of the matrix is eliminated
// with Bunch-Kaufman pivoting, which always finds an acceptable pivot.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kktscale/ordering.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

struct SymbolicFactor {
    Permutation order;
    std::vector<Index> parent;      ///< elimination tree over positions, -1 for roots
    std::vector<Index> col_counts;  ///< off-diagonal count of each factor column
    std::size_t predicted_nnz = 0;  ///< including the diagonal
    double predicted_flops = 0.0;

    Index size() const { return order.size(); }
};

struct Inertia {
    Index positive = 0;
    Index negative = 0;
    Index zero = 0;

    friend bool operator==(const Inertia&, const Inertia&) = default;
};

struct FactorOptions {
    double u = 1e-8;             ///< threshold pivoting parameter, in [0, 0.5]
    double static_small = 0.0;   ///< absolute zero-pivot floor; 0 selects n * 1e-300
    double zero_pivot_rel = 0.0; ///< pivots below this times their original row max count as zero
};

/// Diagonal block of D at position `pos` (order 1 or 2).
struct PivotBlock {
    Index pos = 0;
    Index size = 1;
    double d11 = 0.0;
    double d21 = 0.0;
    double d22 = 0.0;
};

struct Factors {
    Index n = 0;
    Permutation effective_perm;  ///< position -> original index, after delays
    std::vector<Index> l_colptr;
    std::vector<Index> l_rowind;  ///< positions, strictly below the pivot block
    std::vector<double> l_values;
    std::vector<PivotBlock> blocks;
    Inertia inertia;
    Index num_delayed = 0;
    Index num_two_by_two = 0;
    double flops = 0.0;
    double u_used = 0.0;
    std::size_t predicted_nnz = 0;
    std::size_t actual_nnz = 0;

    std::size_t factor_nnz() const { return actual_nnz; }
};

namespace detail {

inline double one_by_one_flops(std::size_t c) {
    const double cd = static_cast<double>(c);
    return 1.0 + cd + cd * (cd + 1.0) / 2.0;
}

inline double two_by_two_flops(std::size_t c) {
    const double cd = static_cast<double>(c);
    return 3.0 + 2.0 * cd + cd * (cd + 1.0);
}

}  // namespace detail

/// Symbolic factorization of P A P^T assuming no delayed pivots.
inline SymbolicFactor analyse(const SymSparseMatrix& a, const Permutation& order) {
    const Index n = a.size();
    if (order.size() != n || !order.is_valid())
        throw std::invalid_argument("analyse: order is not a permutation of the matrix indices");
    const auto pos = order.inverse();
    const auto un = static_cast<std::size_t>(n);

    std::vector<std::vector<Index>> lower(un);  // positions > k adjacent to position k
    a.for_each([&](Index i, Index j, double) {
        if (i == j) return;
        Index pi = pos[i], pj = pos[j];
        if (pi < pj) std::swap(pi, pj);
        lower[pj].push_back(pi);
    });

    SymbolicFactor sf;
    sf.order = order;
    sf.parent.assign(un, -1);
    sf.col_counts.assign(un, 0);
    std::vector<std::vector<Index>> structure(un);
    std::vector<std::vector<Index>> children(un);
    std::vector<Index> merged;
    for (Index k = 0; k < n; ++k) {
        merged = std::move(lower[k]);
        for (Index c : children[k])
            for (Index r : structure[c])
                if (r != k) merged.push_back(r);
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        for (Index c : children[k]) std::vector<Index>().swap(structure[c]);
        if (!merged.empty()) {
            sf.parent[k] = merged.front();
            children[merged.front()].push_back(k);
        }
        sf.col_counts[k] = static_cast<Index>(merged.size());
        sf.predicted_nnz += 1 + merged.size();
        sf.predicted_flops += detail::one_by_one_flops(merged.size());
        structure[k] = std::move(merged);
        merged.clear();
    }
    return sf;
}

namespace detail {

using SparseRow = std::vector<std::pair<Index, double>>;

inline double row_lookup(const SparseRow& row, Index j) {
    auto it = std::lower_bound(row.begin(), row.end(), j,
                               [](const std::pair<Index, double>& e, Index k) { return e.first < k; });
    return (it != row.end() && it->first == j) ? it->second : 0.0;
}

inline double row_max_excluding(const SparseRow& row, Index skip) {
    double m = 0.0;
    for (const auto& [j, v] : row)
        if (j != skip) m = std::max(m, std::abs(v));
    return m;
}

class NumericFactorization {
public:
    NumericFactorization(const SymSparseMatrix& a, const SymbolicFactor& sf, const FactorOptions& opts,
                         const ScalingVector* s)
        : n_(a.size()), opts_(opts) {
        if (sf.size() != n_) throw DimensionError("symbolic factor does not match matrix order");
        if (!(opts.u >= 0.0 && opts.u <= 0.5))
            throw std::invalid_argument("pivot threshold u must lie in [0, 0.5]");
        if (s) require_size(static_cast<std::size_t>(s->size()), static_cast<std::size_t>(n_), "scaling");
        const auto un = static_cast<std::size_t>(n_);
        diag_.assign(un, 0.0);
        rows_.assign(un, {});
        a.for_each([&](Index i, Index j, double v) {
            const double w = s ? (*s)[i] * v * (*s)[j] : v;
            if (i == j) {
                diag_[i] += w;
            } else {
                rows_[i].emplace_back(j, w);
                rows_[j].emplace_back(i, w);
            }
        });
        zero_tol_.assign(un, 0.0);
        const double floor = opts.static_small > 0.0
                                 ? opts.static_small
                                 : std::max(1.0, static_cast<double>(n_)) * 1e-300;
        for (std::size_t i = 0; i < un; ++i) {
            std::sort(rows_[i].begin(), rows_[i].end());
            double m = std::abs(diag_[i]);
            for (const auto& e : rows_[i]) m = std::max(m, std::abs(e.second));
            zero_tol_[i] = std::max(floor, opts.zero_pivot_rel * m);
        }
        f_.n = n_;
        f_.u_used = opts.u;
        f_.predicted_nnz = sf.predicted_nnz;
        queue_.assign(sf.order.perm.begin(), sf.order.perm.end());
        delayed_.assign(un, 0);
    }

    Factors run() {
        const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
        std::size_t consecutive_failures = 0;
        bool final_mode = false;
        while (!queue_.empty()) {
            const Index p = queue_.front();
            if (!final_mode) {
                if (try_threshold_pivot(p)) {
                    consecutive_failures = 0;
                    continue;
                }
                queue_.pop_front();
                queue_.push_back(p);
                if (!delayed_[p]) {
                    delayed_[p] = 1;
                    ++f_.num_delayed;
                }
                if (++consecutive_failures >= queue_.size()) final_mode = true;
                continue;
            }
            bunch_kaufman_pivot(p, alpha);
        }
        finish();
        return std::move(f_);
    }

private:
    struct Step {
        Index first, second;  // second == -1 for 1x1
        double d11, d21, d22;
        std::vector<std::pair<Index, double>> l1, l2;  // (original row, value)
    };

    bool is_negligible(Index p) const {
        return std::abs(diag_[p]) <= zero_tol_[p];
    }

    bool try_threshold_pivot(Index p) {
        const double d = diag_[p];
        const double cmax = row_max_excluding(rows_[p], -1);
        if (cmax == 0.0) {
            eliminate_1x1(p, !is_negligible(p));
            return true;
        }
        if (!is_negligible(p) && std::abs(d) >= opts_.u * cmax) {
            eliminate_1x1(p, true);
            return true;
        }
        if (queue_.size() < 2) return false;
        const Index q = queue_[1];
        const double e = row_lookup(rows_[p], q);
        const double dq = diag_[q];
        const double det = d * dq - e * e;
        const double scale = std::abs(d * dq) + e * e;
        if (!(std::abs(det) > 64.0 * std::numeric_limits<double>::epsilon() * scale)) return false;
        const double mp = row_max_excluding(rows_[p], q);
        const double mq = row_max_excluding(rows_[q], p);
        const double adet = std::abs(det);
        // |E^{-1}| [mp; mq] <= 1/u componentwise
        if (opts_.u * (std::abs(dq) * mp + std::abs(e) * mq) > adet) return false;
        if (opts_.u * (std::abs(e) * mp + std::abs(d) * mq) > adet) return false;
        eliminate_2x2(p, q);
        return true;
    }

    void bunch_kaufman_pivot(Index p, double alpha) {
        const double d = diag_[p];
        double lambda = 0.0;
        Index r = -1;
        for (const auto& [j, v] : rows_[p])
            if (std::abs(v) > lambda) {
                lambda = std::abs(v);
                r = j;
            }
        if (lambda <= zero_tol_[p] && is_negligible(p)) {
            eliminate_1x1(p, false);
            return;
        }
        if (r < 0 || std::abs(d) >= alpha * lambda) {
            eliminate_1x1(p, true);
            return;
        }
        const double sigma = row_max_excluding(rows_[r], -1);
        if (std::abs(d) * sigma >= alpha * lambda * lambda) {
            eliminate_1x1(p, true);
        } else if (std::abs(diag_[r]) >= alpha * sigma) {
            eliminate_1x1(r, true);
        } else {
            eliminate_2x2(p, r);
        }
    }

    void remove_from_queue(Index i) {
        auto it = std::find(queue_.begin(), queue_.end(), i);
        if (it != queue_.end()) queue_.erase(it);
    }

    static void merge_update(SparseRow& row, Index skip1, Index skip2,
                             const std::vector<std::pair<Index, double>>& upd) {
        SparseRow out;
        out.reserve(row.size() + upd.size());
        auto a = row.begin();
        auto b = upd.begin();
        while (a != row.end() || b != upd.end()) {
            if (a != row.end() && (a->first == skip1 || a->first == skip2)) {
                ++a;
                continue;
            }
            if (b == upd.end() || (a != row.end() && a->first < b->first)) {
                out.push_back(*a++);
            } else if (a == row.end() || b->first < a->first) {
                out.emplace_back(b->first, -b->second);
                ++b;
            } else {
                out.emplace_back(a->first, a->second - b->second);
                ++a;
                ++b;
            }
        }
        row.swap(out);
    }

    void eliminate_1x1(Index p, bool nonzero) {
        remove_from_queue(p);
        const SparseRow nbrs = std::move(rows_[p]);
        rows_[p].clear();
        Step st{p, -1, nonzero ? diag_[p] : 0.0, 0.0, 0.0, {}, {}};
        if (nonzero) {
            const double d = diag_[p];
            if (d > 0.0) ++f_.inertia.positive;
            else ++f_.inertia.negative;
            std::vector<std::pair<Index, double>> upd;
            upd.reserve(nbrs.size());
            for (const auto& [i, aip] : nbrs) {
                st.l1.emplace_back(i, aip / d);
                upd.clear();
                for (const auto& [j, ajp] : nbrs) {
                    if (j == i) continue;
                    upd.emplace_back(j, (aip * ajp) / d);
                }
                diag_[i] -= (aip * aip) / d;
                merge_update(rows_[i], p, p, upd);
                check_finite(diag_[i]);
            }
            f_.flops += one_by_one_flops(nbrs.size());
        } else {
            ++f_.inertia.zero;
            for (const auto& [i, aip] : nbrs) merge_update(rows_[i], p, p, {});
            f_.flops += 1.0;
        }
        steps_.push_back(std::move(st));
    }

    void eliminate_2x2(Index p, Index q) {
        remove_from_queue(p);
        remove_from_queue(q);
        const double d1 = diag_[p], d2 = diag_[q], e = row_lookup(rows_[p], q);
        const double det = d1 * d2 - e * e;
        if (det < 0.0) {
            ++f_.inertia.positive;
            ++f_.inertia.negative;
        } else if (d1 + d2 > 0.0) {
            f_.inertia.positive += 2;
        } else {
            f_.inertia.negative += 2;
        }
        ++f_.num_two_by_two;

        // Union of both neighbourhoods, excluding the pivots themselves.
        std::vector<std::pair<Index, std::pair<double, double>>> nbrs;
        {
            auto a = rows_[p].begin(), ae = rows_[p].end();
            auto b = rows_[q].begin(), be = rows_[q].end();
            while (a != ae || b != be) {
                if (a != ae && a->first == q) { ++a; continue; }
                if (b != be && b->first == p) { ++b; continue; }
                if (b == be || (a != ae && a->first < b->first)) {
                    nbrs.push_back({a->first, {a->second, 0.0}});
                    ++a;
                } else if (a == ae || b->first < a->first) {
                    nbrs.push_back({b->first, {0.0, b->second}});
                    ++b;
                } else {
                    nbrs.push_back({a->first, {a->second, b->second}});
                    ++a;
                    ++b;
                }
            }
        }
        rows_[p].clear();
        rows_[q].clear();

        Step st{p, q, d1, e, d2, {}, {}};
        std::vector<std::pair<Index, double>> upd;
        upd.reserve(nbrs.size());
        for (const auto& [i, ai] : nbrs) {
            const auto [aip, aiq] = ai;
            st.l1.emplace_back(i, (d2 * aip - e * aiq) / det);
            st.l2.emplace_back(i, (d1 * aiq - e * aip) / det);
            upd.clear();
            for (const auto& [j, aj] : nbrs) {
                if (j == i) continue;
                const auto [ajp, ajq] = aj;
                upd.emplace_back(j, (d2 * (aip * ajp) - e * (aip * ajq + aiq * ajp) + d1 * (aiq * ajq)) / det);
            }
            diag_[i] -= (d2 * (aip * aip) - 2.0 * e * (aip * aiq) + d1 * (aiq * aiq)) / det;
            merge_update(rows_[i], p, q, upd);
            check_finite(diag_[i]);
        }
        f_.flops += two_by_two_flops(nbrs.size());
        steps_.push_back(std::move(st));
    }

    static void check_finite(double v) {
        if (!std::isfinite(v)) throw std::runtime_error("factorize: non-finite value during elimination");
    }

    void finish() {
        const auto un = static_cast<std::size_t>(n_);
        std::vector<Index> pos(un, -1);
        Index k = 0;
        for (const auto& st : steps_) {
            f_.effective_perm.perm.push_back(st.first);
            pos[st.first] = k++;
            if (st.second >= 0) {
                f_.effective_perm.perm.push_back(st.second);
                pos[st.second] = k++;
            }
        }
        f_.l_colptr.assign(un + 1, 0);
        std::vector<std::pair<Index, double>> col;
        auto emit = [&](const std::vector<std::pair<Index, double>>& l) {
            col.clear();
            for (const auto& [i, v] : l) col.emplace_back(pos[i], v);
            std::sort(col.begin(), col.end());
            for (const auto& [r, v] : col) {
                f_.l_rowind.push_back(r);
                f_.l_values.push_back(v);
            }
        };
        Index c = 0;
        for (const auto& st : steps_) {
            PivotBlock blk{pos[st.first], st.second >= 0 ? 2 : 1, st.d11, st.d21, st.d22};
            f_.blocks.push_back(blk);
            emit(st.l1);
            f_.l_colptr[++c] = static_cast<Index>(f_.l_rowind.size());
            if (st.second >= 0) {
                emit(st.l2);
                f_.l_colptr[++c] = static_cast<Index>(f_.l_rowind.size());
            }
        }
        f_.actual_nnz = un + f_.l_rowind.size();
    }

    Index n_;
    FactorOptions opts_;
    std::vector<double> diag_;
    std::vector<SparseRow> rows_;
    std::vector<double> zero_tol_;
    std::deque<Index> queue_;
    std::vector<char> delayed_;
    std::vector<Step> steps_;
    Factors f_;
};

}  // namespace detail

/// Numerical factorization of P A P^T following sf.order.
inline Factors factorize(const SymSparseMatrix& a, const SymbolicFactor& sf, const FactorOptions& opts = {}) {
    return detail::NumericFactorization(a, sf, opts, nullptr).run();
}

/// Factorizes S A S.
inline Factors factorize(const SymSparseMatrix& a, const SymbolicFactor& sf, const FactorOptions& opts,
                         const ScalingVector& s) {
    return detail::NumericFactorization(a, sf, opts, &s).run();
}

struct SolveResult {
    DenseVector x;
    bool in_range = true;  ///< false if a zero pivot met a nonzero right-hand side component
};

/// Forward substitution, block diagonal solve and back substitution.
inline SolveResult solve(const Factors& f, std::span<const double> b) {
    require_size(b.size(), static_cast<std::size_t>(f.n), "right-hand side");
    const auto un = static_cast<std::size_t>(f.n);
    DenseVector w(un);
    for (std::size_t k = 0; k < un; ++k) w[k] = b[f.effective_perm[k]];
    for (std::size_t k = 0; k < un; ++k) {
        const double wk = w[k];
        if (wk == 0.0) continue;
        for (Index t = f.l_colptr[k]; t < f.l_colptr[k + 1]; ++t) w[f.l_rowind[t]] -= f.l_values[t] * wk;
    }
    SolveResult res;
    const double scale = norm_inf(w);
    for (const auto& blk : f.blocks) {
        const auto k = static_cast<std::size_t>(blk.pos);
        if (blk.size == 1) {
            if (blk.d11 == 0.0) {
                if (std::abs(w[k]) > 1e-10 * std::max(1.0, scale)) res.in_range = false;
                w[k] = 0.0;
            } else {
                w[k] /= blk.d11;
            }
        } else {
            const double det = blk.d11 * blk.d22 - blk.d21 * blk.d21;
            const double x1 = (blk.d22 * w[k] - blk.d21 * w[k + 1]) / det;
            const double x2 = (blk.d11 * w[k + 1] - blk.d21 * w[k]) / det;
            w[k] = x1;
            w[k + 1] = x2;
        }
    }
    for (std::size_t k = un; k-- > 0;) {
        double acc = w[k];
        for (Index t = f.l_colptr[k]; t < f.l_colptr[k + 1]; ++t) acc -= f.l_values[t] * w[f.l_rowind[t]];
        w[k] = acc;
    }
    res.x.assign(un, 0.0);
    for (std::size_t k = 0; k < un; ++k) res.x[f.effective_perm[k]] = w[k];
    return res;
}

/// ||b - Ax||_inf / (||A||_inf ||x||_inf + ||b||_inf).
inline double backward_error(const SymSparseMatrix& a, std::span<const double> x, std::span<const double> b,
                             double a_norm = -1.0) {
    const auto ax = matvec(a, x);
    double r = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) r = std::max(r, std::abs(b[i] - ax[i]));
    if (a_norm < 0.0) a_norm = a.norm_inf();
    const double denom = a_norm * norm_inf(x) + norm_inf(b);
    return denom > 0.0 ? r / denom : r;
}

struct RefineResult {
    DenseVector x;
    double backward_error = 0.0;
    bool converged = false;
    int steps = 0;
    bool in_range = true;
};

namespace detail {

inline RefineResult refine_impl(const SymSparseMatrix& a, const Factors& f, std::span<const double> b,
                                int max_steps, double tol, const ScalingVector* s) {
    require_size(b.size(), static_cast<std::size_t>(a.size()), "right-hand side");
    RefineResult res;
    auto apply_inverse = [&](std::span<const double> rhs) {
        if (!s) {
            auto sr = solve(f, rhs);
            res.in_range = res.in_range && sr.in_range;
            return std::move(sr.x);
        }
        auto sr = solve(f, scale_rhs(*s, rhs));
        res.in_range = res.in_range && sr.in_range;
        return unscale_solution(*s, sr.x);
    };
    const double a_norm = a.norm_inf();
    res.x = apply_inverse(b);
    res.backward_error = backward_error(a, res.x, b, a_norm);
    while (!(res.backward_error <= tol) && res.steps < max_steps) {
        const auto ax = matvec(a, res.x);
        DenseVector r(b.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - ax[i];
        const auto dx = apply_inverse(r);
        for (std::size_t i = 0; i < r.size(); ++i) res.x[i] += dx[i];
        ++res.steps;
        res.backward_error = backward_error(a, res.x, b, a_norm);
        if (!std::isfinite(res.backward_error)) break;
    }
    res.converged = res.backward_error <= tol;
    return res;
}

}  // namespace detail

/// Iterative refinement in the unscaled space with factors of A.
inline RefineResult refine(const SymSparseMatrix& a, const Factors& f, std::span<const double> b,
                           int max_steps = 5, double tol = 1e-10) {
    return detail::refine_impl(a, f, b, max_steps, tol, nullptr);
}

/// Iterative refinement in the unscaled space with factors of S A S.
inline RefineResult refine(const SymSparseMatrix& a, const Factors& f, std::span<const double> b,
                           int max_steps, double tol, const ScalingVector& s) {
    return detail::refine_impl(a, f, b, max_steps, tol, &s);
}

}  // namespace kktscale
