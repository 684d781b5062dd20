#pragma once

// Augmented system
//
//   [ W + Sigma + delta_w I   J^T        ]
//   [ J                      -delta_c I  ]
//
// and the regularization loop that drives its inertia to (n, m, 0).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kktscale/ldlt.hpp"
#include "kktscale/solver.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

struct JacobianEntry {
    Index row = 0;  ///< constraint index
    Index col = 0;  ///< variable index
    double value = 0.0;
};

struct SparseJacobian {
    Index m = 0;
    Index n = 0;
    std::vector<JacobianEntry> entries;
};

struct KktParts {
    SymSparseMatrix w;          ///< Hessian of the Lagrangian, lower triangle, n x n
    SparseJacobian jac;         ///< m x n constraint Jacobian
    std::vector<double> sigma;  ///< barrier diagonal, length n, nonnegative
    double delta_w = 0.0;
    double delta_c = 0.0;

    Index n() const { return w.size(); }
    Index m() const { return jac.m; }
};

inline void validate(const KktParts& p) {
    const Index n = p.w.size();
    if (p.jac.n != n) throw DimensionError("jacobian has " + std::to_string(p.jac.n) + " columns, hessian order " +
                                           std::to_string(n));
    require_size(p.sigma.size(), static_cast<std::size_t>(n), "sigma");
    for (double s : p.sigma)
        if (!(s >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    if (!(p.delta_w >= 0.0) || !(p.delta_c >= 0.0)) throw std::invalid_argument("shifts must be nonnegative");
    for (const auto& e : p.jac.entries)
        if (e.row < 0 || e.row >= p.jac.m || e.col < 0 || e.col >= n)
            throw DimensionError("jacobian entry outside " + std::to_string(p.jac.m) + "x" + std::to_string(n));
}

/// Lower triangle of the (n+m)-order augmented matrix. A (1,1)-block
/// diagonal entry is stored where W has one, Sigma is nonzero, or delta_w > 0;
/// the (2,2) block always stores its m diagonal entries (explicit zeros when
/// delta_c = 0).
inline SymSparseMatrix assemble_kkt(const KktParts& p) {
    validate(p);
    const Index n = p.n(), m = p.m();
    std::vector<Entry> e;
    e.reserve(p.w.nnz() + static_cast<std::size_t>(n + m) + p.jac.entries.size());
    std::vector<char> has_diag(static_cast<std::size_t>(n), 0);
    p.w.for_each([&](Index i, Index j, double v) {
        if (i == j) {
            has_diag[i] = 1;
            v += p.sigma[i] + p.delta_w;
        }
        e.push_back({i, j, v});
    });
    for (Index i = 0; i < n; ++i)
        if (!has_diag[i] && (p.sigma[i] != 0.0 || p.delta_w > 0.0))
            e.push_back({i, i, p.sigma[i] + p.delta_w});
    for (const auto& j : p.jac.entries) e.push_back({n + j.row, j.col, j.value});
    for (Index r = 0; r < m; ++r) e.push_back({n + r, n + r, -p.delta_c});
    return {n + m, std::move(e)};
}

class InertiaCorrectionFailed : public std::runtime_error {
public:
    explicit InertiaCorrectionFailed(const std::string& what)
        : std::runtime_error("inertia correction failed: " + what) {}
};

struct InertiaOptions {
    double delta_w_first = 1e-4;
    double delta_w_growth = 10.0;
    double delta_w_max = 1e10;
    double delta_c_bar = 1e-8;
    int max_retries = 30;
};

struct InertiaCorrection {
    SymSparseMatrix kkt;  ///< the accepted matrix
    double delta_w = 0.0;
    double delta_c = 0.0;
    int factorizations = 0;
    Inertia inertia;
};

/// Factorizes the augmented system, adjusting delta_w and delta_c until the
/// inertia is (n, m, 0). Every attempt is a separate factorization on the
/// solver session. Shifts start from parts.delta_w / parts.delta_c.
inline InertiaCorrection inertia_correct(KktParts parts, ScaledLinearSolver& solver, const InertiaOptions& opts = {},
                                         int iter = 0) {
    const Index n = parts.n(), m = parts.m();
    const Inertia target{n, m, 0};
    int growth_steps = 0;
    for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
        InertiaCorrection out;
        out.kkt = assemble_kkt(parts);
        const Factors& f = solver.factorize(out.kkt, iter);
        if (f.inertia == target) {
            out.delta_w = parts.delta_w;
            out.delta_c = parts.delta_c;
            out.factorizations = attempt + 1;
            out.inertia = f.inertia;
            return out;
        }
        if (f.inertia.zero > 0 && parts.delta_c == 0.0 && m > 0) {
            parts.delta_c = opts.delta_c_bar;
            continue;
        }
        if (parts.delta_w == 0.0) {
            parts.delta_w = opts.delta_w_first;
            growth_steps = 0;
        } else {
            ++growth_steps;
            parts.delta_w = opts.delta_w_first * std::pow(opts.delta_w_growth, growth_steps);
        }
        if (parts.delta_w > opts.delta_w_max)
            throw InertiaCorrectionFailed("delta_w exceeded " + std::to_string(opts.delta_w_max));
    }
    throw InertiaCorrectionFailed("no acceptable inertia after " + std::to_string(opts.max_retries) + " factorizations");
}

}  // namespace kktscale
