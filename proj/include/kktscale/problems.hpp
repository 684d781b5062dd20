#pragma once

// Toy nonlinear programs for the interior-point driver: quadratic programs
// built from data, a handful of small nonlinear problems, an ill-scaled QP
// family, and a JSON reader for QP definitions.

#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kktscale/ipm.hpp"
#include "kktscale/kkt.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

/// min 1/2 x^T H x + c^T x  s.t.  J x = b,  x_lower <= x <= x_upper.
struct QpData {
    std::string name;
    std::string family = "well-scaled";
    Index n = 0;
    Index m = 0;
    std::vector<Entry> hessian;  ///< lower triangle
    DenseVector c;
    std::vector<JacobianEntry> jacobian;
    DenseVector b;
    DenseVector x_lower;
    DenseVector x_upper;
    DenseVector x0;
};

inline NlpProblem make_qp_problem(QpData qp) {
    require_size(qp.c.size(), static_cast<std::size_t>(qp.n), "c");
    require_size(qp.b.size(), static_cast<std::size_t>(qp.m), "b");
    if (qp.x_lower.empty()) qp.x_lower.assign(static_cast<std::size_t>(qp.n), -infinity);
    if (qp.x_upper.empty()) qp.x_upper.assign(static_cast<std::size_t>(qp.n), infinity);
    if (qp.x0.empty()) qp.x0.assign(static_cast<std::size_t>(qp.n), 0.0);
    // Validates the Hessian triplets.
    const SymSparseMatrix h(qp.n, qp.hessian);
    for (const auto& e : qp.jacobian)
        if (e.row < 0 || e.row >= qp.m || e.col < 0 || e.col >= qp.n)
            throw DimensionError("jacobian entry outside " + std::to_string(qp.m) + "x" + std::to_string(qp.n));

    auto d = std::make_shared<const QpData>(qp);
    auto hm = std::make_shared<const SymSparseMatrix>(h);
    NlpProblem p;
    p.name = qp.name;
    p.family = qp.family;
    p.n = qp.n;
    p.m = qp.m;
    p.x_lower = qp.x_lower;
    p.x_upper = qp.x_upper;
    p.x0 = qp.x0;
    p.objective = [d, hm](std::span<const double> x) {
        const auto hx = matvec(*hm, x);
        double f = 0.0;
        for (Index i = 0; i < d->n; ++i) f += 0.5 * x[i] * hx[i] + d->c[i] * x[i];
        return f;
    };
    p.gradient = [d, hm](std::span<const double> x) {
        auto g = matvec(*hm, x);
        for (Index i = 0; i < d->n; ++i) g[i] += d->c[i];
        return g;
    };
    p.constraints = [d](std::span<const double> x) {
        DenseVector g(static_cast<std::size_t>(d->m));
        for (Index r = 0; r < d->m; ++r) g[r] = -d->b[r];
        for (const auto& e : d->jacobian) g[e.row] += e.value * x[e.col];
        return g;
    };
    p.jacobian = [d](std::span<const double>) { return d->jacobian; };
    p.hessian = [hm](std::span<const double>, std::span<const double>) { return hm->entries(); };
    return p;
}

namespace detail {

inline std::vector<Entry> dense_lower(const std::vector<std::vector<double>>& h) {
    std::vector<Entry> out;
    for (std::size_t i = 0; i < h.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j)
            if (h[i][j] != 0.0) out.push_back({static_cast<Index>(i), static_cast<Index>(j), h[i][j]});
    return out;
}

inline DenseVector filled(Index n, double v) { return DenseVector(static_cast<std::size_t>(n), v); }

}  // namespace detail

/// Random SPD equality QP: H = M^T M + I (dense), m random dense constraints.
inline QpData random_spd_qp(Index n, Index m, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> mm(n, std::vector<double>(n)), h(n, std::vector<double>(n, 0.0));
    for (auto& row : mm)
        for (double& v : row) v = u(rng);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            for (Index k = 0; k < n; ++k) h[i][j] += mm[k][i] * mm[k][j];
            if (i == j) h[i][j] += 1.0;
        }
    QpData qp;
    qp.name = "spd_qp_" + std::to_string(n) + "x" + std::to_string(m);
    qp.n = n;
    qp.m = m;
    qp.hessian = detail::dense_lower(h);
    for (Index i = 0; i < n; ++i) qp.c.push_back(u(rng));
    for (Index r = 0; r < m; ++r) {
        for (Index j = 0; j < n; ++j) qp.jacobian.push_back({r, j, u(rng)});
        qp.b.push_back(u(rng));
    }
    return qp;
}

/// Sparse convex QP with bounds, then x = D y and rows scaled by R with D, R
/// spanning 1e-4..1e4, so the augmented matrix spans roughly 1e-8..1e8.
inline QpData ill_scaled_qp(int k) {
    std::mt19937 rng(1000u + static_cast<unsigned>(k));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> expo(-4.0, 4.0);
    const Index n = 16 + 4 * k;
    const Index m = n / 4;
    std::uniform_int_distribution<Index> col(0, n - 1);

    std::vector<double> d(n), r(m);
    for (double& v : d) v = std::pow(10.0, expo(rng));
    for (double& v : r) v = std::pow(10.0, expo(rng));

    QpData qp;
    qp.name = "ill_scaled_" + std::to_string(k);
    qp.family = "ill-scaled";
    qp.n = n;
    qp.m = m;
    // Every third variable has almost no curvature and is left uncoupled.
    auto flat = [](Index j) { return j % 3 == 1; };
    for (Index j = 0; j < n; ++j) {
        const double diag = flat(j) ? 1e-6 : 2.0 + u(rng);
        qp.hessian.push_back({j, j, diag * d[j] * d[j]});
        if (j + 1 < n && !flat(j) && !flat(j + 1))
            qp.hessian.push_back({j + 1, j, 0.5 * u(rng) * d[j] * d[j + 1]});
        qp.c.push_back(u(rng) * d[j]);
    }
    for (Index i = 0; i < m; ++i) {
        qp.jacobian.push_back({i, 4 * i, (1.0 + 0.5 * u(rng)) * r[i] * d[4 * i]});
        for (int t = 0; t < 2; ++t) {
            const Index j = col(rng);
            if (j != 4 * i) qp.jacobian.push_back({i, j, u(rng) * r[i] * d[j]});
        }
        qp.b.push_back(u(rng) * r[i]);
    }
    qp.x_lower = detail::filled(n, -infinity);
    qp.x_upper = detail::filled(n, infinity);
    for (Index j = 0; j < n; j += 2) qp.x_lower[j] = -1.0 / d[j];
    qp.x0 = detail::filled(n, 0.0);
    return qp;
}

inline NlpProblem hs071_equality() {
    NlpProblem p;
    p.name = "hs071_eq";
    p.family = "nonconvex";
    p.n = 4;
    p.m = 1;
    p.objective = [](std::span<const double> x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; };
    p.gradient = [](std::span<const double> x) {
        return DenseVector{x[3] * (2 * x[0] + x[1] + x[2]), x[0] * x[3], x[0] * x[3] + 1.0,
                           x[0] * (x[0] + x[1] + x[2])};
    };
    p.constraints = [](std::span<const double> x) {
        return DenseVector{x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] - 40.0};
    };
    p.jacobian = [](std::span<const double> x) {
        std::vector<JacobianEntry> j;
        for (Index i = 0; i < 4; ++i) j.push_back({0, i, 2.0 * x[i]});
        return j;
    };
    p.hessian = [](std::span<const double> x, std::span<const double> l) {
        const double t = 2.0 * l[0];
        return std::vector<Entry>{{0, 0, 2 * x[3] + t}, {1, 0, x[3]}, {2, 0, x[3]}, {3, 0, 2 * x[0] + x[1] + x[2]},
                                  {1, 1, t},           {3, 1, x[0]}, {2, 2, t},   {3, 2, x[0]},
                                  {3, 3, t}};
    };
    p.x_lower = detail::filled(4, 1.0);
    p.x_upper = detail::filled(4, 5.0);
    p.x0 = {1.0, 5.0, 5.0, 1.0};
    return p;
}

inline NlpProblem rosenbrock_circle() {
    NlpProblem p;
    p.name = "rosenbrock_circle";
    p.family = "nonconvex";
    p.n = 2;
    p.m = 1;
    p.objective = [](std::span<const double> x) {
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    p.gradient = [](std::span<const double> x) {
        const double b = x[1] - x[0] * x[0];
        return DenseVector{-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b};
    };
    p.constraints = [](std::span<const double> x) { return DenseVector{x[0] * x[0] + x[1] * x[1] - 1.0}; };
    p.jacobian = [](std::span<const double> x) {
        return std::vector<JacobianEntry>{{0, 0, 2.0 * x[0]}, {0, 1, 2.0 * x[1]}};
    };
    p.hessian = [](std::span<const double> x, std::span<const double> l) {
        return std::vector<Entry>{{0, 0, 2.0 - 400.0 * x[1] + 1200.0 * x[0] * x[0] + 2.0 * l[0]},
                                  {1, 0, -400.0 * x[0]},
                                  {1, 1, 200.0 + 2.0 * l[0]}};
    };
    p.x_lower = detail::filled(2, -infinity);
    p.x_upper = detail::filled(2, infinity);
    p.x0 = {0.5, 0.5};
    return p;
}

/// min sum x_i^4/4 - x_i  on  0 <= x <= 0.8.
inline NlpProblem quartic_box(Index n) {
    NlpProblem p;
    p.name = "quartic_box_" + std::to_string(n);
    p.n = n;
    p.m = 0;
    p.objective = [](std::span<const double> x) {
        double f = 0.0;
        for (double v : x) f += 0.25 * v * v * v * v - v;
        return f;
    };
    p.gradient = [](std::span<const double> x) {
        DenseVector g;
        for (double v : x) g.push_back(v * v * v - 1.0);
        return g;
    };
    p.hessian = [](std::span<const double> x, std::span<const double>) {
        std::vector<Entry> h;
        for (std::size_t i = 0; i < x.size(); ++i)
            h.push_back({static_cast<Index>(i), static_cast<Index>(i), 3.0 * x[i] * x[i]});
        return h;
    };
    p.x_lower = detail::filled(n, 0.0);
    p.x_upper = detail::filled(n, 0.8);
    p.x0 = detail::filled(n, 0.5);
    return p;
}

/// Problems solved with u = 1e-8 in the acceptance runs. The ill-scaled
/// family is included and tagged.
inline std::vector<NlpProblem> toy_problem_set(unsigned seed = 7) {
    std::vector<NlpProblem> out;
    {
        QpData qp;
        qp.name = "eq_qp_1d";
        qp.n = 1;
        qp.m = 1;
        qp.hessian = {{0, 0, 1.0}};
        qp.c = {0.0};
        qp.jacobian = {{0, 0, 1.0}};
        qp.b = {1.0};
        out.push_back(make_qp_problem(qp));
    }
    {
        QpData qp;
        qp.name = "bound_min_x";
        qp.n = 1;
        qp.c = {1.0};
        qp.x_lower = {0.0};
        qp.x_upper = {infinity};
        qp.x0 = {1.0};
        out.push_back(make_qp_problem(qp));
    }
    out.push_back(make_qp_problem(random_spd_qp(10, 3, seed)));
    {
        QpData qp;
        qp.name = "box_quadratic_8";
        qp.n = 8;
        for (Index i = 0; i < 8; ++i) {
            qp.hessian.push_back({i, i, 1.0});
            qp.c.push_back(-(-0.5 + 0.25 * i));  // targets from -0.5 to 1.25
        }
        qp.x_lower = detail::filled(8, 0.0);
        qp.x_upper = detail::filled(8, 1.0);
        out.push_back(make_qp_problem(qp));
    }
    {
        QpData qp;
        qp.name = "simplex_qp_6";
        qp.n = 6;
        qp.m = 1;
        for (Index i = 0; i < 6; ++i) {
            qp.hessian.push_back({i, i, 2.0});
            if (i > 0) qp.hessian.push_back({i, i - 1, -1.0});
            qp.c.push_back(0.3 * std::sin(1.0 + i));
            qp.jacobian.push_back({0, i, 1.0});
        }
        qp.b = {1.0};
        qp.x_lower = detail::filled(6, 0.0);
        qp.x_upper = detail::filled(6, infinity);
        qp.x0 = detail::filled(6, 1.0 / 6.0);
        out.push_back(make_qp_problem(qp));
    }
    {
        QpData qp;
        qp.name = "nonconvex_box_4";
        qp.family = "nonconvex";
        qp.n = 4;
        for (Index i = 0; i < 4; ++i) {
            qp.hessian.push_back({i, i, -1.0});
            qp.c.push_back(0.1 * (i + 1));
        }
        qp.x_lower = detail::filled(4, -1.0);
        qp.x_upper = detail::filled(4, 1.0);
        qp.x0 = {0.2, 0.1, -0.1, 0.3};
        out.push_back(make_qp_problem(qp));
    }
    out.push_back(hs071_equality());
    out.push_back(rosenbrock_circle());
    {
        QpData qp;
        qp.name = "chain_qp_30";
        qp.n = 30;
        qp.m = 2;
        for (Index i = 0; i < 30; ++i) {
            qp.hessian.push_back({i, i, 2.0});
            if (i > 0) qp.hessian.push_back({i, i - 1, -1.0});
            qp.c.push_back(i % 3 == 0 ? -0.5 : 0.2);
            qp.jacobian.push_back({i < 15 ? 0 : 1, i, 1.0});
        }
        qp.b = {1.0, -1.0};
        qp.x_lower = detail::filled(30, -0.5);
        qp.x_upper = detail::filled(30, 0.5);
        out.push_back(make_qp_problem(qp));
    }
    out.push_back(quartic_box(5));
    {
        QpData qp;
        qp.name = "least_distance_12";
        qp.n = 12;
        qp.m = 4;
        for (Index i = 0; i < 12; ++i) {
            qp.hessian.push_back({i, i, 1.0});
            qp.c.push_back(-std::cos(0.7 * i));
        }
        for (Index r = 0; r < 4; ++r) {
            for (Index j = 3 * r; j < 3 * r + 3; ++j) qp.jacobian.push_back({r, j, 1.0 + 0.1 * j});
            qp.jacobian.push_back({r, (3 * r + 5) % 12, -0.5});
            qp.b.push_back(0.25 * r);
        }
        qp.x_lower = detail::filled(12, -1.0);
        qp.x_upper = detail::filled(12, infinity);
        out.push_back(make_qp_problem(qp));
    }
    for (int k = 0; k < 6; ++k) out.push_back(make_qp_problem(ill_scaled_qp(k)));
    return out;
}

class ProblemFormatError : public std::runtime_error {
public:
    explicit ProblemFormatError(const std::string& what) : std::runtime_error("problem file: " + what) {}
};

namespace detail {

inline DenseVector read_bounds(const nlohmann::json& j, const char* key, Index n, double missing) {
    DenseVector out(static_cast<std::size_t>(n), missing);
    if (!j.contains(key)) return out;
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(n))
        throw ProblemFormatError(std::string(key) + " must be an array of length " + std::to_string(n));
    for (Index i = 0; i < n; ++i) out[i] = arr[i].is_null() ? missing : arr[i].get<double>();
    return out;
}

inline DenseVector read_vector(const nlohmann::json& j, const char* key, Index n) {
    if (!j.contains(key)) return DenseVector(static_cast<std::size_t>(n), 0.0);
    auto v = j.at(key).get<DenseVector>();
    if (v.size() != static_cast<std::size_t>(n))
        throw ProblemFormatError(std::string(key) + " must have length " + std::to_string(n));
    return v;
}

}  // namespace detail

/// QP from JSON:
///   {"name", "n", "m", "hessian": [[i,j,v],...] | "hessian_dense": [[...]],
///    "c", "jacobian": [[r,j,v],...] | "jacobian_dense": [[...]], "b",
///    "x_lower", "x_upper" (null = unbounded), "x0"}
/// Indices are 0-based; Hessian triplets may be given in either triangle.
inline QpData parse_qp_json(const nlohmann::json& j) {
    QpData qp;
    try {
        qp.n = j.at("n").get<Index>();
        qp.m = j.value("m", Index{0});
        qp.name = j.value("name", std::string("qp"));
        qp.family = j.value("family", std::string("well-scaled"));
        if (qp.n <= 0 || qp.m < 0) throw ProblemFormatError("n must be positive and m nonnegative");
        if (j.contains("hessian")) {
            for (const auto& t : j.at("hessian")) {
                Index r = t.at(0).get<Index>(), c = t.at(1).get<Index>();
                if (r < c) std::swap(r, c);
                qp.hessian.push_back({r, c, t.at(2).get<double>()});
            }
        } else if (j.contains("hessian_dense")) {
            const auto h = j.at("hessian_dense").get<std::vector<std::vector<double>>>();
            if (h.size() != static_cast<std::size_t>(qp.n)) throw ProblemFormatError("hessian_dense has wrong order");
            for (std::size_t r = 0; r < h.size(); ++r) {
                if (h[r].size() != h.size()) throw ProblemFormatError("hessian_dense is not square");
                for (std::size_t c = 0; c < r; ++c)
                    if (h[r][c] != h[c][r]) throw ProblemFormatError("hessian_dense is not symmetric");
            }
            qp.hessian = detail::dense_lower(h);
        }
        if (j.contains("jacobian")) {
            for (const auto& t : j.at("jacobian"))
                qp.jacobian.push_back({t.at(0).get<Index>(), t.at(1).get<Index>(), t.at(2).get<double>()});
        } else if (j.contains("jacobian_dense")) {
            const auto a = j.at("jacobian_dense").get<std::vector<std::vector<double>>>();
            if (a.size() != static_cast<std::size_t>(qp.m)) throw ProblemFormatError("jacobian_dense has wrong rows");
            for (std::size_t r = 0; r < a.size(); ++r) {
                if (a[r].size() != static_cast<std::size_t>(qp.n))
                    throw ProblemFormatError("jacobian_dense has wrong columns");
                for (std::size_t c = 0; c < a[r].size(); ++c)
                    if (a[r][c] != 0.0) qp.jacobian.push_back({static_cast<Index>(r), static_cast<Index>(c), a[r][c]});
            }
        }
        qp.c = detail::read_vector(j, "c", qp.n);
        qp.b = detail::read_vector(j, "b", qp.m);
        qp.x0 = detail::read_vector(j, "x0", qp.n);
        qp.x_lower = detail::read_bounds(j, "x_lower", qp.n, -infinity);
        qp.x_upper = detail::read_bounds(j, "x_upper", qp.n, infinity);
    } catch (const nlohmann::json::exception& e) {
        throw ProblemFormatError(e.what());
    }
    return qp;
}

inline NlpProblem load_problem_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProblemFormatError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ProblemFormatError(path + ": " + e.what());
    }
    auto qp = parse_qp_json(j);
    if (!j.contains("name")) {
        const auto slash = path.find_last_of('/');
        qp.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    }
    auto p = make_qp_problem(std::move(qp));
    validate(p);
    return p;
}

}  // namespace kktscale
