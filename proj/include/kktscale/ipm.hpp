#pragma once

// Simplified primal-dual barrier method for
//
//   min f(x)  s.t.  g(x) = 0,  x_L <= x <= x_U
//
// Each iteration assembles the augmented system, corrects its inertia,
// solves for the Newton step and takes a fraction-to-boundary step with an
// Armijo backtracking search on the l1 barrier merit. The solver session
// records one controller event per factorization.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kktscale/controller.hpp"
#include "kktscale/kkt.hpp"
#include "kktscale/solver.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct NlpProblem {
    std::string name;
    std::string family = "well-scaled";
    Index n = 0;
    Index m = 0;
    std::function<double(std::span<const double>)> objective;
    std::function<DenseVector(std::span<const double>)> gradient;
    std::function<DenseVector(std::span<const double>)> constraints;
    std::function<std::vector<JacobianEntry>(std::span<const double>)> jacobian;
    /// Lower triangle of the Hessian of f + lambda^T g.
    std::function<std::vector<Entry>(std::span<const double>, std::span<const double>)> hessian;
    DenseVector x_lower;  ///< -infinity where unbounded
    DenseVector x_upper;  ///< +infinity where unbounded
    DenseVector x0;
};

inline void validate(const NlpProblem& p) {
    if (p.n <= 0 || p.m < 0) throw std::invalid_argument("problem '" + p.name + "' has invalid dimensions");
    if (!p.objective || !p.gradient || !p.hessian || (p.m > 0 && (!p.constraints || !p.jacobian)))
        throw std::invalid_argument("problem '" + p.name + "' is missing callbacks");
    require_size(p.x_lower.size(), static_cast<std::size_t>(p.n), "x_lower");
    require_size(p.x_upper.size(), static_cast<std::size_t>(p.n), "x_upper");
    require_size(p.x0.size(), static_cast<std::size_t>(p.n), "x0");
    for (Index i = 0; i < p.n; ++i)
        if (!(p.x_lower[i] <= p.x_upper[i]))
            throw std::invalid_argument("problem '" + p.name + "': x_lower exceeds x_upper at " + std::to_string(i));
}

enum class IpmStatus { solved, max_iterations, time_limit, inertia_failed, numerical_error };

inline std::string_view to_string(IpmStatus s) {
    switch (s) {
        case IpmStatus::solved: return "solved";
        case IpmStatus::max_iterations: return "max_iterations";
        case IpmStatus::time_limit: return "time_limit";
        case IpmStatus::inertia_failed: return "inertia_failed";
        case IpmStatus::numerical_error: return "numerical_error";
    }
    return "?";
}

struct IpmOptions {
    double tol = 1e-6;
    int max_iter = 200;
    double mu_init = 0.1;
    double kappa_eps = 10.0;
    double kappa_mu = 0.2;
    double theta_mu = 1.5;
    double tau_min = 0.99;
    double bound_push = 1e-2;
    double armijo_eta = 1e-4;
    int max_soc = 2;
    bool second_order_correction = true;
    int max_ir_refactor = 2;  ///< refactorizations per iteration after a refinement failure
    double kappa_sigma = 1e10;
    InertiaOptions inertia;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct IterationRecord {
    int iter = 0;
    double mu = 0.0;
    double kkt_residual = 0.0;
    double alpha = 0.0;
    double delta_w = 0.0;
    double delta_c = 0.0;
    double sigma_max = 0.0;
    int factorizations = 0;
    Index max_delayed = 0;
    int soc_steps = 0;
};

struct IpmResult {
    IpmStatus status = IpmStatus::max_iterations;
    std::string message;
    DenseVector x;
    DenseVector lambda;
    DenseVector z_lower;
    DenseVector z_upper;
    int iterations = 0;
    double kkt_residual = infinity;
    double objective = 0.0;
    std::vector<IterationRecord> history;
    DecisionLog log;
    SolverStats stats;

    bool solved() const { return status == IpmStatus::solved; }
};

namespace detail {

struct IpmState {
    DenseVector x, lambda, zl, zu;
};

inline bool has_lower(const NlpProblem& p, Index i) { return std::isfinite(p.x_lower[i]); }
inline bool has_upper(const NlpProblem& p, Index i) { return std::isfinite(p.x_upper[i]); }

inline DenseVector interior_start(const NlpProblem& p, double push) {
    DenseVector x = p.x0;
    for (Index i = 0; i < p.n; ++i) {
        const double lo = p.x_lower[i], hi = p.x_upper[i];
        double pl = has_lower(p, i) ? push * std::max(1.0, std::abs(lo)) : 0.0;
        double pu = has_upper(p, i) ? push * std::max(1.0, std::abs(hi)) : 0.0;
        if (has_lower(p, i) && has_upper(p, i)) {
            pl = std::min(pl, push * (hi - lo));
            pu = std::min(pu, push * (hi - lo));
            if (!(hi > lo)) throw std::invalid_argument("fixed variables are not supported");
        }
        if (has_lower(p, i)) x[i] = std::max(x[i], lo + pl);
        if (has_upper(p, i)) x[i] = std::min(x[i], hi - pu);
    }
    return x;
}

inline DenseVector jt_times(const std::vector<JacobianEntry>& jac, std::span<const double> y, Index n) {
    DenseVector out(static_cast<std::size_t>(n), 0.0);
    for (const auto& e : jac) out[e.col] += e.value * y[e.row];
    return out;
}

inline double norm1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

class Driver {
public:
    Driver(const NlpProblem& p, const Policy& policy, const IpmOptions& opts, double u_init)
        : p_(p), opts_(opts), solver_(make_solver_options(policy, u_init)) {}

    IpmResult run() {
        validate(p_);
        IpmResult res;
        st_.x = interior_start(p_, opts_.bound_push);
        st_.lambda.assign(static_cast<std::size_t>(p_.m), 0.0);
        st_.zl.assign(static_cast<std::size_t>(p_.n), 0.0);
        st_.zu.assign(static_cast<std::size_t>(p_.n), 0.0);
        for (Index i = 0; i < p_.n; ++i) {
            if (has_lower(p_, i)) st_.zl[i] = 1.0;
            if (has_upper(p_, i)) st_.zu[i] = 1.0;
        }
        bounded_ = false;
        for (Index i = 0; i < p_.n; ++i) bounded_ = bounded_ || has_lower(p_, i) || has_upper(p_, i);
        mu_ = opts_.mu_init;
        nu_ = 1.0;

        int iter = 0;
        try {
            for (;; ++iter) {
                const double e0 = kkt_error(0.0);
                res.kkt_residual = e0;
                if (!std::isfinite(e0)) {
                    res.status = IpmStatus::numerical_error;
                    res.message = "non-finite residual";
                    break;
                }
                if (e0 <= opts_.tol) {
                    res.status = IpmStatus::solved;
                    break;
                }
                if (iter >= opts_.max_iter) {
                    res.status = IpmStatus::max_iterations;
                    break;
                }
                if (opts_.deadline && std::chrono::steady_clock::now() > *opts_.deadline) {
                    res.status = IpmStatus::time_limit;
                    break;
                }
                update_barrier();
                IterationRecord rec;
                rec.iter = iter;
                rec.mu = mu_;
                rec.kkt_residual = e0;
                if (!step(iter, rec)) {
                    res.status = IpmStatus::numerical_error;
                    res.message = "search direction is not finite";
                    break;
                }
                res.history.push_back(rec);
            }
        } catch (const InertiaCorrectionFailed& e) {
            res.status = IpmStatus::inertia_failed;
            res.message = e.what();
        }
        res.iterations = iter;
        res.x = st_.x;
        res.lambda = st_.lambda;
        res.z_lower = st_.zl;
        res.z_upper = st_.zu;
        res.objective = p_.objective(st_.x);
        res.log = solver_.log();
        res.stats = solver_.stats();
        return res;
    }

private:
    static SolverOptions make_solver_options(const Policy& policy, double u_init) {
        SolverOptions so;
        so.policy = policy;
        so.u_init = u_init;
        return so;
    }

    double slack_lower(Index i) const { return st_.x[i] - p_.x_lower[i]; }
    double slack_upper(Index i) const { return p_.x_upper[i] - st_.x[i]; }

    DenseVector constraint_values(std::span<const double> x) const {
        if (p_.m == 0) return {};
        auto c = p_.constraints(x);
        require_size(c.size(), static_cast<std::size_t>(p_.m), "constraint values");
        return c;
    }

    std::vector<JacobianEntry> jacobian(std::span<const double> x) const {
        if (p_.m == 0) return {};
        return p_.jacobian(x);
    }

    /// Optimality error of the barrier problem with parameter mu.
    double kkt_error(double mu) const {
        auto r = p_.gradient(st_.x);
        require_size(r.size(), static_cast<std::size_t>(p_.n), "gradient");
        const auto jtl = jt_times(jacobian(st_.x), st_.lambda, p_.n);
        double comp = 0.0;
        for (Index i = 0; i < p_.n; ++i) {
            r[i] += jtl[i] - st_.zl[i] + st_.zu[i];
            if (has_lower(p_, i)) comp = std::max(comp, std::abs(slack_lower(i) * st_.zl[i] - mu));
            if (has_upper(p_, i)) comp = std::max(comp, std::abs(slack_upper(i) * st_.zu[i] - mu));
        }
        const auto g = constraint_values(st_.x);
        return std::max({norm_inf(r), norm_inf(g), comp});
    }

    void update_barrier() {
        if (!bounded_) return;
        const double floor = opts_.tol / 10.0;
        while (mu_ > floor && kkt_error(mu_) <= opts_.kappa_eps * mu_)
            mu_ = std::max(floor, std::min(opts_.kappa_mu * mu_, std::pow(mu_, opts_.theta_mu)));
    }

    double barrier_objective(std::span<const double> x) const {
        double phi = p_.objective(x);
        for (Index i = 0; i < p_.n; ++i) {
            if (has_lower(p_, i)) phi -= mu_ * std::log(x[i] - p_.x_lower[i]);
            if (has_upper(p_, i)) phi -= mu_ * std::log(p_.x_upper[i] - x[i]);
        }
        return phi;
    }

    double merit(std::span<const double> x) const {
        for (Index i = 0; i < p_.n; ++i)
            if ((has_lower(p_, i) && !(x[i] > p_.x_lower[i])) || (has_upper(p_, i) && !(x[i] < p_.x_upper[i])))
                return infinity;
        return barrier_objective(x) + nu_ * norm1(constraint_values(x));
    }

    /// Solve with the current factors; on a refinement failure under an
    /// on-demand policy the system is refactorized so the controller can react.
    RefineResult solve_with_retry(KktParts& parts, InertiaCorrection& ic, const DenseVector& rhs, int iter,
                                  IterationRecord& rec) {
        RefineResult r = solver_.solve(ic.kkt, rhs);
        for (int k = 0; !r.converged && solver_.options().policy.on_demand() && k < opts_.max_ir_refactor; ++k) {
            parts.delta_w = ic.delta_w;
            parts.delta_c = ic.delta_c;
            ic = inertia_correct(parts, solver_, opts_.inertia, iter);
            rec.factorizations += ic.factorizations;
            rec.max_delayed = std::max(rec.max_delayed, solver_.factors().num_delayed);
            r = solver_.solve(ic.kkt, rhs);
        }
        return r;
    }

    bool step(int iter, IterationRecord& rec) {
        const Index n = p_.n, m = p_.m;
        const auto& x = st_.x;

        KktParts parts;
        {
            auto h = p_.hessian(x, st_.lambda);
            // Explicit diagonal keeps the pattern stable across iterations.
            for (Index i = 0; i < n; ++i) h.push_back({i, i, 0.0});
            parts.w = SymSparseMatrix(n, std::move(h));
        }
        parts.jac = SparseJacobian{m, n, jacobian(x)};
        parts.sigma.assign(static_cast<std::size_t>(n), 0.0);
        for (Index i = 0; i < n; ++i) {
            if (has_lower(p_, i)) parts.sigma[i] += st_.zl[i] / slack_lower(i);
            if (has_upper(p_, i)) parts.sigma[i] += st_.zu[i] / slack_upper(i);
        }
        rec.sigma_max = parts.sigma.empty() ? 0.0 : *std::max_element(parts.sigma.begin(), parts.sigma.end());

        const auto grad = p_.gradient(x);
        const auto g = constraint_values(x);
        DenseVector grad_phi = grad;
        for (Index i = 0; i < n; ++i) {
            if (has_lower(p_, i)) grad_phi[i] -= mu_ / slack_lower(i);
            if (has_upper(p_, i)) grad_phi[i] += mu_ / slack_upper(i);
        }
        const auto jtl = jt_times(parts.jac.entries, st_.lambda, n);

        DenseVector rhs(static_cast<std::size_t>(n + m));
        for (Index i = 0; i < n; ++i) rhs[i] = -(grad_phi[i] + jtl[i]);
        for (Index r = 0; r < m; ++r) rhs[n + r] = -g[r];

        InertiaCorrection ic = inertia_correct(parts, solver_, opts_.inertia, iter);
        rec.factorizations = ic.factorizations;
        rec.max_delayed = solver_.factors().num_delayed;
        const RefineResult sol = solve_with_retry(parts, ic, rhs, iter, rec);
        rec.delta_w = ic.delta_w;
        rec.delta_c = ic.delta_c;
        for (double v : sol.x)
            if (!std::isfinite(v)) return false;

        DenseVector dx(sol.x.begin(), sol.x.begin() + n);
        DenseVector dl(sol.x.begin() + n, sol.x.end());

        // Bound multiplier steps from the linearized complementarity.
        DenseVector dzl(static_cast<std::size_t>(n), 0.0), dzu(static_cast<std::size_t>(n), 0.0);
        for (Index i = 0; i < n; ++i) {
            if (has_lower(p_, i)) {
                const double s = slack_lower(i);
                dzl[i] = mu_ / s - st_.zl[i] - st_.zl[i] / s * dx[i];
            }
            if (has_upper(p_, i)) {
                const double s = slack_upper(i);
                dzu[i] = mu_ / s - st_.zu[i] + st_.zu[i] / s * dx[i];
            }
        }

        const double tau = std::max(opts_.tau_min, 1.0 - mu_);
        const double alpha_max = primal_step_limit(dx, tau);
        const double alpha_z = dual_step_limit(dzl, dzu, tau);

        for (Index r = 0; r < m; ++r) nu_ = std::max(nu_, std::abs(st_.lambda[r] + dl[r]) + 1.0);
        const double g1 = norm1(g);
        double slope = 0.0;
        for (Index i = 0; i < n; ++i) slope += grad_phi[i] * dx[i];
        slope -= nu_ * g1;
        const double m0 = merit(x);

        auto accept_test = [&](double m_trial, double alpha) {
            if (!std::isfinite(m_trial)) return false;
            if (slope < 0.0) return m_trial <= m0 + opts_.armijo_eta * alpha * slope;
            return m_trial <= m0;
        };
        auto trial_point = [&](const DenseVector& d, double alpha) {
            DenseVector xt(x);
            for (Index i = 0; i < n; ++i) xt[i] += alpha * d[i];
            return xt;
        };

        double alpha = alpha_max;
        DenseVector x_new;
        DenseVector dl_used = dl;
        bool accepted = false;
        for (int k = 0; k < 60 && !accepted; ++k) {
            DenseVector xt = trial_point(dx, alpha);
            if (accept_test(merit(xt), alpha)) {
                x_new = std::move(xt);
                accepted = true;
                break;
            }
            if (k == 0 && opts_.second_order_correction && m > 0) {
                // Second-order correction reuses the factors of this iteration.
                DenseVector c_soc(g.size());
                DenseVector g_trial = constraint_values(xt);
                for (Index r = 0; r < m; ++r) c_soc[r] = alpha * g[r] + g_trial[r];
                for (int s = 0; s < opts_.max_soc; ++s) {
                    DenseVector rhs_soc(rhs);
                    for (Index r = 0; r < m; ++r) rhs_soc[n + r] = -c_soc[r];
                    const RefineResult corr = solver_.solve(ic.kkt, rhs_soc);
                    ++rec.soc_steps;
                    DenseVector dx_soc(corr.x.begin(), corr.x.begin() + n);
                    const double a_soc = primal_step_limit(dx_soc, tau);
                    DenseVector xs = trial_point(dx_soc, a_soc);
                    if (accept_test(merit(xs), alpha)) {
                        x_new = std::move(xs);
                        dl_used.assign(corr.x.begin() + n, corr.x.end());
                        alpha = a_soc;
                        accepted = true;
                        break;
                    }
                    const DenseVector g_soc = constraint_values(xs);
                    for (Index r = 0; r < m; ++r) c_soc[r] = a_soc * c_soc[r] + g_soc[r];
                }
                if (accepted) break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // No sufficient decrease: take the shortest trial step.
            x_new = trial_point(dx, alpha);
            if (!std::isfinite(merit(x_new))) return false;
        }
        rec.alpha = alpha;

        st_.x = std::move(x_new);
        for (Index r = 0; r < m; ++r) st_.lambda[r] += alpha * dl_used[r];
        for (Index i = 0; i < n; ++i) {
            if (has_lower(p_, i)) st_.zl[i] = clamp_dual(st_.zl[i] + alpha_z * dzl[i], slack_lower(i));
            if (has_upper(p_, i)) st_.zu[i] = clamp_dual(st_.zu[i] + alpha_z * dzu[i], slack_upper(i));
        }
        return true;
    }

    double primal_step_limit(const DenseVector& dx, double tau) const {
        double a = 1.0;
        for (Index i = 0; i < p_.n; ++i) {
            if (has_lower(p_, i) && dx[i] < 0.0) a = std::min(a, -tau * slack_lower(i) / dx[i]);
            if (has_upper(p_, i) && dx[i] > 0.0) a = std::min(a, tau * slack_upper(i) / dx[i]);
        }
        return a;
    }

    double dual_step_limit(const DenseVector& dzl, const DenseVector& dzu, double tau) const {
        double a = 1.0;
        for (Index i = 0; i < p_.n; ++i) {
            if (has_lower(p_, i) && dzl[i] < 0.0) a = std::min(a, -tau * st_.zl[i] / dzl[i]);
            if (has_upper(p_, i) && dzu[i] < 0.0) a = std::min(a, -tau * st_.zu[i] / dzu[i]);
        }
        return a;
    }

    double clamp_dual(double z, double slack) const {
        const double k = opts_.kappa_sigma;
        return std::clamp(z, mu_ / (k * slack), k * mu_ / slack);
    }

    const NlpProblem& p_;
    IpmOptions opts_;
    ScaledLinearSolver solver_;
    IpmState st_;
    double mu_ = 0.1;
    double nu_ = 1.0;
    bool bounded_ = false;
};

}  // namespace detail

/// Runs the barrier method under the given scaling policy.
inline IpmResult ipm_solve(const NlpProblem& p, const Policy& policy, const IpmOptions& opts = {},
                           double u_init = 1e-8) {
    return detail::Driver(p, policy, opts, u_init).run();
}

}  // namespace kktscale
