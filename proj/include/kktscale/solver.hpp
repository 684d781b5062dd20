#pragma once

// A linear solver session: owns the heuristic state for one run, computes or
// reuses scalings as the controller decides, caches the analyse phase, and
// turns every factorization into a FactorEvent plus a decision-log line.

#include <chrono>
#include <optional>
#include <span>
#include <utility>

#include "kktscale/controller.hpp"
#include "kktscale/ldlt.hpp"
#include "kktscale/ordering.hpp"
#include "kktscale/scaling.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

struct ComputedScaling {
    ScalingVector scaling;
    std::optional<Permutation> order;  ///< set by the matching-based ordering
    bool few_alternatives = false;
    bool structurally_singular = false;  ///< matching impossible; identity returned
};

/// Runs the named scaling algorithm on A.
inline ComputedScaling compute_scaling(const SymSparseMatrix& a, ScalerKind kind) {
    ComputedScaling out;
    try {
        switch (kind) {
            case ScalerKind::curtis_reid:
                out.scaling = curtis_reid_scale(a, CurtisReidVariant::unsymmetric_averaged).scaling;
                break;
            case ScalerKind::curtis_reid_sym:
                out.scaling = curtis_reid_scale(a, CurtisReidVariant::symmetric).scaling;
                break;
            case ScalerKind::equilibrate:
                out.scaling = combined_equilibrate(a);
                break;
            case ScalerKind::matching: {
                const auto m = max_product_matching(a);
                out.scaling = symmetrize_matching_scaling(m);
                out.few_alternatives = m.few_alternatives;
                break;
            }
            case ScalerKind::matching_order: {
                auto mo = matching_based_order(a);
                out.scaling = std::move(mo.scaling);
                out.order = std::move(mo.order);
                out.few_alternatives = mo.matching.few_alternatives;
                break;
            }
        }
    } catch (const StructurallySingular&) {
        out = ComputedScaling{};
        out.scaling = ScalingVector::identity(a.size());
        out.structurally_singular = true;
    }
    return out;
}

struct SolverOptions {
    Policy policy;
    double u_init = 1e-8;
    int refine_steps = 5;
    double refine_tol = 1e-10;
    double zero_pivot_rel = 1e-13;
};

struct SolverStats {
    int factorizations = 0;
    int solves = 0;
    double total_flops = 0.0;
    Index max_delayed = 0;
    long long total_delayed = 0;
    int scalings_computed = 0;
    int analyses = 0;
    double scaling_seconds = 0.0;
    double analyse_seconds = 0.0;
    double factor_seconds = 0.0;
    double solve_seconds = 0.0;
};

class ScaledLinearSolver {
public:
    explicit ScaledLinearSolver(SolverOptions opts) : opts_(std::move(opts)), state_(opts_.u_init) {}

    /// Factorizes K for the given outer iteration, consulting the controller
    /// with the outcome of the previous factorization.
    const Factors& factorize(const SymSparseMatrix& k, int iter = 0) {
        using clock = std::chrono::steady_clock;
        const Decision d = decide_next(state_, opts_.policy, pending_);
        last_decision_ = d;

        const ScalingVector* scaling = nullptr;
        if (d.scaling == ScalingAction::recompute) {
            const auto t0 = clock::now();
            auto cs = compute_scaling(k, opts_.policy.scaler);
            stats_.scaling_seconds += seconds_since(t0);
            ++stats_.scalings_computed;
            state_.cached_scaling = std::move(cs.scaling);
            cached_order_ = std::move(cs.order);
            scaling = &*state_.cached_scaling;
        } else if (d.scaling == ScalingAction::reuse) {
            if (!state_.cached_scaling || state_.cached_scaling->size() != k.size())
                throw std::logic_error("cached scaling does not fit the matrix");
            scaling = &*state_.cached_scaling;
        }

        const bool matching_ordered = scaling && cached_order_.has_value();
        ensure_analysis(k, matching_ordered);

        FactorOptions fo;
        fo.u = d.u;
        fo.zero_pivot_rel = opts_.zero_pivot_rel;
        const auto t0 = clock::now();
        factors_ = scaling ? kktscale::factorize(k, *analysis_, fo, *scaling)
                           : kktscale::factorize(k, *analysis_, fo);
        stats_.factor_seconds += seconds_since(t0);
        scaling_in_use_ = scaling ? std::optional<ScalingVector>(*scaling) : std::nullopt;

        ++stats_.factorizations;
        stats_.total_flops += factors_.flops;
        stats_.max_delayed = std::max(stats_.max_delayed, factors_.num_delayed);
        stats_.total_delayed += factors_.num_delayed;
        pending_ = FactorEvent{factors_.num_delayed, k.size(), true, 0.0};
        log_.add({iter, d.scaling, d.u, factors_.num_delayed, true});
        return factors_;
    }

    /// Solves K x = rhs with iterative refinement against the current factors.
    /// A refinement failure is reported to the controller with the next
    /// factorization.
    RefineResult solve(const SymSparseMatrix& k, std::span<const double> rhs) {
        if (!pending_) throw std::logic_error("solve called before factorize");
        const auto t0 = std::chrono::steady_clock::now();
        RefineResult r = scaling_in_use_
                             ? refine(k, factors_, rhs, opts_.refine_steps, opts_.refine_tol, *scaling_in_use_)
                             : refine(k, factors_, rhs, opts_.refine_steps, opts_.refine_tol);
        stats_.solve_seconds += seconds_since(t0);
        ++stats_.solves;
        pending_->ir_converged = pending_->ir_converged && r.converged;
        pending_->ir_error = std::max(pending_->ir_error, r.backward_error);
        log_.back().ir_converged = pending_->ir_converged;
        return r;
    }

    const Factors& factors() const { return factors_; }
    const Decision& last_decision() const { return last_decision_; }
    const HeuristicState& state() const { return state_; }
    const DecisionLog& log() const { return log_; }
    const SolverStats& stats() const { return stats_; }
    const SolverOptions& options() const { return opts_; }
    const std::optional<FactorEvent>& pending_event() const { return pending_; }

private:
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    void ensure_analysis(const SymSparseMatrix& k, bool matching_ordered) {
        const bool same_pattern = analysis_ && pattern_n_ == k.size() &&
                                  std::equal(pattern_colptr_.begin(), pattern_colptr_.end(),
                                             k.colptr().begin(), k.colptr().end()) &&
                                  std::equal(pattern_rowind_.begin(), pattern_rowind_.end(),
                                             k.rowind().begin(), k.rowind().end());
        const bool order_source_changed = matching_ordered != analysed_with_matching_;
        const bool new_matching_order = matching_ordered && last_decision_.reanalyse;
        if (same_pattern && !order_source_changed && !new_matching_order) return;

        const auto t0 = std::chrono::steady_clock::now();
        Permutation order = matching_ordered ? *cached_order_ : min_degree_order(k);
        analysis_ = analyse(k, order);
        stats_.analyse_seconds += seconds_since(t0);
        ++stats_.analyses;
        pattern_n_ = k.size();
        pattern_colptr_.assign(k.colptr().begin(), k.colptr().end());
        pattern_rowind_.assign(k.rowind().begin(), k.rowind().end());
        analysed_with_matching_ = matching_ordered;
    }

    SolverOptions opts_;
    HeuristicState state_;
    std::optional<FactorEvent> pending_;
    Decision last_decision_;
    std::optional<Permutation> cached_order_;
    std::optional<ScalingVector> scaling_in_use_;
    std::optional<SymbolicFactor> analysis_;
    bool analysed_with_matching_ = false;
    Index pattern_n_ = -1;
    std::vector<Index> pattern_colptr_;
    std::vector<Index> pattern_rowind_;
    Factors factors_;
    DecisionLog log_;
    SolverStats stats_;
};

}  // namespace kktscale
