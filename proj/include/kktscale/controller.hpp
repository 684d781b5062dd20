#pragma once

// Dynamic scaling heuristics. Before every factorization the controller
// decides whether to compute a fresh scaling, reuse the cached one, or run
// unscaled, and raises the pivot threshold after refinement failures.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

enum class PolicyKind { none, always, od, odr, hd, hdr, odhd, odhdr };

enum class ScalerKind { curtis_reid, curtis_reid_sym, matching, equilibrate, matching_order };

inline constexpr PolicyKind all_policies[] = {PolicyKind::none, PolicyKind::always, PolicyKind::od,
                                              PolicyKind::odr,  PolicyKind::hd,     PolicyKind::hdr,
                                              PolicyKind::odhd, PolicyKind::odhdr};

inline std::string_view to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::none: return "none";
        case PolicyKind::always: return "always";
        case PolicyKind::od: return "od";
        case PolicyKind::odr: return "odr";
        case PolicyKind::hd: return "hd";
        case PolicyKind::hdr: return "hdr";
        case PolicyKind::odhd: return "odhd";
        case PolicyKind::odhdr: return "odhdr";
    }
    return "?";
}

inline std::string_view to_string(ScalerKind k) {
    switch (k) {
        case ScalerKind::curtis_reid: return "curtis-reid";
        case ScalerKind::curtis_reid_sym: return "curtis-reid-sym";
        case ScalerKind::matching: return "matching";
        case ScalerKind::equilibrate: return "equilibrate";
        case ScalerKind::matching_order: return "matching-order";
    }
    return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
    for (auto k : all_policies)
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown policy '" + std::string(s) + "'");
}

inline ScalerKind parse_scaler(std::string_view s) {
    for (auto k : {ScalerKind::curtis_reid, ScalerKind::curtis_reid_sym, ScalerKind::matching,
                   ScalerKind::equilibrate, ScalerKind::matching_order})
        if (to_string(k) == s) return k;
    if (s == "equilibrate-combined") return ScalerKind::equilibrate;
    throw std::invalid_argument("unknown scaler '" + std::string(s) + "'");
}

struct Policy {
    PolicyKind kind = PolicyKind::none;
    ScalerKind scaler = ScalerKind::matching;
    double delay_fraction = 0.05;
    bool force_first = false;  ///< scale the very first factorization as well

    bool reuses() const {
        return kind == PolicyKind::odr || kind == PolicyKind::hdr || kind == PolicyKind::odhdr;
    }
    bool on_demand() const {
        return kind == PolicyKind::od || kind == PolicyKind::odr || kind == PolicyKind::odhd ||
               kind == PolicyKind::odhdr;
    }
    bool high_delay() const {
        return kind == PolicyKind::hd || kind == PolicyKind::hdr || kind == PolicyKind::odhd ||
               kind == PolicyKind::odhdr;
    }

    /// "None", or e.g. "matching-ODHDR".
    std::string label() const {
        if (kind == PolicyKind::none) return "None";
        std::string k(to_string(kind));
        std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        return std::string(to_string(scaler)) + "-" + k;
    }
};

enum class ScalingAction { none, reuse, recompute };

inline std::string_view to_string(ScalingAction a) {
    switch (a) {
        case ScalingAction::none: return "none";
        case ScalingAction::reuse: return "reuse";
        case ScalingAction::recompute: return "recompute";
    }
    return "?";
}

/// Outcome of one factorization as seen by the controller.
struct FactorEvent {
    Index num_delayed = 0;
    Index n = 0;
    bool ir_converged = true;
    double ir_error = 0.0;
};

struct HeuristicState {
    bool started = false;
    bool scaling_active = false;  ///< a trigger (or forced start) has enabled scaling
    bool has_cached_scaling = false;
    std::optional<ScalingVector> cached_scaling;  ///< filled in by the driver after a recompute
    Index delay_baseline = 0;  ///< delays seen by the first factorization after a recompute
    bool awaiting_baseline = false;
    double u_current = 1e-8;
    bool pending_recompute = false;
    int bumps = 0;

    explicit HeuristicState(double u_init = 1e-8) : u_current(u_init) {}
};

struct Decision {
    ScalingAction scaling = ScalingAction::none;
    double u = 1e-8;
    bool reanalyse = false;          ///< ordering changes with the scaling (matching-order)
    bool ir_trigger = false;         ///< a refinement failure fired this decision
    bool delay_trigger = false;      ///< a delayed-pivot count fired this decision
};

inline constexpr double u_bump_factor = 1e4;
inline constexpr double u_bump_floor = 1e-4;
inline constexpr double u_max = 0.5;

/// u <- min(max(u * 1e4, 1e-4), 0.5).
inline double bump_threshold(HeuristicState& st) {
    st.u_current = std::min(std::max(st.u_current * u_bump_factor, u_bump_floor), u_max);
    ++st.bumps;
    return st.u_current;
}

/// Decision for the next factorization given the outcome of the previous
/// one (absent before the first factorization of a run).
inline Decision decide_next(HeuristicState& st, const Policy& policy, const std::optional<FactorEvent>& event) {
    if (!(policy.delay_fraction > 0.0)) throw std::invalid_argument("delay_fraction must be positive");
    Decision d;
    const PolicyKind kind = policy.kind;

    auto emit = [&](ScalingAction a) {
        d.scaling = a;
        if (a == ScalingAction::recompute) st.has_cached_scaling = true;
        if (a == ScalingAction::reuse && !st.has_cached_scaling)
            throw std::logic_error("reuse decided without a cached scaling");
        d.u = st.u_current;
        d.reanalyse = a == ScalingAction::recompute && policy.scaler == ScalerKind::matching_order;
        st.pending_recompute = false;
        return d;
    };

    if (!st.started || !event) {
        st.started = true;
        if (kind == PolicyKind::none) return emit(ScalingAction::none);
        if (kind == PolicyKind::always) return emit(ScalingAction::recompute);
        if (policy.force_first) {
            if (policy.reuses()) {
                st.scaling_active = true;
                st.awaiting_baseline = true;
            }
            return emit(ScalingAction::recompute);
        }
        return emit(ScalingAction::none);
    }

    const FactorEvent& ev = *event;
    if (ev.num_delayed < 0 || ev.num_delayed > ev.n)
        throw std::invalid_argument("factor event reports more delays than columns");
    const double limit = policy.delay_fraction * static_cast<double>(ev.n);
    const bool ir_fail = !ev.ir_converged;

    if (ir_fail && policy.on_demand()) bump_threshold(st);

    switch (kind) {
        case PolicyKind::none:
            return emit(ScalingAction::none);
        case PolicyKind::always:
            return emit(ScalingAction::recompute);
        case PolicyKind::od:
        case PolicyKind::hd:
        case PolicyKind::odhd: {
            d.ir_trigger = ir_fail && policy.on_demand();
            d.delay_trigger = policy.high_delay() && static_cast<double>(ev.num_delayed) > limit;
            if (d.ir_trigger || d.delay_trigger) st.scaling_active = true;
            return emit(st.scaling_active ? ScalingAction::recompute : ScalingAction::none);
        }
        case PolicyKind::odr:
        case PolicyKind::hdr:
        case PolicyKind::odhdr: {
            d.ir_trigger = ir_fail && policy.on_demand();
            if (policy.high_delay()) {
                if (st.awaiting_baseline) {
                    // The factorization that used the fresh scaling sets the baseline.
                    st.delay_baseline = ev.num_delayed;
                    st.awaiting_baseline = false;
                } else if (!st.scaling_active) {
                    d.delay_trigger = static_cast<double>(ev.num_delayed) > limit;
                } else {
                    const Index base = st.delay_baseline;
                    d.delay_trigger = static_cast<double>(ev.num_delayed - base) > limit;
                }
            }
            if (d.ir_trigger || d.delay_trigger) {
                st.scaling_active = true;
                st.pending_recompute = true;
                if (policy.high_delay()) st.awaiting_baseline = true;
                return emit(ScalingAction::recompute);
            }
            return emit(st.scaling_active ? ScalingAction::reuse : ScalingAction::none);
        }
    }
    return emit(ScalingAction::none);
}

/// One line of the decision log.
struct DecisionRecord {
    int iter = 0;
    ScalingAction decision = ScalingAction::none;
    double u = 0.0;
    Index num_delayed = 0;
    bool ir_converged = true;
};

class DecisionLog {
public:
    void add(const DecisionRecord& r) { rows_.push_back(r); }
    DecisionRecord& back() { return rows_.back(); }
    std::span<const DecisionRecord> rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    static constexpr const char* header = "iter,decision,u,num_delayed,ir_converged";

    void write_csv(std::ostream& out, bool with_header = true) const {
        if (with_header) out << header << '\n';
        char ubuf[32];
        for (const auto& r : rows_) {
            std::snprintf(ubuf, sizeof ubuf, "%.6e", r.u);
            out << r.iter << ',' << to_string(r.decision) << ',' << ubuf << ',' << r.num_delayed << ','
                << (r.ir_converged ? 1 : 0) << '\n';
        }
    }

    std::string to_csv() const {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

private:
    std::vector<DecisionRecord> rows_;
};

/// Replays a scripted sequence of factorization outcomes through the
/// controller. Row k holds the decision used for factorization k together
/// with that factorization's reported outcome.
inline DecisionLog replay_trace(const Policy& policy, std::span<const FactorEvent> events, double u_init = 1e-8) {
    HeuristicState st(u_init);
    DecisionLog log;
    std::optional<FactorEvent> prev;
    int k = 0;
    for (const auto& ev : events) {
        const Decision d = decide_next(st, policy, prev);
        log.add({k++, d.scaling, d.u, ev.num_delayed, ev.ir_converged});
        prev = ev;
    }
    return log;
}

}  // namespace kktscale
