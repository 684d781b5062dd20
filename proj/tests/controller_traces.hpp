#pragma once

// Scripted factorization outcomes and the decision sequences worked out by
// hand for every policy. Decision k is taken before factorization k and sees
// events 0..k-1. Codes: N = none, U = reuse, R = recompute.

#include <map>
#include <string>
#include <vector>

#include "kktscale/controller.hpp"

namespace traces {

struct Step {
    kktscale::Index delayed;
    bool ir_ok;
};

struct Expected {
    std::string decisions;
    std::vector<double> u;  ///< empty means 1e-8 throughout
};

struct Trace {
    std::string name;
    kktscale::Index n;
    std::vector<Step> steps;
    std::map<std::string, Expected> by_policy;  ///< key: policy name as in to_string(PolicyKind)
};

inline const double lo = 1e-8, mid = 1e-4, hi = 0.5;

inline std::vector<Trace> scripted() {
    std::vector<Trace> t;
    // Nothing ever goes wrong.
    t.push_back({"quiet", 100, {{0, true}, {0, true}, {0, true}, {0, true}, {0, true}, {0, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNNN", {}}},
                  {"odr", {"NNNNNNN", {}}},
                  {"hd", {"NNNNNNN", {}}},
                  {"hdr", {"NNNNNNN", {}}},
                  {"odhd", {"NNNNNNN", {}}},
                  {"odhdr", {"NNNNNNN", {}}}}});
    // One refinement failure after the second factorization.
    t.push_back({"single-ir-failure", 100,
                 {{0, true}, {0, false}, {0, true}, {0, true}, {0, true}, {0, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNRRRRR", {lo, lo, mid, mid, mid, mid, mid}}},
                  {"odr", {"NNRUUUU", {lo, lo, mid, mid, mid, mid, mid}}},
                  {"hd", {"NNNNNNN", {}}},
                  {"hdr", {"NNNNNNN", {}}},
                  {"odhd", {"NNRRRRR", {lo, lo, mid, mid, mid, mid, mid}}},
                  {"odhdr", {"NNRUUUU", {lo, lo, mid, mid, mid, mid, mid}}}}});
    // Six delays (> 0.05 * 100) that persist.
    t.push_back({"delay-spike", 100, {{0, true}, {6, true}, {6, true}, {6, true}, {6, true}, {6, true}, {6, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNNN", {}}},
                  {"odr", {"NNNNNNN", {}}},
                  {"hd", {"NNRRRRR", {}}},
                  {"hdr", {"NNRUUUU", {}}},
                  {"odhd", {"NNRRRRR", {}}},
                  {"odhdr", {"NNRUUUU", {}}}}});
    // Exactly 0.05n delays never trigger.
    t.push_back({"at-threshold", 100, {{5, true}, {5, true}, {5, true}, {5, true}, {5, true}, {5, true}, {5, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNNN", {}}},
                  {"odr", {"NNNNNNN", {}}},
                  {"hd", {"NNNNNNN", {}}},
                  {"hdr", {"NNNNNNN", {}}},
                  {"odhd", {"NNNNNNN", {}}},
                  {"odhdr", {"NNNNNNN", {}}}}});
    // Baseline 6, then 12 (delta 6) recomputes, new baseline 7, then 8 reuses.
    t.push_back({"baseline-delta", 100,
                 {{0, true}, {6, true}, {6, true}, {12, true}, {7, true}, {8, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNNN", {}}},
                  {"odr", {"NNNNNNN", {}}},
                  {"hd", {"NNRRRRR", {}}},
                  {"hdr", {"NNRURUU", {}}},
                  {"odhd", {"NNRRRRR", {}}},
                  {"odhdr", {"NNRURUU", {}}}}});
    // Three refinement failures; u climbs to its cap and stays there.
    t.push_back({"repeated-ir-failures", 100,
                 {{0, false}, {0, true}, {0, false}, {0, true}, {0, true}, {0, false}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NRRRRRR", {lo, mid, mid, hi, hi, hi, hi}}},
                  {"odr", {"NRURUUR", {lo, mid, mid, hi, hi, hi, hi}}},
                  {"hd", {"NNNNNNN", {}}},
                  {"hdr", {"NNNNNNN", {}}},
                  {"odhd", {"NRRRRRR", {lo, mid, mid, hi, hi, hi, hi}}},
                  {"odhdr", {"NRURUUR", {lo, mid, mid, hi, hi, hi, hi}}}}});
    // Both triggers at once, a later failure and a later delay burst.
    t.push_back({"mixed", 100, {{6, false}, {0, true}, {0, true}, {0, false}, {20, true}, {0, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NRRRRRR", {lo, mid, mid, mid, hi, hi, hi}}},
                  {"odr", {"NRUURUU", {lo, mid, mid, mid, hi, hi, hi}}},
                  {"hd", {"NRRRRRR", {}}},
                  {"hdr", {"NRUUURU", {}}},
                  {"odhd", {"NRRRRRR", {lo, mid, mid, mid, hi, hi, hi}}},
                  {"odhdr", {"NRUURUU", {lo, mid, mid, mid, hi, hi, hi}}}}});
    // A delay trigger followed much later by a refinement failure.
    t.push_back({"delay-then-ir", 100, {{0, true}, {10, true}, {0, true}, {0, true}, {0, false}, {0, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNRR", {lo, lo, lo, lo, lo, mid, mid}}},
                  {"odr", {"NNNNNRU", {lo, lo, lo, lo, lo, mid, mid}}},
                  {"hd", {"NNRRRRR", {}}},
                  {"hdr", {"NNRUUUU", {}}},
                  {"odhd", {"NNRRRRR", {lo, lo, lo, lo, lo, mid, mid}}},
                  {"odhdr", {"NNRUURU", {lo, lo, lo, lo, lo, mid, mid}}}}});
    // Small n: the limit is 1 delay.
    t.push_back({"small-n", 20, {{1, true}, {2, true}, {2, true}, {4, true}, {0, true}, {0, true}, {0, true}},
                 {{"none", {"NNNNNNN", {}}},
                  {"always", {"RRRRRRR", {}}},
                  {"od", {"NNNNNNN", {}}},
                  {"odr", {"NNNNNNN", {}}},
                  {"hd", {"NNRRRRR", {}}},
                  {"hdr", {"NNRURUU", {}}},
                  {"odhd", {"NNRRRRR", {}}},
                  {"odhdr", {"NNRURUU", {}}}}});
    return t;
}

inline std::vector<kktscale::FactorEvent> events(const Trace& t) {
    std::vector<kktscale::FactorEvent> ev;
    for (const auto& s : t.steps) ev.push_back({s.delayed, t.n, s.ir_ok, s.ir_ok ? 0.0 : 1.0});
    return ev;
}

inline char code(kktscale::ScalingAction a) {
    switch (a) {
        case kktscale::ScalingAction::none: return 'N';
        case kktscale::ScalingAction::reuse: return 'U';
        case kktscale::ScalingAction::recompute: return 'R';
    }
    return '?';
}

/// Empty string when the replay matches, otherwise a description of the
/// first mismatch.
inline std::string check(const Trace& t, kktscale::PolicyKind kind) {
    kktscale::Policy policy;
    policy.kind = kind;
    const auto log = kktscale::replay_trace(policy, events(t));
    const auto& want = t.by_policy.at(std::string(kktscale::to_string(kind)));
    std::string got;
    for (const auto& r : log.rows()) got += code(r.decision);
    if (got != want.decisions) return t.name + "/" + std::string(to_string(kind)) + ": got " + got + ", want " + want.decisions;
    for (std::size_t k = 0; k < log.size(); ++k) {
        const double u = want.u.empty() ? lo : want.u[k];
        if (log.rows()[k].u != u)
            return t.name + "/" + std::string(to_string(kind)) + ": u mismatch at " + std::to_string(k);
    }
    return {};
}

}  // namespace traces
