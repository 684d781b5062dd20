#include <gtest/gtest.h>

#include <random>

#include "controller_traces.hpp"
#include "kktscale/controller.hpp"

using namespace kktscale;

namespace {

Policy policy_of(PolicyKind k) {
    Policy p;
    p.kind = k;
    return p;
}

std::vector<FactorEvent> random_trace(std::mt19937& rng, Index n, int len) {
    std::uniform_int_distribution<Index> delays(0, n / 5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<FactorEvent> ev;
    for (int k = 0; k < len; ++k) ev.push_back({delays(rng), n, u01(rng) > 0.15, 0.0});
    return ev;
}

std::vector<ScalingAction> actions(const DecisionLog& log) {
    std::vector<ScalingAction> a;
    for (const auto& r : log.rows()) a.push_back(r.decision);
    return a;
}

}  // namespace

TEST(Controller, NoneNeverScales) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::none);
    EXPECT_EQ(decide_next(st, p, std::nullopt).scaling, ScalingAction::none);
    for (Index d : {0, 50, 100}) {
        const auto dec = decide_next(st, p, FactorEvent{d, 100, false, 1.0});
        EXPECT_EQ(dec.scaling, ScalingAction::none);
        EXPECT_EQ(dec.u, 1e-8);
    }
}

TEST(Controller, HighDelayTrigger) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::hd);
    EXPECT_EQ(decide_next(st, p, std::nullopt).scaling, ScalingAction::none);
    const auto d = decide_next(st, p, FactorEvent{6, 100, true, 0.0});
    EXPECT_EQ(d.scaling, ScalingAction::recompute);
    EXPECT_TRUE(d.delay_trigger);
    for (int k = 0; k < 5; ++k)
        EXPECT_EQ(decide_next(st, p, FactorEvent{0, 100, true, 0.0}).scaling, ScalingAction::recompute);
}

TEST(Controller, OdrReusesUntilNextFailure) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::odr);
    decide_next(st, p, std::nullopt);
    EXPECT_EQ(decide_next(st, p, FactorEvent{0, 10, false, 1.0}).scaling, ScalingAction::recompute);
    EXPECT_EQ(decide_next(st, p, FactorEvent{0, 10, true, 0.0}).scaling, ScalingAction::reuse);
    EXPECT_EQ(decide_next(st, p, FactorEvent{0, 10, true, 0.0}).scaling, ScalingAction::reuse);
    EXPECT_EQ(decide_next(st, p, FactorEvent{0, 10, false, 1.0}).scaling, ScalingAction::recompute);
}

TEST(Controller, HdrBaselineDelta) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::hdr);
    decide_next(st, p, std::nullopt);
    EXPECT_EQ(decide_next(st, p, FactorEvent{6, 100, true, 0.0}).scaling, ScalingAction::recompute);
    EXPECT_EQ(decide_next(st, p, FactorEvent{6, 100, true, 0.0}).scaling, ScalingAction::reuse);
    EXPECT_EQ(st.delay_baseline, 6);
    EXPECT_EQ(decide_next(st, p, FactorEvent{12, 100, true, 0.0}).scaling, ScalingAction::recompute);
    EXPECT_EQ(decide_next(st, p, FactorEvent{7, 100, true, 0.0}).scaling, ScalingAction::reuse);
    EXPECT_EQ(st.delay_baseline, 7);
    EXPECT_EQ(decide_next(st, p, FactorEvent{8, 100, true, 0.0}).scaling, ScalingAction::reuse);
}

TEST(Controller, OdBeforeFailureLeavesThresholdAlone) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::od);
    EXPECT_EQ(decide_next(st, p, std::nullopt).scaling, ScalingAction::none);
    const auto d = decide_next(st, p, FactorEvent{50, 100, true, 0.0});
    EXPECT_EQ(d.scaling, ScalingAction::none);
    EXPECT_EQ(d.u, 1e-8);
}

TEST(Controller, AlwaysRecomputes) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::always);
    EXPECT_EQ(decide_next(st, p, std::nullopt).scaling, ScalingAction::recompute);
    for (int k = 0; k < 4; ++k)
        EXPECT_EQ(decide_next(st, p, FactorEvent{0, 10, k % 2 == 0, 0.0}).scaling, ScalingAction::recompute);
    EXPECT_EQ(st.u_current, 1e-8);
}

TEST(Controller, ForceFirstScalesFirstFactorization) {
    for (auto k : {PolicyKind::od, PolicyKind::odr, PolicyKind::hd, PolicyKind::hdr, PolicyKind::odhdr}) {
        HeuristicState st;
        auto p = policy_of(k);
        p.force_first = true;
        EXPECT_EQ(decide_next(st, p, std::nullopt).scaling, ScalingAction::recompute) << to_string(k);
        const auto next = decide_next(st, p, FactorEvent{0, 10, true, 0.0}).scaling;
        EXPECT_EQ(next, p.reuses() ? ScalingAction::reuse : ScalingAction::none) << to_string(k);
    }
}

TEST(Controller, RejectsInconsistentEvents) {
    HeuristicState st;
    const auto p = policy_of(PolicyKind::hd);
    decide_next(st, p, std::nullopt);
    EXPECT_THROW(decide_next(st, p, FactorEvent{11, 10, true, 0.0}), std::invalid_argument);
    auto bad = p;
    bad.delay_fraction = 0.0;
    EXPECT_THROW(decide_next(st, bad, FactorEvent{0, 10, true, 0.0}), std::invalid_argument);
}

TEST(BumpThreshold, Sequence) {
    HeuristicState st(1e-8);
    EXPECT_DOUBLE_EQ(bump_threshold(st), 1e-4);
    EXPECT_DOUBLE_EQ(bump_threshold(st), 0.5);
    EXPECT_DOUBLE_EQ(bump_threshold(st), 0.5);
    HeuristicState big(0.5);
    EXPECT_DOUBLE_EQ(bump_threshold(big), 0.5);
    HeuristicState mid(1e-3);
    EXPECT_DOUBLE_EQ(bump_threshold(mid), 0.5);
}

TEST(Policy, ParseAndLabel) {
    for (auto k : all_policies) EXPECT_EQ(parse_policy(to_string(k)), k);
    EXPECT_THROW(parse_policy("sometimes"), std::invalid_argument);
    EXPECT_THROW(parse_scaler("mc99"), std::invalid_argument);
    Policy p;
    p.kind = PolicyKind::odhdr;
    p.scaler = ScalerKind::matching;
    EXPECT_EQ(p.label(), "matching-ODHDR");
    p.kind = PolicyKind::none;
    EXPECT_EQ(p.label(), "None");
}

class ScriptedTraces : public ::testing::TestWithParam<PolicyKind> {};

TEST_P(ScriptedTraces, MatchHandDerivedSequences) {
    for (const auto& t : traces::scripted()) {
        const auto msg = traces::check(t, GetParam());
        EXPECT_TRUE(msg.empty()) << msg;
    }
}

INSTANTIATE_TEST_SUITE_P(AllPolicies, ScriptedTraces, ::testing::ValuesIn(all_policies),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ControllerProperties, LogsAreByteIdenticalAcrossReruns) {
    std::mt19937 rng(109);
    for (int t = 0; t < 20; ++t) {
        const auto ev = random_trace(rng, 50, 30);
        for (auto k : all_policies) {
            const auto a = replay_trace(policy_of(k), ev).to_csv();
            const auto b = replay_trace(policy_of(k), ev).to_csv();
            EXPECT_EQ(a, b);
        }
    }
}

TEST(ControllerProperties, OdScalesWheneverOdrRecomputes) {
    std::mt19937 rng(113);
    for (int t = 0; t < 50; ++t) {
        const auto ev = random_trace(rng, 40, 25);
        const auto od = actions(replay_trace(policy_of(PolicyKind::od), ev));
        const auto odr = actions(replay_trace(policy_of(PolicyKind::odr), ev));
        for (std::size_t k = 0; k < od.size(); ++k)
            if (odr[k] == ScalingAction::recompute) {
                EXPECT_EQ(od[k], ScalingAction::recompute);
            }
    }
}

TEST(ControllerProperties, OdhdIsUnionOfOdAndHd) {
    std::mt19937 rng(127);
    for (int t = 0; t < 50; ++t) {
        const auto ev = random_trace(rng, 40, 25);
        const auto od = actions(replay_trace(policy_of(PolicyKind::od), ev));
        const auto hd = actions(replay_trace(policy_of(PolicyKind::hd), ev));
        const auto both = actions(replay_trace(policy_of(PolicyKind::odhd), ev));
        for (std::size_t k = 0; k < od.size(); ++k) {
            const bool expect = od[k] == ScalingAction::recompute || hd[k] == ScalingAction::recompute;
            EXPECT_EQ(both[k] == ScalingAction::recompute, expect);
        }
    }
}

TEST(ControllerProperties, ReusePoliciesRecomputeOnlyOnTriggers) {
    std::mt19937 rng(131);
    for (int t = 0; t < 50; ++t) {
        const auto ev = random_trace(rng, 40, 25);
        for (auto k : {PolicyKind::odr, PolicyKind::hdr, PolicyKind::odhdr}) {
            HeuristicState st;
            const auto p = policy_of(k);
            std::optional<FactorEvent> prev;
            for (const auto& e : ev) {
                const auto d = decide_next(st, p, prev);
                if (d.scaling == ScalingAction::recompute) {
                    EXPECT_TRUE(d.ir_trigger || d.delay_trigger);
                }
                if (d.scaling == ScalingAction::reuse) {
                    EXPECT_TRUE(st.has_cached_scaling);
                }
                prev = e;
            }
        }
    }
}

TEST(ControllerProperties, OnlyOnDemandPoliciesRaiseThreshold) {
    std::vector<FactorEvent> ev(6, FactorEvent{0, 10, false, 1.0});
    for (auto k : all_policies) {
        const auto log = replay_trace(policy_of(k), ev);
        const double last = log.rows().back().u;
        EXPECT_EQ(last, policy_of(k).on_demand() ? 0.5 : 1e-8) << to_string(k);
    }
}

TEST(DecisionLog, CsvFormat) {
    const std::vector<FactorEvent> ev{{0, 10, false, 1.0}, {3, 10, true, 0.0}};
    const auto csv = replay_trace(policy_of(PolicyKind::odr), ev).to_csv();
    EXPECT_EQ(csv, "iter,decision,u,num_delayed,ir_converged\n"
                   "0,none,1.000000e-08,0,0\n"
                   "1,recompute,1.000000e-04,3,1\n");
}
