#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "kktscale/bench.hpp"
#include "kktscale/problems.hpp"

using namespace kktscale;

namespace {

ResultRow row(std::string p, std::string c, bool ok, double time) {
    ResultRow r;
    r.problem = std::move(p);
    r.config = std::move(c);
    r.solved = ok;
    r.reason = ok ? "" : "max_iterations";
    r.runtime = time;
    r.iterations = 3;
    r.factorizations = 4;
    r.total_flops = 100.0 * time;
    return r;
}

RunConfig config(std::optional<ScalerKind> s, PolicyKind k) {
    RunConfig c;
    c.scaler = s;
    c.policy = k;
    return c;
}

BenchProblem nlp(NlpProblem p) {
    auto name = p.name;
    return {name, std::move(p)};
}

}  // namespace

TEST(Profile, TwoConfigTwoProblemExample) {
    const ResultsTable t{row("p1", "X", true, 2), row("p1", "Y", true, 4), row("p2", "X", true, 8),
                         row("p2", "Y", true, 4)};
    const auto pc = performance_profile(t, ProfileMetric::time);
    EXPECT_EQ(pc.curve("X").ratios, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(pc.curve("Y").ratios, (std::vector<double>{2.0, 1.0}));
    EXPECT_EQ(pc.curve("X").rho(1.0), 0.5);
    EXPECT_EQ(pc.curve("X").rho(2.0), 1.0);
    EXPECT_EQ(pc.curve("Y").rho(1.0), 0.5);
    EXPECT_EQ(pc.curve("Y").rho(2.0), 1.0);
    EXPECT_EQ(pc.curve("X").series, (std::vector<std::pair<double, double>>{{1.0, 0.5}, {2.0, 1.0}}));
    EXPECT_TRUE(pc.warnings.empty());
}

TEST(Profile, DuplicatedConfigIsSolvedFractionAtOne) {
    const ResultsTable t{row("p1", "A", true, 1), row("p1", "A-copy", true, 1), row("p2", "A", false, 5),
                         row("p2", "A-copy", false, 5), row("p3", "A", true, 7), row("p3", "A-copy", true, 7)};
    const auto pc = performance_profile(t, ProfileMetric::time);
    for (const auto& c : pc.curves) {
        EXPECT_DOUBLE_EQ(c.rho(1.0), 2.0 / 3.0);
        EXPECT_DOUBLE_EQ(c.rho(1e300), 2.0 / 3.0);
    }
}

TEST(Profile, FailureCapsAsymptoteAtReliability) {
    const ResultsTable t{row("p1", "X", true, 1), row("p1", "Y", true, 2), row("p2", "X", false, 1),
                         row("p2", "Y", true, 3)};
    const auto pc = performance_profile(t, ProfileMetric::time);
    EXPECT_EQ(pc.curve("X").ratios[1], infinity);
    EXPECT_DOUBLE_EQ(pc.curve("X").asymptote, 0.5);
    EXPECT_DOUBLE_EQ(pc.curve("Y").asymptote, 1.0);
    const auto rel = reliability(t);
    ASSERT_EQ(rel.size(), 2u);
    EXPECT_EQ(rel[0].config, "X");
    EXPECT_DOUBLE_EQ(rel[0].percent, 50.0);
    EXPECT_DOUBLE_EQ(rel[1].percent, 100.0);
    for (const auto& e : rel) EXPECT_DOUBLE_EQ(pc.curve(e.config).asymptote * 100.0, e.percent);
}

TEST(Profile, MissingRowsAndBadInput) {
    ResultsTable t{row("p1", "X", true, 1), row("p1", "Y", true, 2), row("p2", "X", true, 1)};
    const auto pc = performance_profile(t, ProfileMetric::flops);
    EXPECT_EQ(pc.problems, (std::vector<std::string>{"p1"}));
    ASSERT_EQ(pc.warnings.size(), 1u);
    EXPECT_NE(pc.warnings[0].find("p2"), std::string::npos);

    EXPECT_THROW(performance_profile({row("p1", "X", true, 1)}, ProfileMetric::time), std::invalid_argument);
    t.push_back(row("p1", "X", true, 3));
    EXPECT_THROW(performance_profile(t, ProfileMetric::time), std::invalid_argument);
    EXPECT_THROW(parse_metric("memory"), std::invalid_argument);
}

TEST(Profile, DelayedMetricIsShiftedAverage) {
    auto a = row("p", "X", true, 1), b = row("p", "Y", true, 1);
    a.total_delayed = 0;
    b.total_delayed = 8;  // 2 per factorization
    const auto pc = performance_profile({a, b}, ProfileMetric::delayed);
    EXPECT_DOUBLE_EQ(pc.curve("X").ratios[0], 1.0);
    EXPECT_DOUBLE_EQ(pc.curve("Y").ratios[0], 3.0);
}

TEST(Reliability, RoundsToOneDecimal) {
    const ResultsTable t{row("a", "X", true, 1), row("b", "X", false, 1), row("c", "X", false, 1)};
    EXPECT_DOUBLE_EQ(reliability(t)[0].percent, 33.3);
    EXPECT_EQ(format_percent(reliability(t)[0].percent), "33.3");
    EXPECT_THROW(reliability({}), std::invalid_argument);
}

TEST(RunOne, TrivialQpUnderEveryConfig) {
    const auto probs = std::vector<BenchProblem>{nlp(make_qp_problem(random_spd_qp(6, 2, 3)))};
    for (const auto& c : make_configs({"none", "curtis-reid", "curtis-reid-sym", "matching", "equilibrate",
                                       "matching-order"},
                                      PolicyKind::always, RunConfig{})) {
        const auto r = run_one(probs[0], c);
        EXPECT_TRUE(r.solved) << r.config << " " << r.reason;
        EXPECT_GE(r.factorizations, r.iterations);
        EXPECT_GE(r.scaling_time_fraction, 0.0);
        EXPECT_LE(r.scaling_time_fraction, 1.0);
        if (!c.scaler) {
            EXPECT_EQ(r.scaling_time_fraction, 0.0);
        }
    }
}

TEST(RunOne, SlowProblemHitsTimeLimit) {
    auto p = make_qp_problem(random_spd_qp(4, 1, 5));
    auto inner = p.objective;
    p.objective = [inner](std::span<const double> x) {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        return inner(x);
    };
    auto c = config(std::nullopt, PolicyKind::none);
    c.time_limit_s = 0.01;
    const auto r = run_one(nlp(p), c);
    EXPECT_FALSE(r.solved);
    EXPECT_EQ(r.reason, "time_limit");
}

TEST(RunOne, LinearModeFactorsOnce) {
    std::vector<Entry> e;
    for (Index i = 0; i < 6; ++i) {
        e.push_back({i, i, i % 2 == 0 ? 1e-8 : 1e6});
        if (i > 0) e.push_back({i, i - 1, 1.0});
    }
    const BenchProblem prob{"tri6", SymSparseMatrix(6, e)};
    auto c = config(ScalerKind::matching, PolicyKind::odhdr);
    c.mode = RunMode::linear;
    RunArtifacts art;
    const auto r = run_one(prob, c, &art);
    EXPECT_TRUE(r.solved) << r.reason;
    EXPECT_EQ(r.factorizations, 1);
    ASSERT_EQ(art.log.size(), 1u);
    EXPECT_EQ(art.log.rows()[0].decision, ScalingAction::recompute);
    EXPECT_LE(r.residual, 1e-10);
}

TEST(RunSuite, DeterministicAcrossJobCounts) {
    std::vector<BenchProblem> probs;
    for (auto& p : toy_problem_set(11)) probs.push_back(nlp(std::move(p)));
    probs.resize(6);
    const auto configs = make_configs({"none", "matching", "equilibrate"}, PolicyKind::odhdr, RunConfig{});
    const auto a = run_suite(probs, configs, 1), b = run_suite(probs, configs, 3);
    ASSERT_EQ(a.size(), probs.size() * configs.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].problem, probs[k / configs.size()].name);
        EXPECT_EQ(a[k].config, configs[k % configs.size()].label());
        EXPECT_EQ(a[k].problem, b[k].problem);
        EXPECT_EQ(a[k].config, b[k].config);
        EXPECT_EQ(a[k].solved, b[k].solved);
        EXPECT_EQ(a[k].iterations, b[k].iterations);
        EXPECT_EQ(a[k].factorizations, b[k].factorizations);
        EXPECT_EQ(a[k].total_flops, b[k].total_flops);
        EXPECT_EQ(a[k].max_delayed, b[k].max_delayed);
        EXPECT_EQ(a[k].residual, b[k].residual);
    }
}

TEST(MakeConfigs, LabelsAndDeduplication) {
    const auto c = make_configs({"none", "matching", "none", "curtis-reid"}, PolicyKind::odhdr, RunConfig{});
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].label(), "None");
    EXPECT_EQ(c[1].label(), "matching-ODHDR");
    EXPECT_EQ(c[2].label(), "curtis-reid-ODHDR");
    EXPECT_THROW(make_configs({"mc99"}, PolicyKind::od, RunConfig{}), std::invalid_argument);
    RunConfig bad;
    bad.u_init = 0.9;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(ResultsCsv, RoundTrip) {
    ResultsTable t{row("p 1", "X", true, 0.125), row("p2", "Y", false, 3.5)};
    t[0].max_delayed = 4;
    t[0].total_delayed = 9;
    t[0].scaling_time_fraction = 0.25;
    t[0].residual = 1.5e-9;
    std::stringstream buf;
    write_results_csv(buf, t);
    EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')), results_header);
    const auto back = read_results_csv(buf);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].problem, "p 1");
    EXPECT_EQ(back[0].runtime, 0.125);
    EXPECT_EQ(back[0].max_delayed, 4);
    EXPECT_EQ(back[0].total_delayed, 9);
    EXPECT_EQ(back[0].residual, 1.5e-9);
    EXPECT_FALSE(back[1].solved);
    EXPECT_EQ(back[1].reason, "max_iterations");
    std::stringstream again;
    write_results_csv(again, back);
    std::stringstream first;
    write_results_csv(first, t);
    EXPECT_EQ(again.str(), first.str());
}

TEST(ResultsCsv, RejectsMalformed) {
    std::stringstream bad_header("a,b\n");
    EXPECT_THROW(read_results_csv(bad_header), std::runtime_error);
    std::stringstream short_row(std::string(results_header) + "\np,X,solved\n");
    EXPECT_THROW(read_results_csv(short_row), std::runtime_error);
}

TEST(Json, MirrorsTableAndProfile) {
    const ResultsTable t{row("p1", "X", true, 2), row("p1", "Y", true, 4)};
    const auto j = to_json(t);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["problem"], "p1");
    EXPECT_EQ(j[1]["config"], "Y");
    const auto pj = to_json(performance_profile(t, ProfileMetric::time));
    EXPECT_EQ(pj["metric"], "time");
    EXPECT_EQ(pj["curves"].size(), 2u);
}

TEST(LoadProblems, ToyAndDataDirectory) {
    EXPECT_EQ(load_problems("toy", RunMode::nlp).size(), toy_problem_set().size());
    const auto lin = load_problems(KKTSCALE_DATA_DIR, RunMode::linear);
    EXPECT_GE(lin.size(), 2u);
    for (const auto& p : lin) EXPECT_TRUE(std::holds_alternative<SymSparseMatrix>(p.payload));
    const auto qp = load_problems(KKTSCALE_DATA_DIR, RunMode::nlp);
    EXPECT_GE(qp.size(), 1u);
    EXPECT_ANY_THROW(load_problems("/nonexistent/dir/x.mtx", RunMode::linear));
    EXPECT_THROW(load_problems("toy", RunMode::linear), std::invalid_argument);
}
