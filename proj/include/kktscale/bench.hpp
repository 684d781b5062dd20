#pragma once

// Benchmark harness: runs (problem, config) pairs under a wall-clock limit,
// collects per-run statistics, and builds Dolan-More performance profiles
// and reliability percentages from the results table.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kktscale/controller.hpp"
#include "kktscale/ipm.hpp"
#include "kktscale/matrix_market.hpp"
#include "kktscale/problems.hpp"
#include "kktscale/solver.hpp"

namespace kktscale {

enum class RunMode { nlp, linear };

struct RunConfig {
    std::optional<ScalerKind> scaler;  ///< empty: no scaling at all
    PolicyKind policy = PolicyKind::none;
    double u_init = 1e-8;
    double time_limit_s = 1000.0;
    double delay_fraction = 0.05;
    unsigned seed = 7;
    RunMode mode = RunMode::nlp;

    Policy to_policy() const {
        Policy p;
        if (!scaler || policy == PolicyKind::none) return p;
        p.kind = policy;
        p.scaler = *scaler;
        p.delay_fraction = delay_fraction;
        // A single factorization only sees a scaling if it is applied up front.
        p.force_first = mode == RunMode::linear;
        return p;
    }

    std::string label() const { return to_policy().label(); }

    void validate() const {
        if (!(time_limit_s > 0.0)) throw std::invalid_argument("time limit must be positive");
        if (!(u_init > 0.0 && u_init <= 0.5)) throw std::invalid_argument("u must lie in (0, 0.5]");
        if (!(delay_fraction > 0.0)) throw std::invalid_argument("delay fraction must be positive");
    }
};

/// One problem for the harness: an NLP for the interior-point loop or a
/// matrix for a single factor + solve.
struct BenchProblem {
    std::string name;
    std::variant<NlpProblem, SymSparseMatrix> payload;
};

struct ResultRow {
    std::string problem;
    std::string config;
    bool solved = false;
    std::string reason;  ///< empty when solved
    double runtime = 0.0;
    int iterations = 0;
    int factorizations = 0;
    double total_flops = 0.0;
    Index max_delayed = 0;
    long long total_delayed = 0;
    double scaling_time_fraction = 0.0;
    double residual = 0.0;

    double avg_delayed() const {
        return factorizations > 0 ? static_cast<double>(total_delayed) / factorizations : 0.0;
    }
};

using ResultsTable = std::vector<ResultRow>;

struct RunArtifacts {
    DecisionLog log;
    std::vector<IterationRecord> history;
};

namespace detail {

inline double clamp01(double v) { return std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0); }

inline ResultRow run_nlp(const NlpProblem& p, const RunConfig& cfg, RunArtifacts* art) {
    using clock = std::chrono::steady_clock;
    ResultRow row;
    const auto t0 = clock::now();
    IpmOptions opts;
    opts.deadline = t0 + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(cfg.time_limit_s));
    const Policy policy = cfg.to_policy();
    IpmResult r;
    try {
        r = ipm_solve(p, policy, opts, cfg.u_init);
    } catch (const std::exception& e) {
        row.runtime = std::chrono::duration<double>(clock::now() - t0).count();
        row.reason = std::string("error: ") + e.what();
        return row;
    }
    row.runtime = std::chrono::duration<double>(clock::now() - t0).count();
    row.solved = r.solved();
    row.reason = r.solved() ? "" : std::string(to_string(r.status));
    row.iterations = r.iterations;
    row.factorizations = r.stats.factorizations;
    row.total_flops = r.stats.total_flops;
    row.max_delayed = r.stats.max_delayed;
    row.total_delayed = r.stats.total_delayed;
    row.residual = r.kkt_residual;
    row.scaling_time_fraction =
        policy.kind == PolicyKind::none ? 0.0 : clamp01(r.stats.scaling_seconds / row.runtime);
    if (art) {
        art->log = r.log;
        art->history = r.history;
    }
    return row;
}

inline ResultRow run_linear(const SymSparseMatrix& a, const RunConfig& cfg, RunArtifacts* art) {
    using clock = std::chrono::steady_clock;
    ResultRow row;
    const auto t0 = clock::now();
    const Policy policy = cfg.to_policy();
    try {
        SolverOptions so;
        so.policy = policy;
        so.u_init = cfg.u_init;
        ScaledLinearSolver s(so);
        DenseVector ones(static_cast<std::size_t>(a.size()), 1.0);
        const auto b = matvec(a, ones);
        s.factorize(a, 0);
        const auto r = s.solve(a, b);
        row.solved = r.converged && r.in_range;
        row.reason = row.solved ? "" : (r.in_range ? "inaccurate" : "singular");
        row.residual = r.backward_error;
        row.iterations = 1;
        row.factorizations = s.stats().factorizations;
        row.total_flops = s.stats().total_flops;
        row.max_delayed = s.stats().max_delayed;
        row.total_delayed = s.stats().total_delayed;
        row.runtime = std::chrono::duration<double>(clock::now() - t0).count();
        row.scaling_time_fraction =
            policy.kind == PolicyKind::none ? 0.0 : clamp01(s.stats().scaling_seconds / row.runtime);
        if (art) art->log = s.log();
    } catch (const std::exception& e) {
        row.runtime = std::chrono::duration<double>(clock::now() - t0).count();
        row.reason = std::string("error: ") + e.what();
    }
    return row;
}

}  // namespace detail

/// Runs one (problem, config) pair. Exceeding the time limit is a failure.
inline ResultRow run_one(const BenchProblem& prob, const RunConfig& cfg, RunArtifacts* art = nullptr) {
    cfg.validate();
    ResultRow row;
    if (const auto* nlp = std::get_if<NlpProblem>(&prob.payload)) {
        row = detail::run_nlp(*nlp, cfg, art);
    } else {
        row = detail::run_linear(std::get<SymSparseMatrix>(prob.payload), cfg, art);
    }
    row.problem = prob.name;
    row.config = cfg.label();
    if (row.runtime > cfg.time_limit_s) {
        row.solved = false;
        row.reason = "time_limit";
    }
    return row;
}

/// Runs every (problem, config) pair on a pool of `jobs` workers. Rows come
/// back ordered by problem, then config, whatever the schedule.
inline ResultsTable run_suite(const std::vector<BenchProblem>& problems, const std::vector<RunConfig>& configs,
                              unsigned jobs = 1, std::vector<RunArtifacts>* artifacts = nullptr) {
    if (problems.empty() || configs.empty()) throw std::invalid_argument("run_suite needs problems and configs");
    for (const auto& c : configs) c.validate();
    const std::size_t total = problems.size() * configs.size();
    ResultsTable rows(total);
    if (artifacts) artifacts->assign(total, {});
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < total; k = next++) {
            const auto& prob = problems[k / configs.size()];
            const auto& cfg = configs[k % configs.size()];
            rows[k] = run_one(prob, cfg, artifacts ? &(*artifacts)[k] : nullptr);
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(total)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

/// Configurations for a list of scaler names ("none" included) under one
/// policy kind.
inline std::vector<RunConfig> make_configs(const std::vector<std::string>& scalers, PolicyKind policy,
                                           const RunConfig& base) {
    std::vector<RunConfig> out;
    std::set<std::string> seen;
    for (const auto& s : scalers) {
        RunConfig c = base;
        if (s == "none") {
            c.scaler.reset();
            c.policy = PolicyKind::none;
        } else {
            c.scaler = parse_scaler(s);
            c.policy = policy;
        }
        if (seen.insert(c.label()).second) out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------- profiles

enum class ProfileMetric { time, flops, delayed };

inline ProfileMetric parse_metric(std::string_view s) {
    if (s == "time") return ProfileMetric::time;
    if (s == "flops") return ProfileMetric::flops;
    if (s == "delayed") return ProfileMetric::delayed;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

inline std::string_view to_string(ProfileMetric m) {
    switch (m) {
        case ProfileMetric::time: return "time";
        case ProfileMetric::flops: return "flops";
        case ProfileMetric::delayed: return "delayed";
    }
    return "?";
}

/// Metric value of a solved run. Delays are averaged per factorization and
/// shifted by one so that runs without delays stay comparable.
inline double metric_value(const ResultRow& r, ProfileMetric m) {
    switch (m) {
        case ProfileMetric::time: return r.runtime;
        case ProfileMetric::flops: return r.total_flops;
        case ProfileMetric::delayed: return r.avg_delayed() + 1.0;
    }
    return 0.0;
}

struct ProfileCurve {
    std::string config;
    std::vector<double> ratios;  ///< per problem; +infinity for failures
    std::vector<std::pair<double, double>> series;  ///< (tau, rho) breakpoints, tau ascending from 1
    double asymptote = 0.0;

    /// Fraction of problems with ratio <= tau.
    double rho(double tau) const {
        if (ratios.empty()) return 0.0;
        std::size_t k = 0;
        for (double r : ratios) k += r <= tau ? 1 : 0;
        return static_cast<double>(k) / static_cast<double>(ratios.size());
    }
};

struct ProfileCurves {
    ProfileMetric metric = ProfileMetric::time;
    std::vector<std::string> problems;
    std::vector<ProfileCurve> curves;
    std::vector<std::string> warnings;

    const ProfileCurve& curve(const std::string& config) const {
        for (const auto& c : curves)
            if (c.config == config) return c;
        throw std::out_of_range("no profile for config '" + config + "'");
    }
};

inline std::vector<std::string> config_order(const ResultsTable& t) {
    std::vector<std::string> out;
    for (const auto& r : t)
        if (std::find(out.begin(), out.end(), r.config) == out.end()) out.push_back(r.config);
    return out;
}

inline std::vector<std::string> problem_order(const ResultsTable& t) {
    std::vector<std::string> out;
    for (const auto& r : t)
        if (std::find(out.begin(), out.end(), r.problem) == out.end()) out.push_back(r.problem);
    return out;
}

/// Dolan-More profile: r_{p,s} = metric_{p,s} / min_s metric_{p,s}, failures
/// get r = infinity, rho_s(tau) is the fraction of problems with r <= tau.
/// A problem missing a row for some config is dropped with a warning;
/// problems every config failed stay in the denominator.
inline ProfileCurves performance_profile(const ResultsTable& t, ProfileMetric metric) {
    const auto configs = config_order(t);
    if (configs.size() < 2) throw std::invalid_argument("a performance profile needs at least two configs");
    ProfileCurves out;
    out.metric = metric;
    std::map<std::pair<std::string, std::string>, const ResultRow*> index;
    for (const auto& r : t) {
        if (!index.emplace(std::make_pair(r.problem, r.config), &r).second)
            throw std::invalid_argument("duplicate row for " + r.problem + " / " + r.config);
    }
    for (const auto& c : configs) out.curves.push_back({c, {}, {}, 0.0});

    for (const auto& p : problem_order(t)) {
        std::vector<double> vals;
        bool complete = true;
        for (const auto& c : configs) {
            const auto it = index.find({p, c});
            if (it == index.end()) {
                complete = false;
                break;
            }
            const ResultRow& r = *it->second;
            const double v = r.solved ? metric_value(r, metric) : infinity;
            if (r.solved && !(v >= 0.0 && std::isfinite(v))) {
                complete = false;
                break;
            }
            vals.push_back(v);
        }
        if (!complete) {
            out.warnings.push_back("problem '" + p + "' dropped: metric missing for some config");
            continue;
        }
        out.problems.push_back(p);
        const double best = *std::min_element(vals.begin(), vals.end());
        for (std::size_t s = 0; s < configs.size(); ++s) {
            double r = infinity;
            if (std::isfinite(vals[s])) {
                if (best > 0.0) r = vals[s] / best;
                else r = vals[s] == 0.0 ? 1.0 : std::numeric_limits<double>::max();
            }
            out.curves[s].ratios.push_back(r);
        }
    }

    std::set<double> taus{1.0};
    for (const auto& c : out.curves)
        for (double r : c.ratios)
            if (std::isfinite(r)) taus.insert(std::max(r, 1.0));
    for (auto& c : out.curves) {
        for (double tau : taus) c.series.emplace_back(tau, c.rho(tau));
        std::size_t solved = 0;
        for (double r : c.ratios) solved += std::isfinite(r) ? 1 : 0;
        c.asymptote = c.ratios.empty() ? 0.0 : static_cast<double>(solved) / static_cast<double>(c.ratios.size());
    }
    return out;
}

struct ReliabilityEntry {
    std::string config;
    int solved = 0;
    int problems = 0;
    double percent = 0.0;  ///< rounded to one decimal
};

/// Solved count over the number of distinct problems in the table, per config.
inline std::vector<ReliabilityEntry> reliability(const ResultsTable& t) {
    if (t.empty()) throw std::invalid_argument("empty results table");
    const auto problems = problem_order(t);
    std::vector<ReliabilityEntry> out;
    for (const auto& c : config_order(t)) {
        ReliabilityEntry e;
        e.config = c;
        e.problems = static_cast<int>(problems.size());
        for (const auto& r : t)
            if (r.config == c && r.solved) ++e.solved;
        e.percent = std::round(1000.0 * e.solved / e.problems) / 10.0;
        out.push_back(e);
    }
    return out;
}

inline std::string format_percent(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", p);
    return buf;
}

/// Keeps problems whose most expensive config spends at least `threshold`
/// flops per iteration.
inline ResultsTable filter_large(const ResultsTable& t, double threshold) {
    std::map<std::string, double> cost;
    for (const auto& r : t)
        cost[r.problem] = std::max(cost[r.problem], r.total_flops / std::max(r.iterations, 1));
    ResultsTable out;
    for (const auto& r : t)
        if (cost[r.problem] >= threshold) out.push_back(r);
    return out;
}

// ------------------------------------------------------------------- I/O

inline constexpr const char* results_header =
    "problem,config,status,reason,runtime,iterations,factorizations,total_flops,max_delayed,total_delayed,"
    "scaling_time_fraction,residual";

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string csv_field(const std::string& s) {
    std::string out = s;
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

}  // namespace detail

inline void write_results_csv(std::ostream& out, const ResultsTable& t) {
    out << results_header << '\n';
    for (const auto& r : t) {
        out << detail::csv_field(r.problem) << ',' << detail::csv_field(r.config) << ','
            << (r.solved ? "solved" : "failed") << ',' << detail::csv_field(r.reason) << ','
            << detail::fmt_double(r.runtime) << ',' << r.iterations << ',' << r.factorizations << ','
            << detail::fmt_double(r.total_flops) << ',' << r.max_delayed << ',' << r.total_delayed << ','
            << detail::fmt_double(r.scaling_time_fraction) << ',' << detail::fmt_double(r.residual) << '\n';
    }
}

inline ResultsTable read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("results file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != results_header) throw std::runtime_error("unexpected results header: " + line);
    ResultsTable t;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 12) throw std::runtime_error("line " + std::to_string(lineno) + ": expected 12 fields");
        try {
            ResultRow r;
            r.problem = f[0];
            r.config = f[1];
            if (f[2] != "solved" && f[2] != "failed")
                throw std::runtime_error("bad status '" + f[2] + "'");
            r.solved = f[2] == "solved";
            r.reason = f[3];
            r.runtime = std::stod(f[4]);
            r.iterations = std::stoi(f[5]);
            r.factorizations = std::stoi(f[6]);
            r.total_flops = std::stod(f[7]);
            r.max_delayed = static_cast<Index>(std::stol(f[8]));
            r.total_delayed = std::stoll(f[9]);
            r.scaling_time_fraction = std::stod(f[10]);
            r.residual = std::stod(f[11]);
            t.push_back(std::move(r));
        } catch (const std::logic_error& e) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return t;
}

inline ResultsTable load_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_results_csv(in);
}

inline nlohmann::json to_json(const ResultRow& r) {
    return {{"problem", r.problem},
            {"config", r.config},
            {"status", r.solved ? "solved" : "failed"},
            {"reason", r.reason},
            {"runtime", r.runtime},
            {"iterations", r.iterations},
            {"factorizations", r.factorizations},
            {"total_flops", r.total_flops},
            {"max_delayed", r.max_delayed},
            {"total_delayed", r.total_delayed},
            {"scaling_time_fraction", r.scaling_time_fraction},
            {"residual", std::isfinite(r.residual) ? nlohmann::json(r.residual) : nlohmann::json(nullptr)}};
}

inline nlohmann::json to_json(const ResultsTable& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : t) arr.push_back(to_json(r));
    return arr;
}

inline void write_profile_csv(std::ostream& out, const ProfileCurves& pc) {
    out << "config,tau,rho\n";
    for (const auto& c : pc.curves)
        for (const auto& [tau, rho] : c.series)
            out << detail::csv_field(c.config) << ',' << detail::fmt_double(tau) << ',' << detail::fmt_double(rho)
                << '\n';
}

inline nlohmann::json to_json(const ProfileCurves& pc) {
    nlohmann::json j;
    j["metric"] = std::string(to_string(pc.metric));
    j["problems"] = pc.problems;
    j["warnings"] = pc.warnings;
    j["curves"] = nlohmann::json::array();
    for (const auto& c : pc.curves) {
        nlohmann::json series = nlohmann::json::array();
        for (const auto& [tau, rho] : c.series) series.push_back({tau, rho});
        nlohmann::json ratios = nlohmann::json::array();
        for (double r : c.ratios) ratios.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json(nullptr));
        j["curves"].push_back({{"config", c.config}, {"asymptote", c.asymptote}, {"series", series}, {"ratios", ratios}});
    }
    return j;
}

inline void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityEntry>& rel) {
    out << "config,solved,problems,reliability\n";
    for (const auto& e : rel)
        out << detail::csv_field(e.config) << ',' << e.solved << ',' << e.problems << ',' << format_percent(e.percent)
            << '\n';
}

inline nlohmann::json to_json(const std::vector<ReliabilityEntry>& rel) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : rel)
        arr.push_back({{"config", e.config}, {"solved", e.solved}, {"problems", e.problems}, {"reliability", e.percent}});
    return arr;
}

inline void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& h) {
    out << "iter,mu,kkt_residual,alpha,delta_w,delta_c,sigma_max,factorizations,max_delayed\n";
    for (const auto& r : h)
        out << r.iter << ',' << detail::fmt_double(r.mu) << ',' << detail::fmt_double(r.kkt_residual) << ','
            << detail::fmt_double(r.alpha) << ',' << detail::fmt_double(r.delta_w) << ','
            << detail::fmt_double(r.delta_c) << ',' << detail::fmt_double(r.sigma_max) << ',' << r.factorizations
            << ',' << r.max_delayed << '\n';
}

// --------------------------------------------------------------- problems

/// Expands a problem argument: "toy" for the built-in set (the seed drives
/// its random instance), a directory (every *.json and *.mtx inside,
/// sorted), or a comma-separated list of files. Matrix files require linear
/// mode; JSON files require NLP mode.
inline std::vector<BenchProblem> load_problems(const std::string& spec, RunMode mode, unsigned seed = 7) {
    namespace fs = std::filesystem;
    std::vector<BenchProblem> out;
    if (spec == "toy") {
        if (mode != RunMode::nlp) throw std::invalid_argument("the toy set is only available in nlp mode");
        for (auto& p : toy_problem_set(seed)) {
            std::string name = p.name;
            out.push_back({std::move(name), std::move(p)});
        }
        return out;
    }
    std::vector<fs::path> files;
    if (fs::is_directory(spec)) {
        for (const auto& e : fs::directory_iterator(spec))
            if (e.is_regular_file() && (e.path().extension() == ".json" || e.path().extension() == ".mtx"))
                files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) files.emplace_back(item);
    }
    for (const auto& f : files) {
        const bool is_mtx = f.extension() == ".mtx";
        if (is_mtx != (mode == RunMode::linear)) {
            if (fs::is_directory(spec)) continue;
            throw std::invalid_argument("'" + f.string() + "' does not match " +
                                        (mode == RunMode::linear ? "linear" : "nlp") + " mode");
        }
        if (is_mtx) {
            out.push_back({f.stem().string(), load_matrix_market(f.string())});
        } else {
            auto p = load_problem_json(f.string());
            if (p.name.empty()) p.name = f.stem().string();
            std::string name = p.name;
            out.push_back({std::move(name), std::move(p)});
        }
    }
    if (out.empty()) throw std::invalid_argument("no problems found in '" + spec + "'");
    return out;
}

}  // namespace kktscale
