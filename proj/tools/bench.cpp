// bench: runs scaling configurations over a problem set and summarizes the
// results as performance profiles and reliability percentages.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kktscale/bench.hpp"

namespace fs = std::filesystem;
using namespace kktscale;

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
}

ResultsTable load_filtered(const std::string& path, double large_flops) {
    auto t = load_results_csv(path);
    if (large_flops > 0.0) t = filter_large(t, large_flops);
    if (t.empty()) throw std::runtime_error("no rows left after filtering");
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scaling and pivoting benchmark harness"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run problems under every requested config");
    std::string problems = "toy";
    std::string scalers = "none,matching";
    std::string policy = "odhdr";
    std::string mode = "nlp";
    std::string out_path = "results.csv";
    std::string logs_dir;
    RunConfig base;
    unsigned jobs = 1;
    run->add_option("--problems", problems, "'toy', a directory, or a comma-separated file list")->capture_default_str();
    run->add_option("--scalers", scalers, "comma-separated: none,curtis-reid,curtis-reid-sym,matching,equilibrate,matching-order")
        ->capture_default_str();
    run->add_option("--policy", policy, "none|always|od|odr|hd|hdr|odhd|odhdr")->capture_default_str();
    run->add_option("--mode", mode, "nlp or linear")->check(CLI::IsMember({"nlp", "linear"}))->capture_default_str();
    run->add_option("--u", base.u_init, "initial pivot threshold")->capture_default_str();
    run->add_option("--delay-fraction", base.delay_fraction, "high-delay trigger as a fraction of n")->capture_default_str();
    run->add_option("--time-limit", base.time_limit_s, "seconds per run")->capture_default_str();
    run->add_option("--seed", base.seed, "seed for generated problems")->capture_default_str();
    run->add_option("--jobs", jobs, "worker threads (0 = hardware concurrency)")->capture_default_str();
    run->add_option("--out", out_path, "results CSV; a .json mirror is written next to it")->capture_default_str();
    run->add_option("--logs", logs_dir, "directory for per-run decision logs and iteration traces");

    auto* prof = app.add_subcommand("profile", "performance profile from a results CSV");
    std::string metric = "time";
    std::string prof_in, prof_out;
    double prof_large = 0.0;
    prof->add_option("--metric", metric, "time|flops|delayed")->check(CLI::IsMember({"time", "flops", "delayed"}))
        ->capture_default_str();
    prof->add_option("--out", prof_out, "write (tau, rho) CSV here plus a .json mirror; stdout otherwise");
    prof->add_option("--large-flops", prof_large, "keep problems with at least this many flops per iteration");
    prof->add_option("results", prof_in, "results CSV")->required();

    auto* rel = app.add_subcommand("reliability", "solved percentage per config");
    std::string rel_in, rel_out;
    double rel_large = 0.0;
    rel->add_option("--out", rel_out, "write CSV here plus a .json mirror; stdout otherwise");
    rel->add_option("--large-flops", rel_large, "keep problems with at least this many flops per iteration");
    rel->add_option("results", rel_in, "results CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            base.mode = mode == "linear" ? RunMode::linear : RunMode::nlp;
            const auto configs = make_configs(split(scalers), parse_policy(policy), base);
            const auto probs = load_problems(problems, base.mode, base.seed);
            if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
            std::vector<RunArtifacts> artifacts;
            const auto table = run_suite(probs, configs, jobs, logs_dir.empty() ? nullptr : &artifacts);

            std::ostringstream csv;
            write_results_csv(csv, table);
            write_file(out_path, csv.str());
            write_file(fs::path(out_path).replace_extension(".json"), to_json(table).dump(2) + "\n");

            if (!logs_dir.empty()) {
                fs::create_directories(logs_dir);
                for (std::size_t k = 0; k < table.size(); ++k) {
                    const auto stem = safe_name(table[k].problem) + "__" + safe_name(table[k].config);
                    write_file(fs::path(logs_dir) / (stem + ".decisions.csv"), artifacts[k].log.to_csv());
                    if (!artifacts[k].history.empty()) {
                        std::ostringstream h;
                        write_history_csv(h, artifacts[k].history);
                        write_file(fs::path(logs_dir) / (stem + ".iterations.csv"), h.str());
                    }
                }
            }
            int solved = 0;
            for (const auto& r : table) solved += r.solved ? 1 : 0;
            std::cerr << table.size() << " runs, " << solved << " solved -> " << out_path << "\n";
        } else if (*prof) {
            const auto table = load_filtered(prof_in, prof_large);
            const auto pc = performance_profile(table, parse_metric(metric));
            for (const auto& w : pc.warnings) std::cerr << "warning: " << w << "\n";
            std::ostringstream csv;
            write_profile_csv(csv, pc);
            if (prof_out.empty()) {
                std::cout << csv.str();
            } else {
                write_file(prof_out, csv.str());
                write_file(fs::path(prof_out).replace_extension(".json"), to_json(pc).dump(2) + "\n");
            }
        } else if (*rel) {
            const auto table = load_filtered(rel_in, rel_large);
            const auto entries = reliability(table);
            std::ostringstream csv;
            write_reliability_csv(csv, entries);
            if (rel_out.empty()) {
                std::cout << csv.str();
            } else {
                write_file(rel_out, csv.str());
                write_file(fs::path(rel_out).replace_extension(".json"), to_json(entries).dump(2) + "\n");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "bench: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
