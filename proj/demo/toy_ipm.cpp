// Runs one toy problem through the interior-point driver and prints the
// iteration trace followed by the controller's decision log.
//
//   toy_ipm ill_scaled_2 odhdr matching

#include <iostream>
#include <string>

#include "kktscale/kktscale.hpp"

using namespace kktscale;

int main(int argc, char** argv) {
    const std::string name = argc > 1 ? argv[1] : "ill_scaled_2";
    Policy policy;
    policy.kind = parse_policy(argc > 2 ? argv[2] : "odhdr");
    policy.scaler = parse_scaler(argc > 3 ? argv[3] : "matching");
    for (const auto& p : toy_problem_set()) {
        if (p.name != name) continue;
        const auto r = ipm_solve(p, policy);
        std::cout << "# " << p.name << " (" << p.family << ") under " << policy.label() << ": " << to_string(r.status)
                  << " after " << r.iterations << " iterations, residual " << r.kkt_residual << "\n";
        write_history_csv(std::cout, r.history);
        std::cout << "\n";
        r.log.write_csv(std::cout);
        return r.solved() ? 0 : 1;
    }
    std::cerr << "unknown problem '" << name << "'; available:";
    for (const auto& p : toy_problem_set()) std::cerr << ' ' << p.name;
    std::cerr << "\n";
    return 2;
}
