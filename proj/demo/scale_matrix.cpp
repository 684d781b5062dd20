// Scales a Matrix Market file with every scaler and reports the entry range
// of SAS and the delayed pivots of one factorization at u = 1e-8.
//
//   scale_matrix data/kkt_ill_scaled.mtx

#include <cmath>
#include <cstdio>
#include <iostream>

#include "kktscale/kktscale.hpp"

using namespace kktscale;

namespace {

void report(const char* label, const SymSparseMatrix& a, const ScalingVector& s, const SymbolicFactor& sf) {
    const auto b = apply_symmetric_scaling(a, s);
    double lo = INFINITY, hi = 0.0;
    b.for_each([&](Index, Index, double v) {
        if (v == 0.0) return;
        lo = std::min(lo, std::abs(v));
        hi = std::max(hi, std::abs(v));
    });
    const auto f = factorize(a, sf, FactorOptions{}, s);
    std::printf("%-16s |a| in [%.2e, %.2e]  delayed %3d  2x2 %3d  inertia (%d,%d,%d)\n", label, lo, hi, f.num_delayed,
                f.num_two_by_two, f.inertia.positive, f.inertia.negative, f.inertia.zero);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: scale_matrix <file.mtx>\n";
        return 2;
    }
    try {
        const auto a = load_matrix_market(argv[1]);
        const auto sf = analyse(a, min_degree_order(a));
        std::printf("n = %d, nnz(lower) = %zu\n", a.size(), a.nnz());
        report("none", a, ScalingVector::identity(a.size()), sf);
        for (auto k : {ScalerKind::curtis_reid, ScalerKind::curtis_reid_sym, ScalerKind::equilibrate,
                       ScalerKind::matching}) {
            const auto cs = compute_scaling(a, k);
            report(std::string(to_string(k)).c_str(), a, cs.scaling, sf);
        }
        const auto mo = matching_based_order(a);
        report("matching-order", a, mo.scaling, analyse(a, mo.order));
    } catch (const std::exception& e) {
        std::cerr << "scale_matrix: " << e.what() << "\n";
        return 1;
    }
}
