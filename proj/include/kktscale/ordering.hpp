#pragma once

// Fill-reducing orderings: exact greedy minimum degree, and the
// matching-based variant that keeps matched index pairs adjacent.

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kktscale/scaling.hpp"
#include "kktscale/sparse_matrix.hpp"

namespace kktscale {

/// perm[k] is the original index placed at position k.
struct Permutation {
    std::vector<Index> perm;

    static Permutation identity(Index n) {
        Permutation p;
        p.perm.resize(static_cast<std::size_t>(n));
        std::iota(p.perm.begin(), p.perm.end(), Index{0});
        return p;
    }

    Index size() const { return static_cast<Index>(perm.size()); }
    Index operator[](std::size_t k) const { return perm[k]; }

    bool is_valid() const {
        std::vector<char> seen(perm.size(), 0);
        for (Index i : perm) {
            if (i < 0 || static_cast<std::size_t>(i) >= perm.size() || seen[i]) return false;
            seen[i] = 1;
        }
        return true;
    }

    /// inv[i] is the position of original index i.
    std::vector<Index> inverse() const {
        std::vector<Index> inv(perm.size());
        for (std::size_t k = 0; k < perm.size(); ++k) inv[perm[k]] = static_cast<Index>(k);
        return inv;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;
};

struct PairList {
    std::vector<std::pair<Index, Index>> pairs;  ///< first < second
    std::vector<Index> singletons;               ///< ascending
};

namespace detail {

/// Greedy minimum degree on a weighted elimination graph. The degree of a
/// node is the total weight of its current neighbours; ties go to the lowest
/// node index. Returns node ids in elimination order.
inline std::vector<Index> weighted_min_degree(std::vector<std::vector<Index>> adj,
                                              const std::vector<Index>& weight) {
    const auto n = adj.size();
    std::vector<char> eliminated(n, 0);
    std::vector<long long> degree(n, 0);
    for (std::size_t v = 0; v < n; ++v)
        for (Index w : adj[v]) degree[v] += weight[w];
    std::vector<Index> order;
    order.reserve(n);
    std::vector<char> mark(n, 0);
    std::vector<Index> merged;
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = n;
        for (std::size_t v = 0; v < n; ++v)
            if (!eliminated[v] && (best == n || degree[v] < degree[best])) best = v;
        eliminated[best] = 1;
        order.push_back(static_cast<Index>(best));
        const auto nbrs = std::move(adj[best]);
        adj[best].clear();
        // Neighbours of the eliminated node become a clique.
        for (Index a : nbrs) {
            merged.clear();
            for (Index x : adj[a]) {
                if (x == static_cast<Index>(best)) continue;
                mark[x] = 1;
                merged.push_back(x);
            }
            for (Index b : nbrs)
                if (b != a && !mark[b]) {
                    mark[b] = 1;
                    merged.push_back(b);
                }
            for (Index x : merged) mark[x] = 0;
            std::sort(merged.begin(), merged.end());
            adj[a] = merged;
            long long d = 0;
            for (Index x : merged) d += weight[x];
            degree[a] = d;
        }
    }
    return order;
}

}  // namespace detail

/// Exact greedy minimum degree on the elimination graph of A; lowest index
/// breaks degree ties.
inline Permutation min_degree_order(const SymSparseMatrix& a) {
    std::vector<Index> unit(static_cast<std::size_t>(a.size()), 1);
    return Permutation{detail::weighted_min_degree(a.adjacency(), unit)};
}

/// Number of off-diagonal entries in the Cholesky-pattern factor of PAP^T
/// beyond those already present in A.
inline std::size_t symbolic_fill(const SymSparseMatrix& a, const Permutation& p) {
    auto adj = a.adjacency();
    std::size_t original = 0;
    for (const auto& row : adj) original += row.size();
    original /= 2;
    const auto pos = p.inverse();
    // Elimination game in the given order.
    std::size_t factor = 0;
    std::vector<char> mark(adj.size(), 0);
    for (Index v : p.perm) {
        std::vector<Index> later;
        for (Index w : adj[v])
            if (pos[w] > pos[v]) later.push_back(w);
        factor += later.size();
        for (Index a_ : later) {
            for (Index x : adj[a_]) mark[x] = 1;
            for (Index b : later)
                if (b != a_ && !mark[b]) adj[a_].push_back(b);
            for (Index x : adj[a_]) mark[x] = 0;
        }
    }
    return factor - original;
}

/// Disjoint subset of the matched pairs {i, sigma(i)}: candidates are taken in
/// descending order of log|a_{i,sigma(i)}| (lower i on ties) and accepted when
/// both endpoints are still free.
inline PairList matching_pairs(const Matching& m) {
    const auto n = m.sigma.size();
    struct Candidate {
        Index lo, hi;
        double strength;
    };
    std::vector<Candidate> cand;
    for (std::size_t i = 0; i < n; ++i) {
        const Index j = m.sigma[i];
        if (j == static_cast<Index>(i)) continue;
        // A 2-cycle lists the same pair from both ends.
        if (j < static_cast<Index>(i) && m.sigma[j] == static_cast<Index>(i)) continue;
        const double s = m.matched_log_abs.empty() ? 0.0 : m.matched_log_abs[i];
        cand.push_back({std::min<Index>(static_cast<Index>(i), j),
                        std::max<Index>(static_cast<Index>(i), j), s});
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.strength != b.strength) return a.strength > b.strength;
        return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi;
    });
    PairList out;
    std::vector<char> used(n, 0);
    for (const auto& c : cand) {
        if (used[c.lo] || used[c.hi]) continue;
        used[c.lo] = used[c.hi] = 1;
        out.pairs.emplace_back(c.lo, c.hi);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) out.singletons.push_back(static_cast<Index>(i));
    return out;
}

struct MatchingOrder {
    Permutation order;
    ScalingVector scaling;
    PairList pairs;
    Matching matching;
};

/// Orders the graph in which each accepted pair is one supervariable (weight
/// 2) by minimum degree, then expands supervariables in place.
inline Permutation compressed_order(const SymSparseMatrix& a, const PairList& pl) {
    const auto n = static_cast<std::size_t>(a.size());
    // Supervariables are numbered by their smallest member.
    std::vector<std::vector<Index>> members;
    {
        std::vector<std::pair<Index, std::vector<Index>>> groups;
        for (const auto& [i, j] : pl.pairs) groups.push_back({i, {i, j}});
        for (Index s : pl.singletons) groups.push_back({s, {s}});
        std::sort(groups.begin(), groups.end());
        for (auto& g : groups) members.push_back(std::move(g.second));
    }
    std::vector<Index> super(n, -1);
    for (std::size_t k = 0; k < members.size(); ++k)
        for (Index i : members[k]) super[i] = static_cast<Index>(k);
    if (std::find(super.begin(), super.end(), Index{-1}) != super.end())
        throw std::invalid_argument("pair list does not cover every index");

    std::vector<std::vector<Index>> cadj(members.size());
    a.for_each([&](Index i, Index j, double) {
        const Index si = super[i], sj = super[j];
        if (si == sj) return;
        cadj[si].push_back(sj);
        cadj[sj].push_back(si);
    });
    for (auto& row : cadj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    std::vector<Index> weight(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) weight[k] = static_cast<Index>(members[k].size());

    Permutation p;
    p.perm.reserve(n);
    for (Index s : detail::weighted_min_degree(std::move(cadj), weight))
        for (Index i : members[s]) p.perm.push_back(i);
    return p;
}

/// Matching-based ordering: the max-product matching supplies both the pairs
/// to keep adjacent and the symmetrized scaling.
inline MatchingOrder matching_based_order(const SymSparseMatrix& a) {
    MatchingOrder out;
    out.matching = max_product_matching(a);
    out.scaling = symmetrize_matching_scaling(out.matching);
    out.pairs = matching_pairs(out.matching);
    out.order = compressed_order(a, out.pairs);
    return out;
}

}  // namespace kktscale
