#pragma once

// Type-chain alignment checking and permutation-based repair. Alignment
// uses set intersection: adjacent hops align when the earlier hop's output
// types overlap the later hop's input types.

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "check/core.hpp"

namespace check {

class ChainTooLong : public std::runtime_error {
public:
    explicit ChainTooLong(std::size_t n)
        : std::runtime_error("chain of length " + std::to_string(n) +
                             " exceeds the enumeration guard") {}
};

inline constexpr std::size_t kMaxChainLength = 8;  // 8! = 40320 candidates

// Number of adjacent (k, k+1) pairs, in execution order, whose output and
// input type sets do not overlap. A length-1 chain scores 0.
inline int alignment_penalty(const TypeChain& chain) {
    if (chain.size() == 0) throw InvalidArgument("alignment_penalty: empty chain");
    int penalty = 0;
    for (std::size_t k = 0; k + 1 < chain.size(); ++k)
        if (!chain.pairs[k].second.intersects(chain.pairs[k + 1].first)) ++penalty;
    return penalty;
}

// N minus the number of fixed points: the count of displaced rows of the
// dense permutation matrix.
inline int permutation_cost(const Permutation& p) {
    int cost = 0;
    for (std::size_t k = 0; k < p.size(); ++k)
        if (p.mapping()[k] != k) ++cost;
    return cost;
}

struct RepairResult {
    Permutation permutation;
    TypeChain repaired_types;
    RelationChain repaired_relations;
    int penalty = 0;
    int cost = 0;
    bool fully_aligned = false;
};

// Enumerates all n! joint reorderings of (type pair, relation) positions.
// Ranking: lowest penalty, then lowest cost, then lexicographically
// smallest mapping. When `anchor` is given, permutations whose first
// relation accepts the anchor type are preferred as a filter; if none
// satisfy it, ranking proceeds unfiltered.
inline RepairResult repair_chain(const TypeChain& types, const RelationChain& relations,
                                 std::optional<EntityType> anchor = std::nullopt) {
    const std::size_t n = types.size();
    if (n != relations.size())
        throw InvalidArgument("repair_chain: chain length mismatch");
    if (n == 0) throw InvalidArgument("repair_chain: empty chain");
    if (n > kMaxChainLength) throw ChainTooLong(n);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    std::optional<std::vector<std::size_t>> best, best_anchored;
    int best_pen = 0, best_cost = 0;
    int best_pen_a = 0, best_cost_a = 0;

    // Lexicographic enumeration: a strict (penalty, cost) improvement test
    // keeps the first, hence lexicographically smallest, mapping per tier.
    do {
        Permutation p{std::vector<std::size_t>(idx)};
        TypeChain c = apply_permutation(p, types);
        int pen = alignment_penalty(c);
        int cost = permutation_cost(p);
        if (!best || pen < best_pen || (pen == best_pen && cost < best_cost)) {
            best = idx;
            best_pen = pen;
            best_cost = cost;
        }
        if (anchor && c.pairs.front().first.contains(*anchor)) {
            if (!best_anchored || pen < best_pen_a ||
                (pen == best_pen_a && cost < best_cost_a)) {
                best_anchored = idx;
                best_pen_a = pen;
                best_cost_a = cost;
            }
        }
    } while (std::next_permutation(idx.begin(), idx.end()));

    const std::vector<std::size_t>& chosen = best_anchored ? *best_anchored : *best;
    Permutation p{std::vector<std::size_t>(chosen)};
    TypeChain repaired = apply_permutation(p, types);
    RelationChain rels{apply_permutation(p, relations.relations), relations.surface_order_raw};
    int pen = alignment_penalty(repaired);
    RepairResult r{std::move(p), std::move(repaired), std::move(rels), pen,
                   0, pen == 0};
    r.cost = permutation_cost(r.permutation);
    return r;
}

}  // namespace check
