#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "check/chain_align.hpp"
#include "oracle.hpp"

using namespace check;

namespace {
const TypeSet P{EntityType::Person};
const TypeSet L{EntityType::Place};
const TypeSet T{EntityType::Thing};
}  // namespace

TEST_CASE("alignment penalty fixed examples") {
    CHECK(alignment_penalty(TypeChain{{{P, L}}}) == 0);
    CHECK(alignment_penalty(TypeChain{{{T, P}, {P, L}}}) == 0);
    CHECK(alignment_penalty(TypeChain{{{P, L}, {T, P}}}) == 1);
    CHECK(alignment_penalty(TypeChain{{{P, L}, {P, L}, {P, L}}}) == 2);
    // Overlap is set intersection, not equality.
    TypeSet PL{EntityType::Person, EntityType::Place};
    CHECK(alignment_penalty(TypeChain{{{T, PL}, {P, T}}}) == 0);
    CHECK_THROWS_AS(alignment_penalty(TypeChain{}), InvalidArgument);
}

TEST_CASE("alignment penalty matches the pairwise oracle") {
    std::mt19937 gen(23);
    for (int trial = 0; trial < 500; ++trial) {
        auto pairs = oracle::random_chain(gen, 1 + gen() % 6);
        CHECK(alignment_penalty(TypeChain{pairs}) == oracle::alignment_penalty(pairs));
    }
}

TEST_CASE("permutation cost fixed examples") {
    CHECK(permutation_cost(Permutation::identity(4)) == 0);
    CHECK(permutation_cost(Permutation({1, 0})) == 2);
    CHECK(permutation_cost(Permutation({0, 2, 1, 3})) == 2);
    CHECK(permutation_cost(Permutation({2, 0, 1})) == 3);
}

TEST_CASE("permutation cost matches the dense matrix oracle") {
    std::mt19937 gen(29);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 1 + gen() % 8;
        std::vector<std::size_t> m(n);
        std::iota(m.begin(), m.end(), 0);
        std::shuffle(m.begin(), m.end(), gen);
        CHECK(permutation_cost(Permutation(m)) == oracle::permutation_cost(m));
    }
}

TEST_CASE("repair of the canonical misordered two hop chain") {
    // Surface-derived order asks for the place before producing the person.
    TypeChain types{{{P, L}, {T, P}}};
    RelationChain rels({"born in", "creator of"});
    RepairResult r = repair_chain(types, rels);
    CHECK(r.permutation.mapping() == std::vector<std::size_t>{1, 0});
    CHECK(r.penalty == 0);
    CHECK(r.cost == 2);
    CHECK(r.fully_aligned);
    CHECK(r.repaired_relations.relations == std::vector<std::string>{"creator of", "born in"});
    CHECK(r.repaired_types.pairs == std::vector<std::pair<TypeSet, TypeSet>>{{T, P}, {P, L}});
}

TEST_CASE("aligned chains keep the identity at zero cost") {
    TypeChain types{{{T, P}, {P, L}, {L, L}}};
    RelationChain rels({"creator of", "born in", "capital city"});
    RepairResult r = repair_chain(types, rels);
    CHECK(r.permutation.is_identity());
    CHECK(r.penalty == 0);
    CHECK(r.cost == 0);
    CHECK(r.fully_aligned);
}

TEST_CASE("unalignable chains minimize penalty and report misalignment") {
    TypeChain types{{{P, L}, {P, L}, {P, L}}};
    RelationChain rels({"born in", "born in", "born in"});
    RepairResult r = repair_chain(types, rels);
    CHECK(r.permutation.is_identity());  // all orderings tie; identity is cheapest
    CHECK(r.penalty == 2);
    CHECK(r.cost == 0);
    CHECK_FALSE(r.fully_aligned);
}

TEST_CASE("repair rejects over-long and mismatched chains") {
    TypeChain nine{std::vector<std::pair<TypeSet, TypeSet>>(9, {P, L})};
    RelationChain rels9(std::vector<std::string>(9, "r"));
    CHECK_THROWS_AS(repair_chain(nine, rels9), ChainTooLong);
    TypeChain two{{{P, L}, {P, L}}};
    CHECK_THROWS_AS(repair_chain(two, RelationChain({"r"})), InvalidArgument);
}

TEST_CASE("repair matches the exhaustive sorted oracle") {
    std::mt19937 gen(31);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + gen() % 6;
        auto pairs = oracle::random_chain(gen, n);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < n; ++k) names.push_back("rel" + std::to_string(k));
        RepairResult got = repair_chain(TypeChain{pairs}, RelationChain(names));
        oracle::RepairChoice want = oracle::repair(pairs);
        CHECK(got.permutation.mapping() == want.mapping);
        CHECK(got.penalty == want.penalty);
        CHECK(got.cost == want.cost);
        CHECK(got.fully_aligned == (want.penalty == 0));
        // Repair never does worse than leaving the chain alone.
        CHECK(got.penalty <= oracle::alignment_penalty(pairs));
        CHECK(got.penalty >= 0);
        CHECK(got.penalty <= static_cast<int>(n) - 1 + (n == 0 ? 1 : 0));
    }
}

TEST_CASE("anchor filter picks the ordering that accepts the start entity") {
    // Two zero-penalty orderings exist; only the anchored one starts from a
    // place.
    TypeChain types{{{P, L}, {L, P}}};
    RelationChain rels({"head of state", "country of"});
    RepairResult plain = repair_chain(types, rels);
    CHECK(plain.permutation.is_identity());  // zero penalty either way, cost breaks the tie
    RepairResult anchored = repair_chain(types, rels, EntityType::Place);
    CHECK(anchored.permutation.mapping() == std::vector<std::size_t>{1, 0});
    CHECK(anchored.penalty == 0);
    CHECK(anchored.repaired_relations.relations ==
          std::vector<std::string>{"country of", "head of state"});
}

TEST_CASE("anchor filter falls back when no ordering satisfies it") {
    TypeChain types{{{P, L}, {L, P}}};
    RelationChain rels({"a", "b"});
    RepairResult r = repair_chain(types, rels, EntityType::Thing);
    CHECK(r.permutation.is_identity());
    CHECK(r.penalty == 0);
}

TEST_CASE("shuffled aligned chains are recovered exactly") {
    std::mt19937 gen(37);
    int recovered = 0;
    for (int trial = 0; trial < 200; ++trial) {
        // Build an aligned chain over a random type path, with all pairs
        // distinct so the original ordering is recoverable.
        std::size_t n = 2 + gen() % 4;
        std::vector<std::pair<TypeSet, TypeSet>> pairs;
        std::vector<EntityType> path;
        for (std::size_t k = 0; k <= n; ++k)
            path.push_back(static_cast<EntityType>(gen() % 3));
        for (std::size_t k = 1; k <= n; ++k)
            pairs.emplace_back(TypeSet{path[k - 1]}, TypeSet{path[k]});
        bool distinct = true;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (pairs[a] == pairs[b]) distinct = false;
        // Require a unique zero-penalty ordering, checked with the oracle.
        std::vector<std::vector<std::size_t>> perms;
        oracle::enumerate_permutations(n, perms);
        int zeros = 0;
        for (const auto& m : perms) {
            std::vector<std::pair<TypeSet, TypeSet>> permuted;
            for (std::size_t k = 0; k < n; ++k) permuted.push_back(pairs[m[k]]);
            if (oracle::alignment_penalty(permuted) == 0) ++zeros;
        }
        if (!distinct || zeros != 1) continue;

        std::vector<std::size_t> shuffle(n);
        std::iota(shuffle.begin(), shuffle.end(), 0);
        std::shuffle(shuffle.begin(), shuffle.end(), gen);
        Permutation s(shuffle);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < n; ++k) names.push_back("rel" + std::to_string(k));
        TypeChain shuffled = apply_permutation(s, TypeChain{pairs});
        RelationChain shuffled_rels(apply_permutation(s, names));

        RepairResult r = repair_chain(shuffled, shuffled_rels);
        CHECK(r.fully_aligned);
        CHECK(r.repaired_types.pairs == pairs);
        CHECK(r.repaired_relations.relations == names);
        ++recovered;
    }
    CHECK(recovered > 50);  // the filter must not starve the property
}
