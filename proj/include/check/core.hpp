#pragma once

// Shared domain vocabulary: entity types, type sets, edit triples,
// relation chains and permutations. Everything here is an immutable
// value type, safe to share across threads.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace check {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class EntityType : std::uint8_t { Person = 0, Place = 1, Thing = 2 };

inline const char* to_string(EntityType t) {
    switch (t) {
    case EntityType::Person: return "person";
    case EntityType::Place: return "place";
    case EntityType::Thing: return "thing";
    }
    return "?";
}

inline std::optional<EntityType> entity_type_from_string(std::string_view s) {
    if (s == "person") return EntityType::Person;
    if (s == "place") return EntityType::Place;
    if (s == "thing") return EntityType::Thing;
    return std::nullopt;
}

// Non-empty set of entity types, stored as a 3-bit mask.
class TypeSet {
public:
    TypeSet(std::initializer_list<EntityType> types) {
        for (EntityType t : types) add(t);
        if (mask_ == 0) throw InvalidArgument("TypeSet must be non-empty");
    }

    template <typename Iter>
    TypeSet(Iter first, Iter last) {
        for (; first != last; ++first) add(*first);
        if (mask_ == 0) throw InvalidArgument("TypeSet must be non-empty");
    }

    bool contains(EntityType t) const { return (mask_ >> static_cast<int>(t)) & 1u; }

    bool intersects(const TypeSet& other) const { return (mask_ & other.mask_) != 0; }

    int size() const {
        int n = 0;
        for (int i = 0; i < 3; ++i) n += (mask_ >> i) & 1u;
        return n;
    }

    std::vector<EntityType> members() const {
        std::vector<EntityType> out;
        for (int i = 0; i < 3; ++i)
            if ((mask_ >> i) & 1u) out.push_back(static_cast<EntityType>(i));
        return out;
    }

    std::string to_string() const {
        std::string s;
        for (EntityType t : members()) {
            if (!s.empty()) s += ",";
            s += check::to_string(t);
        }
        return s;
    }

    friend bool operator==(const TypeSet&, const TypeSet&) = default;

private:
    void add(EntityType t) { mask_ |= static_cast<std::uint8_t>(1u << static_cast<int>(t)); }
    std::uint8_t mask_ = 0;
};

// --- string normalization ------------------------------------------------
//
// Equality of entity and relation strings is decided on the normalized
// form: whitespace-trimmed and case-folded (ASCII fold; multi-byte UTF-8
// sequences pass through unchanged, and NFC is the identity on the ASCII
// range). Embeddings always receive the original casing.

inline std::string trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return "";
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline std::string normalize(std::string_view s) {
    std::string out = trim(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    });
    return out;
}

// --- domain records ------------------------------------------------------

struct EditTriple {
    std::string subject;
    std::string relation;
    std::string object;
    std::optional<std::string> canonical_subject;  // linker's "true name"

    EditTriple(std::string s, std::string r, std::string o,
               std::optional<std::string> canonical = std::nullopt)
        : subject(trim(std::move(s))),
          relation(trim(std::move(r))),
          object(trim(std::move(o))),
          canonical_subject(std::move(canonical)) {
        if (subject.empty() || relation.empty() || object.empty())
            throw InvalidArgument("EditTriple fields must be non-empty");
    }

    const std::string& effective_subject() const {
        return canonical_subject ? *canonical_subject : subject;
    }
};

// Relations extracted from a multi-hop question, in execution order:
// relations[0] is the first hop executed. surface_order_raw keeps the raw
// LLM output line before reordering.
struct RelationChain {
    std::vector<std::string> relations;
    std::string surface_order_raw;

    explicit RelationChain(std::vector<std::string> rels, std::string raw = "")
        : relations(std::move(rels)), surface_order_raw(std::move(raw)) {
        if (relations.empty()) throw InvalidArgument("RelationChain must be non-empty");
        for (const auto& r : relations)
            if (trim(r).empty()) throw InvalidArgument("RelationChain contains empty relation");
    }

    std::size_t size() const { return relations.size(); }
};

// Per-relation (input, output) type-set pairs, parallel to a RelationChain.
struct TypeChain {
    std::vector<std::pair<TypeSet, TypeSet>> pairs;

    std::size_t size() const { return pairs.size(); }
    friend bool operator==(const TypeChain&, const TypeChain&) = default;
};

struct MultiHopQuestion {
    std::string text;
    std::optional<std::string> initial_entity;

    explicit MultiHopQuestion(std::string t, std::optional<std::string> entity = std::nullopt)
        : text(trim(std::move(t))), initial_entity(std::move(entity)) {
        if (text.empty()) throw InvalidArgument("question text must be non-empty");
    }
};

// --- permutations --------------------------------------------------------
//
// Stored as an index list: mapping[k] is the source index of the element
// placed at position k. The dense matrix form is derived on demand.

class Permutation {
public:
    explicit Permutation(std::vector<std::size_t> mapping) : mapping_(std::move(mapping)) {
        std::vector<bool> seen(mapping_.size(), false);
        for (std::size_t i : mapping_) {
            if (i >= mapping_.size() || seen[i])
                throw InvalidArgument("Permutation mapping is not a bijection");
            seen[i] = true;
        }
    }

    static Permutation identity(std::size_t n) {
        std::vector<std::size_t> m(n);
        for (std::size_t i = 0; i < n; ++i) m[i] = i;
        return Permutation(std::move(m));
    }

    Permutation inverse() const {
        std::vector<std::size_t> inv(mapping_.size());
        for (std::size_t k = 0; k < mapping_.size(); ++k) inv[mapping_[k]] = k;
        return Permutation(std::move(inv));
    }

    bool is_identity() const {
        for (std::size_t k = 0; k < mapping_.size(); ++k)
            if (mapping_[k] != k) return false;
        return true;
    }

    std::size_t size() const { return mapping_.size(); }
    const std::vector<std::size_t>& mapping() const { return mapping_; }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<std::size_t> mapping_;
};

// result[k] = xs[p.mapping[k]]
template <typename T>
std::vector<T> apply_permutation(const Permutation& p, const std::vector<T>& xs) {
    if (xs.size() != p.size())
        throw InvalidArgument("apply_permutation: length mismatch");
    std::vector<T> out;
    out.reserve(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) out.push_back(xs[p.mapping()[k]]);
    return out;
}

inline TypeChain apply_permutation(const Permutation& p, const TypeChain& chain) {
    return TypeChain{apply_permutation(p, chain.pairs)};
}

}  // namespace check
