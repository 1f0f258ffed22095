#pragma once

// Question decomposition: chain extraction from the LLM in surface order,
// reversal into execution order, type assignment, permutation repair, and
// temperature escalation from 0.0 to 1.0 in 0.1 steps.

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "check/backends.hpp"
#include "check/chain_align.hpp"
#include "check/core.hpp"
#include "check/prompts.hpp"
#include "check/typelib.hpp"

namespace check {

class ExtractionError : public std::runtime_error {
public:
    explicit ExtractionError(const std::string& raw)
        : std::runtime_error("no relations found in LLM response: " + raw) {}
};

class NoEntityError : public std::runtime_error {
public:
    explicit NoEntityError(const std::string& text)
        : std::runtime_error("no entity mention found in question: " + text) {}
};

class DecompositionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DecompositionResult {
    RelationChain chain;          // execution order, post-repair
    std::string initial_entity;
    EntityType entity_type;
    TypeChain type_chain;         // execution order, post-repair
    RepairResult repair;
    double final_temperature = 0.0;
    int attempts = 1;
};

// Prompts with the SRO prompt at the given temperature and parses the
// pipe-delimited response. The raw line is surface order (outermost
// relation first); the returned chain is reversed into execution order.
inline RelationChain extract_chain(const MultiHopQuestion& q, double temperature,
                                   LlmBackend& llm) {
    if (temperature < 0.0 || temperature > 1.0)
        throw InvalidArgument("temperature out of [0,1]");
    CompletionRequest req{prompts::render_chain_extraction(q.text), temperature,
                          kMaxNewTokens, {"\n\n"}};
    std::string raw = llm.complete(req);

    // First line carrying a pipe delimiter is the SRO line.
    std::string sro_line;
    std::stringstream ss(raw);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.find('|') != std::string::npos) {
            sro_line = trim(line);
            break;
        }
    }
    std::vector<std::string> surface;
    std::stringstream fields(sro_line);
    std::string field;
    while (std::getline(fields, field, '|')) {
        std::string r = trim(field);
        if (!r.empty()) surface.push_back(std::move(r));
    }
    if (surface.empty()) throw ExtractionError(raw);
    std::vector<std::string> execution(surface.rbegin(), surface.rend());
    return RelationChain(std::move(execution), sro_line);
}

// The known subject when provided, else the linker's best mention.
inline std::string extract_initial_entity(const MultiHopQuestion& q, EntityLinker& linker) {
    if (q.initial_entity) return *q.initial_entity;
    auto mentions = linker.find_mentions(q.text);
    if (mentions.empty()) throw NoEntityError(q.text);
    return mentions.front().canonical_name;
}

struct DecomposeOptions {
    bool anchor_entity_type = false;   // filter repairs on the initial entity's type
    std::size_t max_chain_length = kMaxChainLength;
};

inline DecompositionResult decompose(const MultiHopQuestion& q, const TemplateLibrary& library,
                                     LlmBackend& llm, EmbeddingBackend& embedder,
                                     EntityLinker& linker,
                                     const DecomposeOptions& opts = {}) {
    std::string entity = extract_initial_entity(q, linker);
    EntityType entity_type = classify_entity(entity, linker, llm);
    std::optional<EntityType> anchor;
    if (opts.anchor_entity_type) anchor = entity_type;

    std::optional<DecompositionResult> best;  // minimal repaired penalty, lowest temperature
    std::vector<std::string> errors;

    for (int step = 0; step <= 10; ++step) {
        double t = step / 10.0;
        RelationChain chain{{"_"}};
        try {
            chain = extract_chain(q, t, llm);
        } catch (const ExtractionError& e) {
            errors.push_back("t=" + std::to_string(t) + ": " + e.what());
            continue;
        }
        if (chain.size() > opts.max_chain_length) {
            errors.push_back("t=" + std::to_string(t) + ": over-length chain (" +
                             std::to_string(chain.size()) + " relations)");
            continue;
        }
        TypeChain types;
        for (const auto& r : chain.relations)
            types.pairs.push_back(library.lookup_relation_types(r, embedder));
        RepairResult repair = repair_chain(types, chain, anchor);

        DecompositionResult result{repair.repaired_relations, entity,     entity_type,
                                   repair.repaired_types,     repair, t,
                                   step + 1};
        if (repair.fully_aligned) return result;
        // Candidates compete on REPAIRED penalty; first (lowest t) wins ties.
        if (!best || result.repair.penalty < best->repair.penalty) best = std::move(result);
    }

    if (best) {
        // Still misaligned after t=1.0: terminate in the 1.0 bin with the
        // minimal-penalty candidate.
        best->attempts = 11;
        best->final_temperature = 1.0;
        return *best;
    }
    std::string msg = "decomposition failed on every attempt:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw DecompositionError(msg);
}

}  // namespace check
