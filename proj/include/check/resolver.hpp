#pragma once

// Chain traversal: each hop consults the edit store first and falls back
// to LLM question generation plus answering at temperature 0.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "check/backends.hpp"
#include "check/core.hpp"
#include "check/decompose.hpp"
#include "check/editstore.hpp"
#include "check/prompts.hpp"

namespace check {

enum class HopSource { Edit, Llm };

struct HopRecord {
    std::string entity_in;
    std::string relation;
    std::string entity_out;
    HopSource source = HopSource::Llm;
    std::optional<double> similarity;          // present iff source == Edit
    std::optional<std::string> generated_question;  // present iff source == Llm
    std::optional<TypeSet> expected_output;    // recorded, not enforced
};

struct ResolutionTrace {
    MultiHopQuestion question;
    std::optional<DecompositionResult> decomposition;
    std::vector<HopRecord> hops;
    std::string answer;
};

class HopResolutionError : public std::runtime_error {
public:
    HopResolutionError(const std::string& entity, const std::string& relation)
        : std::runtime_error("LLM produced no answer for hop (" + entity + ", " + relation +
                             ")") {}
};

// Carries the partial trace accumulated before the failure.
class ResolutionError : public std::runtime_error {
public:
    ResolutionError(const std::string& what, ResolutionTrace partial)
        : std::runtime_error(what), partial_trace(std::move(partial)) {}
    ResolutionTrace partial_trace;
};

// Trailing punctuation has no place in an entity name.
inline std::string strip_trailing_punct(std::string s) {
    s = trim(s);
    while (!s.empty() && std::string(".,;:!?").find(s.back()) != std::string::npos)
        s.pop_back();
    return trim(s);
}

// Text after the first "Answer:" when present, else the first non-empty line.
inline std::string parse_llm_answer(const std::string& raw) {
    auto pos = raw.find("Answer:");
    std::string rest = pos != std::string::npos ? raw.substr(pos + 7) : raw;
    std::stringstream ss(rest);
    std::string line;
    while (std::getline(ss, line)) {
        std::string t = strip_trailing_punct(trim(line));
        if (!t.empty()) return t;
    }
    return "";
}

inline std::string parse_generated_question(const std::string& raw) {
    std::stringstream ss(raw);
    std::string line;
    while (std::getline(ss, line)) {
        std::string t = trim(line);
        if (t.rfind("Question:", 0) == 0) t = trim(t.substr(9));
        if (!t.empty()) return t;
    }
    return "";
}

// Edit consultation strictly precedes the LLM fallback. `store` may be
// null (edit path disabled).
inline HopRecord resolve_hop(const std::string& entity, const std::string& relation,
                             const EditStore* store, LlmBackend& llm,
                             EmbeddingBackend& embedder, EntityLinker& linker) {
    if (trim(entity).empty() || trim(relation).empty())
        throw InvalidArgument("resolve_hop: empty entity or relation");
    if (store) {
        auto hit = store->retrieve(entity, relation, linker, embedder);
        if (hit)
            return {entity, relation, hit->object, HopSource::Edit, hit->similarity,
                    std::nullopt, std::nullopt};
    }
    std::string question;
    for (int attempt = 0; attempt < 2 && question.empty(); ++attempt) {
        CompletionRequest qreq{prompts::render_triple_to_question(entity, relation), 0.0,
                               kMaxNewTokens, {"\n\n"}};
        question = parse_generated_question(llm.complete(qreq));
    }
    if (question.empty()) throw HopResolutionError(entity, relation);

    std::string answer;
    for (int attempt = 0; attempt < 2 && answer.empty(); ++attempt) {
        CompletionRequest areq{prompts::render_answer_question(question), 0.0, kMaxNewTokens,
                               {"\n\n"}};
        answer = parse_llm_answer(llm.complete(areq));
    }
    if (answer.empty()) throw HopResolutionError(entity, relation);
    return {entity, relation, answer, HopSource::Llm, std::nullopt, question, std::nullopt};
}

// Decomposes, then folds resolve_hop over the execution-ordered chain.
inline ResolutionTrace answer(const MultiHopQuestion& q, const EditStore* store,
                              const TemplateLibrary& library, LlmBackend& llm,
                              EmbeddingBackend& embedder, EntityLinker& linker,
                              const DecomposeOptions& opts = {}) {
    ResolutionTrace trace{q, std::nullopt, {}, ""};
    try {
        trace.decomposition = decompose(q, library, llm, embedder, linker, opts);
    } catch (const std::exception& e) {
        throw ResolutionError(e.what(), std::move(trace));
    }
    std::string current = trace.decomposition->initial_entity;
    const auto& chain = trace.decomposition->chain;
    const auto& types = trace.decomposition->type_chain;
    for (std::size_t k = 0; k < chain.size(); ++k) {
        try {
            HopRecord hop = resolve_hop(current, chain.relations[k], store, llm, embedder,
                                        linker);
            hop.expected_output = types.pairs[k].second;
            current = hop.entity_out;
            trace.hops.push_back(std::move(hop));
        } catch (const std::exception& e) {
            throw ResolutionError(e.what(), std::move(trace));
        }
    }
    trace.answer = current;
    return trace;
}

// --- trace serialization (line-delimited JSON records) -------------------

inline nlohmann::json trace_to_json(const ResolutionTrace& trace) {
    nlohmann::json j;
    j["question"] = trace.question.text;
    if (trace.decomposition) {
        const auto& d = *trace.decomposition;
        nlohmann::json types = nlohmann::json::array();
        for (const auto& [in, out] : d.type_chain.pairs)
            types.push_back({{"in", in.to_string()}, {"out", out.to_string()}});
        j["decomposition"] = {
            {"chain", d.chain.relations},
            {"surface_order_raw", d.chain.surface_order_raw},
            {"initial_entity", d.initial_entity},
            {"entity_type", to_string(d.entity_type)},
            {"type_chain", std::move(types)},
            {"permutation", d.repair.permutation.mapping()},
            {"penalty", d.repair.penalty},
            {"cost", d.repair.cost},
            {"fully_aligned", d.repair.fully_aligned},
            {"final_temperature", d.final_temperature},
            {"attempts", d.attempts},
        };
    }
    nlohmann::json hops = nlohmann::json::array();
    for (const auto& h : trace.hops) {
        nlohmann::json hj{{"entity_in", h.entity_in},
                          {"relation", h.relation},
                          {"entity_out", h.entity_out},
                          {"source", h.source == HopSource::Edit ? "edit" : "llm"}};
        if (h.similarity) hj["similarity"] = *h.similarity;
        if (h.generated_question) hj["generated_question"] = *h.generated_question;
        if (h.expected_output) hj["expected_output_types"] = h.expected_output->to_string();
        hops.push_back(std::move(hj));
    }
    j["hops"] = std::move(hops);
    j["answer"] = trace.answer;
    return j;
}

}  // namespace check
