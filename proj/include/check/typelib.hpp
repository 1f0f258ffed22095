#pragma once

// Relation template library and entity typing. Relations take the types of
// the nearest pre-characterized template by cosine similarity; entities are
// typed via the entity linker (person or not) and, failing that, the
// place-vs-thing LLM prompt.

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "check/backends.hpp"
#include "check/core.hpp"
#include "check/prompts.hpp"

namespace check {

class TypelibError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RelationTemplate {
    std::string phrase;
    TypeSet input_types;
    TypeSet output_types;
    std::vector<double> embedding;  // unit-norm
};

struct LabeledTemplate {
    std::string phrase;
    TypeSet input_types;
    TypeSet output_types;
};

class TemplateLibrary {
public:
    static TemplateLibrary build(const std::vector<LabeledTemplate>& labeled,
                                 EmbeddingBackend& embedder) {
        if (labeled.empty()) throw TypelibError("template library input is empty");
        TemplateLibrary lib;
        std::unordered_set<std::string> seen;
        for (const auto& t : labeled) {
            std::string key = normalize(t.phrase);
            if (key.empty()) throw TypelibError("template phrase is empty");
            if (!seen.insert(key).second)
                throw TypelibError("duplicate template phrase: " + t.phrase);
            std::vector<double> v = embedder.embed(t.phrase);
            if (lib.embedding_dim_ == 0) lib.embedding_dim_ = v.size();
            if (v.size() != lib.embedding_dim_)
                throw TypelibError("embedding dimension mismatch for: " + t.phrase);
            normalize_l2(v);
            lib.templates_.push_back({t.phrase, t.input_types, t.output_types, std::move(v)});
        }
        return lib;
    }

    // Types of the template whose embedding is most similar to the query
    // relation; ties break by insertion order.
    std::pair<TypeSet, TypeSet> lookup_relation_types(const std::string& relation,
                                                      EmbeddingBackend& embedder) const {
        if (templates_.empty()) throw TypelibError("template library is empty");
        std::vector<double> q = embedder.embed(relation);
        normalize_l2(q);
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < templates_.size(); ++i) {
            double sim = 0.0;
            for (std::size_t d = 0; d < q.size(); ++d)
                sim += q[d] * templates_[i].embedding[d];
            if (sim > best_sim) {
                best_sim = sim;
                best = i;
            }
        }
        return {templates_[best].input_types, templates_[best].output_types};
    }

    std::size_t size() const { return templates_.size(); }
    std::size_t embedding_dim() const { return embedding_dim_; }
    const std::vector<RelationTemplate>& templates() const { return templates_; }

    // TSV rows: phrase <TAB> input types (comma-joined) <TAB> output types
    static std::vector<LabeledTemplate> load_labels_tsv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw TypelibError("cannot open template file: " + path);
        std::vector<LabeledTemplate> out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string f;
            while (std::getline(ss, f, '\t')) fields.push_back(f);
            if (fields.size() != 3)
                throw TypelibError("template line " + std::to_string(lineno) +
                                   ": expected 3 tab-separated fields");
            out.push_back({trim(fields[0]), parse_type_set(fields[1], lineno),
                           parse_type_set(fields[2], lineno)});
        }
        return out;
    }

    static void save_labels_tsv(const std::vector<LabeledTemplate>& labels,
                                const std::string& path) {
        std::ofstream out(path);
        if (!out) throw TypelibError("cannot write template file: " + path);
        for (const auto& t : labels)
            out << t.phrase << "\t" << t.input_types.to_string() << "\t"
                << t.output_types.to_string() << "\n";
    }

private:
    static void normalize_l2(std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n == 0.0) throw TypelibError("zero embedding vector");
        for (double& x : v) x /= n;
    }

    static TypeSet parse_type_set(const std::string& field, std::size_t lineno) {
        std::vector<EntityType> types;
        std::stringstream ss(field);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            auto t = entity_type_from_string(normalize(tok));
            if (!t)
                throw TypelibError("template line " + std::to_string(lineno) +
                                   ": unknown type '" + tok + "'");
            types.push_back(*t);
        }
        if (types.empty())
            throw TypelibError("template line " + std::to_string(lineno) + ": empty type set");
        return TypeSet(types.begin(), types.end());
    }

    std::vector<RelationTemplate> templates_;
    std::size_t embedding_dim_ = 0;
};

class ClassificationError : public std::runtime_error {
public:
    explicit ClassificationError(const std::string& entity, const std::string& raw)
        : std::runtime_error("cannot classify entity '" + entity +
                             "'; LLM response: " + raw) {}
};

// Person via the linker; otherwise place-vs-thing via the LLM at
// temperature 0, retried once on unparseable output.
inline EntityType classify_entity(const std::string& entity, EntityLinker& linker,
                                  LlmBackend& llm) {
    if (trim(entity).empty()) throw InvalidArgument("classify_entity: empty entity");
    if (linker.link(entity).is_person) return EntityType::Person;

    CompletionRequest req{prompts::render_place_or_thing(entity), 0.0, kMaxNewTokens, {}};
    std::string raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
        raw = llm.complete(req);
        std::string low = normalize(raw);
        auto p = low.find("place");
        auto t = low.find("thing");
        if (p != std::string::npos && (t == std::string::npos || p < t))
            return EntityType::Place;
        if (t != std::string::npos) return EntityType::Thing;
    }
    throw ClassificationError(entity, raw);
}

}  // namespace check
