#pragma once

// Pluggable backend interfaces (LLM completion, text embedding, entity
// linking) plus the deterministic mock implementations used by tests and
// fixtures. The remote HTTP clients live in remote.hpp.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "check/core.hpp"

namespace check {

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kMaxNewTokens = 50;  // hard cap for every pipeline call

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_new_tokens = kMaxNewTokens;
    std::vector<std::string> stop_sequences;

    void validate() const {
        if (temperature < 0.0 || temperature > 1.0)
            throw InvalidArgument("temperature out of [0,1]");
        if (max_new_tokens <= 0) throw InvalidArgument("max_new_tokens must be positive");
    }
};

struct LinkResult {
    std::string canonical_name;
    bool is_person = false;
    double confidence = 0.0;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const CompletionRequest& req) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    // Returns a unit-norm vector, deterministic per text.
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::size_t dimension() const = 0;
};

class EntityLinker {
public:
    virtual ~EntityLinker() = default;
    virtual LinkResult link(const std::string& mention) = 0;
    // Mentions found in free text, best first.
    virtual std::vector<LinkResult> find_mentions(const std::string& text) = 0;
};

// --- scripted LLM mock ---------------------------------------------------

struct ScriptEntry {
    std::string pattern;                  // exact prompt, or prefix if prefix==true
    bool prefix = false;
    std::optional<double> temperature;    // matches any temperature when absent
    std::string response;
};

class ScriptedLlm : public LlmBackend {
public:
    ScriptedLlm() = default;
    explicit ScriptedLlm(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {}

    void add(ScriptEntry e) { entries_.push_back(std::move(e)); }

    void add_exact(std::string prompt, std::string response,
                   std::optional<double> temperature = std::nullopt) {
        entries_.push_back({std::move(prompt), false, temperature, std::move(response)});
    }

    std::string complete(const CompletionRequest& req) override {
        req.validate();
        // Specificity order: exact+temp, exact, prefix+temp, prefix.
        const ScriptEntry* best = nullptr;
        int best_rank = 5;
        for (const auto& e : entries_) {
            bool text_match = e.prefix ? req.prompt.rfind(e.pattern, 0) == 0
                                       : req.prompt == e.pattern;
            if (!text_match) continue;
            if (e.temperature && std::abs(*e.temperature - req.temperature) > 1e-9) continue;
            int rank = (e.prefix ? 2 : 0) + (e.temperature ? 0 : 1);
            if (rank < best_rank) {
                best = &e;
                best_rank = rank;
            } else if (rank == best_rank && best && e.response != best->response) {
                throw BackendError("ambiguous script entries for prompt: " +
                                   req.prompt.substr(0, 120));
            }
        }
        if (!best)
            throw BackendError("unscripted prompt (t=" + std::to_string(req.temperature) +
                               "): ..." + req.prompt.substr(req.prompt.size() > 160
                                                                ? req.prompt.size() - 160
                                                                : 0));
        return best->response;
    }

    const std::vector<ScriptEntry>& entries() const { return entries_; }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : entries_) {
            nlohmann::json j{{"pattern", e.pattern}, {"response", e.response}};
            if (e.prefix) j["prefix"] = true;
            if (e.temperature) j["temperature"] = *e.temperature;
            arr.push_back(std::move(j));
        }
        return arr;
    }

    static ScriptedLlm from_json(const nlohmann::json& arr) {
        std::vector<ScriptEntry> entries;
        for (const auto& j : arr) {
            ScriptEntry e;
            e.pattern = j.at("pattern").get<std::string>();
            e.response = j.at("response").get<std::string>();
            e.prefix = j.value("prefix", false);
            if (j.contains("temperature")) e.temperature = j["temperature"].get<double>();
            entries.push_back(std::move(e));
        }
        return ScriptedLlm(std::move(entries));
    }

    static ScriptedLlm load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw BackendError("cannot open LLM script file: " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw BackendError("cannot write LLM script file: " + path);
        out << to_json().dump(2) << "\n";
    }

private:
    std::vector<ScriptEntry> entries_;
};

// --- hash embedder mock --------------------------------------------------
//
// Bag-of-tokens signed hashing: each lowercased alphanumeric token lands in
// a bucket with a sign, counts accumulate, the result is L2-normalized.
// Identical strings embed identically; distinct token multisets are
// distinct vectors with overwhelming probability at dim 64.

class HashEmbedder : public EmbeddingBackend {
public:
    explicit HashEmbedder(std::size_t dim = 64) : dim_(dim) {
        if (dim_ == 0) throw InvalidArgument("embedding dimension must be positive");
    }

    std::vector<double> embed(const std::string& text) override {
        if (trim(text).empty()) throw BackendError("embed: empty text");
        std::vector<double> v(dim_, 0.0);
        bool any = false;
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            std::uint64_t h = fnv1a(token);
            std::size_t bucket = static_cast<std::size_t>(h % dim_);
            double sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
            v[bucket] += sign;
            token.clear();
            any = true;
        };
        for (unsigned char c : text) {
            if (std::isalnum(c))
                token += static_cast<char>(std::tolower(c));
            else
                flush();
        }
        flush();
        if (!any) {
            // No alphanumeric content; hash raw bytes so the contract holds.
            std::uint64_t h = fnv1a(text);
            v[static_cast<std::size_t>(h % dim_)] = 1.0;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            // Signed counts cancelled exactly; fall back to a single spike.
            v.assign(dim_, 0.0);
            v[static_cast<std::size_t>(fnv1a(text) % dim_)] = 1.0;
            norm = 1.0;
        }
        for (double& x : v) x /= norm;
        return v;
    }

    std::size_t dimension() const override { return dim_; }

    // (bucket, sign) slot a lowercased token lands in; fixture generators
    // use this to pick token names with collision-free slots.
    static std::pair<std::size_t, int> token_slot(std::string_view token, std::size_t dim) {
        std::string low(token);
        for (char& c : low)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::uint64_t h = fnv1a(low);
        return {static_cast<std::size_t>(h % dim), ((h >> 32) & 1u) ? 1 : -1};
    }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    std::size_t dim_;
};

// --- alias-table linker mock ---------------------------------------------

class AliasLinker : public EntityLinker {
public:
    AliasLinker() = default;

    void add_alias(const std::string& alias, const std::string& canonical, bool is_person,
                   double confidence = 0.9) {
        rows_.push_back({alias, canonical, is_person, confidence});
        by_alias_[normalize(alias)] = rows_.size() - 1;
    }

    LinkResult link(const std::string& mention) override {
        auto it = by_alias_.find(normalize(mention));
        if (it == by_alias_.end())
            return {mention, false, 0.0};  // unknowns degrade gracefully
        const Row& r = rows_[it->second];
        return {r.canonical, r.is_person, r.confidence};
    }

    std::vector<LinkResult> find_mentions(const std::string& text) override {
        std::string hay = normalize(text);
        std::vector<std::pair<const Row*, std::size_t>> found;
        for (const auto& r : rows_) {
            std::string needle = normalize(r.alias);
            if (!needle.empty() && hay.find(needle) != std::string::npos)
                found.push_back({&r, needle.size()});
        }
        std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
            if (a.first->confidence != b.first->confidence)
                return a.first->confidence > b.first->confidence;
            return a.second > b.second;  // longer mention wins
        });
        std::vector<LinkResult> out;
        for (const auto& [r, len] : found)
            out.push_back({r->canonical, r->is_person, r->confidence});
        return out;
    }

    // TSV rows: alias <TAB> canonical <TAB> person|other [<TAB> confidence]
    static AliasLinker load_tsv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw BackendError("cannot open alias table: " + path);
        AliasLinker linker;
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string f;
            while (std::getline(ss, f, '\t')) fields.push_back(f);
            if (fields.size() < 3)
                throw BackendError("malformed alias row: " + line);
            double conf = fields.size() > 3 ? std::stod(fields[3]) : 0.9;
            linker.add_alias(fields[0], fields[1], normalize(fields[2]) == "person", conf);
        }
        return linker;
    }

    void save_tsv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw BackendError("cannot write alias table: " + path);
        for (const auto& r : rows_)
            out << r.alias << "\t" << r.canonical << "\t" << (r.is_person ? "person" : "other")
                << "\t" << r.confidence << "\n";
    }

private:
    struct Row {
        std::string alias;
        std::string canonical;
        bool is_person;
        double confidence;
    };
    std::vector<Row> rows_;
    std::unordered_map<std::string, std::size_t> by_alias_;
};

}  // namespace check
