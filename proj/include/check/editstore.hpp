#pragma once

// Edit memory: triples stored as canonical strings plus unit-norm
// subject-relation embeddings, retrieved per hop by linker narrowing with
// an exhaustive-scan fallback and a strict similarity threshold.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "check/backends.hpp"
#include "check/core.hpp"

namespace check {

enum class Metric { Cosine, Dot };
enum class EmbedStyle { SubjectRelation, Cloze };

inline const char* to_string(Metric m) { return m == Metric::Cosine ? "cosine" : "dot"; }
inline const char* to_string(EmbedStyle s) {
    return s == EmbedStyle::SubjectRelation ? "sr" : "cloze";
}

inline std::string sr_string(const std::string& subject, const std::string& relation) {
    if (trim(subject).empty() || trim(relation).empty())
        throw InvalidArgument("sr_string: empty field");
    return subject + ", " + relation;
}

inline std::string cloze_string(const std::string& subject, const std::string& relation) {
    if (trim(subject).empty() || trim(relation).empty())
        throw InvalidArgument("cloze_string: empty field");
    return "The " + relation + " of " + subject + " is";
}

inline std::string render_key(const std::string& subject, const std::string& relation,
                              EmbedStyle style) {
    return style == EmbedStyle::SubjectRelation ? sr_string(subject, relation)
                                                : cloze_string(subject, relation);
}

// Cosine is clamped to [-1, 1] so exact self-matches never exceed 1 by a
// rounding hair; Eq. 7's strict inequality at tau = 1.0 depends on it.
inline double similarity(const std::vector<double>& a, const std::vector<double>& b,
                         Metric metric) {
    if (a.size() != b.size()) throw InvalidArgument("similarity: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    if (metric == Metric::Dot) return dot;
    double na = 0.0, nb = 0.0;
    for (double x : a) na += x * x;
    for (double x : b) nb += x * x;
    if (na == 0.0 || nb == 0.0)
        throw InvalidArgument("similarity: cosine of zero vector is undefined");
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::max(-1.0, std::min(1.0, c));
}

struct StoredEdit {
    EditTriple triple;
    std::string sr_text;
    std::vector<double> embedding;  // unit-norm
};

struct RetrievalHit {
    std::string object;
    double similarity;
    std::size_t edit_index;
};

class EditStore {
public:
    explicit EditStore(double tau = 0.8, Metric metric = Metric::Cosine,
                       EmbedStyle style = EmbedStyle::SubjectRelation)
        : tau_(tau), metric_(metric), style_(style) {
        if (tau_ <= 0.0) throw InvalidArgument("tau must be positive");
        if (metric_ == Metric::Cosine && tau_ > 1.0)
            throw InvalidArgument("cosine tau must be in (0,1]");
    }

    void ingest(EditTriple t, EntityLinker& linker, EmbeddingBackend& embedder) {
        LinkResult lr = linker.link(t.subject);
        if (lr.confidence > 0.0) t.canonical_subject = lr.canonical_name;
        std::string key = render_key(t.effective_subject(), t.relation, style_);
        std::vector<double> v = embedder.embed(key);
        normalize_l2(v);

        std::string dedup = normalize(t.effective_subject()) + "\t" + normalize(t.relation);
        auto dup = dedup_.find(dedup);
        if (dup != dedup_.end()) {
            warnings_.push_back("duplicate edit for (" + t.effective_subject() + ", " +
                                t.relation + "); replaced with latest");
            edits_[dup->second] = {std::move(t), std::move(key), std::move(v)};
            return;
        }
        edits_.push_back({std::move(t), std::move(key), std::move(v)});
        dedup_[dedup] = edits_.size() - 1;
        if (edits_.back().triple.canonical_subject)
            subject_index_[normalize(*edits_.back().triple.canonical_subject)].push_back(
                edits_.size() - 1);
    }

    // Narrowed-first retrieval: the linker-canonicalized entity selects its
    // indexed edits; a hit there that clears tau short-circuits, otherwise
    // the full store is scanned so a failed canonicalization cannot hide an
    // edit. Ties break by lowest insertion index.
    std::optional<RetrievalHit> retrieve(const std::string& entity, const std::string& relation,
                                         EntityLinker& linker,
                                         EmbeddingBackend& embedder) const {
        if (edits_.empty()) return std::nullopt;
        LinkResult lr = linker.link(entity);
        const std::string& canonical = lr.confidence > 0.0 ? lr.canonical_name : entity;
        std::vector<double> q = embedder.embed(render_key(canonical, relation, style_));
        normalize_l2(q);

        auto narrowed = subject_index_.find(normalize(canonical));
        if (narrowed != subject_index_.end()) {
            auto hit = best_of(q, narrowed->second);
            if (hit && hit->similarity > tau_) return hit;
        }
        auto hit = best_of_all(q);
        if (hit && hit->similarity > tau_) return hit;
        return std::nullopt;
    }

    // Exhaustive-only variant, used to cross-check the narrowed path.
    std::optional<RetrievalHit> retrieve_exhaustive(const std::string& entity,
                                                    const std::string& relation,
                                                    EntityLinker& linker,
                                                    EmbeddingBackend& embedder) const {
        if (edits_.empty()) return std::nullopt;
        LinkResult lr = linker.link(entity);
        const std::string& canonical = lr.confidence > 0.0 ? lr.canonical_name : entity;
        std::vector<double> q = embedder.embed(render_key(canonical, relation, style_));
        normalize_l2(q);
        auto hit = best_of_all(q);
        if (hit && hit->similarity > tau_) return hit;
        return std::nullopt;
    }

    std::size_t size() const { return edits_.size(); }
    double tau() const { return tau_; }
    Metric metric() const { return metric_; }
    EmbedStyle style() const { return style_; }
    const std::vector<StoredEdit>& edits() const { return edits_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const std::unordered_map<std::string, std::vector<std::size_t>>& subject_index() const {
        return subject_index_;
    }

    // TSV rows: subject <TAB> relation <TAB> object
    static std::vector<EditTriple> load_edits_tsv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open edits file: " + path);
        std::vector<EditTriple> out;
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
                throw std::runtime_error("edits line " + std::to_string(lineno) +
                                         ": expected 3 tab-separated fields");
            out.emplace_back(fields[0], fields[1], fields[2]);
        }
        return out;
    }

private:
    std::optional<RetrievalHit> best_of(const std::vector<double>& q,
                                        const std::vector<std::size_t>& indices) const {
        std::optional<RetrievalHit> best;
        for (std::size_t i : indices) {
            double sim = similarity(q, edits_[i].embedding, metric_);
            if (!best || sim > best->similarity)
                best = RetrievalHit{edits_[i].triple.object, sim, i};
        }
        return best;
    }

    std::optional<RetrievalHit> best_of_all(const std::vector<double>& q) const {
        std::optional<RetrievalHit> best;
        for (std::size_t i = 0; i < edits_.size(); ++i) {
            double sim = similarity(q, edits_[i].embedding, metric_);
            if (!best || sim > best->similarity)
                best = RetrievalHit{edits_[i].triple.object, sim, i};
        }
        return best;
    }

    static void normalize_l2(std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n == 0.0) throw InvalidArgument("zero embedding vector");
        for (double& x : v) x /= n;
    }

    std::vector<StoredEdit> edits_;
    std::unordered_map<std::string, std::vector<std::size_t>> subject_index_;
    std::unordered_map<std::string, std::size_t> dedup_;
    double tau_;
    Metric metric_;
    EmbedStyle style_;
    std::vector<std::string> warnings_;
};

}  // namespace check
