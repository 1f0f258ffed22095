#pragma once

// Evaluation harness: MQuAKE-style dataset ingestion, per-case and
// per-question accuracy, hop/edit/temperature breakdowns, chain-length
// stats, threshold ablation, and the embedding separation study.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "check/backends.hpp"
#include "check/core.hpp"
#include "check/editstore.hpp"
#include "check/resolver.hpp"
#include "check/typelib.hpp"

namespace check {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EditCase {
    std::string case_id;
    std::vector<EditTriple> edits;          // 1..4 per case
    std::vector<std::string> questions;     // exactly 3 paraphrases
    std::string expected_answer;
    std::vector<std::string> answer_aliases;
    int hop_count = 0;
    int edit_count = 0;
};

// Reads a JSON array of case records. Fields read per record:
//   case_id            string or integer
//   questions          array of exactly 3 strings
//   answer             string (the post-edit answer)
//   answer_alias       optional array of strings
//   requested_rewrite  array of {subject, relation, target_new}
//                      (target_new may be a string or {"str": ...})
//   hops               optional integer; defaults to len(orig.triples)
inline std::vector<EditCase> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError("cannot parse dataset " + path + ": " + e.what());
    }
    if (!root.is_array()) throw DatasetError("dataset root must be a JSON array");

    std::vector<EditCase> cases;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const auto& rec = root[i];
        std::string at = "case index " + std::to_string(i);
        try {
            EditCase c;
            if (rec.contains("case_id") && rec["case_id"].is_number())
                c.case_id = std::to_string(rec["case_id"].get<long>());
            else
                c.case_id = rec.value("case_id", std::to_string(i));

            for (const auto& q : rec.at("questions"))
                c.questions.push_back(q.get<std::string>());
            if (c.questions.size() != 3)
                throw DatasetError(at + ": expected exactly 3 questions, got " +
                                   std::to_string(c.questions.size()));

            c.expected_answer = rec.at("answer").get<std::string>();
            if (rec.contains("answer_alias"))
                for (const auto& a : rec["answer_alias"])
                    c.answer_aliases.push_back(a.get<std::string>());

            for (const auto& rw : rec.at("requested_rewrite")) {
                std::string target = rw.at("target_new").is_object()
                                         ? rw["target_new"].at("str").get<std::string>()
                                         : rw.at("target_new").get<std::string>();
                c.edits.emplace_back(rw.at("subject").get<std::string>(),
                                     rw.at("relation").get<std::string>(), target);
            }
            c.edit_count = static_cast<int>(c.edits.size());
            if (c.edit_count < 1 || c.edit_count > 4)
                throw DatasetError(at + ": edit count " + std::to_string(c.edit_count) +
                                   " outside 1..4");

            if (rec.contains("hops"))
                c.hop_count = rec["hops"].get<int>();
            else if (rec.contains("orig") && rec["orig"].contains("triples"))
                c.hop_count = static_cast<int>(rec["orig"]["triples"].size());
            else
                throw DatasetError(at + ": neither 'hops' nor 'orig.triples' present");
            if (c.hop_count < 1) throw DatasetError(at + ": non-positive hop count");

            cases.push_back(std::move(c));
        } catch (const DatasetError&) {
            throw;
        } catch (const std::exception& e) {
            throw DatasetError(at + ": " + e.what());
        }
    }
    return cases;
}

// String/alias equality on the normalized form.
inline bool judge(const std::string& answer, const std::string& expected,
                  const std::vector<std::string>& aliases) {
    if (trim(expected).empty()) throw InvalidArgument("judge: empty expected answer");
    std::string a = normalize(strip_trailing_punct(answer));
    if (a == normalize(strip_trailing_punct(expected))) return true;
    for (const auto& alias : aliases)
        if (a == normalize(strip_trailing_punct(alias))) return true;
    return false;
}

struct AccuracyPair {
    double per_case = 0.0;
    double per_question = 0.0;
};

struct ChainLengthStats {
    long under = 0;
    long correct = 0;
    long over = 0;
};

struct EvalReport {
    double per_case_accuracy = 0.0;
    double per_question_accuracy = 0.0;
    long total_cases = 0;
    long total_questions = 0;
    std::map<int, AccuracyPair> by_hops;
    std::map<int, AccuracyPair> by_edits;
    std::map<double, std::pair<long, double>> by_temperature;  // count, question accuracy
    ChainLengthStats chain_length_stats;
    std::string trace_path;
    std::vector<nlohmann::json> traces;  // one record per question, dataset order
};

struct EvalOptions {
    double tau = 0.8;
    Metric metric = Metric::Cosine;
    EmbedStyle style = EmbedStyle::SubjectRelation;
    bool use_edit_store = true;
    int workers = 1;
    DecomposeOptions decompose;
};

namespace detail {

struct QuestionOutcome {
    bool correct = false;
    std::optional<double> temperature;
    std::optional<int> chain_length;
    nlohmann::json trace;
};

struct CaseOutcome {
    std::vector<QuestionOutcome> questions;
};

inline CaseOutcome run_case(const EditCase& c, const TemplateLibrary& library,
                            LlmBackend& llm, EmbeddingBackend& embedder,
                            EntityLinker& linker, const EvalOptions& opts) {
    // Per-case store: cases must not contaminate each other.
    EditStore store(opts.tau, opts.metric, opts.style);
    for (const auto& e : c.edits) store.ingest(e, linker, embedder);
    const EditStore* store_ptr = opts.use_edit_store ? &store : nullptr;

    CaseOutcome out;
    for (const auto& qtext : c.questions) {
        QuestionOutcome qo;
        try {
            MultiHopQuestion q(qtext);
            ResolutionTrace trace =
                answer(q, store_ptr, library, llm, embedder, linker, opts.decompose);
            qo.correct = judge(trace.answer, c.expected_answer, c.answer_aliases);
            qo.temperature = trace.decomposition->final_temperature;
            qo.chain_length = static_cast<int>(trace.decomposition->chain.size());
            qo.trace = trace_to_json(trace);
        } catch (const ResolutionError& e) {
            qo.trace = trace_to_json(e.partial_trace);
            qo.trace["error"] = e.what();
            if (e.partial_trace.decomposition) {
                qo.temperature = e.partial_trace.decomposition->final_temperature;
                qo.chain_length =
                    static_cast<int>(e.partial_trace.decomposition->chain.size());
            }
        } catch (const std::exception& e) {
            qo.trace = {{"question", qtext}, {"error", e.what()}};
        }
        qo.trace["case_id"] = c.case_id;
        qo.trace["correct"] = qo.correct;
        out.questions.push_back(std::move(qo));
    }
    return out;
}

}  // namespace detail

inline EvalReport evaluate(const std::vector<EditCase>& cases, const TemplateLibrary& library,
                           LlmBackend& llm, EmbeddingBackend& embedder, EntityLinker& linker,
                           const EvalOptions& opts = {}) {
    std::vector<detail::CaseOutcome> outcomes(cases.size());

    int workers = std::max(1, opts.workers);
    if (workers == 1 || cases.size() <= 1) {
        for (std::size_t i = 0; i < cases.size(); ++i)
            outcomes[i] = detail::run_case(cases[i], library, llm, embedder, linker, opts);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= cases.size()) return;
                outcomes[i] = detail::run_case(cases[i], library, llm, embedder, linker, opts);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregation is sequential and order-independent of worker count.
    EvalReport report;
    report.total_cases = static_cast<long>(cases.size());
    long correct_cases = 0, correct_questions = 0;
    std::map<int, std::array<long, 4>> hops_agg, edits_agg;  // cases, correct cases, qs, correct qs
    std::map<double, std::pair<long, long>> temp_agg;        // count, correct

    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto& oc = outcomes[i];
        long case_correct_qs = 0;
        for (const auto& qo : oc.questions) {
            ++report.total_questions;
            if (qo.correct) {
                ++correct_questions;
                ++case_correct_qs;
            }
            if (qo.temperature) {
                auto& [cnt, ok] = temp_agg[*qo.temperature];
                ++cnt;
                if (qo.correct) ++ok;
            }
            if (qo.chain_length) {
                if (*qo.chain_length < c.hop_count)
                    ++report.chain_length_stats.under;
                else if (*qo.chain_length == c.hop_count)
                    ++report.chain_length_stats.correct;
                else
                    ++report.chain_length_stats.over;
            }
            report.traces.push_back(qo.trace);
        }
        bool case_ok = case_correct_qs >= 1;
        if (case_ok) ++correct_cases;
        for (auto* agg : {&hops_agg, &edits_agg}) {
            int key = agg == &hops_agg ? c.hop_count : c.edit_count;
            auto& a = (*agg)[key];
            a[0] += 1;
            a[1] += case_ok ? 1 : 0;
            a[2] += static_cast<long>(oc.questions.size());
            a[3] += case_correct_qs;
        }
    }

    report.per_case_accuracy =
        report.total_cases ? static_cast<double>(correct_cases) / report.total_cases : 0.0;
    report.per_question_accuracy =
        report.total_questions ? static_cast<double>(correct_questions) / report.total_questions
                               : 0.0;
    auto to_pair = [](const std::array<long, 4>& a) {
        return AccuracyPair{a[0] ? static_cast<double>(a[1]) / a[0] : 0.0,
                            a[2] ? static_cast<double>(a[3]) / a[2] : 0.0};
    };
    for (const auto& [k, a] : hops_agg) report.by_hops[k] = to_pair(a);
    for (const auto& [k, a] : edits_agg) report.by_edits[k] = to_pair(a);
    for (const auto& [t, ca] : temp_agg)
        report.by_temperature[t] = {ca.first,
                                    ca.first ? static_cast<double>(ca.second) / ca.first : 0.0};
    return report;
}

// --- threshold ablation --------------------------------------------------

inline std::vector<double> cosine_threshold_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) g.push_back(i * 0.05);
    return g;
}

inline std::vector<double> dot_threshold_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) g.push_back(1.0 + i * 0.05);
    return g;
}

struct AblationRow {
    double threshold;
    double per_case_accuracy;
    double per_question_accuracy;
};

inline std::vector<AblationRow> ablate_threshold(const std::vector<EditCase>& cases,
                                                 const TemplateLibrary& library,
                                                 LlmBackend& llm, EmbeddingBackend& embedder,
                                                 EntityLinker& linker, EvalOptions opts,
                                                 const std::vector<double>& thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw InvalidArgument("ablate_threshold: thresholds must be sorted ascending");
    std::vector<AblationRow> rows;
    for (double tau : thresholds) {
        opts.tau = std::max(tau, 1e-12);  // EditStore requires a positive tau
        EvalReport r = evaluate(cases, library, llm, embedder, linker, opts);
        rows.push_back({tau, r.per_case_accuracy, r.per_question_accuracy});
    }
    return rows;
}

// --- embedding separation study ------------------------------------------

struct SeparationStudy {
    std::vector<double> exact_similarities;    // self-pairs
    std::vector<double> similar_similarities;  // distinct pairs
    std::map<int, long> exact_bins;            // bin index = floor(sim / 0.05)
    std::map<int, long> similar_bins;
};

// All subject x relation pairs embedded under the chosen style; pairwise
// similarities labeled exact (self) vs similar (distinct).
inline SeparationStudy embedding_separation_study(const std::vector<std::string>& subjects,
                                                  const std::vector<std::string>& relations,
                                                  EmbeddingBackend& embedder, EmbedStyle style,
                                                  Metric metric) {
    if (subjects.empty() || relations.empty())
        throw InvalidArgument("separation study needs non-empty subject and relation lists");
    std::vector<std::vector<double>> vecs;
    for (const auto& s : subjects)
        for (const auto& r : relations) vecs.push_back(embedder.embed(render_key(s, r, style)));

    SeparationStudy study;
    auto bin = [](double sim) { return static_cast<int>(std::floor(sim / 0.05 + 1e-12)); };
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        for (std::size_t j = i; j < vecs.size(); ++j) {
            double sim = similarity(vecs[i], vecs[j], metric);
            if (i == j) {
                study.exact_similarities.push_back(sim);
                ++study.exact_bins[bin(sim)];
            } else {
                study.similar_similarities.push_back(sim);
                ++study.similar_bins[bin(sim)];
            }
        }
    }
    return study;
}

// --- report output -------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["per_case_accuracy"] = r.per_case_accuracy;
    j["per_question_accuracy"] = r.per_question_accuracy;
    j["total_cases"] = r.total_cases;
    j["total_questions"] = r.total_questions;
    nlohmann::json hops = nlohmann::json::object();
    for (const auto& [k, v] : r.by_hops)
        hops[std::to_string(k)] = {{"per_case", v.per_case}, {"per_question", v.per_question}};
    j["by_hops"] = std::move(hops);
    nlohmann::json edits = nlohmann::json::object();
    for (const auto& [k, v] : r.by_edits)
        edits[std::to_string(k)] = {{"per_case", v.per_case}, {"per_question", v.per_question}};
    j["by_edits"] = std::move(edits);
    nlohmann::json temps = nlohmann::json::object();
    for (const auto& [t, v] : r.by_temperature) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%.1f", t);
        temps[buf] = {{"count", v.first}, {"accuracy", v.second}};
    }
    j["by_temperature"] = std::move(temps);
    j["chain_length"] = {{"under", r.chain_length_stats.under},
                         {"correct", r.chain_length_stats.correct},
                         {"over", r.chain_length_stats.over}};
    if (!r.trace_path.empty()) j["traces"] = r.trace_path;
    return j;
}

inline std::string report_table(const EvalReport& r) {
    std::ostringstream out;
    char line[160];
    out << "Accuracy Type        Case   Question\n";
    std::snprintf(line, sizeof(line), "%-18s %6.2f %9.2f\n", "overall",
                  100.0 * r.per_case_accuracy, 100.0 * r.per_question_accuracy);
    out << line;
    for (const auto& [k, v] : r.by_hops) {
        std::snprintf(line, sizeof(line), "%d-hop%-13s %6.2f %9.2f\n", k, "",
                      100.0 * v.per_case, 100.0 * v.per_question);
        out << line;
    }
    for (const auto& [k, v] : r.by_edits) {
        std::snprintf(line, sizeof(line), "%d-edit%-12s %6.2f %9.2f\n", k, "",
                      100.0 * v.per_case, 100.0 * v.per_question);
        out << line;
    }
    return out.str();
}

inline void write_traces(const EvalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    for (const auto& t : r.traces) out << t.dump() << "\n";
}

}  // namespace check
