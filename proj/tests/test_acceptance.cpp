// Acceptance gate: one pass/fail line per contract criterion, with the
// tolerances and time budgets pinned in the assertions themselves.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "check/chain_align.hpp"
#include "check/decompose.hpp"
#include "check/editstore.hpp"
#include "check/eval.hpp"
#include "check/fixtures.hpp"
#include "oracle.hpp"

using namespace check;

namespace {

bool announce(const char* name, bool ok) {
    std::printf("[acceptance] %-58s %s\n", name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    return ok;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Token names whose embedder buckets are all distinct (sign ignored):
// bag-of-token vectors then overlap exactly on shared tokens, with no
// accidental collisions or sign cancellations.
std::vector<std::string> bucket_distinct_tokens(const std::string& stem, int n,
                                                std::set<std::size_t>& buckets,
                                                std::size_t dim) {
    std::vector<std::string> out;
    for (int i = 0; static_cast<int>(out.size()) < n; ++i) {
        std::string tok = stem + std::to_string(i);
        if (buckets.insert(HashEmbedder::token_slot(tok, dim).first).second)
            out.push_back(tok);
    }
    return out;
}

class ExtractionCounter : public LlmBackend {
public:
    explicit ExtractionCounter(LlmBackend& inner) : inner_(inner) {}
    std::string complete(const CompletionRequest& req) override {
        if (req.prompt.rfind(std::string(prompts::kChainExtraction), 0) == 0) ++extractions;
        return inner_.complete(req);
    }
    int extractions = 0;

private:
    LlmBackend& inner_;
};

}  // namespace

TEST_CASE("alignment penalty equals the independent pairwise oracle") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 gen(101);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        auto pairs = oracle::random_chain(gen, 2 + gen() % 5);  // lengths 2..6
        if (alignment_penalty(TypeChain{pairs}) != oracle::alignment_penalty(pairs))
            ok = false;
    }
    ok = ok && seconds_since(start) < 1.0;
    REQUIRE(announce("alignment penalty oracle equivalence (1000 chains)", ok));
}

TEST_CASE("repair equals exhaustive enumeration with the stated sort keys") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 gen(103);
    bool ok = true;
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 1 + gen() % 6;
        auto pairs = oracle::random_chain(gen, n);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < n; ++k) names.push_back("rel" + std::to_string(k));
        RepairResult got = repair_chain(TypeChain{pairs}, RelationChain(names));
        oracle::RepairChoice want = oracle::repair(pairs);
        if (got.permutation.mapping() != want.mapping || got.penalty != want.penalty ||
            got.cost != want.cost || got.fully_aligned != (want.penalty == 0))
            ok = false;
    }
    ok = ok && seconds_since(start) < 10.0;
    REQUIRE(announce("repair oracle equivalence (500 chains, len <= 6)", ok));
}

TEST_CASE("permutation cost equals the dense matrix diagonal form") {
    auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::vector<std::vector<std::size_t>> all4;
    oracle::enumerate_permutations(4, all4);
    for (const auto& m : all4)
        if (permutation_cost(Permutation(m)) != oracle::permutation_cost(m)) ok = false;
    std::mt19937 gen(107);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 5 + gen() % 4;  // sizes 5..8
        std::vector<std::size_t> m(n);
        std::iota(m.begin(), m.end(), 0);
        std::shuffle(m.begin(), m.end(), gen);
        if (permutation_cost(Permutation(m)) != oracle::permutation_cost(m)) ok = false;
    }
    ok = ok && seconds_since(start) < 1.0;
    REQUIRE(announce("permutation cost matches dense matrix (4! + 200 random)", ok));
}

TEST_CASE("canonical misaligned pair repairs to penalty zero at cost two") {
    TypeChain types{{{TypeSet{EntityType::Person}, TypeSet{EntityType::Place}},
                     {TypeSet{EntityType::Thing}, TypeSet{EntityType::Person}}}};
    RelationChain rels({"born in", "creator of"});
    bool ok = alignment_penalty(types) == 1;
    RepairResult r = repair_chain(types, rels);
    ok = ok && r.penalty == 0 && r.cost == 2 && r.fully_aligned &&
         r.permutation.mapping() == std::vector<std::size_t>{1, 0} &&
         r.repaired_relations.relations ==
             std::vector<std::string>{"creator of", "born in"};
    REQUIRE(announce("two-relation misaligned chain repair (penalty 1 -> 0, cost 2)", ok));
}

TEST_CASE("uniquely alignable shuffled chains are always recovered") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 gen(109);
    bool ok = true;
    int recovered = 0;
    while (recovered < 200) {
        std::size_t n = 2 + gen() % 5;  // lengths 2..6
        std::vector<EntityType> path;
        for (std::size_t k = 0; k <= n; ++k)
            path.push_back(static_cast<EntityType>(gen() % 3));
        std::vector<std::pair<TypeSet, TypeSet>> pairs;
        for (std::size_t k = 1; k <= n; ++k)
            pairs.emplace_back(TypeSet{path[k - 1]}, TypeSet{path[k]});

        bool distinct = true;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (pairs[a] == pairs[b]) distinct = false;
        if (!distinct) continue;
        std::vector<std::vector<std::size_t>> perms;
        oracle::enumerate_permutations(n, perms);
        int zeros = 0;
        for (const auto& m : perms) {
            std::vector<std::pair<TypeSet, TypeSet>> permuted;
            for (std::size_t k = 0; k < n; ++k) permuted.push_back(pairs[m[k]]);
            if (oracle::alignment_penalty(permuted) == 0) ++zeros;
        }
        if (zeros != 1) continue;

        std::vector<std::size_t> shuffle(n);
        std::iota(shuffle.begin(), shuffle.end(), 0);
        std::shuffle(shuffle.begin(), shuffle.end(), gen);
        Permutation s(shuffle);
        std::vector<std::string> names;
        for (std::size_t k = 0; k < n; ++k) names.push_back("rel" + std::to_string(k));
        RepairResult r = repair_chain(apply_permutation(s, TypeChain{pairs}),
                                      RelationChain(apply_permutation(s, names)));
        if (!r.fully_aligned || r.repaired_types.pairs != pairs ||
            r.repaired_relations.relations != names)
            ok = false;
        ++recovered;
    }
    ok = ok && seconds_since(start) < 5.0;
    REQUIRE(announce("shuffle recovery on 200 uniquely alignable chains", ok));
}

TEST_CASE("temperature escalation and fallback behave exactly as scripted") {
    HashEmbedder emb;
    TemplateLibrary lib = TemplateLibrary::build(
        {
            {"creator of", TypeSet{EntityType::Thing}, TypeSet{EntityType::Person}},
            {"born in", TypeSet{EntityType::Person}, TypeSet{EntityType::Place}},
        },
        emb);
    AliasLinker linker;
    bool ok = true;
    for (int s = 0; s < 20; ++s) {
        std::string subject = "Widget" + std::to_string(s);
        linker.add_alias(subject, subject, false);
        MultiHopQuestion q("Where was the creator of " + subject + " born?", subject);
        ScriptedLlm script;
        std::string prompt = prompts::render_chain_extraction(q.text);
        script.add_exact(prompts::render_place_or_thing(subject), "thing");
        bool escalation_scenario = s % 2 == 0;
        if (escalation_scenario) {
            // Unrepairable output below t=0.3, aligned from t=0.3 on.
            for (double t : {0.0, 0.1, 0.2})
                script.add_exact(prompt, "| born in | born in |", t);
            script.add_exact(prompt, "| born in | creator of |");
        } else {
            // Nothing ever aligns: penalty 2 early, penalty 1 from t=0.5.
            for (double t : {0.0, 0.1, 0.2, 0.3, 0.4})
                script.add_exact(prompt, "| born in | born in | born in |", t);
            script.add_exact(prompt, "| born in | born in |");
        }
        ExtractionCounter llm(script);
        DecompositionResult d = decompose(q, lib, llm, emb, linker);
        if (llm.extractions > 11) ok = false;
        if (escalation_scenario) {
            if (d.attempts != 4 || std::abs(d.final_temperature - 0.3) > 1e-12 ||
                !d.repair.fully_aligned || llm.extractions != 4)
                ok = false;
        } else {
            if (d.attempts != 11 || std::abs(d.final_temperature - 1.0) > 1e-12 ||
                d.repair.fully_aligned || d.repair.penalty != 1 || d.chain.size() != 2 ||
                llm.extractions != 11)
                ok = false;
        }
    }
    REQUIRE(announce("temperature escalation contract (20 scripted scenarios)", ok));
}

TEST_CASE("narrowed retrieval equals exhaustive on a 200-edit store") {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 gen(113);
    HashEmbedder emb;
    AliasLinker linker;
    bool ok = true;

    // Two-token grid subjects and single-token relations on disjoint
    // embedder buckets: every distinct (subject, relation) key embeds to a
    // distinct vector, and a wrong-relation query tops out at 2/3 cosine.
    std::set<std::size_t> buckets;
    auto row = bucket_distinct_tokens("ga", 12, buckets, emb.dimension());
    auto col = bucket_distinct_tokens("hb", 10, buckets, emb.dimension());
    auto rel = bucket_distinct_tokens("rk", 16, buckets, emb.dimension());
    std::vector<std::string> subjects;  // first 80 get stored, rest are noise
    for (int i = 0; i < 120; ++i) subjects.push_back(row[i / 10] + " " + col[i % 10]);
    std::vector<std::string> relations(rel.begin(), rel.begin() + 12);
    for (int i = 0; i < 80; i += 2) {
        // Half the stored subjects canonicalize through an alias.
        linker.add_alias("aka " + subjects[i], subjects[i], i % 4 == 0);
        linker.add_alias(subjects[i], subjects[i], i % 4 == 0);
    }

    EditStore store(0.8);
    std::vector<std::pair<std::string, std::string>> keys;
    while (store.size() < 200) {
        const auto& s = subjects[gen() % 80];
        const auto& r = relations[gen() % relations.size()];
        store.ingest(EditTriple(s, r, "target " + std::to_string(store.size())), linker, emb);
        keys.emplace_back(s, r);
    }

    auto agree = [&](const std::string& s, const std::string& r) {
        auto a = store.retrieve(s, r, linker, emb);
        auto b = store.retrieve_exhaustive(s, r, linker, emb);
        if (a.has_value() != b.has_value()) return false;
        if (a && (a->edit_index != b->edit_index ||
                  std::abs(a->similarity - b->similarity) > 1e-12))
            return false;
        return true;
    };

    for (const auto& [s, r] : keys) {
        if (!agree(s, r)) ok = false;
        auto hit = store.retrieve(s, r, linker, emb);
        if (!hit || std::abs(hit->similarity - 1.0) > 1e-9) ok = false;
        // Aliased mention forms must resolve identically.
        if (linker.link("aka " + s).confidence > 0.0 && !agree("aka " + s, r)) ok = false;
    }
    for (int n = 0; n < 200; ++n) {
        const std::string& s = subjects[gen() % 120];  // includes unstored subjects
        const std::string& r = rel[gen() % 16];        // includes unstored relations
        if (!agree(s, r)) ok = false;
    }

    // Strict inequality at the boundary: tau = 1.0 rejects exact matches.
    EditStore strict(1.0);
    strict.ingest(EditTriple(subjects[0], relations[0], "target"), linker, emb);
    if (strict.retrieve(subjects[0], relations[0], linker, emb)) ok = false;

    ok = ok && seconds_since(start) < 5.0;
    REQUIRE(announce("edit retrieval semantics (200-edit randomized store)", ok));
}

TEST_CASE("subject-relation keys separate exact from similar pairs") {
    HashEmbedder emb;
    // Tokens on disjoint embedder buckets mirror a clean entity vocabulary:
    // distinct keys overlap only through genuinely shared components, so
    // similar (share a subject or relation) pairs cap at 3/4 cosine.
    std::set<std::size_t> buckets;
    buckets.insert(HashEmbedder::token_slot("of", emb.dimension()).first);
    auto ja = bucket_distinct_tokens("ja", 8, buckets, emb.dimension());
    auto jb = bucket_distinct_tokens("jb", 7, buckets, emb.dimension());
    auto attr = bucket_distinct_tokens("attr", 10, buckets, emb.dimension());
    std::vector<std::string> subjects, relations;
    for (int i = 0; i < 50; ++i) subjects.push_back(ja[i / 7] + " " + jb[i % 7]);
    for (const auto& a : attr) relations.push_back(a + " of");

    SeparationStudy study = embedding_separation_study(
        subjects, relations, emb, EmbedStyle::SubjectRelation, Metric::Cosine);
    bool ok = study.exact_similarities.size() == 500;
    double min_exact = 2.0, max_similar = -2.0;
    for (double s : study.exact_similarities) min_exact = std::min(min_exact, s);
    for (double s : study.similar_similarities) max_similar = std::max(max_similar, s);
    ok = ok && min_exact >= 1.0 - 1e-9 && max_similar < 1.0 - 1e-9;
    int min_exact_bin = study.exact_bins.begin()->first;
    int max_similar_bin = study.similar_bins.rbegin()->first;
    ok = ok && max_similar_bin < min_exact_bin;  // zero histogram overlap
    REQUIRE(announce("embedding separation study (50 x 10 SR keys)", ok));
}

TEST_CASE("golden suite solves fully with edits and collapses without") {
    auto start = std::chrono::steady_clock::now();
    SuiteSpec spec;  // 20 cases, 60 questions
    SyntheticSuite suite = generate_synthetic_suite(spec);
    ScriptedLlm llm = suite.make_llm();
    HashEmbedder emb;
    AliasLinker linker = suite.make_linker();
    TemplateLibrary lib = suite.make_library(emb);

    EvalReport with = evaluate(suite.cases, lib, llm, emb, linker);
    bool ok = with.total_cases == 20 && with.total_questions == 60 &&
              with.per_case_accuracy == 1.0 && with.per_question_accuracy == 1.0;

    EvalOptions off;
    off.use_edit_store = false;
    EvalReport without = evaluate(suite.cases, lib, llm, emb, linker, off);
    ok = ok && without.per_case_accuracy < 0.25;
    ok = ok && seconds_since(start) < 30.0;
    REQUIRE(announce("golden end-to-end (20 cases, edits on vs off)", ok));
}

TEST_CASE("accuracy is flat across the threshold grid until tau reaches one") {
    SuiteSpec spec;
    spec.distractor_edits = 2;
    SyntheticSuite suite = generate_synthetic_suite(spec);
    ScriptedLlm llm = suite.make_llm();
    HashEmbedder emb;
    AliasLinker linker = suite.make_linker();
    TemplateLibrary lib = suite.make_library(emb);

    // Distractor keys sit far below every live query: mock similarity of
    // distinct keys within a case is 0, well under the 0.75 ceiling.
    bool ok = true;
    for (const auto& c : suite.cases) {
        EditStore probe(0.8);
        for (const auto& e : c.edits) probe.ingest(e, linker, emb);
        for (std::size_t i = 0; i < probe.edits().size(); ++i)
            for (std::size_t j = i + 1; j < probe.edits().size(); ++j)
                if (similarity(probe.edits()[i].embedding, probe.edits()[j].embedding,
                               Metric::Cosine) > 0.75)
                    ok = false;
    }

    EvalOptions opts;
    auto rows = ablate_threshold(suite.cases, lib, llm, emb, linker, opts,
                                 cosine_threshold_grid());
    ok = ok && rows.size() == 21;
    // Constant on tau in [0.05, 0.95]; the final 1.00 row drops.
    for (std::size_t i = 1; i <= 19 && ok; ++i) {
        if (rows[i].per_case_accuracy != rows[1].per_case_accuracy ||
            rows[i].per_question_accuracy != rows[1].per_question_accuracy)
            ok = false;
    }
    ok = ok && rows[20].per_case_accuracy < rows[19].per_case_accuracy;
    for (std::size_t i = 0; i + 1 < rows.size() && ok; ++i)
        if (rows[i + 1].per_case_accuracy > rows[i].per_case_accuracy) ok = false;
    REQUIRE(announce("threshold ablation shape (21 rows, flat then drop)", ok));
}

TEST_CASE("two full golden runs produce byte-identical artifacts") {
    namespace fs = std::filesystem;
    auto run = [&](const fs::path& dir) {
        SuiteSpec spec;
        SyntheticSuite suite = generate_synthetic_suite(spec);
        ScriptedLlm llm = suite.make_llm();
        HashEmbedder emb;
        AliasLinker linker = suite.make_linker();
        TemplateLibrary lib = suite.make_library(emb);
        fs::create_directories(dir);
        suite.write(dir.string());
        EvalReport r = evaluate(suite.cases, lib, llm, emb, linker);
        write_traces(r, (dir / "traces.jsonl").string());
        std::ofstream report(dir / "report.json");
        report << report_to_json(r).dump(2) << "\n";
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };

    fs::path base = fs::temp_directory_path() / "acceptance_runs";
    fs::remove_all(base);
    run(base / "a");
    run(base / "b");
    bool ok = true;
    for (const char* name : {"dataset.json", "llm_script.json", "aliases.tsv",
                             "templates.tsv", "traces.jsonl", "report.json"}) {
        std::string a = slurp(base / "a" / name), b = slurp(base / "b" / name);
        if (a.empty() || a != b) ok = false;
    }
    fs::remove_all(base);
    REQUIRE(announce("determinism across two full golden runs", ok));
}
