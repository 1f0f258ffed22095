#pragma once

// Synthetic mini-benchmark generation: a deterministic world of typed
// relation chains with counterfactual edits, rendered as a dataset file,
// mock LLM scripts, an alias table, and template labels. The scripts
// answer per the UNEDITED facts, so correct final answers are reachable
// only through edit-store hits.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "check/backends.hpp"
#include "check/chain_align.hpp"
#include "check/core.hpp"
#include "check/eval.hpp"
#include "check/prompts.hpp"
#include "check/typelib.hpp"

namespace check {

class FixtureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SuiteSpec {
    int n_cases = 20;
    std::map<int, double> hop_distribution = {{2, 0.5}, {3, 0.3}, {4, 0.2}};
    std::map<int, double> edit_distribution = {{1, 0.5}, {2, 0.3}, {3, 0.2}};
    std::uint64_t seed = 7;
    bool misalignment_injection = false;  // half repair-at-0.0, half escalate-to-0.2
    int distractor_edits = 0;             // unrelated edits per case (total edits capped at 4)
};

struct SyntheticSuite {
    std::vector<EditCase> cases;
    std::vector<ScriptEntry> llm_script;
    std::vector<std::tuple<std::string, std::string, bool>> aliases;  // alias, canonical, person
    std::vector<LabeledTemplate> templates;

    ScriptedLlm make_llm() const { return ScriptedLlm(llm_script); }

    AliasLinker make_linker() const {
        AliasLinker linker;
        for (const auto& [alias, canonical, person] : aliases)
            linker.add_alias(alias, canonical, person);
        return linker;
    }

    TemplateLibrary make_library(EmbeddingBackend& embedder) const {
        return TemplateLibrary::build(templates, embedder);
    }

    nlohmann::json dataset_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : cases) {
            nlohmann::json rewrites = nlohmann::json::array();
            for (const auto& e : c.edits)
                rewrites.push_back({{"subject", e.subject},
                                    {"relation", e.relation},
                                    {"target_new", e.object}});
            arr.push_back({{"case_id", c.case_id},
                           {"questions", c.questions},
                           {"answer", c.expected_answer},
                           {"answer_alias", c.answer_aliases},
                           {"requested_rewrite", std::move(rewrites)},
                           {"hops", c.hop_count}});
        }
        return arr;
    }

    void write(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        {
            std::ofstream out(dir + "/dataset.json");
            out << dataset_json().dump(2) << "\n";
        }
        make_llm().save(dir + "/llm_script.json");
        make_linker().save_tsv(dir + "/aliases.tsv");
        TemplateLibrary::save_labels_tsv(templates, dir + "/templates.tsv");
    }
};

namespace fixtures_detail {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    // Bounded draw with engine-defined (hence run-stable) bytes.
    int below(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }
    double unit() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }

private:
    std::mt19937_64 gen_;
};

inline int draw_from(const std::map<int, double>& dist, Rng& rng) {
    double total = 0.0;
    for (const auto& [k, p] : dist) total += p;
    if (std::abs(total - 1.0) > 1e-6)
        throw FixtureError("distribution does not sum to 1");
    double u = rng.unit(), acc = 0.0;
    for (const auto& [k, p] : dist) {
        acc += p;
        if (u <= acc) return k;
    }
    return dist.rbegin()->first;
}

// A typed chain whose identity ordering is the UNIQUE zero-penalty
// ordering among all permutations of its (in, out) pairs.
inline std::vector<std::pair<TypeSet, TypeSet>> unique_type_chain(int hops, Rng& rng) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
        std::vector<EntityType> ts;
        for (int k = 0; k <= hops; ++k) ts.push_back(static_cast<EntityType>(rng.below(3)));
        std::vector<std::pair<TypeSet, TypeSet>> pairs;
        for (int k = 1; k <= hops; ++k) {
            TypeSet in{ts[k - 1]};
            TypeSet out{ts[k]};
            if (rng.unit() < 0.25)
                in = TypeSet{ts[k - 1], static_cast<EntityType>(rng.below(3))};
            pairs.emplace_back(in, out);
        }
        bool distinct = true;
        for (std::size_t a = 0; a < pairs.size() && distinct; ++a)
            for (std::size_t b = a + 1; b < pairs.size(); ++b)
                if (pairs[a] == pairs[b]) {
                    distinct = false;
                    break;
                }
        if (!distinct) continue;

        TypeChain chain{pairs};
        std::vector<std::size_t> idx(pairs.size());
        std::iota(idx.begin(), idx.end(), 0);
        int zero_count = 0;
        do {
            if (alignment_penalty(apply_permutation(Permutation{idx}, chain)) == 0)
                ++zero_count;
        } while (std::next_permutation(idx.begin(), idx.end()) && zero_count < 2);
        if (zero_count == 1) return pairs;
    }
    throw FixtureError("could not find a uniquely alignable type chain of length " +
                       std::to_string(hops));
}

}  // namespace fixtures_detail

// Token names are salted per case until every token the case embeds lands
// in a distinct (bucket, sign) slot of the mock embedder. Disjoint texts
// then have similarity exactly 0, exact matches exactly 1, and partial
// overlaps cannot occur across a case's retrieval queries, which keeps the
// synthetic suite's retrieval outcomes independent of tau below 1.
inline SyntheticSuite generate_synthetic_suite(const SuiteSpec& spec,
                                               std::size_t embed_dim = 64) {
    if (spec.n_cases < 1) throw FixtureError("n_cases must be >= 1");
    fixtures_detail::Rng rng(spec.seed);
    SyntheticSuite suite;

    // Template lookup is a global argmax, so relation phrases must also be
    // unique ACROSS cases at the slot level: two phrases whose token slots
    // coincide embed identically and would shadow each other's types.
    using PhraseSig = std::vector<std::pair<std::size_t, int>>;
    std::set<PhraseSig> used_phrases;
    auto phrase_sig = [embed_dim](const std::string& phrase) {
        PhraseSig sig;
        std::string token;
        std::stringstream ss(phrase);
        while (ss >> token) sig.push_back(HashEmbedder::token_slot(token, embed_dim));
        std::sort(sig.begin(), sig.end());
        return sig;
    };

    for (int i = 0; i < spec.n_cases; ++i) {
        const std::string cid = "c" + std::to_string(i);
        int hops = fixtures_detail::draw_from(spec.hop_distribution, rng);
        if (hops < 1 || hops > static_cast<int>(kMaxChainLength))
            throw FixtureError("hop count out of range");
        int edits = std::min({fixtures_detail::draw_from(spec.edit_distribution, rng), hops, 4});
        edits = std::max(edits, 1);

        auto pairs = fixtures_detail::unique_type_chain(hops, rng);

        // Edited hop indices (1-based), sampled without replacement.
        std::vector<int> all_hops(hops);
        std::iota(all_hops.begin(), all_hops.end(), 1);
        std::vector<int> edited;
        for (int n = 0; n < edits; ++n) {
            int j = rng.below(static_cast<int>(all_hops.size()));
            edited.push_back(all_hops[j]);
            all_hops.erase(all_hops.begin() + j);
        }
        std::sort(edited.begin(), edited.end());
        auto is_edited = [&](int k) {
            return std::find(edited.begin(), edited.end(), k) != edited.end();
        };

        int stale_total = 0;  // each edited hop j spawns a stale branch of length h-j+1
        for (int j : edited) stale_total += hops - j + 1;
        int distractors = std::min(spec.distractor_edits, 4 - edits);

        // Salted names, retried until all embedded tokens occupy distinct
        // slots.
        std::vector<std::string> path, stale, relations, distractor_subj, distractor_rel,
            distractor_obj;
        bool named = false;
        for (int salt = 0; salt < 20000 && !named; ++salt) {
            std::string tag = cid + "v" + std::to_string(salt);
            path.clear();
            stale.clear();
            relations.clear();
            distractor_subj.clear();
            distractor_rel.clear();
            distractor_obj.clear();
            std::vector<std::string> tokens;
            for (int k = 0; k <= hops; ++k) {
                path.push_back("K" + tag + "E" + std::to_string(k));
                tokens.push_back(path.back());
            }
            for (int n = 0; n < stale_total; ++n) {
                stale.push_back("K" + tag + "S" + std::to_string(n));
                tokens.push_back(stale.back());
            }
            for (int k = 1; k <= hops; ++k) {
                // The pair differs at the FIRST character: FNV hashes of
                // strings differing only in the last byte are affinely
                // related, which collapses the pair's slot signature space.
                std::string a = tag + "r" + std::to_string(k) + "a";
                std::string b = "z" + tag + "r" + std::to_string(k) + "b";
                relations.push_back(a + " " + b);
                tokens.push_back(a);
                tokens.push_back(b);
            }
            for (int d = 0; d < distractors; ++d) {
                distractor_subj.push_back("K" + tag + "D" + std::to_string(d));
                distractor_rel.push_back(tag + "d" + std::to_string(d) + "r");
                distractor_obj.push_back("K" + tag + "D" + std::to_string(d) + "y");
                tokens.push_back(distractor_subj.back());
                tokens.push_back(distractor_rel.back());
            }
            // Distinct buckets, sign ignored: same-bucket opposite-sign
            // tokens are not orthogonal (dot -1), only bucket-disjoint
            // token sets are.
            std::vector<std::size_t> buckets;
            for (const auto& t : tokens)
                buckets.push_back(HashEmbedder::token_slot(t, embed_dim).first);
            std::sort(buckets.begin(), buckets.end());
            named = std::adjacent_find(buckets.begin(), buckets.end()) == buckets.end();
            for (const auto& r : relations)
                if (used_phrases.count(phrase_sig(r))) named = false;
        }
        if (!named)
            throw FixtureError("could not find collision-free token names for case " + cid +
                               " (hops=" + std::to_string(hops) +
                               ", edits=" + std::to_string(edits) +
                               ", stale=" + std::to_string(stale_total) +
                               ", distractors=" + std::to_string(distractors) + ")");
        for (const auto& r : relations) used_phrases.insert(phrase_sig(r));

        for (int k = 1; k <= hops; ++k)
            suite.templates.push_back({relations[k - 1], pairs[k - 1].first,
                                       pairs[k - 1].second});

        for (int k = 0; k <= hops; ++k) {
            EntityType t = k == 0 ? pairs[0].first.members().front()
                                  : pairs[k - 1].second.members().front();
            suite.aliases.emplace_back(path[k], path[k], t == EntityType::Person);
        }
        EntityType initial_type = pairs[0].first.members().front();

        EditCase c;
        c.case_id = cid;
        c.hop_count = hops;
        for (int j : edited)
            c.edits.emplace_back(path[j - 1], relations[j - 1], path[j]);
        for (int d = 0; d < distractors; ++d)
            c.edits.emplace_back(distractor_subj[d], distractor_rel[d], distractor_obj[d]);
        c.edit_count = static_cast<int>(c.edits.size());
        c.expected_answer = path[hops];

        // LLM hop scripts answer per the unedited world: every reachable
        // (entity, hop) state gets a question and an answer, and edited
        // hops answer with a stale entity so the edit path carries the
        // correct result.
        int stale_counter = 0;
        auto fresh = [&] { return stale[stale_counter++]; };
        auto script_hop = [&](const std::string& entity, const std::string& relation,
                              const std::string& next) {
            std::string q = "What is the " + relation + " of " + entity + "?";
            suite.llm_script.push_back(
                {prompts::render_triple_to_question(entity, relation), false, std::nullopt, q});
            suite.llm_script.push_back(
                {prompts::render_answer_question(q), false, std::nullopt, next});
        };
        // (entity, next hop index) work list; branches stay small (h <= 4).
        std::vector<std::pair<std::string, int>> states{{path[0], 1}};
        while (!states.empty()) {
            auto [entity, k] = states.back();
            states.pop_back();
            if (k > hops) continue;
            bool on_path = entity == path[k - 1];
            if (on_path && is_edited(k)) {
                std::string stale = fresh();
                script_hop(entity, relations[k - 1], stale);  // store-off / stale branch
                states.push_back({stale, k + 1});
                states.push_back({path[k], k + 1});  // edit-store continuation
            } else {
                std::string next = on_path ? path[k] : fresh();
                script_hop(entity, relations[k - 1], next);
                states.push_back({next, k + 1});
            }
        }

        // Paraphrases and their SRO scripts.
        std::string nested = path[0];
        for (int k = 1; k <= hops; ++k) nested = "the " + relations[k - 1] + " of " + nested;
        c.questions = {"What is " + nested + "?", "Tell me " + nested + ".",
                       "Can you say what is " + nested + "?"};

        std::string surface;  // correct surface order: outermost relation first
        for (int k = hops; k >= 1; --k) surface += "| " + relations[k - 1] + " ";
        surface += "|";

        bool repair_case = spec.misalignment_injection && i % 2 == 0 && hops >= 2;
        bool escalate_case = spec.misalignment_injection && i % 2 == 1;
        std::string emitted = surface;
        if (repair_case) {
            // Any non-identity surface works: repair recovers the unique
            // zero-penalty ordering. Rotate by one.
            std::vector<std::string> rot(relations.begin() + 1, relations.end());
            rot.push_back(relations.front());
            emitted.clear();
            for (int k = hops; k >= 1; --k) emitted += "| " + rot[k - 1] + " ";
            emitted += "|";
        }
        std::string decoy;
        if (escalate_case) {
            // Anti-aligned pair: no ordering of two (person -> place)
            // relations aligns, so repair fails and escalation kicks in.
            std::string da, db;
            bool decoys_named = false;
            for (int salt = 0; salt < 20000 && !decoys_named; ++salt) {
                std::string dtag = cid + "x" + std::to_string(salt);
                da = dtag + "a1 z" + dtag + "a2";
                db = dtag + "b1 z" + dtag + "b2";
                decoys_named = !used_phrases.count(phrase_sig(da)) &&
                               !used_phrases.count(phrase_sig(db)) &&
                               phrase_sig(da) != phrase_sig(db);
                // Same-bucket token pairs can cancel by sign and zero out a
                // phrase embedding; require bucket-distinct tokens too.
                for (const auto& p : {da, db}) {
                    auto sig = phrase_sig(p);
                    if (sig.size() == 2 && sig[0].first == sig[1].first)
                        decoys_named = false;
                }
            }
            if (!decoys_named)
                throw FixtureError("could not find collision-free decoys for case " + cid);
            used_phrases.insert(phrase_sig(da));
            used_phrases.insert(phrase_sig(db));
            suite.templates.push_back({da, TypeSet{EntityType::Person},
                                       TypeSet{EntityType::Place}});
            suite.templates.push_back({db, TypeSet{EntityType::Person},
                                       TypeSet{EntityType::Place}});
            decoy = "| " + da + " | " + db + " |";
        }
        for (const auto& qtext : c.questions) {
            std::string prompt = prompts::render_chain_extraction(qtext);
            if (escalate_case) {
                suite.llm_script.push_back({prompt, false, 0.0, decoy});
                suite.llm_script.push_back({prompt, false, 0.1, decoy});
            }
            suite.llm_script.push_back({prompt, false, std::nullopt, emitted});
        }
        if (initial_type != EntityType::Person)
            suite.llm_script.push_back({prompts::render_place_or_thing(path[0]), false,
                                        std::nullopt,
                                        initial_type == EntityType::Place ? "place" : "thing"});

        suite.cases.push_back(std::move(c));
    }
    return suite;
}

}  // namespace check
