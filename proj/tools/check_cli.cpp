// Command-line entry point: wires configuration, backends, template
// libraries and datasets into the pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "check/backends.hpp"
#include "check/editstore.hpp"
#include "check/eval.hpp"
#include "check/fixtures.hpp"
#include "check/remote.hpp"
#include "check/resolver.hpp"
#include "check/typelib.hpp"

namespace {

namespace fs = std::filesystem;

struct RunConfig {
    std::string backend = "mock";  // mock | remote
    check::RemoteConfig remote;
    double tau = 0.8;
    std::string metric = "cosine";
    std::string embedding_style = "sr";
    std::string template_library;
    std::string llm_script;
    std::string aliases;
    std::size_t embed_dim = 64;
    bool anchor_entity_type = false;
    int max_chain_length = 8;
    int workers = 1;
    std::string out_dir = ".";

    check::Metric metric_enum() const {
        if (metric == "cosine") return check::Metric::Cosine;
        if (metric == "dot") return check::Metric::Dot;
        throw check::InvalidArgument("metric must be 'cosine' or 'dot'");
    }

    check::EmbedStyle style_enum() const {
        if (embedding_style == "sr") return check::EmbedStyle::SubjectRelation;
        if (embedding_style == "cloze") return check::EmbedStyle::Cloze;
        throw check::InvalidArgument("embedding-style must be 'sr' or 'cloze'");
    }

    void validate() const {
        metric_enum();
        style_enum();
        if (metric == "cosine" && (tau <= 0.0 || tau > 1.0))
            throw check::InvalidArgument("cosine tau must be in (0,1]");
        if (metric == "dot" && tau <= 0.0)
            throw check::InvalidArgument("dot tau must be positive");
        if (backend != "mock" && backend != "remote")
            throw check::InvalidArgument("backend must be 'mock' or 'remote'");
        if (max_chain_length < 1 ||
            max_chain_length > static_cast<int>(check::kMaxChainLength))
            throw check::InvalidArgument("max-chain-length must be in 1..8");
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw check::InvalidArgument("cannot open config file: " + path);
        nlohmann::json j;
        in >> j;
        backend = j.value("backend", backend);
        tau = j.value("tau", tau);
        metric = j.value("metric", metric);
        embedding_style = j.value("embedding_style", embedding_style);
        template_library = j.value("template_library", template_library);
        llm_script = j.value("llm_script", llm_script);
        aliases = j.value("aliases", aliases);
        embed_dim = j.value("embed_dim", embed_dim);
        anchor_entity_type = j.value("anchor_entity_type", anchor_entity_type);
        max_chain_length = j.value("max_chain_length", max_chain_length);
        workers = j.value("workers", workers);
        out_dir = j.value("out_dir", out_dir);
        remote.endpoint = j.value("endpoint", remote.endpoint);
        remote.model = j.value("model", remote.model);
        remote.embed_model = j.value("embed_model", remote.embed_model);
        remote.timeout_seconds = j.value("timeout_seconds", remote.timeout_seconds);
        remote.max_retries = j.value("max_retries", remote.max_retries);
    }
};

struct Backends {
    std::unique_ptr<check::LlmBackend> llm;
    std::unique_ptr<check::EmbeddingBackend> embedder;
    std::unique_ptr<check::EntityLinker> linker;
};

Backends make_backends(const RunConfig& cfg) {
    Backends b;
    if (cfg.backend == "remote") {
        b.llm = std::make_unique<check::RemoteLlm>(cfg.remote);
        b.embedder = std::make_unique<check::RemoteEmbedder>(cfg.remote);
    } else {
        if (cfg.llm_script.empty())
            throw check::InvalidArgument("mock backend requires --llm-script");
        b.llm = std::make_unique<check::ScriptedLlm>(check::ScriptedLlm::load(cfg.llm_script));
        b.embedder = std::make_unique<check::HashEmbedder>(cfg.embed_dim);
    }
    if (!cfg.aliases.empty())
        b.linker = std::make_unique<check::AliasLinker>(check::AliasLinker::load_tsv(cfg.aliases));
    else
        b.linker = std::make_unique<check::AliasLinker>();
    return b;
}

check::TemplateLibrary load_library(const RunConfig& cfg, check::EmbeddingBackend& embedder) {
    if (cfg.template_library.empty())
        throw check::InvalidArgument("a template library file is required (--templates)");
    auto labels = check::TemplateLibrary::load_labels_tsv(cfg.template_library);
    return check::TemplateLibrary::build(labels, embedder);
}

check::EvalOptions eval_options(const RunConfig& cfg) {
    check::EvalOptions opts;
    opts.tau = cfg.tau;
    opts.metric = cfg.metric_enum();
    opts.style = cfg.style_enum();
    opts.workers = cfg.workers;
    opts.decompose.anchor_entity_type = cfg.anchor_entity_type;
    opts.decompose.max_chain_length = static_cast<std::size_t>(cfg.max_chain_length);
    return opts;
}

int cmd_answer(const RunConfig& cfg, const std::string& question,
               const std::string& edits_path, const std::string& entity) {
    auto backends = make_backends(cfg);
    auto library = load_library(cfg, *backends.embedder);

    check::EditStore store(cfg.tau, cfg.metric_enum(), cfg.style_enum());
    for (const auto& t : check::EditStore::load_edits_tsv(edits_path))
        store.ingest(t, *backends.linker, *backends.embedder);
    for (const auto& w : store.warnings()) std::cerr << "warning: " << w << "\n";

    check::MultiHopQuestion q(question, entity.empty()
                                            ? std::nullopt
                                            : std::optional<std::string>(entity));
    check::DecomposeOptions dopts;
    dopts.anchor_entity_type = cfg.anchor_entity_type;
    dopts.max_chain_length = static_cast<std::size_t>(cfg.max_chain_length);
    check::ResolutionTrace trace = check::answer(q, &store, library, *backends.llm,
                                                 *backends.embedder, *backends.linker, dopts);

    fs::create_directories(cfg.out_dir);
    std::string trace_path = cfg.out_dir + "/trace.jsonl";
    std::ofstream out(trace_path);
    out << check::trace_to_json(trace).dump() << "\n";

    std::cout << "answer: " << trace.answer << "\n";
    for (const auto& h : trace.hops)
        std::cout << "  hop: (" << h.entity_in << ", " << h.relation << ") -> " << h.entity_out
                  << " [" << (h.source == check::HopSource::Edit ? "edit" : "llm") << "]\n";
    std::cout << "trace: " << trace_path << "\n";
    return 0;
}

int write_ablation(const std::vector<check::AblationRow>& rows, const std::string& path) {
    std::ofstream out(path);
    out << "threshold\tper_case_accuracy\tper_question_accuracy\n";
    for (const auto& r : rows) {
        char line[96];
        std::snprintf(line, sizeof(line), "%.2f\t%.6f\t%.6f\n", r.threshold,
                      r.per_case_accuracy, r.per_question_accuracy);
        out << line;
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& dataset_path, bool disable_edits,
                 bool run_thresholds) {
    auto backends = make_backends(cfg);
    auto library = load_library(cfg, *backends.embedder);
    auto cases = check::load_dataset(dataset_path);
    auto opts = eval_options(cfg);
    opts.use_edit_store = !disable_edits;

    fs::create_directories(cfg.out_dir);
    if (run_thresholds) {
        auto grid = cfg.metric_enum() == check::Metric::Cosine ? check::cosine_threshold_grid()
                                                               : check::dot_threshold_grid();
        auto rows = check::ablate_threshold(cases, library, *backends.llm, *backends.embedder,
                                            *backends.linker, opts, grid);
        std::string path = cfg.out_dir + "/ablation.tsv";
        write_ablation(rows, path);
        std::cout << "ablation table: " << path << "\n";
        return 0;
    }

    check::EvalReport report = check::evaluate(cases, library, *backends.llm,
                                               *backends.embedder, *backends.linker, opts);
    report.trace_path = cfg.out_dir + "/traces.jsonl";
    check::write_traces(report, report.trace_path);
    {
        std::ofstream out(cfg.out_dir + "/report.json");
        out << check::report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream out(cfg.out_dir + "/report.txt");
        out << check::report_table(report);
    }
    char line[96];
    std::snprintf(line, sizeof(line), "per-case %.3f / per-question %.3f\n",
                  report.per_case_accuracy, report.per_question_accuracy);
    std::cout << line;
    std::cout << "report: " << cfg.out_dir << "/report.json\n";
    return 0;
}

int cmd_separation_study(const RunConfig& cfg, const std::string& subjects_path,
                         const std::string& relations_path) {
    auto backends = make_backends(cfg);
    auto read_lines = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw check::InvalidArgument("cannot open list file: " + path);
        std::vector<std::string> out;
        std::string line;
        while (std::getline(in, line))
            if (!check::trim(line).empty()) out.push_back(check::trim(line));
        return out;
    };

    std::vector<std::string> subjects, relations;
    if (!subjects_path.empty()) {
        subjects = read_lines(subjects_path);
    } else {
        for (int i = 0; i < 50; ++i) subjects.push_back("John Subject" + std::to_string(i));
    }
    if (!relations_path.empty()) {
        relations = read_lines(relations_path);
    } else {
        relations = {"spouse of",      "born in",       "country of citizenship",
                     "capital city",   "head of state", "manufacturer of",
                     "creator of",     "located in",    "continent of",
                     "founder of"};
    }

    auto study = check::embedding_separation_study(subjects, relations, *backends.embedder,
                                                   cfg.style_enum(), cfg.metric_enum());
    fs::create_directories(cfg.out_dir);
    std::string path = cfg.out_dir + "/separation.tsv";
    std::ofstream out(path);
    out << "bin\texact_count\tsimilar_count\n";
    int lo = 0, hi = 20;
    for (const auto& [b, n] : study.exact_bins) lo = std::min(lo, b);
    for (const auto& [b, n] : study.similar_bins) lo = std::min(lo, b);
    for (int b = lo; b <= hi; ++b) {
        auto e = study.exact_bins.find(b);
        auto s = study.similar_bins.find(b);
        char line[96];
        std::snprintf(line, sizeof(line), "%.2f\t%ld\t%ld\n", b * 0.05,
                      e == study.exact_bins.end() ? 0L : e->second,
                      s == study.similar_bins.end() ? 0L : s->second);
        out << line;
    }
    std::cout << subjects.size() << " subjects x " << relations.size() << " relations, "
              << study.exact_similarities.size() << " exact pairs, "
              << study.similar_similarities.size() << " similar pairs\n";
    std::cout << "histogram: " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CHECK: semantic-analysis knowledge editor for multi-hop QA"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file");
    auto* tau_opt = app.add_option("--tau", cfg.tau, "similarity threshold");
    auto* metric_opt = app.add_option("--metric", cfg.metric, "cosine|dot");
    auto* style_opt = app.add_option("--embedding-style", cfg.embedding_style, "sr|cloze");
    auto* workers_opt = app.add_option("--workers", cfg.workers, "evaluation parallelism");
    auto* out_opt = app.add_option("--out", cfg.out_dir, "output directory");
    auto* backend_opt = app.add_option("--backend", cfg.backend, "mock|remote");
    auto* endpoint_opt = app.add_option("--endpoint", cfg.remote.endpoint, "remote endpoint URL");
    auto* model_opt = app.add_option("--model", cfg.remote.model, "remote model name");
    auto* templates_opt = app.add_option("--templates", cfg.template_library,
                                         "template library TSV");
    auto* script_opt = app.add_option("--llm-script", cfg.llm_script, "mock LLM script JSON");
    auto* aliases_opt = app.add_option("--aliases", cfg.aliases, "mock linker alias TSV");
    auto* dim_opt = app.add_option("--embed-dim", cfg.embed_dim, "mock embedder dimension");
    auto* anchor_opt = app.add_flag("--anchor", cfg.anchor_entity_type,
                                    "filter repairs on the initial entity's type");
    auto* chain_opt = app.add_option("--max-chain-length", cfg.max_chain_length,
                                     "decomposition chain guard (1..8)");

    std::string question, edits_path, entity, dataset_path, labels_path;
    std::string subjects_path, relations_path, suite_dir;
    bool disable_edits = false, run_thresholds = false, misalign = false;
    int suite_cases = 20, suite_distractors = 0;
    std::uint64_t suite_seed = 7;

    auto* build = app.add_subcommand("build-typelib", "embed and validate a template library");
    build->add_option("--labels", labels_path, "labeled templates TSV")->required();

    auto* ingest = app.add_subcommand("ingest-edits", "ingest an edits file and report");
    ingest->add_option("--edits", edits_path, "edits TSV")->required();

    auto* ans = app.add_subcommand("answer", "answer a single multi-hop question");
    ans->add_option("question", question, "question text")->required();
    ans->add_option("--edits", edits_path, "edits TSV")->required();
    ans->add_option("--entity", entity, "known initial entity");

    auto* ev = app.add_subcommand("evaluate", "evaluate a dataset");
    ev->add_option("--dataset", dataset_path, "dataset JSON")->required();
    ev->add_flag("--disable-edits", disable_edits, "run without the edit store");
    ev->add_flag("--thresholds", run_thresholds, "run the threshold ablation grid instead");

    auto* ab = app.add_subcommand("ablate", "threshold ablation over the metric's grid");
    ab->add_option("--dataset", dataset_path, "dataset JSON")->required();

    auto* sep = app.add_subcommand("separation-study", "exact-vs-similar embedding histogram");
    sep->add_option("--subjects", subjects_path, "subject list, one per line");
    sep->add_option("--relations", relations_path, "relation list, one per line");

    auto* gen = app.add_subcommand("gen-suite", "generate a synthetic benchmark suite");
    gen->add_option("--out-dir", suite_dir, "output directory")->required();
    gen->add_option("--cases", suite_cases, "number of cases");
    gen->add_option("--seed", suite_seed, "generation seed");
    gen->add_option("--distractors", suite_distractors, "distractor edits per case");
    gen->add_flag("--misalign", misalign, "inject misaligned / escalating chains");

    CLI11_PARSE(app, argc, argv);

    try {
        // Precedence: flag > environment > config file > default.
        if (!config_path.empty()) {
            RunConfig from_file;
            from_file.load_file(config_path);
            auto keep = [](const CLI::Option* o) { return o->count() > 0; };
            if (!keep(tau_opt)) cfg.tau = from_file.tau;
            if (!keep(metric_opt)) cfg.metric = from_file.metric;
            if (!keep(style_opt)) cfg.embedding_style = from_file.embedding_style;
            if (!keep(workers_opt)) cfg.workers = from_file.workers;
            if (!keep(out_opt)) cfg.out_dir = from_file.out_dir;
            if (!keep(backend_opt)) cfg.backend = from_file.backend;
            if (!keep(endpoint_opt)) cfg.remote.endpoint = from_file.remote.endpoint;
            if (!keep(model_opt)) cfg.remote.model = from_file.remote.model;
            if (!keep(templates_opt)) cfg.template_library = from_file.template_library;
            if (!keep(script_opt)) cfg.llm_script = from_file.llm_script;
            if (!keep(aliases_opt)) cfg.aliases = from_file.aliases;
            if (!keep(dim_opt)) cfg.embed_dim = from_file.embed_dim;
            if (!keep(anchor_opt)) cfg.anchor_entity_type = from_file.anchor_entity_type;
            if (!keep(chain_opt)) cfg.max_chain_length = from_file.max_chain_length;
            cfg.remote.embed_model = from_file.remote.embed_model;
            cfg.remote.timeout_seconds = from_file.remote.timeout_seconds;
            cfg.remote.max_retries = from_file.remote.max_retries;
        }
        if (endpoint_opt->count() == 0) cfg.remote.apply_env_overrides();
        else if (const char* k = std::getenv("CHECK_API_KEY")) cfg.remote.api_key = k;
        cfg.validate();

        if (build->parsed()) {
            auto backends = make_backends(cfg);
            auto labels = check::TemplateLibrary::load_labels_tsv(labels_path);
            auto lib = check::TemplateLibrary::build(labels, *backends.embedder);
            std::cout << "library: " << lib.size() << " templates, dim " << lib.embedding_dim()
                      << "\n";
            return 0;
        }
        if (ingest->parsed()) {
            auto backends = make_backends(cfg);
            check::EditStore store(cfg.tau, cfg.metric_enum(), cfg.style_enum());
            for (const auto& t : check::EditStore::load_edits_tsv(edits_path))
                store.ingest(t, *backends.linker, *backends.embedder);
            std::cout << "ingested " << store.size() << " edits, " << store.warnings().size()
                      << " warnings\n";
            for (const auto& w : store.warnings()) std::cerr << "warning: " << w << "\n";
            return 0;
        }
        if (ans->parsed()) return cmd_answer(cfg, question, edits_path, entity);
        if (ev->parsed()) return cmd_evaluate(cfg, dataset_path, disable_edits, run_thresholds);
        if (ab->parsed()) return cmd_evaluate(cfg, dataset_path, false, true);
        if (sep->parsed()) return cmd_separation_study(cfg, subjects_path, relations_path);
        if (gen->parsed()) {
            check::SuiteSpec spec;
            spec.n_cases = suite_cases;
            spec.seed = suite_seed;
            spec.misalignment_injection = misalign;
            spec.distractor_edits = suite_distractors;
            auto suite = check::generate_synthetic_suite(spec, cfg.embed_dim);
            suite.write(suite_dir);
            std::cout << "wrote " << suite.cases.size() << " cases to " << suite_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
