// icat: command-line front end for ingest, indexing, claim extraction,
// evaluation runs, correlation and the annotation service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/annotation.hpp"
#include "icat/claims.hpp"
#include "icat/csv.hpp"
#include "icat/error.hpp"
#include "icat/evaluator.hpp"
#include "icat/index_store.hpp"
#include "icat/stats.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

icat::AnnotationServer* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw icat::ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw icat::ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
}

icat::Gateway gateway_from(const fs::path& config) {
    return icat::make_gateway(icat::parse_gateway_config(read_json_file(config), config.parent_path()));
}

icat::PromptLibrary prompts_from(const std::string& dir) {
    return icat::PromptLibrary::load(dir.empty() ? icat::PromptLibrary::default_dir() : fs::path(dir));
}

std::vector<double> parse_beta_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw icat::ConfigError("bad beta value '" + item + "'");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Claim-grounded factuality and aspect coverage evaluation"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load, filter and chunk a corpus; build BM25");
    std::string corpus_path, ingest_out;
    icat::IngestOptions ingest_opts;
    ingest->add_option("--corpus", corpus_path, "Corpus JSON Lines")->required();
    ingest->add_option("--spam-threshold", ingest_opts.spam_threshold, "Exclude documents below this percentile");
    ingest->add_option("--max-words", ingest_opts.max_words, "Snippet width in words");
    ingest->add_option("--overlap", ingest_opts.overlap, "Words shared by consecutive snippets");
    ingest->add_option("--out", ingest_out, "Index directory")->required();

    // index
    auto* index = app.add_subcommand("index", "Dense index tools");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "Embed snippets and build the dense index");
    std::string index_dir, index_config, index_mode = "exact";
    icat::GraphParams graph;
    index_build->add_option("--index", index_dir, "Index directory from ingest")->required();
    index_build->add_option("--config", index_config, "Config with an embedding backend")->required();
    index_build->add_option("--mode", index_mode, "exact or approximate");
    index_build->add_option("--degree", graph.degree, "Graph degree");
    index_build->add_option("--construction-beam", graph.construction_beam, "Beam width while building");
    index_build->add_option("--search-beam", graph.search_beam, "Beam width while searching");

    auto* index_search = index->add_subcommand("search", "Query an index");
    std::string search_query;
    std::size_t search_k = 10;
    bool search_bm25 = false;
    index_search->add_option("--index", index_dir, "Index directory")->required();
    index_search->add_option("--config", index_config, "Config with an embedding backend (dense search)");
    index_search->add_option("--query", search_query, "Query text")->required();
    index_search->add_option("--k", search_k, "Results to return");
    index_search->add_flag("--bm25", search_bm25, "Search documents with BM25 instead of snippets");

    // claims
    auto* claims = app.add_subcommand("claims", "Claim extraction and synthetic data");
    claims->require_subcommand(1);
    auto* claims_extract = claims->add_subcommand("extract", "Extract atomic claims from responses");
    std::string claims_config, claims_responses, claims_out, prompt_dir;
    claims_extract->add_option("--config", claims_config, "Config with a chat backend")->required();
    claims_extract->add_option("--responses", claims_responses, "Responses JSON Lines")->required();
    claims_extract->add_option("--out", claims_out, "Output JSON Lines")->required();
    claims_extract->add_option("--prompts", prompt_dir, "Prompt template directory");

    auto* claims_synth = claims->add_subcommand("synth", "Generate synthetic claim-decomposition data");
    std::size_t synth_topics = 200, synth_entities = 5;
    claims_synth->add_option("--config", claims_config, "Config with a chat backend")->required();
    claims_synth->add_option("--topics", synth_topics, "Number of topics");
    claims_synth->add_option("--entities", synth_entities, "Entities per topic");
    claims_synth->add_option("--out", claims_out, "Output JSON Lines")->required();
    claims_synth->add_option("--prompts", prompt_dir, "Prompt template directory");

    // run
    auto* run = app.add_subcommand("run", "Evaluate responses");
    std::string run_variant, run_retrieval, run_config, run_responses, run_out, run_sweep;
    std::optional<double> run_beta;
    run->add_option("--variant", run_variant, "M, S or A");
    run->add_option("--retrieval", run_retrieval, "corpus or web");
    run->add_option("--config", run_config, "Run config JSON")->required();
    run->add_option("--responses", run_responses, "Responses JSON Lines");
    run->add_option("--out", run_out, "Output directory");
    run->add_option("--beta", run_beta, "ICAT beta");
    run->add_option("--beta-sweep", run_sweep, "Comma-separated betas");

    // correlate
    auto* correlate = app.add_subcommand("correlate", "Correlate method scores with human scores");
    std::string corr_method, corr_human, corr_method_col, corr_human_col;
    correlate->add_option("--method", corr_method, "CSV with query_id,system_id,<score>")->required();
    correlate->add_option("--human", corr_human, "CSV with query_id,system_id,<score>")->required();
    correlate->add_option("--method-column", corr_method_col, "Score column in the method CSV");
    correlate->add_option("--human-column", corr_human_col, "Score column in the human CSV");

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Human annotation workflow");
    annotate->require_subcommand(1);
    auto* create = annotate->add_subcommand("create-tasks", "Create one task per response");
    std::string task_responses, task_topics, task_report, task_out;
    std::size_t task_required = icat::kDefaultRequiredAnnotators;
    create->add_option("--responses", task_responses, "Responses JSON Lines")->required();
    create->add_option("--topics", task_topics, "Topics JSON Lines")->required();
    create->add_option("--report", task_report, "Take aspects from this report.json instead of gold subtopics");
    create->add_option("--required", task_required, "Annotators per task");
    create->add_option("--out", task_out, "Task directory")->required();

    auto* serve = annotate->add_subcommand("serve", "Run the annotation HTTP service");
    std::string serve_tasks, serve_store, serve_host = "127.0.0.1", serve_static, serve_guidelines;
    int serve_port = 8080;
    serve->add_option("--tasks", serve_tasks, "Task directory");
    serve->add_option("--store", serve_store, "Event log path")->required();
    serve->add_option("--port", serve_port, "Port");
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--static", serve_static, "UI bundle directory");
    serve->add_option("--guidelines", serve_guidelines, "Guidelines markdown file");

    auto* exp = annotate->add_subcommand("export", "Export human coverage and the rating matrix");
    std::string export_store, export_out;
    exp->add_option("--store", export_store, "Event log path")->required();
    exp->add_option("--out", export_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
    spdlog::set_pattern("[%l] %v");

    try {
        if (*ingest) {
            auto bundle = icat::ingest_corpus(corpus_path, ingest_opts);
            icat::save_index(bundle, ingest_out);
            std::cout << "documents " << bundle.manifest.documents << ", snippets " << bundle.manifest.snippets
                      << ", spam excluded " << bundle.manifest.spam_excluded << "\n";
            return kExitOk;
        }
        if (*index_build) {
            auto bundle = icat::load_index(index_dir);
            auto gw = gateway_from(index_config);
            if (!gw.embedding) throw icat::ConfigError("config has no embedding backend");
            icat::build_dense(bundle, *gw.embedding, {icat::parse_dense_mode(index_mode), graph});
            icat::save_index(bundle, index_dir);
            std::cout << "indexed " << bundle.snippets.size() << " snippets, dimension " << bundle.manifest.dimension
                      << "\n";
            return kExitOk;
        }
        if (*index_search) {
            const auto bundle = icat::load_index(index_dir);
            icat::RankedList ranked;
            if (search_bm25) {
                ranked = bundle.bm25.search(search_query, search_k);
            } else {
                if (!bundle.dense) throw icat::ConfigError("index has no dense vectors; run 'icat index build'");
                if (index_config.empty()) throw icat::ConfigError("dense search needs --config");
                auto gw = gateway_from(index_config);
                if (!gw.embedding) throw icat::ConfigError("config has no embedding backend");
                const auto v = gw.embedding->embed({search_query}).front();
                std::vector<float> q(v.begin(), v.end());
                icat::normalize_in_place(q);
                ranked = bundle.dense->search(q, search_k);
            }
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                std::cout << i + 1 << "\t" << ranked[i].item_id << "\t" << icat::csv::format_number(ranked[i].score)
                          << "\n";
            }
            return kExitOk;
        }
        if (*claims_extract) {
            auto gw = gateway_from(claims_config);
            if (!gw.chat) throw icat::ConfigError("config has no chat backend");
            const auto prompts = prompts_from(prompt_dir);
            const auto responses = icat::load_responses(claims_responses);
            if (fs::path(claims_out).has_parent_path()) fs::create_directories(fs::path(claims_out).parent_path());
            std::ofstream out(claims_out, std::ios::binary | std::ios::trunc);
            for (const auto& r : responses) {
                const auto extracted = icat::extract_claims(r.text, *gw.chat, r.query_id + "/" + r.system_id, prompts);
                json list = json::array();
                for (const auto& c : extracted) list.push_back({{"claim_id", c.claim_id}, {"text", c.text}});
                out << json{{"query_id", r.query_id}, {"system_id", r.system_id}, {"claims", list}}.dump() << "\n";
            }
            return kExitOk;
        }
        if (*claims_synth) {
            auto gw = gateway_from(claims_config);
            if (!gw.chat) throw icat::ConfigError("config has no chat backend");
            const auto prompts = prompts_from(prompt_dir);
            const auto examples = icat::generate_synthetic_data(*gw.chat, synth_topics, synth_entities, prompts);
            icat::write_synthetic_jsonl(examples, claims_out);
            std::cout << "wrote " << examples.size() << " examples\n";
            return kExitOk;
        }
        if (*run) {
            icat::RunConfig config;
            std::vector<icat::ResponseRecord> responses;
            std::unique_ptr<icat::Evaluator> evaluator;
            try {
                config = icat::load_run_config(run_config);
                if (!run_variant.empty()) config.variant = icat::parse_variant(run_variant);
                if (!run_retrieval.empty()) config.retrieval = icat::parse_retrieval_mode(run_retrieval);
                if (!run_responses.empty()) config.responses = run_responses;
                if (!run_out.empty()) config.output = run_out;
                if (run_beta) config.beta = *run_beta;
                if (!run_sweep.empty()) config.beta_sweep = parse_beta_list(run_sweep);
                if (config.responses.empty()) throw icat::ConfigError("no responses file given");
                if (config.output.empty()) throw icat::ConfigError("no output directory given");
                icat::validate(config);
                responses = icat::load_responses(config.responses);
                evaluator = std::make_unique<icat::Evaluator>(config);
            } catch (const icat::Error& e) {
                std::cerr << "configuration error: " << e.what() << "\n";
                return kExitConfig;
            }
            const auto result = evaluator->run(responses);
            icat::write_outputs(result, config, config.output);
            std::cout << "evaluated " << result.evaluated() << "/" << result.total << "\n";
            for (const auto& [system, agg] : result.per_system) {
                std::cout << system << "\tS_fact " << icat::csv::format_number(agg.mean_s_fact) << "\tS_cov "
                          << icat::csv::format_number(agg.mean_s_coverage) << "\tICAT "
                          << icat::csv::format_number(agg.mean_icat) << "\n";
            }
            return icat::exit_code(result);
        }
        if (*correlate) {
            const auto method = icat::load_score_table(corr_method, corr_method_col);
            const auto human = icat::load_score_table(corr_human, corr_human_col);
            const auto report = icat::correlate(method, human);
            std::cout << json{{"pairs", report.pairs},
                              {"pearson", report.pearson},
                              {"spearman", report.spearman},
                              {"kendall", report.kendall}}
                             .dump(2)
                      << "\n";
            return kExitOk;
        }
        if (*create) {
            const auto topics = icat::load_topics(task_topics);
            const auto responses = icat::load_responses(task_responses);
            const auto resolver =
                task_report.empty() ? icat::gold_aspect_resolver(topics) : icat::report_aspect_resolver(task_report);
            const auto tasks = icat::create_tasks(responses, topics, resolver, task_required);
            icat::write_tasks(tasks, fs::path(task_out) / "tasks.jsonl");
            std::cout << "wrote " << tasks.size() << " tasks\n";
            return kExitOk;
        }
        if (*serve) {
            icat::AnnotationStore store(serve_store);
            if (!serve_tasks.empty()) {
                const auto added = store.add_tasks(icat::read_tasks(fs::path(serve_tasks) / "tasks.jsonl"));
                spdlog::info("{} new task(s) added, {} in store", added, store.task_count());
            }
            icat::ServerOptions options;
            const fs::path defaults = ICAT_ANNOTATION_DIR;
            options.static_dir = serve_static.empty() ? defaults / "static" : fs::path(serve_static);
            options.guidelines = serve_guidelines.empty() ? defaults / "guidelines.md" : fs::path(serve_guidelines);
            icat::AnnotationServer server(store, options);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            spdlog::info("listening on {}:{}", serve_host, serve_port);
            if (!server.listen(serve_host, serve_port)) {
                std::cerr << "cannot listen on " << serve_host << ":" << serve_port << "\n";
                return kExitFailure;
            }
            return kExitOk;
        }
        if (*exp) {
            icat::AnnotationStore store(export_store);
            const auto exported = store.export_human_coverage();
            fs::create_directories(export_out);
            std::ofstream(fs::path(export_out) / "human_coverage.csv", std::ios::binary) << exported.coverage_csv();
            std::ofstream(fs::path(export_out) / "ratings.json", std::ios::binary)
                << exported.ratings_json().dump(2) << "\n";
            std::cout << "exported " << exported.rows.size() << " tasks";
            try {
                std::cout << ", fleiss kappa " << icat::csv::format_number(icat::fleiss_kappa(exported.ratings));
            } catch (const icat::Error& e) {
                std::cout << ", fleiss kappa undefined (" << e.what() << ")";
            }
            std::cout << "\n";
            return kExitOk;
        }
    } catch (const icat::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
