#include "icat/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/bm25.hpp"
#include "icat/claims.hpp"
#include "icat/csv.hpp"
#include "icat/error.hpp"
#include "icat/parallel.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    return p.is_relative() && !base.empty() ? base / p : p;
}

std::optional<std::filesystem::path> optional_path(const json& root, const char* key, const std::filesystem::path& base) {
    if (!root.contains(key) || root[key].is_null()) return std::nullopt;
    return resolve(root[key].get<std::string>(), base);
}

std::string aspect_provenance_for(Variant v) { return v == Variant::A ? "generated" : "gold"; }
std::string alignment_method_for(Variant v) { return v == Variant::M ? "manual" : "llm"; }

}  // namespace

RunConfig parse_run_config(const json& root, const std::filesystem::path& base_dir) {
    if (!root.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig c;
    try {
        if (root.contains("variant")) c.variant = parse_variant(root["variant"].get<std::string>());
        if (root.contains("retrieval")) c.retrieval = parse_retrieval_mode(root["retrieval"].get<std::string>());
        c.beta = root.value("beta", c.beta);
        c.k_snippets = root.value("k_snippets", c.k_snippets);
        c.pool_size = root.value("pool_size", c.pool_size);
        c.use_pool = root.value("pool", c.use_pool);
        c.workers = root.value("workers", c.workers);
        if (root.contains("beta_sweep") && !root["beta_sweep"].is_null()) {
            c.beta_sweep = root["beta_sweep"].get<std::vector<double>>();
        }
        if (root.contains("grounding")) {
            const auto& g = root["grounding"];
            c.early_exit = g.value("early_exit", c.early_exit);
            c.all_supporting = g.value("all_supporting", c.all_supporting);
            c.grounding_workers = g.value("workers", c.grounding_workers);
            if (g.contains("entail_threshold") && !g["entail_threshold"].is_null()) {
                c.entail_threshold = g["entail_threshold"].get<double>();
            }
        }
        if (root.contains("ingest")) {
            const auto& i = root["ingest"];
            c.ingest.spam_threshold = i.value("spam_threshold", c.ingest.spam_threshold);
            c.ingest.max_words = i.value("max_words", c.ingest.max_words);
            c.ingest.overlap = i.value("overlap", c.ingest.overlap);
        }
        if (root.contains("dense")) {
            const auto& d = root["dense"];
            if (d.contains("mode")) c.dense.mode = parse_dense_mode(d["mode"].get<std::string>());
            c.dense.params.degree = d.value("degree", c.dense.params.degree);
            c.dense.params.construction_beam = d.value("construction_beam", c.dense.params.construction_beam);
            c.dense.params.search_beam = d.value("search_beam", c.dense.params.search_beam);
        }
        c.index_dir = optional_path(root, "index", base_dir);
        c.corpus = optional_path(root, "corpus", base_dir);
        c.qrels = optional_path(root, "qrels", base_dir);
        c.prompt_dir = optional_path(root, "prompts", base_dir);
        if (auto p = optional_path(root, "topics", base_dir)) c.topics = *p;
        if (auto p = optional_path(root, "responses", base_dir)) c.responses = *p;
        if (auto p = optional_path(root, "output", base_dir)) c.output = *p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid run config: ") + e.what());
    }
    c.gateway = parse_gateway_config(root, base_dir);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(root, path.parent_path());
}

void validate(const RunConfig& c) {
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) throw ConfigError("beta must be positive");
    if (c.beta_sweep) {
        if (c.beta_sweep->empty()) throw ConfigError("beta sweep is empty");
        for (double b : *c.beta_sweep) {
            if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("beta sweep values must be positive");
        }
    }
    if (c.k_snippets == 0) throw ConfigError("k_snippets must be at least 1");
    if (c.pool_size == 0) throw ConfigError("pool_size must be at least 1");
    if (c.variant == Variant::M) {
        if (c.retrieval != RetrievalMode::corpus) throw ConfigError("ICAT-M requires corpus retrieval");
        if (!c.qrels) throw ConfigError("ICAT-M requires a qrels file");
    }
    if (c.topics.empty()) throw ConfigError("a topics file is required");
    const auto has = [&](BackendRole r) { return c.gateway.backends.count(r) != 0; };
    if (!has(BackendRole::chat)) throw ConfigError("a chat backend is required");
    if (!has(BackendRole::nli)) throw ConfigError("an nli backend is required");
    if (c.retrieval == RetrievalMode::corpus) {
        if (!c.index_dir && !c.corpus) throw ConfigError("corpus retrieval needs an index or a corpus");
        if (!has(BackendRole::embedding)) throw ConfigError("corpus retrieval needs an embedding backend");
    } else if (!has(BackendRole::websearch)) {
        throw ConfigError("web retrieval needs a websearch backend");
    }
}

std::vector<ResponseRecord> load_responses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open responses file " + path.string());
    std::vector<ResponseRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (trim(raw).empty()) continue;
        json j;
        try {
            j = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed response record: ") + e.what(), line);
        }
        if (!j.is_object()) throw ParseError("response record must be an object", line);
        ResponseRecord r;
        for (const char* key : {"query_id", "system_id", "text"}) {
            if (!j.contains(key)) throw ParseError(std::string("response record lacks '") + key + "'", line);
        }
        r.query_id = j["query_id"].is_string() ? j["query_id"].get<std::string>() : j["query_id"].dump();
        r.system_id = j["system_id"].get<std::string>();
        r.text = j["text"].get<std::string>();
        if (!seen.insert({r.query_id, r.system_id}).second) {
            throw ParseError("duplicate response for query '" + r.query_id + "' and system '" + r.system_id + "'", line);
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ConfigError("responses file " + path.string() + " is empty");
    return out;
}

// ---------------------------------------------------------------------------

Evaluator::Evaluator(RunConfig config) : config_(std::move(config)) {
    validate(config_);
    load_inputs();
    gateway_ = make_gateway(config_.gateway);
    if (config_.retrieval == RetrievalMode::corpus) {
        auto bundle = std::make_shared<IndexBundle>(config_.index_dir ? load_index(*config_.index_dir)
                                                                      : ingest_corpus(*config_.corpus, config_.ingest));
        if (!bundle->dense) build_dense(*bundle, *gateway_.embedding, config_.dense);
        index_ = std::move(bundle);
    }
}

Evaluator::Evaluator(RunConfig config, Gateway gateway, std::shared_ptr<const IndexBundle> index)
    : config_(std::move(config)), gateway_(std::move(gateway)), index_(std::move(index)) {
    if (config_.variant == Variant::M) {
        if (config_.retrieval != RetrievalMode::corpus) throw ConfigError("ICAT-M requires corpus retrieval");
        if (!config_.qrels) throw ConfigError("ICAT-M requires a qrels file");
    }
    if (config_.retrieval == RetrievalMode::corpus && (!index_ || !index_->dense)) {
        throw ConfigError("corpus retrieval needs a dense index");
    }
    load_inputs();
}

void Evaluator::load_inputs() {
    prompts_ = PromptLibrary::load(config_.prompt_dir ? *config_.prompt_dir : PromptLibrary::default_dir());
    topics_ = load_topics(config_.topics);
    if (config_.variant == Variant::M) qrels_ = load_qrels(*config_.qrels);
}

QueryReport Evaluator::evaluate_query(const ResponseRecord& response) const {
    const auto& topic = find_topic(topics_, response.query_id);
    if (!gateway_.chat || !gateway_.nli) throw ConfigError("chat and nli backends are required");

    QueryReport report;
    report.query_id = response.query_id;
    report.system_id = response.system_id;
    report.variant = config_.variant;
    report.beta = config_.beta;

    // Aspects first: gold sets fail fast, before any backend call.
    std::optional<AspectSet> aspects;
    if (config_.variant != Variant::A) aspects = gold_aspects(topic);

    const auto claims =
        extract_claims(response.text, *gateway_.chat, response.query_id + "/" + response.system_id, prompts_);

    std::unique_ptr<EvidenceRetriever> retriever;
    if (config_.retrieval == RetrievalMode::corpus) {
        std::optional<std::unordered_set<std::string>> pool;
        if (config_.use_pool) pool = candidate_pool(index_->bm25, topic.title, config_.pool_size);
        retriever = std::make_unique<CorpusRetriever>(*index_->dense, index_->snippets, *gateway_.embedding,
                                                      std::move(pool));
    } else {
        retriever = std::make_unique<WebRetriever>(*gateway_.websearch);
    }
    GroundingOptions gopts;
    gopts.k = config_.k_snippets;
    gopts.early_exit = config_.early_exit;
    gopts.entail_threshold = config_.entail_threshold;
    gopts.workers = config_.grounding_workers;
    const auto outcome = ground_all(claims, *retriever, *gateway_.nli, gopts);

    if (!aspects) aspects = generate_aspects(topic.query_id, topic.description, *gateway_.chat, prompts_);

    const auto alignment = config_.variant == Variant::M
                               ? align_manual(topic.query_id, outcome.results, qrels_, *aspects, config_.all_supporting)
                               : align_llm(topic.description, *aspects, outcome.grounded, *gateway_.chat, prompts_);

    report.claims_total = claims.size();
    report.claims_grounded = outcome.grounded.size();
    report.aspects_covered = covered_aspects(alignment);
    for (const auto& a : aspects->aspects) report.aspects.emplace_back(a.id, a.description);
    for (std::size_t i = 0; i < claims.size(); ++i) {
        ClaimTrace t{claims[i], outcome.results[i], {}};
        if (const auto it = alignment.mapping.find(claims[i].claim_id); it != alignment.mapping.end()) {
            t.aligned_aspects = it->second;
        }
        report.trace.push_back(std::move(t));
    }
    finalize_scores(report, aspects->ids());
    return report;
}

RunResult Evaluator::run(const std::vector<ResponseRecord>& responses) const {
    RunResult result;
    result.total = responses.size();
    std::vector<std::optional<QueryReport>> slots(responses.size());
    std::vector<std::string> errors(responses.size());
    parallel_for(responses.size(), config_.workers, [&](std::size_t i) {
        try {
            slots[i] = evaluate_query(responses[i]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            spdlog::error("query {} / system {} failed: {}", responses[i].query_id, responses[i].system_id, e.what());
        }
    });
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (slots[i]) {
            result.reports.push_back(std::move(*slots[i]));
        } else {
            result.failures.push_back({responses[i].query_id, responses[i].system_id, errors[i]});
        }
    }
    const auto by_key = [](const auto& a, const auto& b) {
        return std::tie(a.system_id, a.query_id) < std::tie(b.system_id, b.query_id);
    };
    std::sort(result.reports.begin(), result.reports.end(), by_key);
    std::sort(result.failures.begin(), result.failures.end(), by_key);

    std::map<std::string, std::vector<QueryReport>> grouped;
    for (const auto& r : result.reports) grouped[r.system_id].push_back(r);
    for (const auto& [system, reports] : grouped) result.per_system[system] = aggregate(reports);

    if (config_.beta_sweep && !result.per_system.empty()) {
        result.sweep = beta_sweep(result.per_system, *config_.beta_sweep);
        const auto [lo, hi] = std::minmax_element(config_.beta_sweep->begin(), config_.beta_sweep->end());
        if (*lo < *hi) result.crossovers = find_crossovers(result.per_system, *lo, *hi);
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

double mean_icat_at(const AggregateReport& agg, double beta) {
    double sum = 0.0;
    for (const auto& r : agg.per_query) sum += icat_beta(r.scores.s_fact, r.scores.s_coverage, beta);
    return sum / static_cast<double>(agg.per_query.size());
}

}  // namespace

std::vector<SweepRow> beta_sweep(const std::map<std::string, AggregateReport>& per_system,
                                 const std::vector<double>& betas) {
    std::vector<SweepRow> rows;
    for (const auto& [system, agg] : per_system) {
        for (double beta : betas) {
            rows.push_back({system, beta, agg.mean_s_fact, agg.mean_s_coverage, mean_icat_at(agg, beta)});
        }
    }
    return rows;
}

std::vector<Crossover> find_crossovers(const std::map<std::string, AggregateReport>& per_system, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw ContractError("crossover search needs 0 < lo < hi");
    constexpr int kSteps = 2000;
    const double log_lo = std::log(lo);
    const double log_hi = std::log(hi);
    std::vector<Crossover> out;
    for (auto a = per_system.begin(); a != per_system.end(); ++a) {
        for (auto b = std::next(a); b != per_system.end(); ++b) {
            const auto diff = [&](double log_beta) {
                const double beta = std::exp(log_beta);
                return mean_icat_at(a->second, beta) - mean_icat_at(b->second, beta);
            };
            double prev_x = log_lo;
            double prev = diff(prev_x);
            for (int s = 1; s <= kSteps; ++s) {
                const double x = log_lo + (log_hi - log_lo) * s / kSteps;
                const double cur = diff(x);
                if (prev == 0.0 && s == 1) {
                    out.push_back({a->first, b->first, std::exp(prev_x)});
                } else if (cur == 0.0) {
                    out.push_back({a->first, b->first, std::exp(x)});
                } else if (prev != 0.0 && (prev < 0.0) != (cur < 0.0)) {
                    double l = prev_x;
                    double h = x;
                    double fl = prev;
                    for (int it = 0; it < 100 && h - l > 1e-13; ++it) {
                        const double m = 0.5 * (l + h);
                        const double fm = diff(m);
                        if (fm == 0.0) {
                            l = h = m;
                            break;
                        }
                        if ((fm < 0.0) == (fl < 0.0)) {
                            l = m;
                            fl = fm;
                        } else {
                            h = m;
                        }
                    }
                    out.push_back({a->first, b->first, std::exp(0.5 * (l + h))});
                }
                prev_x = x;
                prev = cur;
            }
        }
    }
    return out;
}

std::vector<std::tuple<std::string, std::string, double>> export_coverage_scores(const std::vector<QueryReport>& reports) {
    std::vector<std::tuple<std::string, std::string, double>> rows;
    rows.reserve(reports.size());
    for (const auto& r : reports) rows.emplace_back(r.query_id, r.system_id, r.scores.s_coverage);
    return rows;
}

json to_json(const QueryReport& r) {
    json aspects = json::array();
    for (const auto& [id, desc] : r.aspects) aspects.push_back({{"id", id}, {"description", desc}});
    json claims = json::array();
    for (const auto& t : r.trace) {
        json evidence = json::array();
        for (const auto& e : t.grounding.evidence) {
            evidence.push_back({{"rank", e.rank},
                                {"snippet_id", e.snippet_id},
                                {"doc_id", e.doc_id},
                                {"nli_label", to_string(e.nli_label)},
                                {"entail_probability", e.entail_probability}});
        }
        claims.push_back({{"claim_id", t.claim.claim_id},
                          {"text", t.claim.text},
                          {"supported", t.grounding.supported},
                          {"first_supporting_doc", t.grounding.first_supporting_doc ? json(*t.grounding.first_supporting_doc)
                                                                                    : json(nullptr)},
                          {"retrieval", to_string(t.grounding.source)},
                          {"aligned_aspects", t.aligned_aspects},
                          {"evidence", evidence}});
    }
    return {{"query_id", r.query_id},
            {"system_id", r.system_id},
            {"variant", to_string(r.variant)},
            {"aspect_source", aspect_provenance_for(r.variant)},
            {"alignment", alignment_method_for(r.variant)},
            {"beta", r.beta},
            {"claims_total", r.claims_total},
            {"claims_grounded", r.claims_grounded},
            {"aspects_total", r.aspects_total},
            {"aspects_covered", r.aspects_covered},
            {"s_fact", r.scores.s_fact},
            {"s_coverage", r.scores.s_coverage},
            {"icat", r.icat},
            {"aspects", aspects},
            {"claims", claims}};
}

json to_json(const RunResult& result, const RunConfig& config) {
    json systems = json::array();
    for (const auto& [system, agg] : result.per_system) {
        json queries = json::array();
        for (const auto& r : agg.per_query) queries.push_back(to_json(r));
        systems.push_back({{"system_id", system},
                           {"evaluated", agg.per_query.size()},
                           {"mean_s_fact", agg.mean_s_fact},
                           {"mean_s_coverage", agg.mean_s_coverage},
                           {"mean_icat", agg.mean_icat},
                           {"queries", queries}});
    }
    json failures = json::array();
    for (const auto& f : result.failures) {
        failures.push_back({{"query_id", f.query_id}, {"system_id", f.system_id}, {"error", f.error}});
    }
    json out = {{"variant", to_string(config.variant)},
                {"retrieval", to_string(config.retrieval)},
                {"beta", config.beta},
                {"k_snippets", config.k_snippets},
                {"evaluated", result.evaluated()},
                {"total", result.total},
                {"systems", systems},
                {"failures", failures}};
    if (config.beta_sweep) {
        json sweep = json::array();
        for (const auto& row : result.sweep) {
            sweep.push_back({{"system_id", row.system_id}, {"beta", row.beta}, {"mean_icat", row.mean_icat}});
        }
        json cross = json::array();
        for (const auto& c : result.crossovers) {
            cross.push_back({{"system_a", c.system_a}, {"system_b", c.system_b}, {"beta", c.beta}});
        }
        out["sweep"] = sweep;
        out["crossovers"] = cross;
    }
    return out;
}

void write_outputs(const RunResult& result, const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("report.json");
        out << to_json(result, config).dump(2) << '\n';
    }
    {
        auto out = open("scores.csv");
        out << "system_id,query_id,s_fact,s_coverage,icat\n";
        for (const auto& r : result.reports) {
            out << csv::join({r.system_id, r.query_id, csv::format_number(r.scores.s_fact),
                              csv::format_number(r.scores.s_coverage), csv::format_number(r.icat)})
                << '\n';
        }
    }
    {
        auto out = open("coverage.csv");
        out << "query_id,system_id,s_coverage\n";
        for (const auto& [q, s, cov] : export_coverage_scores(result.reports)) {
            out << csv::join({q, s, csv::format_number(cov)}) << '\n';
        }
    }
    if (config.beta_sweep) {
        auto out = open("sweep.csv");
        out << "system_id,beta,mean_icat\n";
        for (const auto& row : result.sweep) {
            out << csv::join({row.system_id, csv::format_number(row.beta), csv::format_number(row.mean_icat)}) << '\n';
        }
        auto cross = open("crossover.csv");
        cross << "system_a,system_b,beta\n";
        for (const auto& c : result.crossovers) {
            cross << csv::join({c.system_a, c.system_b, csv::format_number(c.beta)}) << '\n';
        }
    }
    auto log = open("run.log");
    log << "evaluated " << result.evaluated() << "/" << result.total << "\n";
    for (const auto& f : result.failures) log << "FAILED " << f.query_id << " " << f.system_id << ": " << f.error << "\n";
}

int exit_code(const RunResult& result) { return result.failures.empty() ? 0 : 1; }

}  // namespace icat
