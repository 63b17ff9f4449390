#pragma once

// Per-query pipeline for the three variants and the batch runner.
//
//   variant  aspects    alignment
//   M        gold       qrels of the first supporting document
//   S        gold       LLM
//   A        generated  LLM

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icat/aspects.hpp"
#include "icat/gateway.hpp"
#include "icat/grounding.hpp"
#include "icat/index_store.hpp"
#include "icat/prompts.hpp"
#include "icat/scoring.hpp"

namespace icat {

struct RunConfig {
    Variant variant = Variant::S;
    RetrievalMode retrieval = RetrievalMode::corpus;
    double beta = kDefaultBeta;
    std::size_t k_snippets = 10;
    std::size_t pool_size = 1000;
    bool use_pool = true;
    bool all_supporting = false;
    bool early_exit = false;
    std::optional<double> entail_threshold;
    std::size_t workers = 4;
    std::size_t grounding_workers = 4;
    std::optional<std::vector<double>> beta_sweep;

    /// Either a prebuilt index directory or a corpus to ingest in memory.
    std::optional<std::filesystem::path> index_dir;
    std::optional<std::filesystem::path> corpus;
    IngestOptions ingest;
    DenseOptions dense;

    std::filesystem::path topics;
    std::optional<std::filesystem::path> qrels;
    std::filesystem::path responses;
    std::filesystem::path output;
    std::optional<std::filesystem::path> prompt_dir;

    GatewayConfig gateway;
};

/// Reads a run config; relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Throws ConfigError when the variant, retrieval mode, paths and backends
/// do not fit together.
void validate(const RunConfig& config);

struct ResponseRecord {
    std::string query_id;
    std::string system_id;
    std::string text;
};

/// JSON Lines {query_id, system_id, text}; duplicate (query, system) pairs are rejected.
std::vector<ResponseRecord> load_responses(const std::filesystem::path& path);

struct QueryFailure {
    std::string query_id;
    std::string system_id;
    std::string error;
};

struct SweepRow {
    std::string system_id;
    double beta = 0.0;
    double mean_s_fact = 0.0;
    double mean_s_coverage = 0.0;
    double mean_icat = 0.0;
};

struct Crossover {
    std::string system_a;
    std::string system_b;
    double beta = 0.0;
};

struct RunResult {
    std::vector<QueryReport> reports;  // sorted by (system_id, query_id)
    std::vector<QueryFailure> failures;
    std::size_t total = 0;
    std::map<std::string, AggregateReport> per_system;
    std::vector<SweepRow> sweep;
    std::vector<Crossover> crossovers;

    std::size_t evaluated() const { return reports.size(); }
};

class Evaluator {
public:
    /// Validates the config, loads topics, qrels and prompts, creates the
    /// gateway and loads or builds the index.
    explicit Evaluator(RunConfig config);
    /// Uses an existing gateway and index instead of building them.
    Evaluator(RunConfig config, Gateway gateway, std::shared_ptr<const IndexBundle> index);

    QueryReport evaluate_query(const ResponseRecord& response) const;
    RunResult run(const std::vector<ResponseRecord>& responses) const;

    const RunConfig& config() const { return config_; }
    const Gateway& gateway() const { return gateway_; }

private:
    void load_inputs();

    RunConfig config_;
    Gateway gateway_;
    std::shared_ptr<const IndexBundle> index_;
    std::vector<Topic> topics_;
    Qrels qrels_;
    PromptLibrary prompts_;
};

/// Mean ICAT per system at each beta. Scores are not recomputed, only ICAT.
std::vector<SweepRow> beta_sweep(const std::map<std::string, AggregateReport>& per_system,
                                 const std::vector<double>& betas);

/// Betas in [lo, hi] where the mean-ICAT ordering of two systems flips,
/// located by a log-spaced scan and refined by bisection on log beta.
std::vector<Crossover> find_crossovers(const std::map<std::string, AggregateReport>& per_system, double lo, double hi);

/// (query_id, system_id, s_coverage) rows in report order.
std::vector<std::tuple<std::string, std::string, double>> export_coverage_scores(const std::vector<QueryReport>& reports);

nlohmann::json to_json(const QueryReport& report);
nlohmann::json to_json(const RunResult& result, const RunConfig& config);

/// Writes report.json, scores.csv, coverage.csv, run.log and, when
/// sweeping, sweep.csv and crossover.csv.
void write_outputs(const RunResult& result, const RunConfig& config, const std::filesystem::path& dir);

/// 0 when every query was evaluated, 1 otherwise.
int exit_code(const RunResult& result);

}  // namespace icat
