#pragma once

// Human coverage annotation: task assignment, validated submissions kept in
// an append-only JSON Lines event log, and majority-vote export.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icat/aspects.hpp"
#include "icat/error.hpp"
#include "icat/evaluator.hpp"
#include "icat/stats.hpp"

namespace icat {

inline constexpr std::size_t kDefaultRequiredAnnotators = 3;

struct AnnotationTask {
    std::string task_id;
    std::string query_id;
    std::string system_id;
    std::string query_text;
    std::string response_text;
    std::vector<Aspect> aspects;
    std::size_t required_annotators = kDefaultRequiredAnnotators;

    bool operator==(const AnnotationTask&) const = default;
};

/// First 16 hex digits of SHA-256 over (query_id, system_id).
std::string make_task_id(const std::string& query_id, const std::string& system_id);

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive, code points

    bool operator==(const Span&) const = default;
};

struct AspectJudgment {
    std::string aspect_id;
    bool present = false;
    std::vector<Span> evidence;

    bool operator==(const AspectJudgment&) const = default;
};

struct Annotation {
    std::string task_id;
    std::string annotator_id;
    std::vector<AspectJudgment> judgments;
    std::string submitted_at;  // assigned by the store
    std::size_t sequence = 0;  // position in the event log
};

nlohmann::json to_json(const AnnotationTask& task);
AnnotationTask task_from_json(const nlohmann::json& j);
Annotation annotation_from_json(const nlohmann::json& j);

using AspectResolver = std::function<AspectSet(const ResponseRecord&)>;

/// One task per (query, system) response. Query text is the topic description.
std::vector<AnnotationTask> create_tasks(const std::vector<ResponseRecord>& responses, const std::vector<Topic>& topics,
                                         const AspectResolver& aspects_for,
                                         std::size_t required_annotators = kDefaultRequiredAnnotators);

/// Gold subtopics from the topics file.
AspectResolver gold_aspect_resolver(const std::vector<Topic>& topics);
/// The aspects recorded per (query, system) in an evaluation report.json.
AspectResolver report_aspect_resolver(const std::filesystem::path& report_json);

void write_tasks(const std::vector<AnnotationTask>& tasks, const std::filesystem::path& path);
std::vector<AnnotationTask> read_tasks(const std::filesystem::path& path);

/// Rejected submission; `code` is machine-readable.
class AnnotationError : public Error {
public:
    AnnotationError(std::string code, int http_status, const std::string& message)
        : Error(message), code_(std::move(code)), http_status_(http_status) {}
    const std::string& code() const noexcept { return code_; }
    int http_status() const noexcept { return http_status_; }

private:
    std::string code_;
    int http_status_;
};

enum class SubmitStatus { created, duplicate };

struct CoverageRow {
    std::string query_id;
    std::string system_id;
    double human_s_coverage = 0.0;
};

struct CoverageExport {
    std::vector<CoverageRow> rows;  // sorted by (query_id, system_id)
    RatingMatrix ratings;           // items "task_id:aspect_id", categories {present, absent}
    std::vector<std::string> partial_tasks;
    std::vector<std::string> truncated_tasks;  // more submissions than required

    std::string coverage_csv() const;
    nlohmann::json ratings_json() const;
};

class AnnotationStore {
public:
    /// Replays the event log at `path`, creating it if missing.
    explicit AnnotationStore(std::filesystem::path path);

    /// Appends creation events for tasks not already stored. A stored task
    /// with the same id but different content is an error.
    std::size_t add_tasks(const std::vector<AnnotationTask>& tasks);

    std::optional<AnnotationTask> next_task(const std::string& annotator_id) const;
    SubmitStatus submit(Annotation annotation);
    CoverageExport export_human_coverage() const;

    std::optional<AnnotationTask> task(const std::string& task_id) const;
    std::size_t task_count() const;
    /// Annotators counted towards the task, capped at required_annotators.
    std::vector<std::string> completed_by(const std::string& task_id) const;

private:
    struct TaskState {
        AnnotationTask task;
        std::size_t response_length = 0;
        std::vector<Annotation> submissions;  // log order
    };

    void replay();
    void append(const nlohmann::json& event);
    void apply_task(AnnotationTask task);
    void validate(const TaskState& state, Annotation& annotation) const;

    std::filesystem::path path_;
    std::ofstream log_;
    std::size_t sequence_ = 0;
    std::map<std::string, TaskState> tasks_;
    mutable std::shared_mutex mutex_;
};

struct ServerOptions {
    std::optional<std::filesystem::path> static_dir;
    std::optional<std::filesystem::path> guidelines;
};

/// HTTP front end:
///   GET  /api/tasks/next?annotator=<id>   200 task JSON, or 204
///   POST /api/annotations                 201, 200 on an exact resubmission, 4xx {error, message}
///   GET  /api/export/coverage             CSV query_id,system_id,human_s_coverage
///   GET  /api/export/ratings              rating matrix JSON
///   GET  /api/guidelines                  annotation guidelines (text/markdown)
///   GET  /                                static files from static_dir
class AnnotationServer {
public:
    AnnotationServer(AnnotationStore& store, ServerOptions options = {});
    ~AnnotationServer();

    /// Blocks until stop().
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; call listen_after_bind() next.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace icat
