#include "icat/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/csv.hpp"
#include "icat/hashing.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return out.str();
}

[[noreturn]] void reject(const std::string& code, int status, const std::string& message) {
    throw AnnotationError(code, status, message);
}

json judgments_json(const std::vector<AspectJudgment>& judgments) {
    json out = json::array();
    for (const auto& j : judgments) {
        json spans = json::array();
        for (const auto& s : j.evidence) spans.push_back({s.start, s.end});
        out.push_back({{"aspect_id", j.aspect_id}, {"present", j.present}, {"evidence", spans}});
    }
    return out;
}

}  // namespace

std::string make_task_id(const std::string& query_id, const std::string& system_id) {
    return Sha256().field(query_id).field(system_id).hex_digest().substr(0, 16);
}

json to_json(const AnnotationTask& t) {
    json aspects = json::array();
    for (const auto& a : t.aspects) aspects.push_back({{"id", a.id}, {"description", a.description}});
    return {{"task_id", t.task_id},
            {"query_id", t.query_id},
            {"system_id", t.system_id},
            {"query_text", t.query_text},
            {"response_text", t.response_text},
            {"aspects", aspects},
            {"required_annotators", t.required_annotators}};
}

AnnotationTask task_from_json(const json& j) {
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.query_id = j.at("query_id").get<std::string>();
    t.system_id = j.at("system_id").get<std::string>();
    t.query_text = j.at("query_text").get<std::string>();
    t.response_text = j.at("response_text").get<std::string>();
    for (const auto& a : j.at("aspects")) t.aspects.push_back({a.at("id").get<std::string>(), a.at("description").get<std::string>()});
    t.required_annotators = j.value("required_annotators", kDefaultRequiredAnnotators);
    return t;
}

Annotation annotation_from_json(const json& j) {
    if (!j.is_object()) reject("invalid_request", 400, "annotation must be a JSON object");
    Annotation a;
    try {
        a.task_id = j.at("task_id").get<std::string>();
        a.annotator_id = j.value("annotator_id", std::string{});
        if (!j.at("judgments").is_array()) reject("invalid_request", 400, "'judgments' must be an array");
        for (const auto& jj : j["judgments"]) {
            AspectJudgment judgment;
            const auto& id = jj.at("aspect_id");
            judgment.aspect_id = id.is_string() ? id.get<std::string>() : id.dump();
            judgment.present = jj.at("present").get<bool>();
            if (jj.contains("evidence")) {
                for (const auto& s : jj["evidence"]) {
                    Span span;
                    if (s.is_array() && s.size() == 2) {
                        const auto start = s[0].get<long long>();
                        const auto end = s[1].get<long long>();
                        if (start < 0 || end < 0) reject("span_out_of_bounds", 422, "span offsets must be non-negative");
                        span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
                    } else {
                        const auto start = s.at("start").get<long long>();
                        const auto end = s.at("end").get<long long>();
                        if (start < 0 || end < 0) reject("span_out_of_bounds", 422, "span offsets must be non-negative");
                        span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
                    }
                    judgment.evidence.push_back(span);
                }
            }
            a.judgments.push_back(std::move(judgment));
        }
        a.submitted_at = j.value("submitted_at", std::string{});
        a.sequence = j.value("sequence", std::size_t{0});
    } catch (const json::exception& e) {
        reject("invalid_request", 400, std::string("malformed annotation: ") + e.what());
    }
    return a;
}

std::vector<AnnotationTask> create_tasks(const std::vector<ResponseRecord>& responses, const std::vector<Topic>& topics,
                                         const AspectResolver& aspects_for, std::size_t required_annotators) {
    if (required_annotators == 0) throw ContractError("required_annotators must be positive");
    std::vector<AnnotationTask> tasks;
    std::set<std::string> seen;
    for (const auto& r : responses) {
        auto id = make_task_id(r.query_id, r.system_id);
        if (!seen.insert(id).second) {
            throw Error("duplicate response for query '" + r.query_id + "' and system '" + r.system_id + "'");
        }
        const auto& topic = find_topic(topics, r.query_id);
        auto aspects = aspects_for(r);
        if (aspects.aspects.empty()) throw Error("no aspects for query '" + r.query_id + "'");
        tasks.push_back({std::move(id), r.query_id, r.system_id, topic.description, r.text, std::move(aspects.aspects),
                         required_annotators});
    }
    std::sort(tasks.begin(), tasks.end(), [](const auto& a, const auto& b) { return a.task_id < b.task_id; });
    return tasks;
}

AspectResolver gold_aspect_resolver(const std::vector<Topic>& topics) {
    return [&topics](const ResponseRecord& r) { return gold_aspects(find_topic(topics, r.query_id)); };
}

AspectResolver report_aspect_resolver(const std::filesystem::path& report_json) {
    std::ifstream in(report_json);
    if (!in) throw Error("cannot open report " + report_json.string());
    const auto root = json::parse(in);
    auto table = std::make_shared<std::map<std::pair<std::string, std::string>, AspectSet>>();
    for (const auto& sys : root.at("systems")) {
        for (const auto& q : sys.at("queries")) {
            AspectSet set;
            set.query_id = q.at("query_id").get<std::string>();
            set.provenance = q.value("aspect_source", std::string{"gold"}) == "generated" ? AspectProvenance::generated
                                                                                      : AspectProvenance::gold;
            for (const auto& a : q.at("aspects")) {
                set.aspects.push_back({a.at("id").get<std::string>(), a.at("description").get<std::string>()});
            }
            (*table)[{set.query_id, q.at("system_id").get<std::string>()}] = std::move(set);
        }
    }
    return [table](const ResponseRecord& r) {
        const auto it = table->find({r.query_id, r.system_id});
        if (it == table->end()) throw Error("report has no aspects for " + r.query_id + " / " + r.system_id);
        return it->second;
    };
}

void write_tasks(const std::vector<AnnotationTask>& tasks, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& t : tasks) out << to_json(t).dump() << '\n';
}

std::vector<AnnotationTask> read_tasks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tasks file " + path.string());
    std::vector<AnnotationTask> tasks;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (trim(raw).empty()) continue;
        try {
            tasks.push_back(task_from_json(json::parse(raw)));
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed task: ") + e.what(), line);
        }
    }
    return tasks;
}

// ---------------------------------------------------------------------------

std::string CoverageExport::coverage_csv() const {
    std::string out = "query_id,system_id,human_s_coverage\n";
    for (const auto& r : rows) out += csv::join({r.query_id, r.system_id, csv::format_number(r.human_s_coverage)}) + "\n";
    return out;
}

json CoverageExport::ratings_json() const {
    return {{"items", ratings.items},
            {"categories", ratings.categories},
            {"counts", ratings.counts},
            {"raters_per_item", ratings.raters_per_item},
            {"metadata",
             {{"vote_policy", "first required_annotators submissions per task in log order"},
              {"partial_tasks_excluded", partial_tasks},
              {"tasks_with_extra_submissions", truncated_tasks}}}};
}

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    replay();
    log_.open(path_, std::ios::binary | std::ios::app);
    if (!log_) throw Error("cannot open annotation store " + path_.string());
}

void AnnotationStore::replay() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string raw;
    std::size_t line = 0;
    std::optional<std::uintmax_t> torn_at;
    for (auto offset = in.tellg(); std::getline(in, raw); offset = in.tellg()) {
        ++line;
        if (trim(raw).empty()) continue;
        json event;
        try {
            event = json::parse(raw);
        } catch (const json::parse_error& e) {
            if (in.peek() == std::char_traits<char>::eof()) {
                spdlog::warn("annotation store: dropping torn final line {}", line);
                torn_at = static_cast<std::uintmax_t>(offset);
                break;
            }
            throw ParseError(std::string("corrupt annotation store: ") + e.what(), line);
        }
        const auto type = event.value("type", std::string{});
        ++sequence_;
        if (type == "task") {
            apply_task(task_from_json(event.at("task")));
        } else if (type == "annotation") {
            auto a = annotation_from_json(event.at("annotation"));
            a.sequence = sequence_;
            const auto it = tasks_.find(a.task_id);
            if (it == tasks_.end()) throw ParseError("annotation for unknown task " + a.task_id, line);
            it->second.submissions.push_back(std::move(a));
        } else {
            throw ParseError("unknown event type '" + type + "'", line);
        }
    }
    in.close();
    if (torn_at) std::filesystem::resize_file(path_, *torn_at);
}

void AnnotationStore::append(const json& event) {
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_) throw Error("failed to append to annotation store");
}

void AnnotationStore::apply_task(AnnotationTask task) {
    TaskState state;
    state.response_length = utf8_length(task.response_text);
    state.task = std::move(task);
    const auto id = state.task.task_id;
    tasks_.emplace(id, std::move(state));
}

std::size_t AnnotationStore::add_tasks(const std::vector<AnnotationTask>& tasks) {
    std::unique_lock lock(mutex_);
    std::size_t added = 0;
    for (const auto& t : tasks) {
        if (const auto it = tasks_.find(t.task_id); it != tasks_.end()) {
            if (!(it->second.task == t)) throw Error("task " + t.task_id + " already stored with different content");
            continue;
        }
        ++sequence_;
        append({{"type", "task"}, {"task", to_json(t)}});
        apply_task(t);
        ++added;
    }
    return added;
}

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator_id) const {
    if (annotator_id.empty()) throw ContractError("annotator id must be non-empty");
    std::shared_lock lock(mutex_);
    const TaskState* best = nullptr;
    for (const auto& [id, state] : tasks_) {
        const auto n = state.submissions.size();
        if (n >= state.task.required_annotators) continue;
        const bool done = std::any_of(state.submissions.begin(), state.submissions.end(),
                                      [&](const Annotation& a) { return a.annotator_id == annotator_id; });
        if (done) continue;
        // tasks_ iterates in task_id order, so the first minimum wins ties.
        if (best == nullptr || n < best->submissions.size()) best = &state;
    }
    if (best == nullptr) return std::nullopt;
    return best->task;
}

void AnnotationStore::validate(const TaskState& state, Annotation& a) const {
    std::map<std::string, const AspectJudgment*> by_aspect;
    for (const auto& j : a.judgments) {
        if (!by_aspect.emplace(j.aspect_id, &j).second) {
            reject("judgment_mismatch", 422, "aspect '" + j.aspect_id + "' judged twice");
        }
    }
    for (const auto& j : a.judgments) {
        const bool known = std::any_of(state.task.aspects.begin(), state.task.aspects.end(),
                                       [&](const Aspect& x) { return x.id == j.aspect_id; });
        if (!known) reject("judgment_mismatch", 422, "aspect '" + j.aspect_id + "' is not part of the task");
    }
    if (by_aspect.size() != state.task.aspects.size()) {
        reject("judgment_mismatch", 422, "every aspect of the task needs exactly one judgment");
    }
    std::vector<AspectJudgment> ordered;
    for (const auto& aspect : state.task.aspects) {
        const auto& j = *by_aspect.at(aspect.id);
        for (const auto& s : j.evidence) {
            if (s.start >= s.end || s.end > state.response_length) {
                reject("span_out_of_bounds", 422,
                       "span [" + std::to_string(s.start) + ", " + std::to_string(s.end) + ") is not within the " +
                           std::to_string(state.response_length) + "-character response");
            }
        }
        if (j.present && j.evidence.empty()) {
            reject("missing_evidence", 422, "aspect '" + aspect.id + "' is marked present without evidence");
        }
        ordered.push_back(j);
    }
    a.judgments = std::move(ordered);
}

SubmitStatus AnnotationStore::submit(Annotation a) {
    if (a.annotator_id.empty()) reject("invalid_request", 400, "annotator_id is required");
    std::unique_lock lock(mutex_);
    const auto it = tasks_.find(a.task_id);
    if (it == tasks_.end()) reject("unknown_task", 404, "no task '" + a.task_id + "'");
    auto& state = it->second;
    validate(state, a);
    for (const auto& prior : state.submissions) {
        if (prior.annotator_id != a.annotator_id) continue;
        if (prior.judgments == a.judgments) return SubmitStatus::duplicate;
        reject("duplicate_submission", 409, "annotator '" + a.annotator_id + "' already submitted task " + a.task_id);
    }
    a.submitted_at = utc_now();
    a.sequence = ++sequence_;
    append({{"type", "annotation"},
            {"annotation",
             {{"task_id", a.task_id},
              {"annotator_id", a.annotator_id},
              {"judgments", judgments_json(a.judgments)},
              {"submitted_at", a.submitted_at}}}});
    state.submissions.push_back(std::move(a));
    return SubmitStatus::created;
}

CoverageExport AnnotationStore::export_human_coverage() const {
    std::shared_lock lock(mutex_);
    CoverageExport out;
    out.ratings.categories = {"present", "absent"};
    std::vector<const TaskState*> complete;
    std::size_t raters = 0;
    for (const auto& [id, state] : tasks_) {
        if (state.submissions.size() < state.task.required_annotators) {
            out.partial_tasks.push_back(id);
            continue;
        }
        if (raters != 0 && raters != state.task.required_annotators) {
            throw Error("tasks disagree on required_annotators; cannot build one rating matrix");
        }
        raters = state.task.required_annotators;
        if (state.submissions.size() > raters) out.truncated_tasks.push_back(id);
        complete.push_back(&state);
    }
    if (!out.partial_tasks.empty()) {
        spdlog::warn("export: {} task(s) without enough submissions were left out", out.partial_tasks.size());
    }
    if (complete.empty()) throw Error("no complete tasks to export");
    out.ratings.raters_per_item = raters;

    std::sort(complete.begin(), complete.end(), [](const TaskState* a, const TaskState* b) {
        return std::tie(a->task.query_id, a->task.system_id) < std::tie(b->task.query_id, b->task.system_id);
    });
    for (const auto* state : complete) {
        const auto& task = state->task;
        std::vector<std::vector<bool>> votes(task.aspects.size());
        for (std::size_t s = 0; s < raters; ++s) {
            const auto& judgments = state->submissions[s].judgments;  // already in task aspect order
            for (std::size_t k = 0; k < task.aspects.size(); ++k) votes[k].push_back(judgments[k].present);
        }
        const auto covered = majority_vote(votes, TieRule::negative);
        std::size_t hits = 0;
        for (std::size_t k = 0; k < task.aspects.size(); ++k) {
            hits += covered[k] ? 1 : 0;
            const auto present = static_cast<std::size_t>(std::count(votes[k].begin(), votes[k].end(), true));
            out.ratings.items.push_back(task.task_id + ":" + task.aspects[k].id);
            out.ratings.counts.push_back({present, raters - present});
        }
        out.rows.push_back({task.query_id, task.system_id,
                            static_cast<double>(hits) / static_cast<double>(task.aspects.size())});
    }
    return out;
}

std::optional<AnnotationTask> AnnotationStore::task(const std::string& task_id) const {
    std::shared_lock lock(mutex_);
    const auto it = tasks_.find(task_id);
    if (it == tasks_.end()) return std::nullopt;
    return it->second.task;
}

std::size_t AnnotationStore::task_count() const {
    std::shared_lock lock(mutex_);
    return tasks_.size();
}

std::vector<std::string> AnnotationStore::completed_by(const std::string& task_id) const {
    std::shared_lock lock(mutex_);
    const auto it = tasks_.find(task_id);
    if (it == tasks_.end()) return {};
    std::vector<std::string> out;
    for (const auto& a : it->second.submissions) {
        if (out.size() == it->second.task.required_annotators) break;
        out.push_back(a.annotator_id);
    }
    return out;
}

}  // namespace icat
