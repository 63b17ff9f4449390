#include <doctest.h>

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "icat/annotation.hpp"
#include "icat/csv.hpp"
#include "oracles/fixture_paths.hpp"

using namespace icat;
using nlohmann::json;

namespace {

AnnotationTask make_task(const std::string& q, std::vector<std::string> aspect_ids) {
    AnnotationTask t;
    t.query_id = q;
    t.system_id = "sysA";
    t.task_id = make_task_id(q, "sysA");
    t.query_text = "query " + q;
    t.response_text = "Alpha beta gamma \xC3\xA9t\xC3\xA9.";  // 21 code points
    for (auto& id : aspect_ids) t.aspects.push_back({id, "aspect " + id});
    return t;
}

Annotation vote(const AnnotationTask& t, const std::string& who, std::vector<bool> present) {
    Annotation a;
    a.task_id = t.task_id;
    a.annotator_id = who;
    for (std::size_t i = 0; i < present.size(); ++i) {
        AspectJudgment j{t.aspects[i].id, present[i], {}};
        if (present[i]) j.evidence.push_back({0, 5});
        a.judgments.push_back(j);
    }
    return a;
}

json vote_json(const AnnotationTask& t, const std::string& who, std::vector<bool> present) {
    json judgments = json::array();
    for (std::size_t i = 0; i < present.size(); ++i) {
        json j = {{"aspect_id", t.aspects[i].id}, {"present", static_cast<bool>(present[i])}, {"evidence", json::array()}};
        if (present[i]) j["evidence"].push_back({6, 10});
        judgments.push_back(j);
    }
    return {{"task_id", t.task_id}, {"annotator_id", who}, {"judgments", judgments}};
}

std::string code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const AnnotationError& e) {
        return e.code();
    }
    return "accepted";
}

class RunningServer {
public:
    RunningServer(AnnotationStore& store, ServerOptions options = {}) : server_(store, std::move(options)) {
        port_ = server_.bind_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~RunningServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

private:
    AnnotationServer server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_SUITE("annotation") {

TEST_CASE("task ids are stable and tasks cover every response") {
    CHECK(make_task_id("q1", "sysA") == make_task_id("q1", "sysA"));
    CHECK(make_task_id("q1", "sysA") != make_task_id("q1", "sysB"));
    CHECK(make_task_id("q1", "sysA").size() == 16);
    const auto topics = load_topics(testing_paths::e2e() / "topics.jsonl");
    const auto responses = load_responses(testing_paths::e2e() / "responses.jsonl");
    const auto tasks = create_tasks(responses, topics, gold_aspect_resolver(topics));
    CHECK(tasks.size() == responses.size());
    CHECK(std::is_sorted(tasks.begin(), tasks.end(),
                         [](const auto& a, const auto& b) { return a.task_id < b.task_id; }));
    for (const auto& t : tasks) {
        CHECK(t.required_annotators == 3);
        CHECK(t.query_text == find_topic(topics, t.query_id).description);
    }
    auto dup = responses;
    dup.push_back(responses.front());
    CHECK_THROWS(create_tasks(dup, topics, gold_aspect_resolver(topics)));

    const auto path = testing_paths::scratch("tasks") / "tasks.jsonl";
    write_tasks(tasks, path);
    CHECK(read_tasks(path) == tasks);
}

TEST_CASE("task assignment prefers the least annotated task") {
    const auto dir = testing_paths::scratch("assign");
    AnnotationStore store(dir / "events.jsonl");
    const auto t1 = make_task("q1", {"1"});
    const auto t2 = make_task("q2", {"1"});
    CHECK(store.add_tasks({t1, t2}) == 2);
    CHECK(store.add_tasks({t1}) == 0);
    const auto first = store.next_task("u1");
    REQUIRE(first.has_value());
    const auto& lower = t1.task_id < t2.task_id ? t1 : t2;
    const auto& higher = t1.task_id < t2.task_id ? t2 : t1;
    CHECK(first->task_id == lower.task_id);
    store.submit(vote(lower, "u1", {false}));
    CHECK(store.next_task("u1")->task_id == higher.task_id);
    CHECK(store.next_task("u2")->task_id == higher.task_id);
    store.submit(vote(higher, "u1", {false}));
    CHECK_FALSE(store.next_task("u1").has_value());
    store.submit(vote(lower, "u2", {false}));
    store.submit(vote(lower, "u3", {false}));
    CHECK(store.completed_by(lower.task_id) == std::vector<std::string>{"u1", "u2", "u3"});
    // full tasks are not handed out again
    CHECK(store.next_task("u4")->task_id == higher.task_id);
}

TEST_CASE("invalid submissions are rejected with specific codes") {
    const auto dir = testing_paths::scratch("reject");
    AnnotationStore store(dir / "events.jsonl");
    const auto t = make_task("q1", {"1", "2"});
    store.add_tasks({t});
    auto ok = vote(t, "u1", {true, false});

    auto a = ok;
    a.task_id = "nope";
    CHECK(code_of([&] { store.submit(a); }) == "unknown_task");
    a = ok;
    a.judgments.pop_back();
    CHECK(code_of([&] { store.submit(a); }) == "judgment_mismatch");
    a = ok;
    a.judgments[1].aspect_id = "9";
    CHECK(code_of([&] { store.submit(a); }) == "judgment_mismatch");
    a = ok;
    a.judgments[0].evidence = {{19, 22}};
    CHECK(code_of([&] { store.submit(a); }) == "span_out_of_bounds");
    a.judgments[0].evidence = {{3, 3}};
    CHECK(code_of([&] { store.submit(a); }) == "span_out_of_bounds");
    a.judgments[0].evidence = {{17, 21}};  // the last four code points
    CHECK(code_of([&] { store.submit(a); }) == "accepted");
    a = ok;
    a.judgments[0].evidence.clear();
    a.annotator_id = "u2";
    CHECK(code_of([&] { store.submit(a); }) == "missing_evidence");
    a = ok;
    a.annotator_id = "";
    CHECK(code_of([&] { store.submit(a); }) == "invalid_request");
}

TEST_CASE("resubmission: identical is idempotent, different is a conflict") {
    const auto dir = testing_paths::scratch("dup");
    AnnotationStore store(dir / "events.jsonl");
    const auto t = make_task("q1", {"1"});
    store.add_tasks({t});
    CHECK(store.submit(vote(t, "u1", {true})) == SubmitStatus::created);
    CHECK(store.submit(vote(t, "u1", {true})) == SubmitStatus::duplicate);
    CHECK(code_of([&] { store.submit(vote(t, "u1", {false})); }) == "duplicate_submission");
    CHECK(store.completed_by(t.task_id).size() == 1);
}

TEST_CASE("the event log replays to the same state and survives a torn line") {
    const auto dir = testing_paths::scratch("replay");
    const auto log = dir / "events.jsonl";
    const auto t = make_task("q1", {"1", "2"});
    {
        AnnotationStore store(log);
        store.add_tasks({t});
        store.submit(vote(t, "u1", {true, false}));
        store.submit(vote(t, "u2", {true, true}));
    }
    std::ofstream(log, std::ios::app) << R"({"type":"annotation","annotation":{"task_id")";
    AnnotationStore reopened(log);
    CHECK(reopened.task_count() == 1);
    CHECK(reopened.completed_by(t.task_id) == std::vector<std::string>{"u1", "u2"});
    CHECK(reopened.submit(vote(t, "u2", {true, true})) == SubmitStatus::duplicate);
    reopened.submit(vote(t, "u3", {false, false}));
    const auto e = reopened.export_human_coverage();
    REQUIRE(e.rows.size() == 1);
    // aspect 1: 2 of 3 present, aspect 2: 1 of 3
    CHECK(e.rows[0].human_s_coverage == doctest::Approx(0.5));
}

TEST_CASE("export uses majority votes of the first three submissions") {
    const auto dir = testing_paths::scratch("export");
    AnnotationStore store(dir / "events.jsonl");
    const auto t1 = make_task("q1", {"a", "b", "c"});
    const auto t2 = make_task("q2", {"a", "b"});
    const auto t3 = make_task("q3", {"a"});
    store.add_tasks({t1, t2, t3});
    CHECK_THROWS_WITH(store.export_human_coverage(), doctest::Contains("no complete tasks"));
    store.submit(vote(t1, "u1", {true, true, false}));
    store.submit(vote(t1, "u2", {true, false, false}));
    store.submit(vote(t1, "u3", {false, true, false}));
    store.submit(vote(t1, "u4", {false, false, false}));  // beyond the required three
    store.submit(vote(t2, "u1", {true, false}));
    store.submit(vote(t2, "u2", {true, false}));
    store.submit(vote(t2, "u3", {true, true}));
    store.submit(vote(t3, "u1", {true}));

    const auto e = store.export_human_coverage();
    REQUIRE(e.rows.size() == 2);
    CHECK(e.rows[0].query_id == "q1");
    CHECK(e.rows[0].human_s_coverage == doctest::Approx(2.0 / 3));
    CHECK(e.rows[1].human_s_coverage == doctest::Approx(0.5));
    CHECK(e.partial_tasks == std::vector<std::string>{t3.task_id});
    CHECK(e.truncated_tasks == std::vector<std::string>{t1.task_id});
    CHECK(e.ratings.raters_per_item == 3);
    CHECK(e.ratings.counts == std::vector<std::vector<std::size_t>>{{2, 1}, {2, 1}, {0, 3}, {3, 0}, {1, 2}});
    // P̄ = 3/5, Pe = 113/225
    CHECK(fleiss_kappa(e.ratings) == doctest::Approx(22.0 / 112.0).epsilon(1e-12));
    CHECK(e.coverage_csv().rfind("query_id,system_id,human_s_coverage\nq1,sysA,", 0) == 0);
    CHECK(e.ratings_json()["items"].size() == 5);
}

TEST_CASE("HTTP API: assignment, submission codes and exports") {
    const auto dir = testing_paths::scratch("http");
    std::ofstream(dir / "guide.md") << "# Guide\n";
    std::filesystem::create_directories(dir / "static");
    std::ofstream(dir / "static" / "index.html") << "<html>ui</html>";
    AnnotationStore store(dir / "events.jsonl");
    const auto t = make_task("q1", {"1", "2"});
    store.add_tasks({t});
    RunningServer server(store, {dir / "static", dir / "guide.md"});
    auto cli = server.client();

    auto res = cli.Get("/api/tasks/next?annotator=u1");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto task = json::parse(res->body);
    CHECK(task["task_id"] == t.task_id);
    CHECK(task["completed_by"] == 0);
    CHECK(task["aspects"].size() == 2);

    CHECK(cli.Get("/api/tasks/next")->status == 400);

    const auto post = [&](const json& body, const httplib::Headers& headers = {}) {
        return cli.Post("/api/annotations", headers, body.dump(), "application/json");
    };
    res = post(vote_json(t, "u1", {true, false}));
    CHECK(res->status == 201);
    CHECK(post(vote_json(t, "u1", {true, false}))->status == 200);
    res = post(vote_json(t, "u1", {false, false}));
    CHECK(res->status == 409);
    CHECK(json::parse(res->body)["error"] == "duplicate_submission");
    CHECK(post(vote_json(t, "u2", {true}))->status == 422);
    auto out_of_range = vote_json(t, "u2", {true, false});
    out_of_range["judgments"][0]["evidence"] = json::array({json::array({0, 99})});
    res = post(out_of_range);
    CHECK(res->status == 422);
    CHECK(json::parse(res->body)["error"] == "span_out_of_bounds");
    auto unknown = vote_json(t, "u2", {false, false});
    unknown["task_id"] = "ffff";
    CHECK(post(unknown)->status == 404);
    CHECK(cli.Post("/api/annotations", "{not json", "application/json")->status == 400);
    CHECK(post(vote_json(t, "u2", {false, false}), {{"Authorization", "Bearer u9"}})->status == 403);

    CHECK(cli.Get("/api/tasks/next?annotator=u1")->status == 204);
    CHECK(cli.Get("/api/export/coverage")->status == 409);

    CHECK(post(vote_json(t, "u2", {false, false}))->status == 201);
    CHECK(post(vote_json(t, "u3", {true, true}))->status == 201);
    res = cli.Get("/api/export/coverage");
    REQUIRE(res->status == 200);
    CHECK(res->body == "query_id,system_id,human_s_coverage\nq1,sysA,0.5\n");
    res = cli.Get("/api/export/ratings");
    REQUIRE(res->status == 200);
    CHECK(json::parse(res->body)["counts"] == json::parse("[[2,1],[1,2]]"));
    res = cli.Get("/api/guidelines");
    CHECK(res->status == 200);
    CHECK(res->body == "# Guide\n");
    res = cli.Get("/");
    CHECK(res->status == 200);
    CHECK(res->body.find("ui") != std::string::npos);
}

}  // TEST_SUITE
