#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "icat/error.hpp"
#include "icat/gateway.hpp"
#include "icat/http_backends.hpp"
#include "icat/mock_backends.hpp"
#include "icat/parallel.hpp"
#include "oracles/fixture_paths.hpp"

using namespace icat;
using nlohmann::json;

namespace {

BackendConfig quick(BackendRole role) {
    BackendConfig c;
    c.role = role;
    c.initial_backoff = std::chrono::milliseconds{1};
    return c;
}

/// Fails with the given error `failures` times, then answers.
class FlakyChat : public ChatBackend {
public:
    FlakyChat(int failures, bool transient) : failures_(failures), transient_(transient) {}
    std::string complete(const std::string& prompt) override {
        ++calls;
        if (failures_-- > 0) throw BackendError("boom", transient_, transient_ ? 503 : 400);
        return "echo:" + prompt;
    }
    std::atomic<int> calls{0};

private:
    std::atomic<int> failures_;
    bool transient_;
};

class FixedEmbedder : public EmbeddingBackend {
public:
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        batches.push_back(texts.size());
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            seen.push_back(t);
            if (t == "zero") out.push_back({0.0, 0.0});
            else if (t == "wide") out.push_back({1.0, 2.0, 2.0});
            else out.push_back({3.0, 4.0});
        }
        return out;
    }
    std::vector<std::size_t> batches;
    std::vector<std::string> seen;
};

/// A local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
public:
    explicit LocalServer(const std::function<void(httplib::Server&)>& routes) {
        routes(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("cache returns the stored body without a second upstream call") {
    auto backend = std::make_shared<FlakyChat>(0, true);
    ChatClient chat(quick(BackendRole::chat), backend, std::make_shared<ResponseCache>());
    CHECK(chat.chat("hello") == "echo:hello");
    CHECK(chat.chat("hello") == "echo:hello");
    CHECK(backend->calls == 1);
    CHECK(chat.upstream_attempts() == 1);
    chat.chat("other");
    CHECK(backend->calls == 2);
}

TEST_CASE("disabled cache always goes upstream") {
    auto backend = std::make_shared<FlakyChat>(0, true);
    ChatClient chat(quick(BackendRole::chat), backend, std::make_shared<ResponseCache>(std::nullopt, false));
    chat.chat("x");
    chat.chat("x");
    CHECK(backend->calls == 2);
}

TEST_CASE("cache keys separate roles and models") {
    const auto a = ResponseCache::make_key(BackendRole::chat, "m1", "p");
    CHECK(a == ResponseCache::make_key(BackendRole::chat, "m1", "p"));
    CHECK(a != ResponseCache::make_key(BackendRole::chat, "m2", "p"));
    CHECK(a != ResponseCache::make_key(BackendRole::nli, "m1", "p"));
    CHECK(a.size() == 64);
}

TEST_CASE("disk cache persists across instances") {
    const auto dir = testing_paths::scratch("cache");
    {
        ResponseCache cache(dir);
        cache.put("k1", "body-1", "model");
    }
    ResponseCache reopened(dir);
    CHECK(reopened.get("k1") == std::optional<std::string>("body-1"));
    CHECK_FALSE(reopened.get("k2").has_value());
    const auto stored = json::parse(std::ifstream(dir / "k1.json"));
    CHECK(stored["model_id"] == "model");
    CHECK(stored.contains("timestamp"));
}

TEST_CASE("transient failures are retried") {
    auto backend = std::make_shared<FlakyChat>(2, true);
    ChatClient chat(quick(BackendRole::chat), backend, std::make_shared<ResponseCache>());
    CHECK(chat.chat("p") == "echo:p");
    CHECK(backend->calls == 3);
    CHECK(chat.upstream_attempts() == 3);
}

TEST_CASE("retries are bounded") {
    auto backend = std::make_shared<FlakyChat>(100, true);
    auto config = quick(BackendRole::chat);
    config.max_retries = 2;
    ChatClient chat(config, backend, std::make_shared<ResponseCache>());
    CHECK_THROWS_WITH_AS(chat.chat("p"), doctest::Contains("3 attempts"), BackendError);
    CHECK(backend->calls == 3);
}

TEST_CASE("terminal failures are not retried") {
    auto backend = std::make_shared<FlakyChat>(1, false);
    ChatClient chat(quick(BackendRole::chat), backend, std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(chat.chat("p"), BackendError);
    CHECK(backend->calls == 1);
}

TEST_CASE("empty completions are errors and are not cached") {
    auto fixture = std::make_shared<FixtureChatBackend>();
    fixture->add_exact("p", "");
    ChatClient chat(quick(BackendRole::chat), fixture, std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(chat.chat("p"), BackendError);
    CHECK_THROWS_AS(chat.chat("p"), BackendError);
    CHECK(fixture->stats().calls() == 2);
}

TEST_CASE("in-flight requests stay under the limit") {
    auto backend = std::make_shared<HashEmbeddingBackend>(8);
    backend->set_latency(std::chrono::milliseconds{5});
    auto config = quick(BackendRole::embedding);
    config.max_in_flight = 2;
    EmbeddingClient client(config, backend, std::make_shared<ResponseCache>(std::nullopt, false));
    parallel_for(24, 8, [&](std::size_t i) { client.embed({"text " + std::to_string(i)}); });
    CHECK(backend->stats().calls() == 24);
    CHECK(backend->stats().peak_in_flight() <= 2);
    CHECK(backend->stats().peak_in_flight() >= 1);
}

TEST_CASE("embeddings are normalised, batched and cached per text") {
    auto backend = std::make_shared<FixedEmbedder>();
    auto config = quick(BackendRole::embedding);
    config.batch_size = 2;
    EmbeddingClient client(config, backend, std::make_shared<ResponseCache>());
    const auto v = client.embed({"a", "b", "c"});
    REQUIRE(v.size() == 3);
    CHECK(v[0][0] == doctest::Approx(0.6));
    CHECK(v[0][1] == doctest::Approx(0.8));
    CHECK(backend->batches == std::vector<std::size_t>{2, 1});
    client.embed({"a", "d"});
    CHECK(backend->batches == std::vector<std::size_t>{2, 1, 1});
}

TEST_CASE("embedding input and output validation") {
    auto backend = std::make_shared<FixedEmbedder>();
    EmbeddingClient client(quick(BackendRole::embedding), backend, std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(client.embed({}), ContractError);
    CHECK_THROWS_AS(client.embed({"  "}), ContractError);
    CHECK_THROWS_AS(client.embed({"zero"}), BackendError);
    CHECK_THROWS_AS(client.embed({"a", "wide"}), BackendError);
}

TEST_CASE("long inputs are truncated to max_input_chars") {
    auto backend = std::make_shared<FixedEmbedder>();
    auto config = quick(BackendRole::embedding);
    config.max_input_chars = 5;
    EmbeddingClient client(config, backend, std::make_shared<ResponseCache>());
    client.embed({"\xC3\xA9" "bcdefgh"});
    CHECK(backend->seen.back() == "\xC3\xA9" "bcde");
}

TEST_CASE("nli verdict shape") {
    NliClient nli(quick(BackendRole::nli), std::make_shared<SubstringNliBackend>(), std::make_shared<ResponseCache>());
    const auto yes = nli.nli("The sky is blue today.", "the sky is BLUE");
    CHECK(yes.label == NliLabel::entailment);
    double sum = 0;
    for (double p : yes.probabilities) sum += p;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(yes.entailment_probability() > 0.5);
    CHECK(nli.nli("The sky is blue.", "grass is green").label == NliLabel::neutral);
    // cached verdicts come back identical
    CHECK(nli.nli("The sky is blue today.", "the sky is BLUE").probabilities == yes.probabilities);
}

TEST_CASE("NliVerdict rejects malformed probabilities") {
    CHECK_THROWS(NliVerdict::from_probabilities({0.5, 0.5, 0.5}));
    CHECK_THROWS(NliVerdict::from_probabilities({-0.1, 0.6, 0.5}));
    CHECK(NliVerdict::from_probabilities({0.1, 0.2, 0.7}).label == NliLabel::contradiction);
}

TEST_CASE("web search returns at most k and nothing for k = 0") {
    auto backend = std::make_shared<FixtureWebSearchBackend>();
    backend->add("q", {{"s1", "u1"}, {"s2", "u2"}, {"s3", "u3"}});
    WebSearchClient web(quick(BackendRole::websearch), backend, std::make_shared<ResponseCache>());
    CHECK(web.web_search("q", 0).empty());
    CHECK(backend->stats().calls() == 0);
    const auto two = web.web_search("q", 2);
    REQUIRE(two.size() == 2);
    CHECK(two[1] == WebResult{"s2", "u2"});
    CHECK_THROWS_AS(web.web_search("unknown", 2), BackendError);
}

TEST_CASE("fixture chat rules: exact hash first, then contains in order") {
    FixtureChatBackend f;
    f.add_contains({"alpha"}, "first");
    f.add_contains({"alpha", "beta"}, "second");
    f.add_exact("alpha beta", "exact");
    CHECK(f.complete("alpha beta") == "exact");
    CHECK(f.complete("alpha beta gamma") == "first");
    CHECK_THROWS_AS(f.complete("nothing"), BackendError);
}

TEST_CASE("hash embedder is deterministic and content sensitive") {
    HashEmbeddingBackend h(16);
    const std::vector<std::string> texts{"honey bees", "honey bees", "quantum physics"};
    const auto v = h.embed(texts);
    CHECK(v[0] == v[1]);
    CHECK(v[0] != v[2]);
    CHECK(v[0].size() == 16);
}

TEST_CASE("backend config parsing") {
    const auto base = std::filesystem::path("/data/run");
    const auto c = parse_backend_config(json::parse(R"({"kind":"mock","fixture":"chat.jsonl","timeout_ms":50,
        "max_retries":1,"backoff_ms":2,"max_in_flight":3,"batch_size":7,"dimension":12,"latency_ms":4})"),
                                        BackendRole::chat, base);
    CHECK(c.fixture == base / "chat.jsonl");
    CHECK(c.timeout.count() == 50);
    CHECK(c.max_retries == 1);
    CHECK(c.initial_backoff.count() == 2);
    CHECK(c.max_in_flight == 3);
    CHECK(c.batch_size == 7);
    CHECK(c.dimension == 12);
    CHECK(c.mock_latency.count() == 4);
    CHECK_THROWS_AS(parse_backend_config(json::parse(R"({"kind":"openai"})"), BackendRole::chat), ConfigError);
    CHECK(parse_backend_role("websearch") == BackendRole::websearch);

    const auto g = parse_gateway_config(
        json::parse(R"({"backends":{"nli":{"kind":"mock"}},"cache_dir":"cache","cache":false})"), base);
    CHECK(g.backends.count(BackendRole::nli) == 1);
    CHECK(g.cache_dir == base / "cache");
    CHECK_FALSE(g.cache_enabled);
}

TEST_CASE("OpenAI-compatible chat and embedding over HTTP") {
    std::atomic<int> hits{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            const auto body = json::parse(req.body);
            const auto prompt = body["messages"][0]["content"].get<std::string>();
            CHECK(body["model"] == "test-model");
            CHECK(req.get_header_value("Authorization") == "Bearer sekret");
            res.set_content(json{{"choices", {{{"message", {{"content", "re:" + prompt}}}}}}}.dump(),
                            "application/json");
        });
        s.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            json data = json::array();
            // answer out of order to exercise index sorting
            for (std::size_t i = body["input"].size(); i-- > 0;) data.push_back({{"index", i}, {"embedding", {0.0, 2.0 + i}}});
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
    });
    ::setenv("ICAT_TEST_KEY", "sekret", 1);
    auto config = quick(BackendRole::chat);
    config.kind = "openai";
    config.endpoint = server.url() + "/v1";
    config.model_id = "test-model";
    config.api_key_env = "ICAT_TEST_KEY";
    config.timeout = std::chrono::milliseconds{5000};
    ChatClient chat(config, make_openai_chat_backend(config), std::make_shared<ResponseCache>());
    CHECK(chat.chat("hi") == "re:hi");
    CHECK(chat.chat("hi") == "re:hi");
    CHECK(hits == 1);

    config.role = BackendRole::embedding;
    EmbeddingClient emb(config, make_openai_embedding_backend(config), std::make_shared<ResponseCache>());
    const auto v = emb.embed({"a", "b"});
    CHECK(v[0] == std::vector<double>{0.0, 1.0});
    CHECK(v[1] == std::vector<double>{0.0, 1.0});
}

TEST_CASE("HTTP status mapping: 503 retried, 400 terminal") {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/flaky/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            if (++calls < 3) {
                res.status = 503;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
        });
        s.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content("nope", "text/plain");
        });
    });
    auto config = quick(BackendRole::chat);
    config.kind = "openai";
    config.endpoint = server.url() + "/flaky";
    ChatClient flaky(config, make_openai_chat_backend(config), std::make_shared<ResponseCache>());
    CHECK(flaky.chat("x") == "ok");
    CHECK(calls == 3);

    config.endpoint = server.url() + "/bad";
    ChatClient bad(config, make_openai_chat_backend(config), std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(bad.chat("x"), BackendError);
    CHECK(bad.upstream_attempts() == 1);
}

TEST_CASE("HTTP NLI and web search backends") {
    LocalServer server([&](httplib::Server& s) {
        s.Post("/nli", [&](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            CHECK(body.contains("premise"));
            res.set_content(R"({"labels":["neutral","contradiction","entailment"],"probs":[0.1,0.1,0.8]})",
                            "application/json");
        });
        s.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
            const auto k = json::parse(req.body)["k"].get<int>();
            json results = json::array();
            for (int i = 0; i < k + 2; ++i) results.push_back({{"snippet", "s" + std::to_string(i)}, {"url", "u"}});
            res.set_content(json{{"results", results}}.dump(), "application/json");
        });
    });
    auto config = quick(BackendRole::nli);
    config.kind = "http";
    config.endpoint = server.url() + "/nli";
    NliClient nli(config, make_http_nli_backend(config), std::make_shared<ResponseCache>());
    const auto v = nli.nli("p", "h");
    CHECK(v.label == NliLabel::entailment);
    CHECK(v.probabilities[0] == doctest::Approx(0.8));

    config.role = BackendRole::websearch;
    config.endpoint = server.url() + "/search";
    WebSearchClient web(config, make_http_websearch_backend(config), std::make_shared<ResponseCache>());
    CHECK(web.web_search("q", 3).size() == 3);
}

TEST_CASE("connection failures are transient and exhaust retries") {
    auto config = quick(BackendRole::chat);
    config.kind = "openai";
    config.endpoint = "http://127.0.0.1:1";
    config.max_retries = 1;
    config.timeout = std::chrono::milliseconds{500};
    ChatClient chat(config, make_openai_chat_backend(config), std::make_shared<ResponseCache>());
    CHECK_THROWS_AS(chat.chat("x"), BackendError);
    CHECK(chat.upstream_attempts() == 2);
}

TEST_CASE("make_gateway builds the configured mocks") {
    GatewayConfig config;
    auto chat = quick(BackendRole::chat);
    chat.fixture = testing_paths::e2e() / "chat_fixture.jsonl";
    config.backends[BackendRole::chat] = chat;
    config.backends[BackendRole::nli] = quick(BackendRole::nli);
    const auto g = make_gateway(config);
    CHECK(g.chat != nullptr);
    CHECK(g.nli != nullptr);
    CHECK(g.embedding == nullptr);
    config.backends[BackendRole::nli].kind = "carrier-pigeon";
    CHECK_THROWS_AS(make_gateway(config), ConfigError);
}

}  // TEST_SUITE
