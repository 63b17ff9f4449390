#include "icat/http_backends.hpp"

#include <algorithm>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "icat/error.hpp"

namespace icat {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // path prefix, no trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' lacks a scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    ep.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
    return ep;
}

class JsonPoster {
public:
    explicit JsonPoster(const BackendConfig& config) : config_(config), endpoint_(split_endpoint(config.endpoint)) {
        if (!config.api_key_env.empty()) {
            if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr) api_key_ = key;
        }
    }

    json post(const std::string& suffix, const json& body) const {
        httplib::Client client(endpoint_.origin);
        const auto seconds = config_.timeout.count() / 1000;
        const auto micros = (config_.timeout.count() % 1000) * 1000;
        client.set_connection_timeout(seconds, micros);
        client.set_read_timeout(seconds, micros);
        client.set_write_timeout(seconds, micros);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const auto path = endpoint_.path + suffix;
        const auto res = client.Post(path.empty() ? "/" : path, headers, body.dump(), "application/json");
        if (!res) {
            throw BackendError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()),
                               true);
        }
        if (res->status == 429 || res->status >= 500) {
            throw BackendError("backend returned HTTP " + std::to_string(res->status), true, res->status);
        }
        if (res->status < 200 || res->status >= 300) {
            throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body, false,
                               res->status);
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw BackendError(std::string("backend returned invalid JSON: ") + e.what(), false, res->status);
        }
    }

    const BackendConfig& config() const { return config_; }

private:
    BackendConfig config_;
    Endpoint endpoint_;
    std::string api_key_;
};

class OpenAiChatBackend : public ChatBackend {
public:
    explicit OpenAiChatBackend(const BackendConfig& config) : poster_(config) {}

    std::string complete(const std::string& prompt) override {
        const json body = {
            {"model", poster_.config().model_id},
            {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", poster_.config().temperature},
        };
        const auto reply = poster_.post("/chat/completions", body);
        try {
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed chat completion: ") + e.what(), false);
        }
    }

private:
    JsonPoster poster_;
};

class OpenAiEmbeddingBackend : public EmbeddingBackend {
public:
    explicit OpenAiEmbeddingBackend(const BackendConfig& config) : poster_(config) {}

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        const json body = {
            {"model", poster_.config().model_id},
            {"input", std::vector<std::string>(texts.begin(), texts.end())},
        };
        const auto reply = poster_.post("/embeddings", body);
        try {
            std::vector<std::pair<std::size_t, std::vector<double>>> rows;
            for (const auto& item : reply.at("data")) {
                rows.emplace_back(item.value("index", rows.size()), item.at("embedding").get<std::vector<double>>());
            }
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<std::vector<double>> out;
            for (auto& r : rows) out.push_back(std::move(r.second));
            return out;
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed embedding response: ") + e.what(), false);
        }
    }

private:
    JsonPoster poster_;
};

class HttpNliBackend : public NliBackend {
public:
    explicit HttpNliBackend(const BackendConfig& config) : poster_(config) {}

    NliVerdict classify(const std::string& premise, const std::string& hypothesis) override {
        const auto reply = poster_.post("", {{"premise", premise}, {"hypothesis", hypothesis}});
        try {
            const auto labels = reply.at("labels").get<std::vector<std::string>>();
            const auto probs = reply.at("probs").get<std::vector<double>>();
            if (labels.size() != 3 || probs.size() != 3) throw ParseError("expected three labels and probabilities");
            std::array<double, 3> ordered{};
            std::array<bool, 3> seen{};
            for (std::size_t i = 0; i < 3; ++i) {
                const auto idx = static_cast<std::size_t>(parse_nli_label(labels[i]));
                ordered[idx] = probs[i];
                seen[idx] = true;
            }
            if (!seen[0] || !seen[1] || !seen[2]) throw ParseError("labels must name all three NLI classes");
            return NliVerdict::from_probabilities(ordered);
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed NLI response: ") + e.what(), false);
        } catch (const ParseError& e) {
            throw BackendError(std::string("malformed NLI response: ") + e.what(), false);
        }
    }

private:
    JsonPoster poster_;
};

class HttpWebSearchBackend : public WebSearchBackend {
public:
    explicit HttpWebSearchBackend(const BackendConfig& config) : poster_(config) {}

    std::vector<WebResult> search(const std::string& query, std::size_t k) override {
        const auto reply = poster_.post("", {{"query", query}, {"k", k}});
        try {
            std::vector<WebResult> out;
            for (const auto& r : reply.at("results")) {
                out.push_back({r.at("snippet").get<std::string>(), r.value("url", std::string{})});
                if (out.size() == k) break;
            }
            return out;
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed web search response: ") + e.what(), false);
        }
    }

private:
    JsonPoster poster_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_openai_chat_backend(const BackendConfig& config) {
    return std::make_shared<OpenAiChatBackend>(config);
}

std::shared_ptr<EmbeddingBackend> make_openai_embedding_backend(const BackendConfig& config) {
    return std::make_shared<OpenAiEmbeddingBackend>(config);
}

std::shared_ptr<NliBackend> make_http_nli_backend(const BackendConfig& config) {
    return std::make_shared<HttpNliBackend>(config);
}

std::shared_ptr<WebSearchBackend> make_http_websearch_backend(const BackendConfig& config) {
    return std::make_shared<HttpWebSearchBackend>(config);
}

}  // namespace icat
