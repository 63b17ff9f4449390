#include "icat/gateway.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "icat/error.hpp"
#include "icat/hashing.hpp"
#include "icat/http_backends.hpp"
#include "icat/mock_backends.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

std::string_view to_string(BackendRole role) {
    switch (role) {
        case BackendRole::chat: return "chat";
        case BackendRole::embedding: return "embedding";
        case BackendRole::nli: return "nli";
        case BackendRole::websearch: return "websearch";
    }
    return "?";
}

BackendRole parse_backend_role(std::string_view s) {
    if (s == "chat") return BackendRole::chat;
    if (s == "embedding") return BackendRole::embedding;
    if (s == "nli") return BackendRole::nli;
    if (s == "websearch") return BackendRole::websearch;
    throw ConfigError("unknown backend role '" + std::string(s) + "'");
}

BackendConfig parse_backend_config(const json& section, BackendRole role, const std::filesystem::path& base_dir) {
    if (!section.is_object()) throw ConfigError("backend section for " + std::string(to_string(role)) + " must be an object");
    BackendConfig c;
    c.role = role;
    try {
        if (section.contains("role") && parse_backend_role(section["role"].get<std::string>()) != role) {
            throw ConfigError("backend section role does not match its key");
        }
        c.kind = section.value("kind", c.kind);
        c.endpoint = section.value("endpoint", c.endpoint);
        c.model_id = section.value("model_id", c.model_id);
        c.timeout = std::chrono::milliseconds(section.value("timeout_ms", c.timeout.count()));
        c.max_retries = section.value("max_retries", c.max_retries);
        c.initial_backoff = std::chrono::milliseconds(section.value("backoff_ms", c.initial_backoff.count()));
        c.temperature = section.value("temperature", c.temperature);
        c.max_in_flight = section.value("max_in_flight", c.max_in_flight);
        c.api_key_env = section.value("api_key_env", c.api_key_env);
        c.max_input_chars = section.value("max_input_chars", c.max_input_chars);
        c.batch_size = section.value("batch_size", c.batch_size);
        c.dimension = section.value("dimension", c.dimension);
        c.mock_latency = std::chrono::milliseconds(section.value("latency_ms", c.mock_latency.count()));
        if (section.contains("fixture")) {
            std::filesystem::path fixture = section["fixture"].get<std::string>();
            c.fixture = fixture.is_relative() && !base_dir.empty() ? base_dir / fixture : fixture;
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid " + std::string(to_string(role)) + " backend config: " + e.what());
    }
    if (c.timeout.count() <= 0) throw ConfigError("timeout_ms must be positive");
    if (c.max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (c.kind != "mock" && c.endpoint.empty()) {
        throw ConfigError(std::string(to_string(role)) + " backend of kind '" + c.kind + "' needs an endpoint");
    }
    return c;
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir, bool enabled)
    : dir_(std::move(dir)), enabled_(enabled) {
    if (enabled_ && dir_) std::filesystem::create_directories(*dir_);
}

std::string ResponseCache::make_key(BackendRole role, const std::string& model_id, const std::string& payload) {
    return Sha256().field(to_string(role)).field(model_id).field(payload).hex_digest();
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
    if (!enabled_) return std::nullopt;
    {
        std::lock_guard lock(mutex_);
        if (const auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    std::ifstream in(*dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    try {
        const auto entry = json::parse(in);
        auto body = entry.at("body").get<std::string>();
        std::lock_guard lock(mutex_);
        memory_[key] = body;
        return body;
    } catch (const json::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", key, e.what());
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const std::string& body, const std::string& model_id) {
    if (!enabled_) return;
    {
        std::lock_guard lock(mutex_);
        memory_[key] = body;
    }
    if (!dir_) return;
    const json entry = {{"body", body}, {"model_id", model_id}, {"timestamp", static_cast<std::int64_t>(std::time(nullptr))}};
    const auto final_path = *dir_ / (key + ".json");
    auto tmp = final_path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp);
        out << entry.dump();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) spdlog::warn("could not persist cache entry {}: {}", key, ec.message());
}

// ---------------------------------------------------------------------------

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

InFlightLimiter::Slot::Slot(InFlightLimiter& owner) : owner_(owner) {
    std::unique_lock lock(owner_.mutex_);
    owner_.cv_.wait(lock, [&] { return owner_.active_ < owner_.limit_; });
    ++owner_.active_;
}

InFlightLimiter::Slot::~Slot() {
    {
        std::lock_guard lock(owner_.mutex_);
        --owner_.active_;
    }
    owner_.cv_.notify_one();
}

// ---------------------------------------------------------------------------

ClientBase::ClientBase(BackendConfig config, std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>(std::nullopt, false)),
      limiter_(config_.max_in_flight) {}

template <typename Fn>
auto ClientBase::call_upstream(Fn&& fn) -> decltype(fn()) {
    const std::size_t attempts = config_.max_retries + 1;
    auto backoff = config_.initial_backoff;
    for (std::size_t attempt = 1;; ++attempt) {
        try {
            ++attempts_;
            InFlightLimiter::Slot slot(limiter_);
            return fn();
        } catch (const BackendError& e) {
            if (!e.transient()) throw;
            if (attempt >= attempts) {
                throw BackendError(std::string(to_string(config_.role)) + " backend failed after " +
                                       std::to_string(attempts) + " attempts: " + e.what(),
                                   false, e.status());
            }
            spdlog::warn("{} backend attempt {}/{} failed: {}", to_string(config_.role), attempt, attempts, e.what());
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

std::optional<std::string> ClientBase::cache_get(const std::string& payload) {
    return cache_->get(ResponseCache::make_key(config_.role, config_.model_id, payload));
}

void ClientBase::cache_put(const std::string& payload, const std::string& body) {
    cache_->put(ResponseCache::make_key(config_.role, config_.model_id, payload), body, config_.model_id);
}

std::string ClientBase::truncate_input(const std::string& text) const {
    const auto cut = utf8_truncate(text, config_.max_input_chars);
    if (cut.size() < text.size()) {
        spdlog::info("{} input truncated from {} to {} code points", to_string(config_.role), utf8_length(text),
                     config_.max_input_chars);
    }
    return std::string(cut);
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(BackendConfig config, std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache)
    : ClientBase(std::move(config), std::move(cache)), backend_(std::move(backend)) {}

std::string ChatClient::chat(const std::string& prompt) {
    if (auto hit = cache_get(prompt)) return *hit;
    auto text = call_upstream([&] { return backend_->complete(prompt); });
    if (trim(text).empty()) throw BackendError("chat backend returned an empty completion", false);
    cache_put(prompt, text);
    return text;
}

EmbeddingClient::EmbeddingClient(BackendConfig config, std::shared_ptr<EmbeddingBackend> backend,
                                 std::shared_ptr<ResponseCache> cache)
    : ClientBase(std::move(config), std::move(cache)), backend_(std::move(backend)) {}

std::vector<std::vector<double>> EmbeddingClient::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ContractError("embed needs at least one text");
    std::vector<std::string> inputs;
    inputs.reserve(texts.size());
    for (const auto& t : texts) {
        if (trim(t).empty()) throw ContractError("embed inputs must be non-empty");
        inputs.push_back(truncate_input(t));
    }

    std::vector<std::vector<double>> out(inputs.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (auto hit = cache_get(inputs[i])) {
            out[i] = json::parse(*hit).get<std::vector<double>>();
        } else {
            missing.push_back(i);
        }
    }

    for (std::size_t begin = 0; begin < missing.size(); begin += config_.batch_size) {
        const auto end = std::min(missing.size(), begin + config_.batch_size);
        std::vector<std::string> batch;
        for (auto i = begin; i < end; ++i) batch.push_back(inputs[missing[i]]);
        auto vectors = call_upstream([&] { return backend_->embed(batch); });
        if (vectors.size() != batch.size()) {
            throw BackendError("embedding backend returned " + std::to_string(vectors.size()) + " vectors for " +
                                   std::to_string(batch.size()) + " inputs",
                               false);
        }
        for (std::size_t j = 0; j < vectors.size(); ++j) {
            auto& v = vectors[j];
            double norm2 = 0.0;
            for (double x : v) norm2 += x * x;
            const double norm = std::sqrt(norm2);
            if (!(norm > 0.0) || !std::isfinite(norm)) throw BackendError("embedding backend returned a zero vector", false);
            for (auto& x : v) x /= norm;
            cache_put(batch[j], json(v).dump());
            out[missing[begin + j]] = std::move(v);
        }
    }

    const auto dim = out.front().size();
    for (const auto& v : out) {
        if (v.size() != dim || dim == 0) throw BackendError("embedding dimension inconsistency", false);
    }
    return out;
}

NliClient::NliClient(BackendConfig config, std::shared_ptr<NliBackend> backend, std::shared_ptr<ResponseCache> cache)
    : ClientBase(std::move(config), std::move(cache)), backend_(std::move(backend)) {}

NliVerdict NliClient::nli(const std::string& premise, const std::string& hypothesis) {
    if (trim(premise).empty() || trim(hypothesis).empty()) throw ContractError("NLI premise and hypothesis must be non-empty");
    const auto p = truncate_input(premise);
    const auto h = truncate_input(hypothesis);
    const auto payload = json::array({p, h}).dump();
    if (auto hit = cache_get(payload)) {
        const auto cached = json::parse(*hit);
        return NliVerdict::from_probabilities(cached.at("probs").get<std::array<double, 3>>());
    }
    const auto raw = call_upstream([&] { return backend_->classify(p, h); });
    NliVerdict verdict;
    try {
        verdict = NliVerdict::from_probabilities(raw.probabilities);
    } catch (const ParseError& e) {
        throw BackendError(std::string("malformed NLI verdict: ") + e.what(), false);
    }
    cache_put(payload, json{{"probs", verdict.probabilities}}.dump());
    return verdict;
}

WebSearchClient::WebSearchClient(BackendConfig config, std::shared_ptr<WebSearchBackend> backend,
                                 std::shared_ptr<ResponseCache> cache)
    : ClientBase(std::move(config), std::move(cache)), backend_(std::move(backend)) {}

std::vector<WebResult> WebSearchClient::web_search(const std::string& query, std::size_t k) {
    if (k == 0) return {};
    const auto payload = json{{"query", query}, {"k", k}}.dump();
    if (auto hit = cache_get(payload)) {
        std::vector<WebResult> out;
        for (const auto& r : json::parse(*hit)) out.push_back({r.at("snippet"), r.at("url")});
        return out;
    }
    auto results = call_upstream([&] { return backend_->search(query, k); });
    if (results.size() > k) results.resize(k);
    json stored = json::array();
    for (const auto& r : results) stored.push_back({{"snippet", r.snippet}, {"url", r.url}});
    cache_put(payload, stored.dump());
    return results;
}

// ---------------------------------------------------------------------------

GatewayConfig parse_gateway_config(const json& root, const std::filesystem::path& base_dir) {
    GatewayConfig config;
    if (root.contains("backends")) {
        const auto& backends = root["backends"];
        if (!backends.is_object()) throw ConfigError("'backends' must be an object");
        for (const auto& [name, section] : backends.items()) {
            const auto role = parse_backend_role(name);
            config.backends[role] = parse_backend_config(section, role, base_dir);
        }
    }
    if (root.contains("cache_dir") && root["cache_dir"].is_string()) {
        std::filesystem::path dir = root["cache_dir"].get<std::string>();
        config.cache_dir = dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir;
    }
    config.cache_enabled = root.value("cache", true);
    return config;
}

Gateway make_gateway(const GatewayConfig& config) {
    Gateway g;
    g.cache = std::make_shared<ResponseCache>(config.cache_dir, config.cache_enabled);
    for (const auto& [role, c] : config.backends) {
        const bool mock = c.kind == "mock";
        switch (role) {
            case BackendRole::chat: {
                std::shared_ptr<ChatBackend> backend;
                if (mock) {
                    auto fixture = c.fixture.empty() ? std::make_shared<FixtureChatBackend>()
                                                     : std::make_shared<FixtureChatBackend>(c.fixture);
                    fixture->set_latency(c.mock_latency);
                    backend = fixture;
                } else if (c.kind == "openai") {
                    backend = make_openai_chat_backend(c);
                } else {
                    throw ConfigError("unsupported chat backend kind '" + c.kind + "'");
                }
                g.chat = std::make_shared<ChatClient>(c, backend, g.cache);
                break;
            }
            case BackendRole::embedding: {
                std::shared_ptr<EmbeddingBackend> backend;
                if (mock) {
                    auto hashing = std::make_shared<HashEmbeddingBackend>(c.dimension);
                    hashing->set_latency(c.mock_latency);
                    backend = hashing;
                } else if (c.kind == "openai") {
                    backend = make_openai_embedding_backend(c);
                } else {
                    throw ConfigError("unsupported embedding backend kind '" + c.kind + "'");
                }
                g.embedding = std::make_shared<EmbeddingClient>(c, backend, g.cache);
                break;
            }
            case BackendRole::nli: {
                std::shared_ptr<NliBackend> backend;
                if (mock) {
                    auto rule = std::make_shared<SubstringNliBackend>();
                    rule->set_latency(c.mock_latency);
                    backend = rule;
                } else if (c.kind == "http") {
                    backend = make_http_nli_backend(c);
                } else {
                    throw ConfigError("unsupported nli backend kind '" + c.kind + "'");
                }
                g.nli = std::make_shared<NliClient>(c, backend, g.cache);
                break;
            }
            case BackendRole::websearch: {
                std::shared_ptr<WebSearchBackend> backend;
                if (mock) {
                    backend = c.fixture.empty() ? std::make_shared<FixtureWebSearchBackend>()
                                                : std::make_shared<FixtureWebSearchBackend>(c.fixture);
                } else if (c.kind == "http") {
                    backend = make_http_websearch_backend(c);
                } else {
                    throw ConfigError("unsupported websearch backend kind '" + c.kind + "'");
                }
                g.websearch = std::make_shared<WebSearchClient>(c, backend, g.cache);
                break;
            }
        }
    }
    return g;
}

}  // namespace icat
