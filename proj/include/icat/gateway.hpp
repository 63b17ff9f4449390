#pragma once

// Uniform client layer for the model roles the evaluator needs: chat
// completion, text embedding, NLI, and web search.
//
// A client wraps one backend with the same policy stack: input validation,
// content-hash cache, in-flight limit, and retry with exponential backoff on
// transient failures. Clients are safe to share across threads.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "icat/types.hpp"

namespace icat {

enum class BackendRole { chat, embedding, nli, websearch };

std::string_view to_string(BackendRole role);
BackendRole parse_backend_role(std::string_view s);

struct BackendConfig {
    BackendRole role = BackendRole::chat;
    /// "openai" (chat/embedding), "http" (nli/websearch) or "mock".
    std::string kind = "mock";
    std::string endpoint;
    std::string model_id = "mock";
    std::chrono::milliseconds timeout{30000};
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{250};
    double temperature = 0.0;
    std::size_t max_in_flight = 4;
    /// Environment variable holding the bearer token; empty for none.
    std::string api_key_env;
    /// Inputs longer than this many code points are truncated (embedding, NLI).
    std::size_t max_input_chars = 2000;
    std::size_t batch_size = 32;
    /// Mock-only settings.
    std::filesystem::path fixture;
    std::size_t dimension = 64;
    std::chrono::milliseconds mock_latency{0};
};

/// Reads one backend section; relative fixture paths resolve against `base_dir`.
BackendConfig parse_backend_config(const nlohmann::json& section, BackendRole role,
                                   const std::filesystem::path& base_dir = {});

struct WebResult {
    std::string snippet;
    std::string url;

    bool operator==(const WebResult&) const = default;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    /// One vector per input; need not be normalised.
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

class NliBackend {
public:
    virtual ~NliBackend() = default;
    virtual NliVerdict classify(const std::string& premise, const std::string& hypothesis) = 0;
};

class WebSearchBackend {
public:
    virtual ~WebSearchBackend() = default;
    virtual std::vector<WebResult> search(const std::string& query, std::size_t k) = 0;
};

/// Content-addressed response cache: memory, plus one file per key on disk
/// when a directory is configured. Last writer wins on identical keys.
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt, bool enabled = true);

    std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, const std::string& body, const std::string& model_id);
    bool enabled() const { return enabled_; }

    static std::string make_key(BackendRole role, const std::string& model_id, const std::string& payload);

private:
    std::optional<std::filesystem::path> dir_;
    bool enabled_;
    std::mutex mutex_;
    std::unordered_map<std::string, std::string> memory_;
};

/// Counting limiter on concurrent upstream requests.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::size_t limit);

    class Slot {
    public:
        explicit Slot(InFlightLimiter& owner);
        ~Slot();
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        InFlightLimiter& owner_;
    };

private:
    std::size_t limit_;
    std::size_t active_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

/// Shared policy for all four client types.
class ClientBase {
public:
    ClientBase(BackendConfig config, std::shared_ptr<ResponseCache> cache);

    const BackendConfig& config() const { return config_; }
    /// Requests that reached the backend (after cache), counting each retry attempt.
    std::size_t upstream_attempts() const { return attempts_.load(); }

protected:
    template <typename Fn>
    auto call_upstream(Fn&& fn) -> decltype(fn());

    std::optional<std::string> cache_get(const std::string& payload);
    void cache_put(const std::string& payload, const std::string& body);
    std::string truncate_input(const std::string& text) const;

    BackendConfig config_;
    std::shared_ptr<ResponseCache> cache_;
    InFlightLimiter limiter_;
    std::atomic<std::size_t> attempts_{0};
};

class ChatClient : public ClientBase {
public:
    ChatClient(BackendConfig config, std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache);

    /// Throws BackendError on exhausted retries, terminal status or empty completion.
    std::string chat(const std::string& prompt);

private:
    std::shared_ptr<ChatBackend> backend_;
};

class EmbeddingClient : public ClientBase {
public:
    EmbeddingClient(BackendConfig config, std::shared_ptr<EmbeddingBackend> backend,
                    std::shared_ptr<ResponseCache> cache);

    /// Unit-normalised vectors, one per text, batched transparently.
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

private:
    std::shared_ptr<EmbeddingBackend> backend_;
};

class NliClient : public ClientBase {
public:
    NliClient(BackendConfig config, std::shared_ptr<NliBackend> backend, std::shared_ptr<ResponseCache> cache);

    NliVerdict nli(const std::string& premise, const std::string& hypothesis);

private:
    std::shared_ptr<NliBackend> backend_;
};

class WebSearchClient : public ClientBase {
public:
    WebSearchClient(BackendConfig config, std::shared_ptr<WebSearchBackend> backend,
                    std::shared_ptr<ResponseCache> cache);

    std::vector<WebResult> web_search(const std::string& query, std::size_t k);

private:
    std::shared_ptr<WebSearchBackend> backend_;
};

struct GatewayConfig {
    std::map<BackendRole, BackendConfig> backends;
    std::optional<std::filesystem::path> cache_dir;
    bool cache_enabled = true;
};

/// Reads the "backends" object plus optional "cache_dir"/"cache" keys.
GatewayConfig parse_gateway_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {});

struct Gateway {
    std::shared_ptr<ChatClient> chat;
    std::shared_ptr<EmbeddingClient> embedding;
    std::shared_ptr<NliClient> nli;
    std::shared_ptr<WebSearchClient> websearch;
    std::shared_ptr<ResponseCache> cache;
};

/// Instantiates a client per configured role, choosing HTTP or mock backends by `kind`.
Gateway make_gateway(const GatewayConfig& config);

}  // namespace icat
