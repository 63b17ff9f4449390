#pragma once

// Deterministic in-process backends for tests and offline runs.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "icat/gateway.hpp"

namespace icat {

/// Call accounting shared by every mock: total calls and peak concurrency.
class MockStats {
public:
    void enter();
    void leave();
    std::size_t calls() const { return calls_.load(); }
    std::size_t peak_in_flight() const { return peak_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Replies from a fixture table. A rule matches either the exact prompt
/// (by SHA-256) or, for `contains` rules, a prompt containing every listed
/// substring. Hash rules are tried first, then contains rules in file order.
/// An unmatched prompt is a terminal BackendError ("no fixture").
///
/// Fixture files are JSON Lines: {"prompt_sha256": "...", "reply": "..."}
/// or {"contains": ["...", ...], "reply": "..."}.
class FixtureChatBackend : public ChatBackend {
public:
    FixtureChatBackend() = default;
    explicit FixtureChatBackend(const std::filesystem::path& fixture);

    void add_exact(const std::string& prompt, std::string reply);
    void add_hash(std::string sha256, std::string reply);
    void add_contains(std::vector<std::string> needles, std::string reply);
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

    std::string complete(const std::string& prompt) override;

    MockStats& stats() { return stats_; }

private:
    struct ContainsRule {
        std::vector<std::string> needles;
        std::string reply;
    };
    std::map<std::string, std::string> by_hash_;
    std::vector<ContainsRule> contains_;
    std::chrono::milliseconds latency_{0};
    MockStats stats_;
};

/// Feature-hashing embedder: each lowercased alphanumeric token adds a
/// pseudo-random ±1 pattern derived from its hash. Texts sharing words get
/// similar vectors; identical texts get identical vectors.
class HashEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashEmbeddingBackend(std::size_t dimension = 64);

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

    MockStats& stats() { return stats_; }

private:
    std::size_t dimension_;
    std::chrono::milliseconds latency_{0};
    MockStats stats_;
};

/// Entailment iff the normalised hypothesis (lowercase, single spaces,
/// trailing sentence punctuation removed) is a substring of the normalised
/// premise; neutral otherwise.
class SubstringNliBackend : public NliBackend {
public:
    NliVerdict classify(const std::string& premise, const std::string& hypothesis) override;
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

    static bool entails(const std::string& premise, const std::string& hypothesis);

    MockStats& stats() { return stats_; }

private:
    std::chrono::milliseconds latency_{0};
    MockStats stats_;
};

/// Serves canned results per exact query. Fixture file is a JSON object
/// {"<query>": [{"snippet": "...", "url": "..."}, ...]}.
class FixtureWebSearchBackend : public WebSearchBackend {
public:
    FixtureWebSearchBackend() = default;
    explicit FixtureWebSearchBackend(const std::filesystem::path& fixture);

    void add(std::string query, std::vector<WebResult> results);
    std::vector<WebResult> search(const std::string& query, std::size_t k) override;

    MockStats& stats() { return stats_; }

private:
    std::map<std::string, std::vector<WebResult>> fixtures_;
    MockStats stats_;
};

}  // namespace icat
