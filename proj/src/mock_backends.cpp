#include "icat/mock_backends.hpp"

#include <cctype>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "icat/error.hpp"
#include "icat/hashing.hpp"
#include "icat/text.hpp"

namespace icat {

using nlohmann::json;

namespace {

class StatsScope {
public:
    StatsScope(MockStats& stats, std::chrono::milliseconds latency) : stats_(stats) {
        stats_.enter();
        if (latency.count() > 0) std::this_thread::sleep_for(latency);
    }
    ~StatsScope() { stats_.leave(); }
    StatsScope(const StatsScope&) = delete;
    StatsScope& operator=(const StatsScope&) = delete;

private:
    MockStats& stats_;
};

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<std::string> alnum_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string normalise_for_nli(std::string_view text) {
    auto s = to_lower_ascii(normalize_whitespace(text));
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.pop_back();
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open fixture " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void MockStats::enter() {
    ++calls_;
    const auto now = ++in_flight_;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
}

void MockStats::leave() { --in_flight_; }

FixtureChatBackend::FixtureChatBackend(const std::filesystem::path& fixture) {
    std::ifstream in(fixture);
    if (!in) throw ConfigError("cannot open chat fixture " + fixture.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rule;
        try {
            rule = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed chat fixture: ") + e.what(), line_no);
        }
        if (!rule.contains("reply") || !rule["reply"].is_string()) {
            throw ParseError("chat fixture rule lacks a string reply", line_no);
        }
        auto reply = rule["reply"].get<std::string>();
        if (rule.contains("prompt_sha256")) {
            add_hash(rule["prompt_sha256"].get<std::string>(), std::move(reply));
        } else if (rule.contains("contains")) {
            add_contains(rule["contains"].get<std::vector<std::string>>(), std::move(reply));
        } else {
            throw ParseError("chat fixture rule needs prompt_sha256 or contains", line_no);
        }
    }
}

void FixtureChatBackend::add_exact(const std::string& prompt, std::string reply) {
    add_hash(sha256_hex(prompt), std::move(reply));
}

void FixtureChatBackend::add_hash(std::string sha256, std::string reply) {
    by_hash_[std::move(sha256)] = std::move(reply);
}

void FixtureChatBackend::add_contains(std::vector<std::string> needles, std::string reply) {
    contains_.push_back({std::move(needles), std::move(reply)});
}

std::string FixtureChatBackend::complete(const std::string& prompt) {
    StatsScope scope(stats_, latency_);
    const auto hash = sha256_hex(prompt);
    if (const auto it = by_hash_.find(hash); it != by_hash_.end()) return it->second;
    for (const auto& rule : contains_) {
        bool all = true;
        for (const auto& needle : rule.needles) {
            if (prompt.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) return rule.reply;
    }
    throw BackendError("no fixture for prompt " + hash.substr(0, 16), false);
}

HashEmbeddingBackend::HashEmbeddingBackend(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ConfigError("mock embedding dimension must be positive");
}

std::vector<std::vector<double>> HashEmbeddingBackend::embed(std::span<const std::string> texts) {
    StatsScope scope(stats_, latency_);
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dimension_, 0.0);
        auto tokens = alnum_tokens(text);
        if (tokens.empty()) tokens.push_back(text);
        for (const auto& token : tokens) {
            const auto seed = fnv1a(token);
            for (std::size_t j = 0; j < dimension_; ++j) {
                v[j] += (splitmix64(seed + j) & 1U) ? 1.0 : -1.0;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

bool SubstringNliBackend::entails(const std::string& premise, const std::string& hypothesis) {
    const auto h = normalise_for_nli(hypothesis);
    return !h.empty() && normalise_for_nli(premise).find(h) != std::string::npos;
}

NliVerdict SubstringNliBackend::classify(const std::string& premise, const std::string& hypothesis) {
    StatsScope scope(stats_, latency_);
    if (entails(premise, hypothesis)) return NliVerdict::from_probabilities({0.9, 0.08, 0.02});
    return NliVerdict::from_probabilities({0.05, 0.9, 0.05});
}

FixtureWebSearchBackend::FixtureWebSearchBackend(const std::filesystem::path& fixture) {
    json root;
    try {
        root = json::parse(read_file(fixture));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed web search fixture: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("web search fixture must be a JSON object");
    for (const auto& [query, results] : root.items()) {
        std::vector<WebResult> list;
        for (const auto& r : results) list.push_back({r.at("snippet").get<std::string>(), r.at("url").get<std::string>()});
        add(query, std::move(list));
    }
}

void FixtureWebSearchBackend::add(std::string query, std::vector<WebResult> results) {
    fixtures_[std::move(query)] = std::move(results);
}

std::vector<WebResult> FixtureWebSearchBackend::search(const std::string& query, std::size_t k) {
    StatsScope scope(stats_, std::chrono::milliseconds{0});
    const auto it = fixtures_.find(query);
    if (it == fixtures_.end()) throw BackendError("no fixture for web query '" + query + "'", false);
    std::vector<WebResult> out(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(
                                                                          std::min(k, it->second.size())));
    return out;
}

}  // namespace icat
