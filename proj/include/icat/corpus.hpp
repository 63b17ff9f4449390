#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace icat {

inline constexpr int kDefaultSpamThreshold = 70;
inline constexpr std::size_t kDefaultMaxWords = 128;
inline constexpr std::size_t kDefaultOverlap = 32;

struct Document {
    std::string doc_id;
    std::optional<std::string> url;
    std::string text;
    /// Waterloo-style percentile: 0 is spammiest, 99 cleanest.
    std::optional<int> spam_percentile;
};

struct Snippet {
    std::string snippet_id;  // "<doc_id>#<ordinal>"
    std::string doc_id;
    std::size_t word_start = 0;
    std::size_t word_end = 0;  // exclusive
    std::string text;

    bool operator==(const Snippet&) const = default;
};

struct LoadStats {
    std::size_t records = 0;
    std::size_t spam_excluded = 0;
};

/// Reads a JSON Lines corpus. Documents whose spam percentile is below
/// `spam_threshold` are dropped; documents without one are kept.
/// Throws ParseError on unreadable files, malformed records and duplicate ids.
std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  int spam_threshold = kDefaultSpamThreshold,
                                  LoadStats* stats = nullptr);

/// Sliding word windows of width `max_words` and stride `max_words - overlap`.
std::vector<Snippet> chunk_document(const Document& doc, std::size_t max_words = kDefaultMaxWords,
                                    std::size_t overlap = kDefaultOverlap);

std::vector<Snippet> chunk_corpus(const std::vector<Document>& corpus,
                                  std::size_t max_words = kDefaultMaxWords,
                                  std::size_t overlap = kDefaultOverlap);

/// Stable content hash over (doc_id, normalized text) pairs in corpus order.
std::string corpus_fingerprint(const std::vector<Document>& corpus);

}  // namespace icat
