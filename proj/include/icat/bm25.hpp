#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "icat/corpus.hpp"
#include "icat/ranked_list.hpp"

namespace icat {

struct Posting {
    std::uint32_t doc = 0;  // ordinal into Bm25Index::doc_ids
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

/// Document-level BM25 index over lowercased whitespace tokens.
///
/// score(q, d) = Σ_{t ∈ q} idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avglen))
/// idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
///
/// Query terms are deduplicated before scoring.
class Bm25Index {
public:
    static constexpr double kDefaultK1 = 1.2;
    static constexpr double kDefaultB = 0.75;

    Bm25Index() = default;

    /// Throws ContractError for an empty corpus.
    static Bm25Index build(const std::vector<Document>& corpus, double k1 = kDefaultK1,
                           double b = kDefaultB);

    /// Reassembles an index from stored parts (see index_store).
    static Bm25Index from_parts(std::vector<std::string> doc_ids, std::vector<std::uint32_t> doc_lengths,
                                std::unordered_map<std::string, std::vector<Posting>> postings,
                                double k1, double b);

    /// Top-k documents with a positive score. Throws ContractError for k < 1.
    RankedList search(std::string_view query, std::size_t k) const;

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    double k1() const { return k1_; }
    double b() const { return b_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    std::uint32_t doc_length(std::string_view doc_id) const;
    const std::unordered_map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::vector<Posting>* postings_for(const std::string& term) const;

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
    double k1_ = kDefaultK1;
    double b_ = kDefaultB;
};

/// Lowercased whitespace tokens, the indexing unit for BM25.
std::vector<std::string> bm25_terms(std::string_view text);

/// The per-query sub-corpus: the top `pool_size` BM25 documents for the topic title.
std::unordered_set<std::string> candidate_pool(const Bm25Index& index, std::string_view topic_title,
                                               std::size_t pool_size = 1000);

}  // namespace icat
