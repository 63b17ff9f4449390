#include "icat/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "icat/error.hpp"
#include "icat/text.hpp"

namespace icat {

std::vector<std::string> bm25_terms(std::string_view text) {
    auto words = tokenize_words(text);
    for (auto& w : words) w = to_lower_ascii(w);
    return words;
}

Bm25Index Bm25Index::build(const std::vector<Document>& corpus, double k1, double b) {
    if (corpus.empty()) throw ContractError("cannot build a BM25 index over an empty corpus");
    std::vector<std::string> ids;
    std::vector<std::uint32_t> lengths;
    std::unordered_map<std::string, std::vector<Posting>> postings;
    ids.reserve(corpus.size());
    lengths.reserve(corpus.size());
    for (const auto& doc : corpus) {
        const auto ordinal = static_cast<std::uint32_t>(ids.size());
        const auto terms = bm25_terms(doc.text);
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : terms) ++tf[t];
        for (const auto& [term, count] : tf) postings[term].push_back({ordinal, count});
        ids.push_back(doc.doc_id);
        lengths.push_back(static_cast<std::uint32_t>(terms.size()));
    }
    return from_parts(std::move(ids), std::move(lengths), std::move(postings), k1, b);
}

Bm25Index Bm25Index::from_parts(std::vector<std::string> doc_ids, std::vector<std::uint32_t> doc_lengths,
                                std::unordered_map<std::string, std::vector<Posting>> postings,
                                double k1, double b) {
    if (doc_ids.empty()) throw ContractError("cannot build a BM25 index over an empty corpus");
    if (doc_ids.size() != doc_lengths.size()) throw ContractError("doc id / length count mismatch");
    Bm25Index index;
    index.doc_ids_ = std::move(doc_ids);
    index.doc_lengths_ = std::move(doc_lengths);
    index.postings_ = std::move(postings);
    index.k1_ = k1;
    index.b_ = b;
    const std::uint64_t total =
        std::accumulate(index.doc_lengths_.begin(), index.doc_lengths_.end(), std::uint64_t{0});
    index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(index.doc_ids_.size());
    return index;
}

std::uint32_t Bm25Index::doc_length(std::string_view doc_id) const {
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        if (doc_ids_[i] == doc_id) return doc_lengths_[i];
    }
    throw ContractError("unknown doc id '" + std::string(doc_id) + "'");
}

const std::vector<Posting>* Bm25Index::postings_for(const std::string& term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

RankedList Bm25Index::search(std::string_view query, std::size_t k) const {
    if (k < 1) throw ContractError("k must be at least 1");
    auto terms = bm25_terms(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    const auto n = static_cast<double>(doc_ids_.size());
    std::vector<double> scores(doc_ids_.size(), 0.0);
    std::vector<char> touched(doc_ids_.size(), 0);
    for (const auto& term : terms) {
        const auto* list = postings_for(term);
        if (list == nullptr) continue;
        const auto df = static_cast<double>(list->size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& p : *list) {
            const double tf = p.tf;
            const double norm = 1.0 - b_ + b_ * static_cast<double>(doc_lengths_[p.doc]) / avg_doc_length_;
            scores[p.doc] += idf * tf * (k1_ + 1.0) / (tf + k1_ * norm);
            touched[p.doc] = 1;
        }
    }

    std::vector<RankedEntry> hits;
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        if (touched[d]) hits.push_back({doc_ids_[d], scores[d]});
    }
    const auto cut = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(cut), hits.end(), ranks_before);
    hits.resize(cut);
    return RankedList{std::move(hits)};
}

std::unordered_set<std::string> candidate_pool(const Bm25Index& index, std::string_view topic_title,
                                               std::size_t pool_size) {
    if (pool_size < 1) throw ContractError("pool_size must be at least 1");
    std::unordered_set<std::string> pool;
    for (const auto& e : index.search(topic_title, pool_size).entries) pool.insert(e.item_id);
    return pool;
}

}  // namespace icat
