#include "icat/grounding.hpp"

#include "icat/error.hpp"
#include "icat/parallel.hpp"
#include "icat/text.hpp"

namespace icat {

CorpusRetriever::CorpusRetriever(const DenseIndex& index, std::span<const Snippet> rows, EmbeddingClient& embedder,
                                 std::optional<std::unordered_set<std::string>> pool)
    : index_(index), rows_(rows), embedder_(embedder) {
    if (rows_.size() != index_.size()) throw ContractError("snippet table does not match the dense index");
    if (pool) {
        allowed_.resize(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) allowed_[i] = pool->count(rows_[i].doc_id) != 0;
    }
}

std::vector<RetrievedSnippet> CorpusRetriever::retrieve(const std::string& claim_text, std::size_t k) {
    if (index_.size() == 0 || k == 0) return {};
    const auto embedded = embedder_.embed({claim_text});
    std::vector<float> query(embedded.front().begin(), embedded.front().end());
    normalize_in_place(query);
    RowFilter filter;
    if (!allowed_.empty()) filter = [this](std::size_t row) { return allowed_[row] != 0; };
    const auto ranked = index_.search(query, k, filter);
    std::vector<RetrievedSnippet> out;
    out.reserve(ranked.size());
    for (const auto& entry : ranked.entries) {
        const auto& s = rows_[index_.row_of(entry.item_id)];
        out.push_back({s.snippet_id, s.doc_id, s.text});
    }
    return out;
}

std::vector<RetrievedSnippet> WebRetriever::retrieve(const std::string& claim_text, std::size_t k) {
    const auto results = search_.web_search(claim_text, k);
    std::vector<RetrievedSnippet> out;
    out.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        out.push_back({"web:" + std::to_string(i + 1), results[i].url, results[i].snippet});
    }
    return out;
}

GroundingResult ground_claim(const AtomicClaim& claim, EvidenceRetriever& retriever, NliClient& nli,
                             const GroundingOptions& options) {
    GroundingResult result;
    result.claim_id = claim.claim_id;
    result.source = retriever.mode();
    const auto snippets = retriever.retrieve(claim.text, options.k);
    for (std::size_t i = 0; i < snippets.size() && i < options.k; ++i) {
        const auto& s = snippets[i];
        if (trim(s.text).empty()) continue;
        const auto verdict = nli.nli(s.text, claim.text);
        auto label = verdict.label;
        if (options.entail_threshold) {
            const auto& p = verdict.probabilities;
            label = p[0] >= *options.entail_threshold ? NliLabel::entailment
                    : p[2] > p[1]                     ? NliLabel::contradiction
                                                      : NliLabel::neutral;
        }
        result.evidence.push_back({s.snippet_id, s.doc_id, i + 1, label, verdict.entailment_probability()});
        if (label == NliLabel::entailment && !result.supported) {
            result.supported = true;
            result.first_supporting_doc = s.doc_id;
            if (options.early_exit) break;
        }
    }
    return result;
}

GroundingOutcome ground_all(const std::vector<AtomicClaim>& claims, EvidenceRetriever& retriever, NliClient& nli,
                            const GroundingOptions& options) {
    GroundingOutcome out;
    out.results.resize(claims.size());
    parallel_for(claims.size(), options.workers, [&](std::size_t i) {
        try {
            out.results[i] = ground_claim(claims[i], retriever, nli, options);
        } catch (const BackendError& e) {
            throw BackendError("grounding claim " + std::to_string(claims[i].claim_id) + ": " + e.what(),
                               e.transient(), e.status());
        }
    });
    for (std::size_t i = 0; i < claims.size(); ++i) {
        if (out.results[i].supported) out.grounded.push_back(claims[i]);
    }
    return out;
}

}  // namespace icat
