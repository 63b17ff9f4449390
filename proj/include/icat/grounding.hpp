#pragma once

// Claim verification: retrieve the top-k snippets for a claim and run NLI
// with the snippet as premise and the claim as hypothesis.

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "icat/corpus.hpp"
#include "icat/dense_index.hpp"
#include "icat/gateway.hpp"
#include "icat/types.hpp"

namespace icat {

struct RetrievedSnippet {
    std::string snippet_id;
    std::string doc_id;
    std::string text;
};

class EvidenceRetriever {
public:
    virtual ~EvidenceRetriever() = default;
    /// At most k snippets, best first.
    virtual std::vector<RetrievedSnippet> retrieve(const std::string& claim_text, std::size_t k) = 0;
    virtual RetrievalMode mode() const = 0;
};

/// Dense retrieval over an indexed snippet table, optionally restricted to
/// the documents of a candidate pool. `rows[i]` must be the snippet stored
/// at row i of `index`.
class CorpusRetriever : public EvidenceRetriever {
public:
    CorpusRetriever(const DenseIndex& index, std::span<const Snippet> rows, EmbeddingClient& embedder,
                    std::optional<std::unordered_set<std::string>> pool = std::nullopt);

    std::vector<RetrievedSnippet> retrieve(const std::string& claim_text, std::size_t k) override;
    RetrievalMode mode() const override { return RetrievalMode::corpus; }

private:
    const DenseIndex& index_;
    std::span<const Snippet> rows_;
    EmbeddingClient& embedder_;
    std::vector<char> allowed_;  // empty when unrestricted
};

/// Web search results; snippet ids are "web:<rank>" and doc ids are URLs.
class WebRetriever : public EvidenceRetriever {
public:
    explicit WebRetriever(WebSearchClient& search) : search_(search) {}

    std::vector<RetrievedSnippet> retrieve(const std::string& claim_text, std::size_t k) override;
    RetrievalMode mode() const override { return RetrievalMode::web; }

private:
    WebSearchClient& search_;
};

struct GroundingOptions {
    std::size_t k = 10;
    /// Stop at the first entailing snippet instead of judging all k.
    bool early_exit = false;
    /// When set, a snippet entails iff its entailment probability reaches
    /// this value; the recorded label is then entailment, or the larger of
    /// neutral/contradiction otherwise. When unset the argmax label decides.
    std::optional<double> entail_threshold;
    std::size_t workers = 4;
};

GroundingResult ground_claim(const AtomicClaim& claim, EvidenceRetriever& retriever, NliClient& nli,
                             const GroundingOptions& options = {});

struct GroundingOutcome {
    std::vector<AtomicClaim> grounded;  // C_T, input order
    std::vector<GroundingResult> results;  // one per input claim, input order
};

/// Grounds claims concurrently; any claim's failure fails the whole call.
GroundingOutcome ground_all(const std::vector<AtomicClaim>& claims, EvidenceRetriever& retriever, NliClient& nli,
                            const GroundingOptions& options = {});

}  // namespace icat
