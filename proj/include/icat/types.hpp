#pragma once

// Domain types shared by more than one pipeline stage.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace icat {

/// Evaluation variant: how aspects are obtained and how claims are aligned.
///   M: gold aspects, qrels-based alignment via the first supporting document.
///   S: gold aspects, LLM alignment.
///   A: generated aspects, LLM alignment.
enum class Variant { M, S, A };

enum class RetrievalMode { corpus, web };

enum class NliLabel { entailment, neutral, contradiction };

std::string_view to_string(Variant v);
std::string_view to_string(RetrievalMode m);
std::string_view to_string(NliLabel l);
Variant parse_variant(std::string_view s);
RetrievalMode parse_retrieval_mode(std::string_view s);
NliLabel parse_nli_label(std::string_view s);

/// Probabilities are ordered (entailment, neutral, contradiction).
struct NliVerdict {
    NliLabel label = NliLabel::neutral;
    std::array<double, 3> probabilities{0.0, 1.0, 0.0};

    double entailment_probability() const { return probabilities[0]; }

    /// Validates shape (non-negative, sums to 1 +- 1e-6) and sets label to the argmax.
    static NliVerdict from_probabilities(const std::array<double, 3>& probs);
};

struct AtomicClaim {
    int claim_id = 0;  // 1-based ordinal within its response
    std::string text;
    std::string source_response_id;

    bool operator==(const AtomicClaim&) const = default;
};

struct Evidence {
    std::string snippet_id;
    std::string doc_id;  // source URL in web mode
    std::size_t rank = 0;  // 1-based
    NliLabel nli_label = NliLabel::neutral;
    double entail_probability = 0.0;

    bool operator==(const Evidence&) const = default;
};

struct GroundingResult {
    int claim_id = 0;
    bool supported = false;
    std::vector<Evidence> evidence;
    std::optional<std::string> first_supporting_doc;
    RetrievalMode source = RetrievalMode::corpus;

    bool operator==(const GroundingResult&) const = default;
};

}  // namespace icat
