#include "icat/types.hpp"

#include <algorithm>
#include <cmath>

#include "icat/error.hpp"

namespace icat {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::M: return "M";
        case Variant::S: return "S";
        case Variant::A: return "A";
    }
    return "?";
}

std::string_view to_string(RetrievalMode m) { return m == RetrievalMode::corpus ? "corpus" : "web"; }

std::string_view to_string(NliLabel l) {
    switch (l) {
        case NliLabel::entailment: return "entailment";
        case NliLabel::neutral: return "neutral";
        case NliLabel::contradiction: return "contradiction";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    if (s == "M" || s == "m") return Variant::M;
    if (s == "S" || s == "s") return Variant::S;
    if (s == "A" || s == "a") return Variant::A;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected M, S or A)");
}

RetrievalMode parse_retrieval_mode(std::string_view s) {
    if (s == "corpus") return RetrievalMode::corpus;
    if (s == "web") return RetrievalMode::web;
    throw ConfigError("unknown retrieval mode '" + std::string(s) + "' (expected corpus or web)");
}

NliLabel parse_nli_label(std::string_view s) {
    if (s == "entailment") return NliLabel::entailment;
    if (s == "neutral") return NliLabel::neutral;
    if (s == "contradiction") return NliLabel::contradiction;
    throw ParseError("unknown NLI label '" + std::string(s) + "'");
}

NliVerdict NliVerdict::from_probabilities(const std::array<double, 3>& probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ParseError("NLI probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ParseError("NLI probabilities must sum to 1");
    NliVerdict verdict;
    verdict.probabilities = probs;
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    verdict.label = static_cast<NliLabel>(best);
    return verdict;
}

}  // namespace icat
