#pragma once

// Score arithmetic: factuality, coverage, the weighted harmonic ICAT score,
// and per-query-then-mean aggregation.

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "icat/types.hpp"

namespace icat {

inline constexpr double kDefaultBeta = 1.0;

struct ScorePair {
    double s_fact = 0.0;
    double s_coverage = 0.0;

    bool operator==(const ScorePair&) const = default;
};

/// One claim's path through the pipeline, kept for interpretability.
struct ClaimTrace {
    AtomicClaim claim;
    GroundingResult grounding;
    std::set<std::string> aligned_aspects;

    bool operator==(const ClaimTrace&) const = default;
};

struct QueryReport {
    std::string query_id;
    std::string system_id;
    Variant variant = Variant::S;
    std::size_t claims_total = 0;
    std::size_t claims_grounded = 0;
    std::size_t aspects_total = 0;
    std::set<std::string> aspects_covered;
    ScorePair scores;
    double icat = 0.0;
    double beta = kDefaultBeta;
    std::vector<ClaimTrace> trace;
    /// Aspect ids and descriptions used for this query (gold or generated).
    std::vector<std::pair<std::string, std::string>> aspects;

    bool operator==(const QueryReport&) const = default;
};

struct AggregateReport {
    std::vector<QueryReport> per_query;
    double mean_s_fact = 0.0;
    double mean_s_coverage = 0.0;
    double mean_icat = 0.0;
    double beta = kDefaultBeta;
};

/// |C_T| / |C|; 0 for an empty claim set.
double factuality_score(std::size_t claims_total, std::size_t claims_grounded);

/// |covered ∩ all| / |all|. Throws ContractError when `all_aspects` is empty.
double coverage_score(const std::set<std::string>& covered, const std::set<std::string>& all_aspects);

/// (1+β²)·f·c / (β²·f + c), or 0 when f·c = 0. Throws ContractError for β <= 0.
double icat_beta(double s_fact, double s_coverage, double beta = kDefaultBeta);

/// Builds a report's score fields from its counts; keeps `icat` consistent with `beta`.
void finalize_scores(QueryReport& report, const std::set<std::string>& all_aspects);

/// Same report with icat recomputed at another β; s_fact and s_coverage untouched.
QueryReport rescore(const QueryReport& report, double beta);

/// Macro average over per-query values. Reports must share β and variant.
AggregateReport aggregate(const std::vector<QueryReport>& reports);

}  // namespace icat
