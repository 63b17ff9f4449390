#include "icat/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "icat/error.hpp"

namespace icat {

double factuality_score(std::size_t claims_total, std::size_t claims_grounded) {
    if (claims_grounded > claims_total) {
        throw ContractError("grounded claim count exceeds total claim count");
    }
    if (claims_total == 0) return 0.0;
    return static_cast<double>(claims_grounded) / static_cast<double>(claims_total);
}

double coverage_score(const std::set<std::string>& covered, const std::set<std::string>& all_aspects) {
    if (all_aspects.empty()) throw ContractError("query has no aspects");
    std::size_t hits = 0;
    for (const auto& id : covered) hits += all_aspects.count(id);
    return static_cast<double>(hits) / static_cast<double>(all_aspects.size());
}

double icat_beta(double s_fact, double s_coverage, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ContractError("beta must be positive");
    if (s_fact < 0.0 || s_fact > 1.0 || s_coverage < 0.0 || s_coverage > 1.0) {
        throw ContractError("scores must lie in [0, 1]");
    }
    if (s_fact == 0.0 || s_coverage == 0.0) return 0.0;
    const double b2 = beta * beta;
    const double value = (1.0 + b2) * (s_fact * s_coverage) / (b2 * s_fact + s_coverage);
    // A weighted harmonic mean lies between its arguments; rounding may not.
    return std::clamp(value, std::min(s_fact, s_coverage), std::max(s_fact, s_coverage));
}

void finalize_scores(QueryReport& report, const std::set<std::string>& all_aspects) {
    report.aspects_total = all_aspects.size();
    if (report.claims_total == 0) {
        report.scores = {};
    } else {
        report.scores.s_fact = factuality_score(report.claims_total, report.claims_grounded);
        report.scores.s_coverage = coverage_score(report.aspects_covered, all_aspects);
    }
    report.icat = icat_beta(report.scores.s_fact, report.scores.s_coverage, report.beta);
}

QueryReport rescore(const QueryReport& report, double beta) {
    QueryReport out = report;
    out.beta = beta;
    out.icat = icat_beta(out.scores.s_fact, out.scores.s_coverage, beta);
    return out;
}

AggregateReport aggregate(const std::vector<QueryReport>& reports) {
    if (reports.empty()) throw ContractError("cannot aggregate an empty report list");
    AggregateReport agg;
    agg.beta = reports.front().beta;
    const Variant variant = reports.front().variant;
    double fact = 0.0;
    double cov = 0.0;
    double icat = 0.0;
    for (const auto& r : reports) {
        if (r.beta != agg.beta) throw ContractError("reports mix different beta values");
        if (r.variant != variant) throw ContractError("reports mix different variants");
        fact += r.scores.s_fact;
        cov += r.scores.s_coverage;
        icat += r.icat;
    }
    const auto n = static_cast<double>(reports.size());
    agg.mean_s_fact = fact / n;
    agg.mean_s_coverage = cov / n;
    agg.mean_icat = icat / n;
    agg.per_query = reports;
    return agg;
}

}  // namespace icat
