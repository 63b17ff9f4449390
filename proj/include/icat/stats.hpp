#pragma once

// Correlation and agreement statistics for validating automatic coverage
// scores against human annotation.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace icat {

struct PairedSample {
    std::vector<std::pair<double, double>> pairs;
};

PairedSample make_sample(const std::vector<double>& x, const std::vector<double>& y);

/// Product-moment correlation. Throws ContractError on fewer than two pairs
/// or a zero-variance variable ("degenerate sample").
double pearson(const PairedSample& sample);

/// Pearson on fractional (average) ranks.
double spearman(const PairedSample& sample);

/// Tau-b: (C − D) / sqrt((n0 − n1)(n0 − n2)), with n1/n2 the tied pairs in x/y.
double kendall_tau(const PairedSample& sample);

/// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> fractional_ranks(const std::vector<double>& values);

/// counts[item][category] = number of raters assigning that category.
struct RatingMatrix {
    std::vector<std::string> items;
    std::vector<std::string> categories;
    std::vector<std::vector<std::size_t>> counts;
    std::size_t raters_per_item = 0;
};

/// Throws ContractError unless every row sums to raters_per_item, there are at
/// least two raters and two items; throws "degenerate agreement" when P̄e = 1.
double fleiss_kappa(const RatingMatrix& matrix);

enum class TieRule { none, positive, negative };

/// Positive iff positives > n/2. Even n requires a tie rule.
std::vector<bool> majority_vote(const std::vector<std::vector<bool>>& votes, TieRule ties = TieRule::none);

using ScoreKey = std::pair<std::string, std::string>;  // (query_id, system_id)
using ScoreTable = std::map<ScoreKey, double>;

struct CorrelationReport {
    double pearson = 0.0;
    double spearman = 0.0;
    double kendall = 0.0;
    std::size_t pairs = 0;
};

/// Inner-joins the two tables on key, then computes all three coefficients.
CorrelationReport correlate(const ScoreTable& method_scores, const ScoreTable& human_scores);

/// Reads a CSV with a header row; the key is (query_id, system_id) and the
/// value comes from `value_column`, or the third column when empty.
ScoreTable load_score_table(const std::filesystem::path& path, const std::string& value_column = {});

}  // namespace icat
