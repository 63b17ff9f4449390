#include "icat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "icat/csv.hpp"
#include "icat/error.hpp"
#include "icat/text.hpp"

namespace icat {

PairedSample make_sample(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("paired sample needs equal-length vectors");
    PairedSample s;
    s.pairs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s.pairs.emplace_back(x[i], y[i]);
    return s;
}

double pearson(const PairedSample& sample) {
    const auto n = sample.pairs.size();
    if (n < 2) throw ContractError("correlation needs at least two pairs");
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : sample.pairs) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (const auto& [x, y] : sample.pairs) {
        const double dx = x - mx;
        const double dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ContractError("degenerate sample");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i..j (0-based) share rank mean(i+1 .. j+1)
        const double rank = (static_cast<double>(i + j) + 2.0) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(const PairedSample& sample) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& [a, b] : sample.pairs) {
        x.push_back(a);
        y.push_back(b);
    }
    return pearson(make_sample(fractional_ranks(x), fractional_ranks(y)));
}

double kendall_tau(const PairedSample& sample) {
    const auto n = sample.pairs.size();
    if (n < 2) throw ContractError("correlation needs at least two pairs");
    // O(n²) is fine at the per-query sample sizes this engine handles.
    long long concordant = 0;
    long long discordant = 0;
    long long ties_x = 0;
    long long ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = sample.pairs[i].first - sample.pairs[j].first;
            const double dy = sample.pairs[i].second - sample.pairs[j].second;
            if (dx == 0.0) ++ties_x;
            if (dy == 0.0) ++ties_y;
            if (dx == 0.0 || dy == 0.0) continue;
            ((dx > 0.0) == (dy > 0.0) ? concordant : discordant) += 1;
        }
    }
    const auto n0 = static_cast<long long>(n * (n - 1) / 2);
    const double denom = std::sqrt(static_cast<double>(n0 - ties_x) * static_cast<double>(n0 - ties_y));
    if (denom == 0.0) throw ContractError("degenerate sample: all values tied on one side");
    return static_cast<double>(concordant - discordant) / denom;
}

double fleiss_kappa(const RatingMatrix& m) {
    const std::size_t raters = m.raters_per_item;
    if (raters < 2) throw ContractError("Fleiss kappa needs at least two raters per item");
    if (m.counts.size() < 2) throw ContractError("Fleiss kappa needs at least two items");
    const std::size_t categories = m.categories.empty() ? m.counts.front().size() : m.categories.size();
    std::vector<double> category_totals(categories, 0.0);
    double p_bar = 0.0;
    for (const auto& row : m.counts) {
        if (row.size() != categories) throw ContractError("rating row has the wrong number of categories");
        const auto sum = std::accumulate(row.begin(), row.end(), std::size_t{0});
        if (sum != raters) throw ContractError("rating row does not sum to raters_per_item");
        double agree = 0.0;
        for (std::size_t c = 0; c < categories; ++c) {
            agree += static_cast<double>(row[c]) * static_cast<double>(row[c]);
            category_totals[c] += static_cast<double>(row[c]);
        }
        p_bar += (agree - static_cast<double>(raters)) / (static_cast<double>(raters) * (raters - 1));
    }
    const auto items = static_cast<double>(m.counts.size());
    p_bar /= items;
    double p_e = 0.0;
    for (double total : category_totals) {
        const double p = total / (items * static_cast<double>(raters));
        p_e += p * p;
    }
    if (p_e >= 1.0) throw ContractError("degenerate agreement");
    return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<bool> majority_vote(const std::vector<std::vector<bool>>& votes, TieRule ties) {
    std::vector<bool> out;
    out.reserve(votes.size());
    for (const auto& item : votes) {
        if (item.empty()) throw ContractError("majority vote needs at least one vote per item");
        if (item.size() % 2 == 0 && ties == TieRule::none) {
            throw ContractError("even number of raters requires a tie rule");
        }
        const auto positives = static_cast<std::size_t>(std::count(item.begin(), item.end(), true));
        if (2 * positives == item.size()) {
            out.push_back(ties == TieRule::positive);
        } else {
            out.push_back(2 * positives > item.size());
        }
    }
    return out;
}

CorrelationReport correlate(const ScoreTable& method_scores, const ScoreTable& human_scores) {
    PairedSample joined;
    for (const auto& [key, value] : method_scores) {
        if (const auto it = human_scores.find(key); it != human_scores.end()) {
            joined.pairs.emplace_back(value, it->second);
        }
    }
    if (joined.pairs.size() < 2) throw ContractError("fewer than two (query, system) keys in common");
    CorrelationReport report;
    report.pairs = joined.pairs.size();
    report.pearson = pearson(joined);
    report.spearman = spearman(joined);
    report.kendall = kendall_tau(joined);
    return report;
}

ScoreTable load_score_table(const std::filesystem::path& path, const std::string& value_column) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open score table " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("score table " + path.string() + " is empty");
    const auto header = csv::split_line(line);
    const auto column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("score table lacks column '" + name + "'", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t q = column("query_id");
    const std::size_t s = column("system_id");
    std::size_t v = 2;
    if (!value_column.empty()) {
        v = column(value_column);
    } else if (header.size() < 3) {
        throw ParseError("score table needs a value column", 1);
    }
    ScoreTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = csv::split_line(line);
        if (fields.size() != header.size()) throw ParseError("wrong field count", line_no);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(fields[v], &used);
            if (used != fields[v].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError("non-numeric score '" + fields[v] + "'", line_no);
        }
        if (!table.emplace(ScoreKey{fields[q], fields[s]}, value).second) {
            throw ParseError("duplicate (query_id, system_id) key", line_no);
        }
    }
    return table;
}

}  // namespace icat
