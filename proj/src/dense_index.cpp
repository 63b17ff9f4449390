#include "icat/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "icat/error.hpp"

namespace icat {

namespace {

constexpr double kNormTolerance = 1e-6;

struct Scored {
    double score;
    std::uint32_t row;
};

// Higher score first; lower row (smaller id) first on ties.
bool better(const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.row < b.row;
}

struct WorseOnTop {
    bool operator()(const Scored& a, const Scored& b) const { return better(a, b); }
};

struct BetterOnTop {
    bool operator()(const Scored& a, const Scored& b) const { return better(b, a); }
};

// Graph traversal only needs a ranking signal; eight independent lanes let
// the compiler vectorise. Reported scores always come from dot_rows.
float dot_fast(const float* a, const float* b, std::size_t d) {
    float acc[8] = {0.0F, 0.0F, 0.0F, 0.0F, 0.0F, 0.0F, 0.0F, 0.0F};
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8) {
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    }
    float sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < d; ++i) sum += a[i] * b[i];
    return sum;
}

double dot_rows(const float* a, const float* b, std::size_t d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return sum;
}

}  // namespace

std::string_view to_string(DenseMode mode) { return mode == DenseMode::exact ? "exact" : "approximate"; }

DenseMode parse_dense_mode(std::string_view s) {
    if (s == "exact") return DenseMode::exact;
    if (s == "approximate") return DenseMode::approximate;
    throw ConfigError("unknown dense index mode '" + std::string(s) + "'");
}

void normalize_in_place(std::vector<float>& v) {
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * x;
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ContractError("cannot normalise a zero or non-finite vector");
    for (auto& x : v) x = static_cast<float>(x / norm);
}

DenseIndex DenseIndex::build(std::vector<std::string> ids, std::vector<std::vector<float>> vectors,
                             DenseMode mode, GraphParams params) {
    if (ids.empty()) throw ContractError("cannot build a dense index with no vectors");
    if (ids.size() != vectors.size()) throw ContractError("id / vector count mismatch");
    const std::size_t d = vectors.front().size();
    if (d == 0) throw ContractError("vectors must have positive dimension");

    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

    std::vector<std::string> sorted_ids;
    std::vector<float> flat;
    sorted_ids.reserve(ids.size());
    flat.reserve(ids.size() * d);
    for (std::size_t i : order) {
        if (vectors[i].size() != d) throw ContractError("dimension mismatch across vectors");
        if (!sorted_ids.empty() && sorted_ids.back() == ids[i]) {
            throw ContractError("duplicate vector id '" + ids[i] + "'");
        }
        normalize_in_place(vectors[i]);
        sorted_ids.push_back(std::move(ids[i]));
        flat.insert(flat.end(), vectors[i].begin(), vectors[i].end());
    }
    return from_parts(std::move(sorted_ids), std::move(flat), d, mode, params);
}

DenseIndex DenseIndex::from_parts(std::vector<std::string> ids, std::vector<float> flat, std::size_t dimension,
                                  DenseMode mode, GraphParams params,
                                  std::vector<std::vector<std::uint32_t>> graph) {
    if (ids.empty()) throw ContractError("cannot build a dense index with no vectors");
    if (dimension == 0 || flat.size() != ids.size() * dimension) {
        throw ContractError("vector storage does not match id count and dimension");
    }
    if (!std::is_sorted(ids.begin(), ids.end())) throw ContractError("dense index ids must be sorted");
    if (params.degree == 0 || params.construction_beam == 0 || params.search_beam == 0) {
        throw ContractError("graph parameters must be positive");
    }
    DenseIndex index;
    index.ids_ = std::move(ids);
    index.flat_ = std::move(flat);
    index.dimension_ = dimension;
    index.mode_ = mode;
    index.params_ = params;
    for (std::size_t r = 0; r < index.ids_.size(); ++r) {
        const double norm = std::sqrt(index.dot(index.vector(r), r));
        if (std::abs(norm - 1.0) > kNormTolerance) throw ContractError("stored vectors must have unit norm");
    }
    if (mode == DenseMode::approximate) {
        if (graph.empty()) {
            index.build_graph();
        } else {
            if (graph.size() != index.ids_.size()) throw ContractError("graph size does not match index size");
            for (const auto& links : graph) {
                for (auto n : links) {
                    if (n >= index.ids_.size()) throw ContractError("graph link out of range");
                }
            }
            index.graph_ = std::move(graph);
        }
    }
    return index;
}

std::span<const float> DenseIndex::vector(std::size_t row) const {
    return {flat_.data() + row * dimension_, dimension_};
}

std::size_t DenseIndex::row_of(const std::string& id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) throw ContractError("unknown vector id '" + id + "'");
    return static_cast<std::size_t>(it - ids_.begin());
}

double DenseIndex::dot(std::span<const float> query, std::size_t row) const {
    return dot_rows(query.data(), flat_.data() + row * dimension_, dimension_);
}

void DenseIndex::check_query(std::span<const float> query) const {
    if (query.size() != dimension_) throw ContractError("query dimension does not match index dimension");
    const double norm = std::sqrt(dot_rows(query.data(), query.data(), dimension_));
    if (std::abs(norm - 1.0) > kNormTolerance) throw ContractError("query vector must have unit norm");
}

RankedList DenseIndex::search(std::span<const float> query, std::size_t k, const RowFilter& filter) const {
    if (mode_ == DenseMode::approximate) {
        check_query(query);
        return search_graph(query, k, filter);
    }
    return search_exact(query, k, filter);
}

RankedList DenseIndex::search_exact(std::span<const float> query, std::size_t k, const RowFilter& filter) const {
    check_query(query);
    if (k == 0) return {};
    std::priority_queue<Scored, std::vector<Scored>, WorseOnTop> top;
    for (std::size_t r = 0; r < ids_.size(); ++r) {
        if (filter && !filter(r)) continue;
        const Scored s{dot(query, r), static_cast<std::uint32_t>(r)};
        if (top.size() < k) {
            top.push(s);
        } else if (better(s, top.top())) {
            top.pop();
            top.push(s);
        }
    }
    std::vector<RankedEntry> entries(top.size());
    for (auto i = entries.size(); i-- > 0; top.pop()) entries[i] = {ids_[top.top().row], top.top().score};
    return RankedList{std::move(entries)};
}

namespace {

// Beam search over a graph, returning up to `beam` rows best first.
// Rows failing `accept` are traversed but never returned.
template <typename Sim, typename Accept>
std::vector<Scored> beam_search(const std::vector<std::vector<std::uint32_t>>& graph, std::uint32_t entry,
                                std::size_t beam, std::vector<std::uint32_t>& visited, std::uint32_t& epoch,
                                Sim&& sim, Accept&& accept) {
    if (++epoch == 0) {
        std::fill(visited.begin(), visited.end(), 0);
        epoch = 1;
    }
    std::priority_queue<Scored, std::vector<Scored>, BetterOnTop> frontier;
    std::priority_queue<Scored, std::vector<Scored>, WorseOnTop> results;

    const Scored start{sim(entry), entry};
    visited[entry] = epoch;
    frontier.push(start);
    if (accept(entry)) results.push(start);

    while (!frontier.empty()) {
        const Scored current = frontier.top();
        if (results.size() >= beam && better(results.top(), current)) break;
        frontier.pop();
        for (const auto next : graph[current.row]) {
            if (visited[next] == epoch) continue;
            visited[next] = epoch;
            const Scored s{sim(next), next};
            if (results.size() < beam || better(s, results.top())) {
                frontier.push(s);
                if (accept(next)) {
                    results.push(s);
                    if (results.size() > beam) results.pop();
                }
            }
        }
    }
    std::vector<Scored> out(results.size());
    for (auto i = out.size(); i-- > 0; results.pop()) out[i] = results.top();
    return out;
}

}  // namespace

void DenseIndex::build_graph() {
    const std::size_t n = ids_.size();
    const std::size_t max_links = 2 * params_.degree;
    graph_.assign(n, {});
    std::vector<std::uint32_t> visited(n, 0);
    std::uint32_t epoch = 0;

    const auto row_sim = [this](std::uint32_t a, std::uint32_t b) {
        return static_cast<double>(
            dot_fast(flat_.data() + a * dimension_, flat_.data() + b * dimension_, dimension_));
    };

    // Keeps candidates that are closer to the base than to any already kept
    // neighbour, then tops up with the closest pruned ones.
    const auto select = [&](const std::vector<Scored>& sorted, std::size_t limit) {
        std::vector<std::uint32_t> kept;
        std::vector<std::uint32_t> pruned;
        for (const auto& c : sorted) {
            if (kept.size() >= limit) break;
            bool diverse = true;
            for (auto r : kept) {
                if (row_sim(c.row, r) > c.score) {
                    diverse = false;
                    break;
                }
            }
            (diverse ? kept : pruned).push_back(c.row);
        }
        for (std::size_t i = 0; i < pruned.size() && kept.size() < limit; ++i) kept.push_back(pruned[i]);
        return kept;
    };

    for (std::uint32_t i = 1; i < n; ++i) {
        const auto found = beam_search(
            graph_, 0, params_.construction_beam, visited, epoch, [&](std::uint32_t r) { return row_sim(i, r); },
            [](std::uint32_t) { return true; });
        graph_[i] = select(found, params_.degree);
        for (const auto nb : graph_[i]) {
            auto& links = graph_[nb];
            links.push_back(i);
            if (links.size() <= max_links) continue;
            std::vector<Scored> scored;
            scored.reserve(links.size());
            for (auto l : links) scored.push_back({row_sim(nb, l), l});
            std::sort(scored.begin(), scored.end(), better);
            links = select(scored, max_links);
        }
    }
}

RankedList DenseIndex::search_graph(std::span<const float> query, std::size_t k, const RowFilter& filter) const {
    if (k == 0) return {};
    std::vector<std::uint32_t> visited(ids_.size(), 0);
    std::uint32_t epoch = 0;
    const auto found = beam_search(
        graph_, 0, std::max(k, params_.search_beam), visited, epoch,
        [&](std::uint32_t r) {
            return static_cast<double>(dot_fast(query.data(), flat_.data() + r * dimension_, dimension_));
        },
        [&](std::uint32_t r) { return !filter || filter(r); });
    std::vector<Scored> rescored;
    rescored.reserve(found.size());
    for (const auto& f : found) rescored.push_back({dot(query, f.row), f.row});
    std::sort(rescored.begin(), rescored.end(), better);
    RankedList out;
    for (std::size_t i = 0; i < rescored.size() && i < k; ++i) {
        out.entries.push_back({ids_[rescored[i].row], rescored[i].score});
    }
    return out;
}

}  // namespace icat
