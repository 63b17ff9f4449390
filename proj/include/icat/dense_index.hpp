#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icat/ranked_list.hpp"

namespace icat {

enum class DenseMode { exact, approximate };

std::string_view to_string(DenseMode mode);
DenseMode parse_dense_mode(std::string_view s);

struct GraphParams {
    std::size_t degree = 16;
    std::size_t construction_beam = 100;
    std::size_t search_beam = 400;

    bool operator==(const GraphParams&) const = default;
};

/// Row predicate used to restrict a search to a candidate pool.
using RowFilter = std::function<bool(std::size_t row)>;

/// Inner-product index over unit vectors of a fixed dimension.
///
/// Exact mode scans every row. Approximate mode searches a single-layer
/// navigable-small-world graph; each node keeps at most 2·degree links.
/// Rows are stored in ascending id order so equal scores rank by id.
/// Immutable after construction; concurrent searches are safe.
class DenseIndex {
public:
    DenseIndex() = default;

    /// Vectors are L2-normalised on the way in. Throws ContractError on an
    /// empty input, a dimension mismatch, duplicate ids or a zero vector.
    static DenseIndex build(std::vector<std::string> ids, std::vector<std::vector<float>> vectors,
                            DenseMode mode = DenseMode::exact, GraphParams params = {});

    /// Reassembles a stored index. `graph` is ignored in exact mode and rebuilt when empty.
    static DenseIndex from_parts(std::vector<std::string> ids, std::vector<float> flat, std::size_t dimension,
                                 DenseMode mode, GraphParams params,
                                 std::vector<std::vector<std::uint32_t>> graph = {});

    /// Top-k rows by inner product. The query must have the index dimension
    /// and unit norm (± 1e-6). `filter`, when set, restricts the result rows.
    RankedList search(std::span<const float> query, std::size_t k = 10, const RowFilter& filter = {}) const;

    /// Exhaustive scan regardless of mode.
    RankedList search_exact(std::span<const float> query, std::size_t k = 10, const RowFilter& filter = {}) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dimension() const { return dimension_; }
    DenseMode mode() const { return mode_; }
    const GraphParams& params() const { return params_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> vector(std::size_t row) const;
    const std::vector<float>& flat() const { return flat_; }
    const std::vector<std::vector<std::uint32_t>>& graph() const { return graph_; }
    std::size_t row_of(const std::string& id) const;

private:
    double dot(std::span<const float> query, std::size_t row) const;
    void build_graph();
    RankedList search_graph(std::span<const float> query, std::size_t k, const RowFilter& filter) const;
    void check_query(std::span<const float> query) const;

    std::vector<std::string> ids_;
    std::vector<float> flat_;
    std::size_t dimension_ = 0;
    DenseMode mode_ = DenseMode::exact;
    GraphParams params_;
    std::vector<std::vector<std::uint32_t>> graph_;
};

/// Scales `v` to unit L2 norm. Throws ContractError on a zero or non-finite vector.
void normalize_in_place(std::vector<float>& v);

}  // namespace icat
