#pragma once

#include <string>
#include <vector>

namespace icat {

struct RankedEntry {
    std::string item_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// Scores non-increasing, item ids distinct; ties ordered by ascending id.
struct RankedList {
    std::vector<RankedEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    const RankedEntry& operator[](std::size_t i) const { return entries[i]; }
};

/// Score descending, then id ascending.
inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
}

}  // namespace icat
