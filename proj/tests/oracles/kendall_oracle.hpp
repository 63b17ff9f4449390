#pragma once

// Kendall tau-b by counting every pair.

#include <cmath>
#include <vector>

namespace oracle {

inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
    const auto n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0) ++tied_x;
            if (dy == 0) ++tied_y;
            if (dx == 0 || dy == 0) continue;
            if ((dx > 0) == (dy > 0)) ++concordant;
            else ++discordant;
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return static_cast<double>(concordant - discordant) /
           std::sqrt((pairs - static_cast<double>(tied_x)) * (pairs - static_cast<double>(tied_y)));
}

}  // namespace oracle
