#pragma once

// Reference GOSPA (alpha = 2): minimum over every partial matching of
// estimates to truth objects.

#include "pmbm/common.hpp"

#include <cmath>
#include <vector>

namespace oracle {

inline double gospa_bruteforce(const pmbm::Matrix& dist, double c, double p) {
    const int n = static_cast<int>(dist.rows());
    const int m = static_cast<int>(dist.cols());
    double best = pmbm::kInf;
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    auto recurse = [&](auto&& self, int row, double acc, int matched) -> void {
        if (row == n) {
            const double unmatched = static_cast<double>(n - matched) + static_cast<double>(m - matched);
            best = std::min(best, acc + std::pow(c, p) / 2.0 * unmatched);
            return;
        }
        self(self, row + 1, acc, matched);  // estimate left unmatched
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            self(self, row + 1, acc + std::pow(std::min(dist(row, j), c), p), matched + 1);
            used[j] = 0;
        }
    };
    recurse(recurse, 0, 0.0, 0);
    return std::pow(best, 1.0 / p);
}

}  // namespace oracle
