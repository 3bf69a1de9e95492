#pragma once

// Reference clustering: connected components by breadth-first search, and the
// distinct partitions obtained along a threshold grid.

#include "pmbm/clustering.hpp"

#include <queue>

namespace oracle {

inline pmbm::Partition components(std::span<const pmbm::Vector> z, double eps) {
    const std::size_t n = z.size();
    std::vector<int> label(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        std::queue<std::size_t> q;
        q.push(s);
        label[s] = next;
        while (!q.empty()) {
            const std::size_t i = q.front();
            q.pop();
            for (std::size_t j = 0; j < n; ++j)
                if (label[j] < 0 && (z[i] - z[j]).norm() <= eps) {
                    label[j] = next;
                    q.push(j);
                }
        }
        ++next;
    }
    pmbm::Partition p(static_cast<std::size_t>(next));
    for (std::size_t i = 0; i < n; ++i) p[label[i]].push_back(static_cast<int>(i));
    return pmbm::canonical_partition(p);
}

inline std::vector<pmbm::Partition> grid_partitions(std::span<const pmbm::Vector> z, std::span<const double> grid) {
    std::vector<pmbm::Partition> out;
    for (double eps : grid) {
        pmbm::Partition p = components(z, eps);
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
    }
    return out;
}

}  // namespace oracle
