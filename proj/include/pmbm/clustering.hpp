#pragma once

#include "pmbm/common.hpp"

#include <numeric>
#include <set>
#include <span>
#include <vector>

namespace pmbm {

/// Sorted, nonempty set of measurement indices.
using Cluster = std::vector<int>;

/// Pairwise-disjoint clusters covering an index set, ordered by first element.
using Partition = std::vector<Cluster>;

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<int> rank_;
};

/// Canonical form: each cluster sorted, clusters ordered by first element.
[[nodiscard]] inline Partition canonical_partition(Partition p) {
    for (auto& c : p) std::sort(c.begin(), c.end());
    std::sort(p.begin(), p.end());
    return p;
}

[[nodiscard]] inline Partition partition_from_sets(DisjointSets& sets, std::size_t n) {
    std::vector<int> slot(n, -1);
    Partition p;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = sets.find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(p.size());
            p.emplace_back();
        }
        p[slot[root]].push_back(static_cast<int>(i));
    }
    return p;  // already canonical: clusters appear in order of their first element
}

/// Distance thresholds eps_min, eps_min + step, ..., not exceeding eps_max.
[[nodiscard]] inline std::vector<double> threshold_grid(double eps_min, double eps_max, double eps_step) {
    if (!(eps_min > 0.0) || !(eps_step > 0.0) || !(eps_max >= eps_min))
        throw std::invalid_argument("threshold_grid: require eps_min > 0, eps_step > 0, eps_max >= eps_min");
    const auto count = static_cast<long>(std::floor((eps_max - eps_min) / eps_step + 1e-9)) + 1;
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = eps_min + static_cast<double>(i) * eps_step;
    return grid;
}

/// DBSCAN with minPts = 1 over a grid of distance thresholds. With one point
/// per core region, DBSCAN clusters are the connected components of the graph
/// joining points at distance <= eps. Returns the distinct partitions in order
/// of first appearance along the ascending grid.
[[nodiscard]] inline std::vector<Partition> dbscan_partitions(std::span<const Vector> z, double eps_min,
                                                              double eps_max, double eps_step) {
    const std::vector<double> grid = threshold_grid(eps_min, eps_max, eps_step);
    const std::size_t n = z.size();
    std::vector<Partition> out;
    if (n == 0) return out;

    struct Edge {
        double dist;
        int a;
        int b;
    };
    std::vector<Edge> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            edges.push_back({(z[i] - z[j]).norm(), static_cast<int>(i), static_cast<int>(j)});
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.dist < y.dist; });

    DisjointSets sets(n);
    std::size_t next_edge = 0;
    bool changed = true;
    for (double eps : grid) {
        while (next_edge < edges.size() && edges[next_edge].dist <= eps) {
            changed = sets.unite(static_cast<std::size_t>(edges[next_edge].a),
                                 static_cast<std::size_t>(edges[next_edge].b)) ||
                      changed;
            ++next_edge;
        }
        if (changed) {
            out.push_back(partition_from_sets(sets, n));
            changed = false;
        }
    }
    return out;
}

/// Every set partition of {0, ..., n-1} (restricted growth strings). Bell(n) grows
/// quickly; intended for small scans and exact reference computations.
[[nodiscard]] inline std::vector<Partition> all_partitions(int n) {
    std::vector<Partition> out;
    if (n <= 0) return out;
    std::vector<int> label(static_cast<std::size_t>(n), 0);
    std::vector<int> max_prefix(static_cast<std::size_t>(n), 0);
    while (true) {
        const int blocks = 1 + *std::max_element(label.begin(), label.end());
        Partition p(static_cast<std::size_t>(blocks));
        for (int i = 0; i < n; ++i) p[label[i]].push_back(i);
        out.push_back(std::move(p));
        int i = n - 1;
        while (i > 0 && label[i] == max_prefix[i - 1] + 1) --i;
        if (i == 0) break;
        ++label[i];
        max_prefix[i] = std::max(max_prefix[i - 1], label[i]);
        for (int j = i + 1; j < n; ++j) {
            label[j] = 0;
            max_prefix[j] = max_prefix[i];
        }
    }
    return out;
}

/// Distinct clusters across all partitions, in order of first appearance.
[[nodiscard]] inline std::vector<Cluster> unique_subsets(std::span<const Partition> partitions) {
    std::vector<Cluster> out;
    std::set<Cluster> seen;
    for (const auto& p : partitions)
        for (const auto& c : p)
            if (seen.insert(c).second) out.push_back(c);
    return out;
}

/// True when the clusters are nonempty, sorted, pairwise disjoint and cover {0..n-1}.
[[nodiscard]] inline bool is_partition_of(const Partition& p, int n) {
    std::vector<int> seen(static_cast<std::size_t>(std::max(n, 0)), 0);
    for (const auto& c : p) {
        if (c.empty() || !std::is_sorted(c.begin(), c.end())) return false;
        for (int i : c) {
            if (i < 0 || i >= n || seen[i]++) return false;
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace pmbm
