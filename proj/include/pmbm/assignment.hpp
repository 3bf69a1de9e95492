#pragma once

#include "pmbm/common.hpp"

#include <optional>
#include <queue>
#include <vector>

namespace pmbm {

/// Row-to-column assignment: row_to_col[r] is the column taken by row r.
struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

struct InfeasibleAssignment : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sum of cost(r, row_to_col[r]) in row order.
[[nodiscard]] inline double assignment_cost(const Matrix& cost, const std::vector<int>& row_to_col) {
    double s = 0.0;
    for (std::size_t r = 0; r < row_to_col.size(); ++r) s += cost(static_cast<Eigen::Index>(r), row_to_col[r]);
    return s;
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Entries equal to +inf are forbidden. Returns nullopt when no finite
/// assignment exists. Shortest augmenting paths with dual potentials.
[[nodiscard]] inline std::optional<Assignment> solve_assignment(const Matrix& cost) {
    const auto n = static_cast<int>(cost.rows());
    const auto m = static_cast<int>(cost.cols());
    if (n == 0) return Assignment{};
    if (n > m) return std::nullopt;

    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double c = cost(i0 - 1, j - 1);
                const double cur = (c == kInf) ? kInf : c - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (j1 < 0 || delta == kInf) return std::nullopt;
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else if (minv[j] != kInf) {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment out;
    out.row_to_col.assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) out.row_to_col[p[j] - 1] = j - 1;
    out.cost = assignment_cost(cost, out.row_to_col);
    return out;
}

namespace detail {

struct MurtyNode {
    Matrix constrained;
    Assignment solution;
    int first_free = 0;
};

struct MurtyWorse {
    bool operator()(const MurtyNode& a, const MurtyNode& b) const {
        if (a.solution.cost != b.solution.cost) return a.solution.cost > b.solution.cost;
        return a.solution.row_to_col > b.solution.row_to_col;
    }
};

}  // namespace detail

/// Up to k lowest-cost assignments in nondecreasing cost order (Murty's
/// partitioning of the solution space). Costs are summed over the original
/// matrix. Returns an empty list when the matrix admits no finite assignment.
[[nodiscard]] inline std::vector<Assignment> try_murty_kbest(const Matrix& cost, int k) {
    std::vector<Assignment> out;
    if (k <= 0) return out;
    auto first = solve_assignment(cost);
    if (!first) return out;
    if (cost.rows() == 0) {
        out.push_back(*first);
        return out;
    }

    const auto n = static_cast<int>(cost.rows());
    std::priority_queue<detail::MurtyNode, std::vector<detail::MurtyNode>, detail::MurtyWorse> queue;
    queue.push({cost, *first, 0});
    while (!queue.empty() && static_cast<int>(out.size()) < k) {
        detail::MurtyNode node = queue.top();
        queue.pop();
        const std::vector<int>& sol = node.solution.row_to_col;
        Matrix work = node.constrained;
        for (int t = node.first_free; t < n; ++t) {
            Matrix child = work;
            child(t, sol[t]) = kInf;
            if (auto s = solve_assignment(child)) {
                s->cost = assignment_cost(cost, s->row_to_col);
                queue.push({std::move(child), std::move(*s), t});
            }
            // Force row t onto its current column for the remaining children.
            const double keep = work(t, sol[t]);
            work.row(t).setConstant(kInf);
            work.col(sol[t]).setConstant(kInf);
            work(t, sol[t]) = keep;
        }
        out.push_back(std::move(node.solution));
    }
    return out;
}

/// As try_murty_kbest, but an infeasible matrix is an error.
[[nodiscard]] inline std::vector<Assignment> murty_kbest(const Matrix& cost, int k) {
    if (k <= 0) throw std::invalid_argument("murty_kbest: k must be positive");
    auto out = try_murty_kbest(cost, k);
    if (out.empty()) throw InfeasibleAssignment("murty_kbest: no feasible assignment");
    return out;
}

}  // namespace pmbm
