#pragma once

#include "pmbm/assignment.hpp"
#include "pmbm/hybrid_state.hpp"

#include <variant>
#include <vector>

namespace pmbm {

struct PointEstimate {
    Vector state;
};

struct ExtendedEstimate {
    Vector state;
    Matrix extent;
};

using TargetEstimate = std::variant<PointEstimate, ExtendedEstimate>;

/// Targets of the highest-weight global: Bernoullis with existence above
/// r_thresh, reported as points when point_prob exceeds c_thresh.
[[nodiscard]] inline std::vector<TargetEstimate> estimate(const PMBMDensity& post, double r_thresh = 0.5,
                                                          double c_thresh = 0.5) {
    std::vector<TargetEstimate> out;
    if (post.globals.empty()) return out;
    const GlobalHypothesis& g = post.globals[best_global(post)];
    for (std::size_t i = 0; i < g.choice.size(); ++i) {
        const LocalHypothesis& h = post.tracks[i].hypotheses[g.choice[i]];
        if (!(h.existence > r_thresh)) continue;
        const HybridSingleTargetDensity& f = h.density;
        if (f.point_prob > c_thresh && f.has_point()) {
            out.push_back(PointEstimate{f.point->mean});
        } else if (f.has_extended()) {
            out.push_back(ExtendedEstimate{f.extended->mean, expected_extent(*f.extended)});
        } else {
            out.push_back(PointEstimate{f.point->mean});
        }
    }
    return out;
}

/// Position and extent of an object for the base metric; points have zero extent.
struct Ellipse {
    Vector position;
    Matrix extent;
};

[[nodiscard]] inline Ellipse to_ellipse(const TargetEstimate& e, const Matrix& position_selector) {
    return std::visit(
        [&](const auto& t) -> Ellipse {
            const Vector pos = position_selector * t.state;
            if constexpr (std::is_same_v<std::decay_t<decltype(t)>, ExtendedEstimate>) return {pos, t.extent};
            else return {pos, Matrix::Zero(pos.size(), pos.size())};
        },
        e);
}

/// Gaussian Wasserstein distance between two ellipses.
[[nodiscard]] inline double gaussian_wasserstein(const Ellipse& a, const Ellipse& b) {
    require_dims(a.position.size() == b.position.size() && a.extent.rows() == b.extent.rows(),
                 "gaussian_wasserstein: dimension mismatch");
    const Matrix ra = sqrtm_psd(a.extent);
    const Matrix cross = sqrtm_psd(ra * b.extent * ra);
    const double tr = (a.extent + b.extent - 2.0 * cross).trace();
    return std::sqrt((a.position - b.position).squaredNorm() + std::max(tr, 0.0));
}

struct GospaResult {
    double total = 0.0;
    double localization = 0.0;
    double missed_cost = 0.0;
    double false_cost = 0.0;
};

/// GOSPA (alpha = 2) from a pairwise base-distance matrix, rows = estimates,
/// columns = truth. Pairs at distance >= c are left unassigned.
[[nodiscard]] inline GospaResult gospa_from_distances(const Matrix& dist, double c, double p) {
    if (!(c > 0.0) || !(p >= 1.0)) throw std::invalid_argument("gospa: require c > 0 and p >= 1");
    const auto n_est = dist.rows();
    const auto n_truth = dist.cols();
    const double cp = std::pow(c, p);
    const double half = cp / 2.0;

    // Square problem: real pairs cost min(d, c)^p; dummy pairings cost c^p / 2
    // so that leaving an object unassigned is never worse than a cut pair.
    const auto n = n_est + n_truth;
    Matrix cost = Matrix::Constant(n, n, 0.0);
    for (Eigen::Index i = 0; i < n_est; ++i)
        for (Eigen::Index j = 0; j < n_truth; ++j) cost(i, j) = std::pow(std::min(dist(i, j), c), p);
    for (Eigen::Index i = 0; i < n_est; ++i)
        for (Eigen::Index j = n_truth; j < n; ++j) cost(i, j) = (j - n_truth == i) ? half : kInf;
    for (Eigen::Index i = n_est; i < n; ++i)
        for (Eigen::Index j = 0; j < n_truth; ++j) cost(i, j) = (i - n_est == j) ? half : kInf;

    GospaResult r;
    if (n == 0) return r;
    const auto sol = solve_assignment(cost);
    double loc = 0.0;
    double missed = 0.0;
    double false_ = 0.0;
    for (Eigen::Index i = 0; i < n_est; ++i) {
        const int j = sol->row_to_col[i];
        if (j < n_truth && dist(i, j) < c) loc += std::pow(dist(i, j), p);
        else if (j < n_truth) {
            false_ += half;
            missed += half;
        } else {
            false_ += half;
        }
    }
    for (Eigen::Index i = n_est; i < n; ++i)
        if (sol->row_to_col[i] < n_truth) missed += half;
    r.localization = std::pow(loc, 1.0 / p);
    r.missed_cost = std::pow(missed, 1.0 / p);
    r.false_cost = std::pow(false_, 1.0 / p);
    r.total = std::pow(loc + missed + false_, 1.0 / p);
    return r;
}

[[nodiscard]] inline GospaResult gospa(std::span<const Ellipse> estimates, std::span<const Ellipse> truth, double c,
                                       double p = 2.0) {
    Matrix dist(static_cast<Eigen::Index>(estimates.size()), static_cast<Eigen::Index>(truth.size()));
    for (std::size_t i = 0; i < estimates.size(); ++i)
        for (std::size_t j = 0; j < truth.size(); ++j)
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                gaussian_wasserstein(estimates[i], truth[j]);
    return gospa_from_distances(dist, c, p);
}

}  // namespace pmbm
