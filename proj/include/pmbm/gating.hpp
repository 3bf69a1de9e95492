#pragma once

#include "pmbm/ggiw.hpp"
#include "pmbm/hybrid_state.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <span>
#include <vector>

namespace pmbm {

/// Squared Mahalanobis threshold for a gate of probability gate_prob in d dimensions.
/// gate_prob >= 1 disables gating (infinite threshold).
[[nodiscard]] inline double gate_threshold(double gate_prob, int d) {
    if (gate_prob >= 1.0) return kInf;
    if (!(gate_prob > 0.0)) throw std::invalid_argument("gate_threshold: gate_prob must lie in (0, 1)");
    return boost::math::quantile(boost::math::chi_squared(static_cast<double>(d)), gate_prob);
}

/// Predicted-measurement ellipse of one density branch.
class GateEllipse {
public:
    GateEllipse(Vector center, const Matrix& cov) : center_(std::move(center)), llt_(symmetrize(cov)) {
        if (llt_.info() != Eigen::Success) throw NumericalError("GateEllipse: singular predicted covariance");
    }

    [[nodiscard]] double distance_sq(const Vector& z) const {
        return llt_.matrixL().solve(z - center_).squaredNorm();
    }

private:
    Vector center_;
    Eigen::LLT<Matrix> llt_;
};

[[nodiscard]] inline GateEllipse point_gate(const GaussianDensity& g, const PointMeasModel& m) {
    return {m.H * g.mean, m.H * g.cov * m.H.transpose() + m.R};
}

[[nodiscard]] inline GateEllipse extended_gate(const GGIWParams& g, const ExtendedMeasModel& m) {
    return {m.H * g.mean, m.H * g.cov * m.H.transpose() + expected_extent(g)};
}

/// Gate of a hybrid density: a measurement is inside if either present branch gates it.
class HybridGate {
public:
    HybridGate(const HybridSingleTargetDensity& f, const PointMeasModel& pm, const ExtendedMeasModel& em) {
        if (f.has_point()) ellipses_.push_back(point_gate(*f.point, pm));
        if (f.has_extended()) ellipses_.push_back(extended_gate(*f.extended, em));
    }

    [[nodiscard]] bool contains(const Vector& z, double threshold) const {
        if (threshold == kInf) return !ellipses_.empty();
        for (const auto& e : ellipses_)
            if (e.distance_sq(z) < threshold) return true;
        return false;
    }

private:
    std::vector<GateEllipse> ellipses_;
};

struct GateResult {
    std::vector<int> bernoulli_gated;
    std::vector<int> ppp_only;
    std::vector<int> discarded;
};

/// Splits a scan into measurements inside the gate of some existing Bernoulli
/// hypothesis, measurements gated only by PPP components, and the rest.
[[nodiscard]] inline GateResult gate(const PMBMDensity& pred, std::span<const Vector> z, double gate_prob,
                                     const PointMeasModel& pm, const ExtendedMeasModel& em) {
    GateResult out;
    if (z.empty()) return out;
    const double thr = gate_threshold(gate_prob, static_cast<int>(z.front().size()));

    std::vector<HybridGate> bernoulli;
    for (const auto& t : pred.tracks)
        for (const auto& h : t.hypotheses)
            if (h.existence > 0.0) bernoulli.emplace_back(h.density, pm, em);
    std::vector<GateEllipse> ppp;
    for (const auto& c : pred.ppp.point_components) ppp.push_back(point_gate(c.density, pm));
    for (const auto& c : pred.ppp.extended_components) ppp.push_back(extended_gate(c.density, em));

    for (std::size_t j = 0; j < z.size(); ++j) {
        const int idx = static_cast<int>(j);
        const bool in_bernoulli =
            std::any_of(bernoulli.begin(), bernoulli.end(), [&](const HybridGate& g) { return g.contains(z[j], thr); });
        if (in_bernoulli) {
            out.bernoulli_gated.push_back(idx);
            continue;
        }
        const bool in_ppp = std::any_of(ppp.begin(), ppp.end(),
                                        [&](const GateEllipse& e) { return thr == kInf || e.distance_sq(z[j]) < thr; });
        (in_ppp ? out.ppp_only : out.discarded).push_back(idx);
    }
    return out;
}

}  // namespace pmbm
