#pragma once

#include "pmbm/common.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <variant>
#include <vector>

namespace pmbm {

// ---- Hybrid single-target state ----

/// Point target: kinematics only.
struct PointState {
    Vector kinematics;
};

/// Extended target: Poisson measurement rate, kinematics and elliptic extent.
struct ExtendedState {
    double gamma = 0.0;
    Vector kinematics;
    Matrix extent;
};

/// A single target lives either in the point space or in the extended space,
/// never both. There is no class variable; the active alternative is the class.
using HybridState = std::variant<PointState, ExtendedState>;

[[nodiscard]] inline bool is_valid(const ExtendedState& s) {
    return s.gamma > 0.0 && is_spd(s.extent);
}

// ---- Single-target densities ----

struct GaussianDensity {
    Vector mean;
    Matrix cov;
};

/// Factorized gamma Gaussian inverse-Wishart density. The inverse-Wishart uses
/// the parameterization with E[X] = scale / (dof - 2d - 2).
struct GGIWParams {
    double alpha = 1.0;
    double beta = 1.0;
    Vector mean;
    Matrix cov;
    double dof = 0.0;
    Matrix scale;

    [[nodiscard]] int extent_dim() const { return static_cast<int>(scale.rows()); }
    [[nodiscard]] double expected_rate() const { return alpha / beta; }
};

/// Expected extent E[X] = V / (v - 2d - 2). Undefined for v <= 2d + 2.
[[nodiscard]] inline Matrix expected_extent(const GGIWParams& g) {
    const double denom = g.dof - 2.0 * g.extent_dim() - 2.0;
    if (denom <= 0.0) throw ModelError("expected_extent: dof must exceed 2d+2");
    return g.scale / denom;
}

[[nodiscard]] inline bool is_valid(const GGIWParams& g) {
    return g.alpha > 0.0 && g.beta > 0.0 && g.dof > 2.0 * g.extent_dim() && is_spd(g.scale) &&
           is_psd(g.cov);
}

/// c * N(x) on the point branch plus (1 - c) * GGIW(x) on the extended branch.
/// A branch whose probability is exactly zero may be absent.
struct HybridSingleTargetDensity {
    double point_prob = 1.0;
    std::optional<GaussianDensity> point;
    std::optional<GGIWParams> extended;

    [[nodiscard]] bool has_point() const { return point_prob > 0.0 && point.has_value(); }
    [[nodiscard]] bool has_extended() const { return point_prob < 1.0 && extended.has_value(); }
};

[[nodiscard]] inline HybridSingleTargetDensity make_point_density(GaussianDensity g) {
    return {1.0, std::move(g), std::nullopt};
}

[[nodiscard]] inline HybridSingleTargetDensity make_extended_density(GGIWParams g) {
    return {0.0, std::nullopt, std::move(g)};
}

// ---- Pointwise evaluation and the hybrid single-target integral ----

[[nodiscard]] inline double log_gamma_pdf(double x, double alpha, double beta) {
    if (x <= 0.0) return kNegInf;
    return alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * std::log(x) - beta * x;
}

/// Log density of IW(X; v, V) with E[X] = V / (v - 2d - 2).
[[nodiscard]] inline double log_inverse_wishart_pdf(const Matrix& x, double dof, const Matrix& scale) {
    const int d = static_cast<int>(scale.rows());
    const double nu = dof - d - 1.0;
    Eigen::LLT<Matrix> llt(x);
    if (llt.info() != Eigen::Success) return kNegInf;
    const Matrix xinv = llt.solve(Matrix::Identity(d, d));
    return 0.5 * nu * log_det_spd(scale) - 0.5 * dof * log_det_spd(x) -
           0.5 * (scale * xinv).trace() - 0.5 * nu * d * std::log(2.0) - log_multigamma(0.5 * nu, d);
}

[[nodiscard]] inline double log_ggiw_pdf(const ExtendedState& s, const GGIWParams& g) {
    return log_gamma_pdf(s.gamma, g.alpha, g.beta) + log_gaussian_pdf(s.kinematics, g.mean, g.cov) +
           log_inverse_wishart_pdf(s.extent, g.dof, g.scale);
}

/// A real-valued function on the hybrid space that is a weighted sum of
/// Gaussian densities on the point branch and GGIW densities on the extended
/// branch. These are the integrands the filter needs in closed form.
struct HybridIntegrand {
    std::vector<std::pair<double, GaussianDensity>> point_terms;
    std::vector<std::pair<double, GGIWParams>> extended_terms;

    [[nodiscard]] static HybridIntegrand from_density(const HybridSingleTargetDensity& f) {
        HybridIntegrand out;
        if (f.has_point()) out.point_terms.emplace_back(f.point_prob, *f.point);
        if (f.has_extended()) out.extended_terms.emplace_back(1.0 - f.point_prob, *f.extended);
        return out;
    }

    /// Multiplies by the indicator of the extended branch.
    [[nodiscard]] HybridIntegrand extended_only() const { return {{}, extended_terms}; }
    /// Multiplies by the indicator of the point branch.
    [[nodiscard]] HybridIntegrand point_only() const { return {point_terms, {}}; }

    [[nodiscard]] double operator()(const HybridState& x) const {
        double v = 0.0;
        if (const auto* p = std::get_if<PointState>(&x)) {
            for (const auto& [w, g] : point_terms)
                v += w * std::exp(log_gaussian_pdf(p->kinematics, g.mean, g.cov));
        } else {
            const auto& e = std::get<ExtendedState>(x);
            for (const auto& [w, g] : extended_terms) v += w * std::exp(log_ggiw_pdf(e, g));
        }
        return v;
    }
};

/// Integral over the hybrid space: the point-branch integral plus the
/// extended-branch integral. Each term is a normalized density, so its
/// integral is its weight.
[[nodiscard]] inline double hybrid_integral(const HybridIntegrand& fn) {
    double point = 0.0;
    double extended = 0.0;
    for (const auto& t : fn.point_terms) point += t.first;
    for (const auto& t : fn.extended_terms) extended += t.first;
    return point + extended;
}

// ---- Hypotheses and the PMBM container ----

/// A measurement reference: (time step, index within that step's scan).
struct MeasurementRef {
    std::int64_t step = 0;
    int index = 0;

    friend auto operator<=>(const MeasurementRef&, const MeasurementRef&) = default;
};

struct LocalHypothesis {
    double log_weight = 0.0;
    double existence = 0.0;
    HybridSingleTargetDensity density;
    std::vector<MeasurementRef> assoc_history;

    [[nodiscard]] double weight() const { return std::exp(log_weight); }
};

/// Local hypothesis of a Bernoulli that does not exist (r = 0, w = 1).
[[nodiscard]] inline LocalHypothesis make_nonexistent_hypothesis() {
    LocalHypothesis h;
    h.log_weight = 0.0;
    h.existence = 0.0;
    h.density.point_prob = 1.0;
    return h;
}

/// Measurement indices a hypothesis claims at a given step.
[[nodiscard]] inline std::vector<int> measurements_at(const LocalHypothesis& h, std::int64_t step) {
    std::vector<int> out;
    for (const auto& m : h.assoc_history)
        if (m.step == step) out.push_back(m.index);
    return out;
}

struct Track {
    std::int64_t id = 0;
    std::vector<LocalHypothesis> hypotheses;
};

struct GlobalHypothesis {
    double weight = 0.0;
    /// choice[i] indexes tracks[i].hypotheses.
    std::vector<int> choice;
};

struct WeightedGaussian {
    double weight = 0.0;
    GaussianDensity density;
};

struct WeightedGGIW {
    double weight = 0.0;
    GGIWParams density;
};

/// Intensity of the PPP of undetected targets. The point weights sum to the
/// expected number of undetected point targets, likewise for extended.
struct PPPIntensity {
    std::vector<WeightedGaussian> point_components;
    std::vector<WeightedGGIW> extended_components;

    [[nodiscard]] bool empty() const { return point_components.empty() && extended_components.empty(); }

    [[nodiscard]] double total_point_weight() const {
        double s = 0.0;
        for (const auto& c : point_components) s += c.weight;
        return s;
    }
    [[nodiscard]] double total_extended_weight() const {
        double s = 0.0;
        for (const auto& c : extended_components) s += c.weight;
        return s;
    }
};

struct PMBMDensity {
    PPPIntensity ppp;
    std::vector<Track> tracks;
    std::vector<GlobalHypothesis> globals;
    /// Index of the current time step; advanced by prediction.
    std::int64_t step = 0;
    std::int64_t next_track_id = 0;
};

/// An empty-scene posterior: given PPP, no tracks and the single empty global.
[[nodiscard]] inline PMBMDensity make_initial_density(PPPIntensity ppp = {}) {
    PMBMDensity d;
    d.ppp = std::move(ppp);
    d.globals.push_back({1.0, {}});
    return d;
}

/// Divides global weights by their sum, preserving order.
[[nodiscard]] inline PMBMDensity normalize_globals(PMBMDensity density) {
    double total = 0.0;
    for (const auto& g : density.globals) {
        if (g.weight < 0.0 || !std::isfinite(g.weight))
            throw DegeneratePosterior("normalize_globals: invalid global weight");
        total += g.weight;
    }
    if (!(total > 0.0)) throw DegeneratePosterior("normalize_globals: all global weights are zero");
    for (auto& g : density.globals) g.weight /= total;
    return density;
}

/// Index of the highest-weight global hypothesis (first on ties).
[[nodiscard]] inline std::size_t best_global(const PMBMDensity& density) {
    if (density.globals.empty()) throw DegeneratePosterior("best_global: no global hypotheses");
    std::size_t best = 0;
    for (std::size_t i = 1; i < density.globals.size(); ++i)
        if (density.globals[i].weight > density.globals[best].weight) best = i;
    return best;
}

// ---- Invariant checking ----

struct InvariantOptions {
    double weight_tol = 1e-9;
    /// Also require that every global covers the same set of current measurements.
    bool require_common_cover = false;
    /// Require the current-scan measurements of each global to be disjoint.
    /// Off for PMB projections, whose merged Bernoullis keep a representative
    /// history rather than an association.
    bool require_disjoint = true;
};

/// Returns a description of every violated invariant; empty when the density is valid.
[[nodiscard]] inline std::vector<std::string> check_invariants(const PMBMDensity& d,
                                                               InvariantOptions opt = {}) {
    std::vector<std::string> bad;
    auto fail = [&](std::string s) { bad.push_back(std::move(s)); };

    if (d.globals.empty()) fail("no global hypotheses");
    double total = 0.0;
    for (const auto& g : d.globals) {
        total += g.weight;
        if (!(g.weight >= 0.0 && g.weight <= 1.0 + opt.weight_tol)) fail("global weight outside [0,1]");
        if (g.choice.size() != d.tracks.size()) {
            fail("global choice length differs from track count");
            continue;
        }
        for (std::size_t i = 0; i < g.choice.size(); ++i)
            if (g.choice[i] < 0 || g.choice[i] >= static_cast<int>(d.tracks[i].hypotheses.size()))
                fail("global choice out of range for track " + std::to_string(d.tracks[i].id));
    }
    if (!d.globals.empty() && std::abs(total - 1.0) > opt.weight_tol)
        fail("global weights sum to " + std::to_string(total));

    for (const auto& t : d.tracks) {
        if (t.hypotheses.empty()) fail("track " + std::to_string(t.id) + " has no hypotheses");
        for (const auto& h : t.hypotheses) {
            if (!(h.existence >= 0.0 && h.existence <= 1.0)) fail("existence outside [0,1]");
            const auto& f = h.density;
            if (!(f.point_prob >= 0.0 && f.point_prob <= 1.0)) fail("point_prob outside [0,1]");
            if (h.existence > 0.0) {
                if (f.point_prob > 0.0 && !f.point) fail("point branch missing");
                if (f.point_prob < 1.0 && !f.extended) fail("extended branch missing");
            }
            if (f.has_point() && !is_psd(f.point->cov)) fail("point covariance not PSD");
            if (f.has_extended() && !is_valid(*f.extended)) fail("GGIW parameters invalid");
        }
    }
    for (const auto& c : d.ppp.point_components) {
        if (!(c.weight > 0.0)) fail("PPP point weight not positive");
        if (!is_psd(c.density.cov)) fail("PPP point covariance not PSD");
    }
    for (const auto& c : d.ppp.extended_components) {
        if (!(c.weight > 0.0)) fail("PPP extended weight not positive");
        if (!is_valid(c.density)) fail("PPP GGIW parameters invalid");
    }

    // Current-scan measurements selected by a global are pairwise disjoint.
    std::optional<std::set<int>> common;
    for (const auto& g : d.globals) {
        if (g.choice.size() != d.tracks.size()) continue;
        std::set<int> used;
        for (std::size_t i = 0; i < g.choice.size(); ++i) {
            if (g.choice[i] < 0 || g.choice[i] >= static_cast<int>(d.tracks[i].hypotheses.size())) continue;
            for (int m : measurements_at(d.tracks[i].hypotheses[g.choice[i]], d.step))
                if (!used.insert(m).second && opt.require_disjoint)
                    fail("measurement " + std::to_string(m) + " used twice in a global");
        }
        if (opt.require_common_cover) {
            if (!common) common = used;
            else if (*common != used) fail("globals cover different measurement sets");
        }
    }
    return bad;
}

}  // namespace pmbm
