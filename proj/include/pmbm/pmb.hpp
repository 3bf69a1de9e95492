#pragma once

#include "pmbm/ggiw.hpp"
#include "pmbm/hybrid_state.hpp"

#include <vector>

namespace pmbm {

/// weights[i][a]: total weight of the globals selecting hypothesis a of track i.
using MarginalWeights = std::vector<std::vector<double>>;

[[nodiscard]] inline MarginalWeights marginal_weights(const PMBMDensity& post) {
    MarginalWeights w(post.tracks.size());
    for (std::size_t i = 0; i < post.tracks.size(); ++i) w[i].assign(post.tracks[i].hypotheses.size(), 0.0);
    for (const auto& g : post.globals)
        for (std::size_t i = 0; i < g.choice.size(); ++i) w[i][g.choice[i]] += g.weight;
    return w;
}

/// Collapses one track's hypotheses into a single Bernoulli by moment
/// matching. Returns nullopt when the merged existence is zero.
[[nodiscard]] inline std::optional<LocalHypothesis> merge_track(const Track& track, std::span<const double> w) {
    double r = 0.0;
    double point_mass = 0.0;
    std::vector<std::pair<double, GaussianDensity>> points;
    std::vector<std::pair<double, GGIWParams>> extended;
    std::size_t representative = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < track.hypotheses.size(); ++a) {
        const LocalHypothesis& h = track.hypotheses[a];
        const double wr = w[a] * h.existence;
        if (!(wr > 0.0)) continue;
        r += wr;
        const double c = h.density.point_prob;
        if (c > 0.0 && h.density.has_point()) {
            point_mass += wr * c;
            points.emplace_back(wr * c, *h.density.point);
        }
        if (c < 1.0 && h.density.has_extended()) extended.emplace_back(wr * (1.0 - c), *h.density.extended);
        if (wr > best) {
            best = wr;
            representative = a;
        }
    }
    if (!(r > 0.0)) return std::nullopt;

    LocalHypothesis out;
    out.log_weight = 0.0;
    out.existence = std::min(r, 1.0);
    out.assoc_history = track.hypotheses[representative].assoc_history;
    out.density.point_prob = std::clamp(point_mass / r, 0.0, 1.0);
    if (!points.empty()) out.density.point = gaussian_mixture_moments(points);
    if (!extended.empty()) out.density.extended = ggiw_mixture_merge(extended);
    if (!out.density.point) out.density.point_prob = 0.0;
    if (!out.density.extended) out.density.point_prob = 1.0;
    return out;
}

/// Track-oriented PMB approximation: every track becomes one Bernoulli and a
/// single global remains. The PPP is copied unchanged. Tracks whose merged
/// existence is zero or below exist_min are dropped.
[[nodiscard]] inline PMBMDensity pmb_project(const PMBMDensity& post, double exist_min = 0.0) {
    const MarginalWeights w = marginal_weights(post);
    PMBMDensity out;
    out.ppp = post.ppp;
    out.step = post.step;
    out.next_track_id = post.next_track_id;
    GlobalHypothesis g{1.0, {}};
    for (std::size_t i = 0; i < post.tracks.size(); ++i) {
        auto merged = merge_track(post.tracks[i], w[i]);
        if (!merged || merged->existence < exist_min) continue;
        out.tracks.push_back({post.tracks[i].id, {std::move(*merged)}});
        g.choice.push_back(0);
    }
    out.globals.push_back(std::move(g));
    return out;
}

}  // namespace pmbm
