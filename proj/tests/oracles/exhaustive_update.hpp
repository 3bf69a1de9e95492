#pragma once

// Reference one-step updates by explicit enumeration of every measurement
// partition and every association of its clusters, for scenes with at most a
// single prior Bernoulli (hybrid model) or a few prior point Bernoullis
// (classical point-target model). Only the single-target likelihoods are
// shared with the library; all combinatorics and mixing are coded here.

#include "pmbm/ggiw.hpp"
#include "pmbm/pmbm_filter.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

using pmbm::Cluster;
using pmbm::Matrix;
using pmbm::Vector;

/// Every set partition of {0..n-1}, built by inserting each element into an
/// existing block or a new one.
inline std::vector<std::vector<Cluster>> set_partitions(int n) {
    std::vector<std::vector<Cluster>> out;
    std::vector<Cluster> blocks;
    auto recurse = [&](auto&& self, int i) -> void {
        if (i == n) {
            out.push_back(blocks);
            return;
        }
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            blocks[b].push_back(i);
            self(self, i + 1);
            blocks[b].pop_back();
        }
        blocks.push_back({i});
        self(self, i + 1);
        blocks.pop_back();
    };
    recurse(recurse, 0);
    return out;
}

struct BernoulliSummary {
    double existence = 0.0;
    double point_prob = 0.0;
};

/// One global hypothesis: which cluster (if any) the prior Bernoulli takes and
/// which clusters start new Bernoullis.
struct OracleGlobal {
    double weight = 0.0;
    Cluster prior_cluster;
    std::set<Cluster> new_clusters;
    std::optional<BernoulliSummary> prior;
};

struct OracleResult {
    std::vector<OracleGlobal> globals;
    std::map<Cluster, BernoulliSummary> new_bernoullis;
};

struct MicroScene {
    pmbm::PPPIntensity ppp;
    std::optional<pmbm::LocalHypothesis> prior;
    std::vector<Vector> z;
    pmbm::MeasurementModels models;
    pmbm::ClutterModel clutter;
};

inline double ggiw_likelihood(const pmbm::GGIWParams& g, const std::vector<Vector>& z, const Cluster& w,
                              const pmbm::ExtendedMeasModel& m) {
    Matrix cols(2, static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) cols.col(static_cast<Eigen::Index>(i)) = z[w[i]];
    return pmbm::ggiw_update(g, cols, m).likelihood();
}

inline double point_likelihood(const pmbm::GaussianDensity& g, const Vector& z, const pmbm::PointMeasModel& m) {
    return std::exp(pmbm::log_gaussian_pdf(z, m.H * g.mean, m.H * g.cov * m.H.transpose() + m.R));
}

inline double clutter_intensity(const pmbm::ClutterModel& c, const Vector& z) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z(i) < c.lower(i) || z(i) > c.upper(i)) return 0.0;
    return c.rate / (c.upper - c.lower).prod();
}

inline OracleResult enumerate_update(const MicroScene& s) {
    const double pd1 = s.models.point.detection;
    const double pd2 = s.models.extended.detection;
    OracleResult out;

    // New Bernoulli for a cluster: (weight, existence, point_prob).
    auto fresh = [&](const Cluster& w) {
        double point = 0.0;
        double ext = 0.0;
        if (w.size() == 1)
            for (const auto& c : s.ppp.point_components)
                point += pd1 * c.weight * point_likelihood(c.density, s.z[w[0]], s.models.point);
        for (const auto& c : s.ppp.extended_components)
            ext += pd2 * c.weight * ggiw_likelihood(c.density, s.z, w, s.models.extended);
        const double lik = point + ext;
        const double clutter = w.size() == 1 ? clutter_intensity(s.clutter, s.z[w[0]]) : 0.0;
        const double weight = clutter + lik;
        BernoulliSummary b{weight > 0.0 ? lik / weight : 0.0, lik > 0.0 ? point / lik : 0.0};
        return std::pair{weight, b};
    };

    // Prior Bernoulli misdetected.
    double miss_factor = 1.0;
    BernoulliSummary miss{};
    // Prior Bernoulli detected with a cluster: (factor, summary).
    auto detect = [&](const Cluster& w) {
        const auto& h = *s.prior;
        const double c = h.density.point_prob;
        double point = 0.0;
        double ext = 0.0;
        if (w.size() == 1 && h.density.point && c > 0.0)
            point = c * pd1 * point_likelihood(*h.density.point, s.z[w[0]], s.models.point);
        if (h.density.extended && c < 1.0)
            ext = (1.0 - c) * pd2 * ggiw_likelihood(*h.density.extended, s.z, w, s.models.extended);
        const double lik = point + ext;
        return std::pair{h.existence * lik, BernoulliSummary{1.0, lik > 0.0 ? point / lik : 0.0}};
    };
    if (s.prior) {
        const auto& h = *s.prior;
        const double r = h.existence;
        const double c = h.density.point_prob;
        double empty = 0.0;
        if (h.density.extended) {
            const auto& g = *h.density.extended;
            empty = std::pow(g.beta / (g.beta + 1.0), g.alpha);
        }
        const double l0 = c * (1.0 - pd1) + (1.0 - c) * (1.0 - pd2 + pd2 * empty);
        miss_factor = 1.0 - r + r * l0;
        miss = {r * l0 / miss_factor, (1.0 - pd1) * c / l0};
    }

    const int m = static_cast<int>(s.z.size());
    std::vector<std::vector<Cluster>> partitions = m == 0 ? std::vector<std::vector<Cluster>>{{}} : set_partitions(m);
    double total = 0.0;
    for (const auto& blocks : partitions) {
        const int options = s.prior ? static_cast<int>(blocks.size()) + 1 : 1;
        for (int pick = -1; pick < options - 1; ++pick) {
            OracleGlobal g;
            double w = 1.0;
            if (s.prior) {
                if (pick < 0) {
                    w *= miss_factor;
                    g.prior = miss;
                } else {
                    const auto [f, b] = detect(blocks[pick]);
                    w *= f;
                    g.prior = b;
                    g.prior_cluster = blocks[pick];
                }
            }
            for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
                if (b == pick) continue;
                const auto [f, summary] = fresh(blocks[b]);
                w *= f;
                g.new_clusters.insert(blocks[b]);
                out.new_bernoullis[blocks[b]] = summary;
            }
            if (!(w > 0.0)) continue;
            g.weight = w;
            total += w;
            out.globals.push_back(std::move(g));
        }
    }
    for (auto& g : out.globals) g.weight /= total;
    return out;
}

// ---- Classical point-target PMBM update ----

struct PointBernoulli {
    double existence = 0.0;
    pmbm::GaussianDensity density;
};

struct PointScene {
    std::vector<pmbm::WeightedGaussian> ppp;
    std::vector<PointBernoulli> tracks;
    std::vector<Vector> z;
    pmbm::PointMeasModel model;
    double clutter_intensity = 0.0;
};

struct PointGlobal {
    double weight = 0.0;
    /// For each prior track: the measurement index it takes, or -1.
    std::vector<int> track_meas;
    /// Existence of each prior track under this hypothesis.
    std::vector<double> track_existence;
};

struct PointResult {
    std::vector<PointGlobal> globals;
    /// Existence of the new Bernoulli started by each measurement.
    std::vector<double> new_existence;
};

/// Every measurement goes to a distinct prior track or starts a new Bernoulli.
inline PointResult enumerate_point_update(const PointScene& s) {
    const double pd = s.model.detection;
    const int m = static_cast<int>(s.z.size());
    const int n = static_cast<int>(s.tracks.size());
    PointResult out;
    std::vector<double> new_weight(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        double lik = 0.0;
        for (const auto& c : s.ppp) lik += pd * c.weight * point_likelihood(c.density, s.z[j], s.model);
        new_weight[j] = s.clutter_intensity + lik;
        out.new_existence.push_back(lik / new_weight[j]);
    }
    std::vector<int> owner(static_cast<std::size_t>(m), -1);
    double total = 0.0;
    auto recurse = [&](auto&& self, int j) -> void {
        if (j == m) {
            PointGlobal g;
            g.track_meas.assign(static_cast<std::size_t>(n), -1);
            for (int k = 0; k < m; ++k)
                if (owner[k] >= 0) g.track_meas[owner[k]] = k;
            double w = 1.0;
            for (int i = 0; i < n; ++i) {
                const auto& t = s.tracks[i];
                if (g.track_meas[i] < 0) {
                    w *= 1.0 - t.existence * pd;
                    g.track_existence.push_back(t.existence * (1.0 - pd) / (1.0 - t.existence * pd));
                } else {
                    w *= t.existence * pd * point_likelihood(t.density, s.z[g.track_meas[i]], s.model);
                    g.track_existence.push_back(1.0);
                }
            }
            for (int k = 0; k < m; ++k)
                if (owner[k] < 0) w *= new_weight[k];
            g.weight = w;
            total += w;
            out.globals.push_back(std::move(g));
            return;
        }
        owner[j] = -1;
        self(self, j + 1);
        for (int i = 0; i < n; ++i) {
            if (std::find(owner.begin(), owner.begin() + j, i) != owner.begin() + j) continue;
            owner[j] = i;
            self(self, j + 1);
        }
        owner[j] = -1;
    };
    recurse(recurse, 0);
    for (auto& g : out.globals) g.weight /= total;
    return out;
}

}  // namespace oracle
