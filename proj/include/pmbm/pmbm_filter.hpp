#pragma once

#include "pmbm/assignment.hpp"
#include "pmbm/clustering.hpp"
#include "pmbm/gating.hpp"
#include "pmbm/ggiw.hpp"
#include "pmbm/hybrid_state.hpp"

#include <climits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

namespace pmbm {

// ---- Model configuration ----

struct MotionModels {
    PointMotionModel point;
    GGIWPredictParams extended;
};

struct MeasurementModels {
    PointMeasModel point;
    ExtendedMeasModel extended;
};

enum class BirthMode { kPoisson, kMultiBernoulli };

struct BernoulliBirth {
    double existence = 0.0;
    HybridSingleTargetDensity density;
};

/// Poisson birth adds ppp_birth to the undetected-target intensity every
/// prediction; multi-Bernoulli birth appends one new track per mb_birth entry
/// and keeps the PPP empty.
struct BirthModel {
    BirthMode mode = BirthMode::kPoisson;
    PPPIntensity ppp_birth;
    std::vector<BernoulliBirth> mb_birth;

    void validate() const {
        if (mode == BirthMode::kPoisson && !mb_birth.empty())
            throw ModelError("BirthModel: Poisson mode requires an empty multi-Bernoulli birth");
        if (mode == BirthMode::kMultiBernoulli && !ppp_birth.empty())
            throw ModelError("BirthModel: multi-Bernoulli mode requires an empty PPP birth");
    }
};

/// Uniform clutter over an axis-aligned region: intensity rate / area inside, zero outside.
struct ClutterModel {
    double rate = 0.0;
    Vector lower;
    Vector upper;

    [[nodiscard]] double area() const {
        require_dims(lower.size() == upper.size() && lower.size() > 0, "ClutterModel: bad region");
        return (upper - lower).prod();
    }

    [[nodiscard]] double log_intensity(const Vector& z) const {
        if (rate <= 0.0) return kNegInf;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (z(i) < lower(i) || z(i) > upper(i)) return kNegInf;
        return std::log(rate) - std::log(area());
    }

    [[nodiscard]] double intensity(const Vector& z) const { return std::exp(log_intensity(z)); }
};

struct PruneConfig {
    int max_globals = 20;
    double ppp_weight_min = 1e-5;
    double bernoulli_exist_min = 1e-3;
    double global_weight_min = 1e-3;
};

enum class PartitionMethod { kDbscan, kExhaustive };

/// Data-association settings for the update.
struct AssociationConfig {
    double gate_prob = 0.999;
    /// When false, every measurement is admissible for every hypothesis and
    /// PPP component, and the whole scan is handled as Bernoulli-gated.
    bool gating = true;
    PartitionMethod partitions = PartitionMethod::kDbscan;
    double eps_min = 0.1;
    double eps_max = 12.0;
    double eps_step = 0.1;
};

// ---- Helpers ----

namespace detail {

inline void drop_unused_branches(HybridSingleTargetDensity& f) {
    if (f.point_prob <= 0.0) {
        f.point_prob = 0.0;
        f.point.reset();
    }
    if (f.point_prob >= 1.0) {
        f.point_prob = 1.0;
        f.extended.reset();
    }
}

inline void append_history(LocalHypothesis& h, std::int64_t step, std::span<const int> indices) {
    for (int i : indices) h.assoc_history.push_back({step, i});
}

}  // namespace detail

// ---- Prediction ----

[[nodiscard]] inline PMBMDensity predict(const PMBMDensity& post, const MotionModels& motion,
                                         const BirthModel& birth) {
    birth.validate();
    const double ps = motion.point.survival;
    PMBMDensity out;
    out.step = post.step + 1;
    out.next_track_id = post.next_track_id;
    out.globals = post.globals;
    out.tracks.reserve(post.tracks.size() + birth.mb_birth.size());

    for (const auto& t : post.tracks) {
        Track nt{t.id, {}};
        nt.hypotheses.reserve(t.hypotheses.size());
        for (const auto& h : t.hypotheses) {
            LocalHypothesis p = h;
            p.existence = h.existence * ps;
            if (h.density.has_point()) p.density.point = kalman_predict(*h.density.point, motion.point);
            if (h.density.has_extended())
                p.density.extended = ggiw_predict(*h.density.extended, motion.point, motion.extended);
            nt.hypotheses.push_back(std::move(p));
        }
        out.tracks.push_back(std::move(nt));
    }

    for (const auto& c : post.ppp.point_components)
        out.ppp.point_components.push_back({c.weight * ps, kalman_predict(c.density, motion.point)});
    for (const auto& c : post.ppp.extended_components)
        out.ppp.extended_components.push_back(
            {c.weight * ps, ggiw_predict(c.density, motion.point, motion.extended)});

    if (birth.mode == BirthMode::kPoisson) {
        for (const auto& c : birth.ppp_birth.point_components)
            if (c.weight > 0.0) out.ppp.point_components.push_back(c);
        for (const auto& c : birth.ppp_birth.extended_components)
            if (c.weight > 0.0) out.ppp.extended_components.push_back(c);
    } else {
        for (const auto& b : birth.mb_birth) {
            LocalHypothesis h;
            h.log_weight = 0.0;
            h.existence = b.existence;
            h.density = b.density;
            out.tracks.push_back({out.next_track_id++, {std::move(h)}});
            for (auto& g : out.globals) g.choice.push_back(0);
        }
    }
    return out;
}

// ---- Update building blocks ----

/// Undetected-target intensity after a scan: point components scaled by the
/// misdetection probability; each extended component splits into a
/// misdetected copy and a detected-but-silent copy.
[[nodiscard]] inline PPPIntensity update_ppp_intensity(const PPPIntensity& ppp, const PointMeasModel& pm,
                                                       const ExtendedMeasModel& em) {
    PPPIntensity out;
    for (const auto& c : ppp.point_components) {
        const double w = (1.0 - pm.detection) * c.weight;
        if (w > 0.0) out.point_components.push_back({w, c.density});
    }
    for (const auto& c : ppp.extended_components) {
        const double w = (1.0 - em.detection) * c.weight;
        if (w > 0.0) out.extended_components.push_back({w, c.density});
    }
    for (const auto& c : ppp.extended_components) {
        const GGIWUpdateResult u = ggiw_update(c.density, Matrix(c.density.extent_dim(), 0), em);
        const double w = em.detection * u.likelihood() * c.weight;
        if (w > 0.0) out.extended_components.push_back({w, u.posterior});
    }
    return out;
}

/// Misdetection hypothesis of a previous Bernoulli.
[[nodiscard]] inline LocalHypothesis bernoulli_misdetect(const LocalHypothesis& h, const MeasurementModels& m) {
    const double r = h.existence;
    if (r <= 0.0) return h;
    const double pd1 = m.point.detection;
    const double pd2 = m.extended.detection;
    const HybridSingleTargetDensity& f = h.density;
    const double c = f.point_prob;

    double empty_lik = 0.0;  // GGIW likelihood of an empty set
    double lik = 0.0;
    if (f.has_point()) lik += c * (1.0 - pd1);
    if (f.has_extended()) {
        const GGIWParams& g = *f.extended;
        empty_lik = std::exp(g.alpha * (std::log(g.beta) - std::log(g.beta + 1.0)));
        lik += (1.0 - c) * (1.0 - pd2 + pd2 * empty_lik);
    }
    if (!(lik > 0.0)) throw ModelError("bernoulli_misdetect: misdetection likelihood is zero");

    LocalHypothesis out = h;
    const double norm = 1.0 - r + r * lik;
    out.log_weight = h.log_weight + std::log(norm);
    out.existence = std::min(1.0, r * lik / norm);
    out.density.point_prob = f.has_point() ? std::min(1.0, (1.0 - pd1) * c / lik) : 0.0;

    if (f.has_extended()) {
        const GGIWParams& g = *f.extended;
        const double keep = (1.0 - pd2) / (1.0 - pd2 + pd2 * empty_lik);
        if (keep <= 0.0) {
            out.density.extended->beta = g.beta + 1.0;
        } else if (keep < 1.0) {
            const GammaComponent mix[] = {{keep, g.alpha, g.beta}, {1.0 - keep, g.alpha, g.beta + 1.0}};
            std::tie(out.density.extended->alpha, out.density.extended->beta) = gamma_merge(mix);
        }
    }
    detail::drop_unused_branches(out.density);
    return out;
}

/// Detection hypothesis of a previous Bernoulli with the measurements in the
/// columns of w (original scan indices in `indices`). A zero likelihood gives
/// log_weight = -inf.
[[nodiscard]] inline LocalHypothesis bernoulli_detect(const LocalHypothesis& h, const Matrix& w,
                                                      std::span<const int> indices, std::int64_t step,
                                                      const MeasurementModels& m) {
    if (w.cols() == 0) throw std::invalid_argument("bernoulli_detect: empty measurement set");
    const HybridSingleTargetDensity& f = h.density;
    const double c = f.point_prob;
    LocalHypothesis out = h;
    out.existence = 1.0;
    detail::append_history(out, step, indices);

    double log_point = kNegInf;
    double log_ext = kNegInf;
    std::optional<GaussianDensity> point_post;
    std::optional<GGIWParams> ext_post;
    if (f.has_extended() && m.extended.detection > 0.0) {
        const GGIWUpdateResult u = ggiw_update(*f.extended, w, m.extended);
        log_ext = std::log1p(-c) + std::log(m.extended.detection) + u.log_likelihood;
        ext_post = u.posterior;
    }
    if (w.cols() == 1 && f.has_point() && m.point.detection > 0.0) {
        const KalmanUpdateResult u = kalman_update(*f.point, w.col(0), m.point);
        log_point = std::log(c) + std::log(m.point.detection) + u.log_likelihood;
        point_post = u.posterior;
    }
    const double terms[] = {log_point, log_ext};
    const double log_lik = log_sum_exp(terms);
    out.log_weight = h.log_weight + safe_log(h.existence) + log_lik;
    if (log_lik == kNegInf) return out;

    out.density.point_prob = (log_point == kNegInf) ? 0.0 : std::exp(log_point - log_lik);
    out.density.point = point_post;
    out.density.extended = ext_post;
    detail::drop_unused_branches(out.density);
    return out;
}

/// PPP components admissible for a new Bernoulli; empty masks mean all admissible.
struct ComponentMask {
    std::vector<char> point;
    std::vector<char> extended;
};

/// New Bernoulli initiated by the measurements in the columns of w. The
/// weight is clutter (singletons only) plus the detection likelihood of the
/// undetected-target intensity; existence is the share of the latter.
[[nodiscard]] inline LocalHypothesis new_bernoulli(const PPPIntensity& ppp, const Matrix& w,
                                                   std::span<const int> indices, std::int64_t step,
                                                   const ClutterModel& clutter, const MeasurementModels& m,
                                                   const ComponentMask& mask = {}) {
    if (w.cols() == 0) throw std::invalid_argument("new_bernoulli: empty measurement set");
    const bool single = w.cols() == 1;

    std::vector<double> log_terms;
    std::vector<double> point_terms;
    std::vector<double> ext_terms;
    std::vector<GaussianDensity> point_post;
    std::vector<GGIWParams> ext_post;
    if (single && m.point.detection > 0.0) {
        for (std::size_t q = 0; q < ppp.point_components.size(); ++q) {
            if (!mask.point.empty() && !mask.point[q]) continue;
            const auto& comp = ppp.point_components[q];
            const KalmanUpdateResult u = kalman_update(comp.density, w.col(0), m.point);
            point_terms.push_back(std::log(m.point.detection * comp.weight) + u.log_likelihood);
            point_post.push_back(u.posterior);
        }
    }
    if (m.extended.detection > 0.0) {
        for (std::size_t q = 0; q < ppp.extended_components.size(); ++q) {
            if (!mask.extended.empty() && !mask.extended[q]) continue;
            const auto& comp = ppp.extended_components[q];
            const GGIWUpdateResult u = ggiw_update(comp.density, w, m.extended);
            ext_terms.push_back(std::log(m.extended.detection * comp.weight) + u.log_likelihood);
            ext_post.push_back(u.posterior);
        }
    }
    const double log_point = log_sum_exp(point_terms);
    const double log_ext = log_sum_exp(ext_terms);
    const double parts[] = {log_point, log_ext};
    const double log_lik = log_sum_exp(parts);
    const double log_clutter = single ? clutter.log_intensity(w.col(0)) : kNegInf;
    const double total[] = {log_clutter, log_lik};

    LocalHypothesis h;
    h.log_weight = log_sum_exp(total);
    detail::append_history(h, step, indices);
    if (log_lik == kNegInf) {
        h.existence = 0.0;
        return h;
    }
    h.existence = std::exp(log_lik - h.log_weight);
    h.density.point_prob = std::exp(log_point - log_lik);
    if (!point_terms.empty()) {
        std::vector<std::pair<double, GaussianDensity>> mix;
        for (std::size_t q = 0; q < point_terms.size(); ++q) {
            const double wq = std::exp(point_terms[q] - log_point);
            if (wq > 0.0) mix.emplace_back(wq, point_post[q]);
        }
        if (!mix.empty()) h.density.point = gaussian_mixture_moments(mix);
    }
    if (!ext_terms.empty()) {
        std::vector<std::pair<double, GGIWParams>> mix;
        for (std::size_t q = 0; q < ext_terms.size(); ++q) {
            const double wq = std::exp(ext_terms[q] - log_ext);
            if (wq > 0.0) mix.emplace_back(wq, ext_post[q]);
        }
        if (!mix.empty()) h.density.extended = ggiw_mixture_merge(mix);
    }
    detail::drop_unused_branches(h.density);
    return h;
}

// ---- Pruning ----

namespace detail {

/// Removes unreferenced local hypotheses and merges globals with identical choices.
inline void compact(PMBMDensity& d) {
    for (std::size_t t = 0; t < d.tracks.size(); ++t) {
        auto& hyps = d.tracks[t].hypotheses;
        std::vector<int> remap(hyps.size(), -1);
        for (const auto& g : d.globals) remap[g.choice[t]] = 0;
        int next = 0;
        std::vector<LocalHypothesis> kept;
        for (std::size_t a = 0; a < hyps.size(); ++a) {
            if (remap[a] < 0) continue;
            remap[a] = next++;
            kept.push_back(std::move(hyps[a]));
        }
        hyps = std::move(kept);
        for (auto& g : d.globals) g.choice[t] = remap[g.choice[t]];
    }
    std::map<std::vector<int>, std::size_t> seen;
    std::vector<GlobalHypothesis> merged;
    for (auto& g : d.globals) {
        auto [it, fresh] = seen.try_emplace(g.choice, merged.size());
        if (fresh) merged.push_back(std::move(g));
        else merged[it->second].weight += g.weight;
    }
    d.globals = std::move(merged);
}

}  // namespace detail

/// Drops weak PPP components, weak or excess global hypotheses, tracks that
/// are unlikely to exist under every surviving global, and local hypotheses
/// no global references. Never returns an empty global list.
[[nodiscard]] inline PMBMDensity prune(PMBMDensity d, const PruneConfig& cfg) {
    std::erase_if(d.ppp.point_components, [&](const auto& c) { return c.weight < cfg.ppp_weight_min; });
    std::erase_if(d.ppp.extended_components, [&](const auto& c) { return c.weight < cfg.ppp_weight_min; });

    d = normalize_globals(std::move(d));
    std::vector<std::size_t> order(d.globals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.globals[a].weight > d.globals[b].weight; });
    std::vector<char> keep(d.globals.size(), 0);
    int kept = 0;
    for (std::size_t i : order) {
        if (kept >= std::max(cfg.max_globals, 1)) break;
        if (d.globals[i].weight < cfg.global_weight_min) break;
        keep[i] = 1;
        ++kept;
    }
    if (kept == 0) keep[order.front()] = 1;
    std::vector<GlobalHypothesis> globals;
    for (std::size_t i = 0; i < d.globals.size(); ++i)
        if (keep[i]) globals.push_back(std::move(d.globals[i]));
    d.globals = std::move(globals);

    std::vector<char> keep_track(d.tracks.size(), 1);
    for (std::size_t t = 0; t < d.tracks.size(); ++t) {
        double best = 0.0;
        for (const auto& g : d.globals) best = std::max(best, d.tracks[t].hypotheses[g.choice[t]].existence);
        keep_track[t] = best >= cfg.bernoulli_exist_min;
    }
    std::vector<Track> tracks;
    for (std::size_t t = 0; t < d.tracks.size(); ++t)
        if (keep_track[t]) tracks.push_back(std::move(d.tracks[t]));
    d.tracks = std::move(tracks);
    for (auto& g : d.globals) {
        std::vector<int> choice;
        for (std::size_t t = 0; t < g.choice.size(); ++t)
            if (keep_track[t]) choice.push_back(g.choice[t]);
        g.choice = std::move(choice);
    }

    detail::compact(d);
    return normalize_globals(std::move(d));
}

// ---- Full update ----

/// Diagnostics from one update, mostly for tests.
struct UpdateReport {
    GateResult gating;
    std::size_t partitions = 0;
    std::size_t subsets = 0;
    std::size_t new_tracks = 0;
};

namespace detail {

struct Candidate {
    double log_weight = 0.0;
    std::size_t parent = 0;
    std::vector<int> subset_of_track;  // -1: misdetected
    std::vector<int> new_subsets;
};

/// Gate membership of measurements, evaluated lazily per (owner, measurement).
class GateTable {
public:
    GateTable(std::span<const Vector> z, double threshold) : z_(z), threshold_(threshold) {}

    [[nodiscard]] bool all_inside(const HybridGate& gate, std::span<const int> indices) const {
        if (threshold_ == kInf) return true;
        return std::all_of(indices.begin(), indices.end(),
                           [&](int j) { return gate.contains(z_[j], threshold_); });
    }

    [[nodiscard]] bool all_inside(const GateEllipse& e, std::span<const int> indices) const {
        if (threshold_ == kInf) return true;
        return std::all_of(indices.begin(), indices.end(),
                           [&](int j) { return e.distance_sq(z_[j]) < threshold_; });
    }

private:
    std::span<const Vector> z_;
    double threshold_;
};

inline std::vector<Partition> make_partitions(std::span<const Vector> z, std::span<const int> indices,
                                              const AssociationConfig& cfg) {
    std::vector<Partition> local;
    if (indices.empty()) return {Partition{}};
    if (cfg.partitions == PartitionMethod::kExhaustive) {
        local = all_partitions(static_cast<int>(indices.size()));
    } else {
        std::vector<Vector> sub;
        sub.reserve(indices.size());
        for (int j : indices) sub.push_back(z[j]);
        local = dbscan_partitions(sub, cfg.eps_min, cfg.eps_max, cfg.eps_step);
    }
    for (auto& p : local)
        for (auto& c : p)
            for (auto& j : c) j = indices[j];
    return local;
}

}  // namespace detail

/// New-Bernoulli factory for one scan: decides admissibility of each subset
/// (singletons always, larger subsets only when gated by an extended PPP
/// component) and builds the hypothesis.
class NewBernoulliBuilder {
public:
    NewBernoulliBuilder(const PPPIntensity& ppp, std::span<const Vector> z, std::int64_t step,
                        const ClutterModel& clutter, const MeasurementModels& m, double threshold)
        : ppp_(ppp), z_(z), step_(step), clutter_(clutter), m_(m), gates_(z, threshold),
          threshold_(threshold) {
        if (threshold_ != kInf) {
            for (const auto& c : ppp.point_components) point_gates_.push_back(point_gate(c.density, m.point));
            for (const auto& c : ppp.extended_components)
                ext_gates_.push_back(extended_gate(c.density, m.extended));
        }
    }

    /// nullopt when the subset cannot start a new Bernoulli.
    [[nodiscard]] std::optional<LocalHypothesis> build(const Cluster& subset) const {
        ComponentMask mask;
        bool any_ext = false;
        if (threshold_ != kInf) {
            mask.point.resize(ppp_.point_components.size());
            mask.extended.resize(ppp_.extended_components.size());
            for (std::size_t q = 0; q < point_gates_.size(); ++q)
                mask.point[q] = gates_.all_inside(point_gates_[q], subset);
            for (std::size_t q = 0; q < ext_gates_.size(); ++q) {
                mask.extended[q] = gates_.all_inside(ext_gates_[q], subset);
                any_ext = any_ext || mask.extended[q];
            }
        } else {
            any_ext = !ppp_.extended_components.empty();
        }
        if (subset.size() > 1 && !any_ext) return std::nullopt;
        LocalHypothesis h =
            new_bernoulli(ppp_, gather_measurements(z_, subset), subset, step_, clutter_, m_, mask);
        if (h.log_weight == kNegInf) return std::nullopt;
        return h;
    }

private:
    const PPPIntensity& ppp_;
    std::span<const Vector> z_;
    std::int64_t step_;
    const ClutterModel& clutter_;
    const MeasurementModels& m_;
    detail::GateTable gates_;
    double threshold_;
    std::vector<GateEllipse> point_gates_;
    std::vector<GateEllipse> ext_gates_;
};

/// Bernoulli-gated part of the update: gating, partitions, local hypotheses,
/// new Bernoullis, ranked assignment per (previous global, partition), and the
/// updated PPP. No pruning; PPP-only measurements are returned in the report.
[[nodiscard]] inline PMBMDensity update_detected(const PMBMDensity& pred, std::span<const Vector> z,
                                                 const MeasurementModels& m, const ClutterModel& clutter,
                                                 const AssociationConfig& assoc, int max_globals,
                                                 UpdateReport* report = nullptr) {
    const std::int64_t step = pred.step;
    const int dz = static_cast<int>(m.point.H.rows());
    const double thr = assoc.gating ? gate_threshold(assoc.gate_prob, dz) : kInf;

    GateResult gating;
    if (assoc.gating) {
        gating = gate(pred, z, assoc.gate_prob, m.point, m.extended);
    } else {
        gating.bernoulli_gated.resize(z.size());
        std::iota(gating.bernoulli_gated.begin(), gating.bernoulli_gated.end(), 0);
    }

    const std::vector<Partition> partitions = detail::make_partitions(z, gating.bernoulli_gated, assoc);
    const std::vector<Cluster> subsets = unique_subsets(partitions);
    std::map<Cluster, int> subset_index;
    for (std::size_t s = 0; s < subsets.size(); ++s) subset_index.emplace(subsets[s], static_cast<int>(s));

    // New Bernoullis, one per admissible subset.
    const NewBernoulliBuilder births(pred.ppp, z, step, clutter, m, thr);
    std::vector<std::optional<LocalHypothesis>> fresh(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s) fresh[s] = births.build(subsets[s]);

    // Misdetection hypotheses for every previous local hypothesis; detection
    // hypotheses computed on demand.
    const detail::GateTable gates(z, thr);
    const std::size_t n_tracks = pred.tracks.size();
    std::vector<std::vector<LocalHypothesis>> missed(n_tracks);
    std::vector<std::vector<std::optional<HybridGate>>> hyp_gates(n_tracks);
    std::vector<std::vector<std::vector<std::optional<LocalHypothesis>>>> detected(n_tracks);
    std::vector<std::vector<std::vector<char>>> detected_done(n_tracks);
    for (std::size_t t = 0; t < n_tracks; ++t) {
        const auto& hyps = pred.tracks[t].hypotheses;
        for (const auto& h : hyps) {
            missed[t].push_back(bernoulli_misdetect(h, m));
            if (h.existence > 0.0 && thr != kInf) hyp_gates[t].emplace_back(std::in_place, h.density, m.point, m.extended);
            else hyp_gates[t].emplace_back();
        }
        detected[t].assign(hyps.size(), std::vector<std::optional<LocalHypothesis>>(subsets.size()));
        detected_done[t].assign(hyps.size(), std::vector<char>(subsets.size(), 0));
    }
    auto detection = [&](std::size_t t, int a, int s) -> const std::optional<LocalHypothesis>& {
        auto& slot = detected[t][a][s];
        if (!detected_done[t][a][s]) {
            detected_done[t][a][s] = 1;
            const LocalHypothesis& h = pred.tracks[t].hypotheses[a];
            const bool admissible =
                h.existence > 0.0 && (thr == kInf || gates.all_inside(*hyp_gates[t][a], subsets[s]));
            if (admissible) {
                LocalHypothesis d = bernoulli_detect(h, gather_measurements(z, subsets[s]), subsets[s], step, m);
                if (d.log_weight != kNegInf) slot = std::move(d);
            }
        }
        return slot;
    };

    // Ranked assignment for every (previous global, partition).
    std::vector<detail::Candidate> candidates;
    for (std::size_t gi = 0; gi < pred.globals.size(); ++gi) {
        const GlobalHypothesis& g = pred.globals[gi];
        if (!(g.weight > 0.0)) continue;
        double base = std::log(g.weight);
        for (std::size_t t = 0; t < n_tracks; ++t) {
            const int a = g.choice[t];
            base += missed[t][a].log_weight - pred.tracks[t].hypotheses[a].log_weight;
        }
        const double budget = std::ceil(static_cast<double>(max_globals) * g.weight);
        const int k = static_cast<int>(std::clamp(budget, 1.0, static_cast<double>(INT_MAX)));

        for (const Partition& p : partitions) {
            const auto rows = static_cast<Eigen::Index>(p.size());
            const auto cols = static_cast<Eigen::Index>(n_tracks) + rows;
            Matrix cost = Matrix::Constant(rows, cols, kInf);
            std::vector<int> row_subset(p.size());
            for (Eigen::Index r = 0; r < rows; ++r) {
                const int s = subset_index.at(p[r]);
                row_subset[r] = s;
                for (std::size_t t = 0; t < n_tracks; ++t) {
                    const int a = g.choice[t];
                    const auto& d = detection(t, a, s);
                    if (d) cost(r, static_cast<Eigen::Index>(t)) = -(d->log_weight - missed[t][a].log_weight);
                }
                if (fresh[s]) cost(r, static_cast<Eigen::Index>(n_tracks) + r) = -fresh[s]->log_weight;
            }
            for (Assignment& asg : try_murty_kbest(cost, k)) {
                detail::Candidate c;
                c.log_weight = base - asg.cost;
                c.parent = gi;
                c.subset_of_track.assign(n_tracks, -1);
                for (Eigen::Index r = 0; r < rows; ++r) {
                    const int col = asg.row_to_col[r];
                    if (col < static_cast<int>(n_tracks)) c.subset_of_track[col] = row_subset[r];
                    else c.new_subsets.push_back(row_subset[r]);
                }
                candidates.push_back(std::move(c));
            }
        }
    }
    if (candidates.empty()) throw DegeneratePosterior("update: no feasible global hypothesis");

    PMBMDensity out;
    out.step = step;
    out.next_track_id = pred.next_track_id;
    out.ppp = update_ppp_intensity(pred.ppp, m.point, m.extended);

    // Previous tracks: all misdetections first, then referenced detections in (a, s) order.
    std::vector<std::map<std::pair<int, int>, int>> det_index(n_tracks);
    for (const auto& c : candidates)
        for (std::size_t t = 0; t < n_tracks; ++t)
            if (c.subset_of_track[t] >= 0) det_index[t].emplace(std::pair{pred.globals[c.parent].choice[t], c.subset_of_track[t]}, 0);
    for (std::size_t t = 0; t < n_tracks; ++t) {
        Track nt{pred.tracks[t].id, std::move(missed[t])};
        for (auto& [key, idx] : det_index[t]) {
            idx = static_cast<int>(nt.hypotheses.size());
            nt.hypotheses.push_back(*detection(t, key.first, key.second));
        }
        out.tracks.push_back(std::move(nt));
    }
    // New tracks: [non-existent, new Bernoulli] per admissible subset.
    std::vector<int> new_track_of_subset(subsets.size(), -1);
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        if (!fresh[s]) continue;
        new_track_of_subset[s] = static_cast<int>(out.tracks.size());
        out.tracks.push_back({out.next_track_id++, {make_nonexistent_hypothesis(), std::move(*fresh[s])}});
    }

    std::vector<double> log_w;
    log_w.reserve(candidates.size());
    for (const auto& c : candidates) log_w.push_back(c.log_weight);
    const std::vector<double> weights = normalize_log_weights(log_w);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        GlobalHypothesis g;
        g.weight = weights[i];
        g.choice.assign(out.tracks.size(), 0);
        const auto& parent = pred.globals[c.parent].choice;
        for (std::size_t t = 0; t < n_tracks; ++t)
            g.choice[t] = c.subset_of_track[t] < 0 ? parent[t]
                                                   : det_index[t].at({parent[t], c.subset_of_track[t]});
        for (int s : c.new_subsets) g.choice[new_track_of_subset[s]] = 1;
        out.globals.push_back(std::move(g));
    }

    if (report) {
        report->gating = std::move(gating);
        report->partitions = partitions.front().empty() ? 0 : partitions.size();
        report->subsets = subsets.size();
        report->new_tracks = out.tracks.size() - n_tracks;
    } else {
        (void)gating;
    }
    return out;
}

/// Adds new Bernoullis for measurements gated only by the PPP: the single
/// DBSCAN partition with the highest product of new-Bernoulli weights (ties to
/// the lexicographically smallest partition) is appended to every global.
inline void append_ppp_only_targets(PMBMDensity& post, const PPPIntensity& pred_ppp, std::span<const Vector> z,
                                    std::span<const int> ppp_only, const MeasurementModels& m,
                                    const ClutterModel& clutter, const AssociationConfig& assoc) {
    if (ppp_only.empty()) return;
    const int dz = static_cast<int>(m.point.H.rows());
    const double thr = assoc.gating ? gate_threshold(assoc.gate_prob, dz) : kInf;
    const NewBernoulliBuilder births(pred_ppp, z, post.step, clutter, m, thr);
    const std::vector<Partition> partitions = detail::make_partitions(z, ppp_only, assoc);

    std::map<Cluster, std::optional<LocalHypothesis>> cache;
    auto hyp = [&](const Cluster& c) -> const std::optional<LocalHypothesis>& {
        auto it = cache.find(c);
        if (it == cache.end()) it = cache.emplace(c, births.build(c)).first;
        return it->second;
    };
    const Partition* best = nullptr;
    double best_score = kNegInf;
    for (const Partition& p : partitions) {
        double score = 0.0;
        for (const Cluster& c : p) {
            const auto& h = hyp(c);
            score += h ? h->log_weight : kNegInf;
        }
        if (score == kNegInf) continue;
        if (!best || score > best_score || (score == best_score && p < *best)) {
            best = &p;
            best_score = score;
        }
    }
    if (!best) return;
    for (const Cluster& c : *best) {
        post.tracks.push_back({post.next_track_id++, {*hyp(c)}});
        for (auto& g : post.globals) g.choice.push_back(0);
    }
}

/// One complete update: Bernoulli-gated association with ranked assignment,
/// pruning, then new targets from PPP-only measurements.
[[nodiscard]] inline PMBMDensity update(const PMBMDensity& pred, std::span<const Vector> z,
                                        const MeasurementModels& m, const ClutterModel& clutter,
                                        const AssociationConfig& assoc, const PruneConfig& prune_cfg,
                                        UpdateReport* report = nullptr) {
    UpdateReport local;
    UpdateReport& rep = report ? *report : local;
    PMBMDensity post = update_detected(pred, z, m, clutter, assoc, prune_cfg.max_globals, &rep);
    post = prune(std::move(post), prune_cfg);
    append_ppp_only_targets(post, pred.ppp, z, rep.gating.ppp_only, m, clutter, assoc);
    return normalize_globals(std::move(post));
}

}  // namespace pmbm
