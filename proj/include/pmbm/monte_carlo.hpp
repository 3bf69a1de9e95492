#pragma once

#include "pmbm/estimation.hpp"
#include "pmbm/pmb.hpp"
#include "pmbm/pmbm_filter.hpp"
#include "pmbm/scenario.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace pmbm {

// ---- Filter variants ----

enum class FilterVariant { kPePmbm, kPePmb, kPeMbm, kEPmbm, kEPmb };

inline constexpr FilterVariant kAllVariants[] = {FilterVariant::kPePmbm, FilterVariant::kPePmb, FilterVariant::kPeMbm,
                                                 FilterVariant::kEPmbm, FilterVariant::kEPmb};

[[nodiscard]] inline std::string variant_name(FilterVariant v) {
    switch (v) {
        case FilterVariant::kPePmbm: return "pe-pmbm";
        case FilterVariant::kPePmb: return "pe-pmb";
        case FilterVariant::kPeMbm: return "pe-mbm";
        case FilterVariant::kEPmbm: return "e-pmbm";
        case FilterVariant::kEPmb: return "e-pmb";
    }
    return "unknown";
}

[[nodiscard]] inline FilterVariant parse_variant(const std::string& name) {
    for (FilterVariant v : kAllVariants)
        if (variant_name(v) == name) return v;
    throw std::invalid_argument("unknown filter variant '" + name + "'");
}

/// Extended-only variants are the point/extended ones with zero point birth weight.
[[nodiscard]] inline ScenarioConfig variant_config(ScenarioConfig c, FilterVariant v) {
    if (v == FilterVariant::kEPmbm || v == FilterVariant::kEPmb) c.point_birth_weight = 0.0;
    return c;
}

// ---- Tracker ----

/// Filter state plus models for one run: predict, update, optional PMB
/// projection, and estimation per scan.
class Tracker {
public:
    Tracker(const ScenarioConfig& cfg, FilterVariant variant)
        : cfg_(variant_config(cfg, variant)),
          project_(variant == FilterVariant::kPePmb || variant == FilterVariant::kEPmb),
          motion_(make_motion_models(cfg_)),
          meas_(make_measurement_models(cfg_)),
          clutter_(make_clutter_model(cfg_)),
          birth_(variant == FilterVariant::kPeMbm ? make_mb_birth(cfg_) : make_ppp_birth(cfg_)),
          density_(make_initial_density()) {}

    /// Processes one scan and returns the target estimates.
    std::vector<TargetEstimate> step(std::span<const Vector> z) {
        predicted_ = predict(density_, motion_, birth_);
        density_ = update(predicted_, z, meas_, clutter_, cfg_.assoc, cfg_.prune, &report_);
        if (project_) density_ = pmb_project(density_, cfg_.prune.bernoulli_exist_min);
        return estimate(density_, cfg_.existence_threshold, cfg_.point_threshold);
    }

    [[nodiscard]] const PMBMDensity& density() const { return density_; }
    [[nodiscard]] const PMBMDensity& predicted() const { return predicted_; }
    [[nodiscard]] const UpdateReport& last_report() const { return report_; }
    [[nodiscard]] const MeasurementModels& measurement_models() const { return meas_; }

private:
    ScenarioConfig cfg_;
    bool project_;
    MotionModels motion_;
    MeasurementModels meas_;
    ClutterModel clutter_;
    BirthModel birth_;
    PMBMDensity density_;
    PMBMDensity predicted_;
    UpdateReport report_;
};

// ---- Single run ----

/// Truth and measurements of Monte Carlo run `run`: measurements always come
/// from the run's own substream; truth is fixed or sampled per configuration.
struct RunData {
    GroundTruth truth;
    std::vector<std::vector<Vector>> scans;
};

[[nodiscard]] inline GroundTruth fixed_truth(const ScenarioConfig& cfg) {
    return cfg.truth_file.empty() ? crossing_scenario(cfg.steps) : read_truth(cfg.truth_file, cfg.steps);
}

[[nodiscard]] inline RunData make_run_data(const ScenarioConfig& cfg, std::uint64_t run) {
    CounterRng rng = CounterRng::substream(cfg.seed, run);
    RunData data;
    data.truth = cfg.truth_mode == TruthMode::kFixed ? fixed_truth(cfg) : sample_ground_truth(cfg, rng);
    const MeasurementModels m = make_measurement_models(cfg);
    const ClutterModel clutter = make_clutter_model(cfg);
    for (int k = 1; k <= cfg.steps; ++k) data.scans.push_back(generate_measurements(data.truth, k, m, clutter, rng));
    return data;
}

struct RunResult {
    std::vector<GospaResult> per_step;
    std::vector<std::vector<TargetEstimate>> estimates;
    /// Wall-clock seconds spent in the filter (prediction, update, estimation).
    double filter_seconds = 0.0;
};

/// Called after every step with the tracker, for diagnostics and invariant checks.
using StepObserver = std::function<void(int step, const Tracker&)>;

[[nodiscard]] inline RunResult run_filter(const ScenarioConfig& cfg, FilterVariant variant, const RunData& data,
                                          const StepObserver& observer = {}) {
    Tracker tracker(cfg, variant);
    RunResult out;
    const Matrix sel = position_selector();
    for (int k = 1; k <= static_cast<int>(data.scans.size()); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<TargetEstimate> est;
        try {
            est = tracker.step(data.scans[static_cast<std::size_t>(k - 1)]);
        } catch (const std::exception& e) {
            throw std::runtime_error(variant_name(variant) + " failed at step " + std::to_string(k) + ": " + e.what());
        }
        out.filter_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (observer) observer(k, tracker);
        std::vector<Ellipse> est_ellipses;
        for (const auto& e : est) est_ellipses.push_back(to_ellipse(e, sel));
        out.per_step.push_back(gospa(est_ellipses, truth_ellipses(data.truth, k), cfg.gospa_c, cfg.gospa_p));
        out.estimates.push_back(std::move(est));
    }
    return out;
}

// ---- Monte Carlo ----

struct MonteCarloResult {
    FilterVariant variant = FilterVariant::kPePmbm;
    int runs = 0;
    /// Per step: root mean square over runs of each GOSPA component.
    std::vector<GospaResult> rms_per_step;
    /// Root mean square over all runs and steps.
    GospaResult rms_all;
    /// Sum over runs of the filter wall-clock time.
    double filter_seconds = 0.0;
};

/// Root mean square aggregation of GOSPA results (component-wise).
[[nodiscard]] inline GospaResult rms(std::span<const GospaResult> xs) {
    GospaResult r;
    if (xs.empty()) return r;
    for (const auto& x : xs) {
        r.total += x.total * x.total;
        r.localization += x.localization * x.localization;
        r.missed_cost += x.missed_cost * x.missed_cost;
        r.false_cost += x.false_cost * x.false_cost;
    }
    const double n = static_cast<double>(xs.size());
    return {std::sqrt(r.total / n), std::sqrt(r.localization / n), std::sqrt(r.missed_cost / n),
            std::sqrt(r.false_cost / n)};
}

[[nodiscard]] inline MonteCarloResult aggregate(FilterVariant variant, std::span<const RunResult> runs) {
    MonteCarloResult out;
    out.variant = variant;
    out.runs = static_cast<int>(runs.size());
    if (runs.empty()) return out;
    const std::size_t steps = runs.front().per_step.size();
    std::vector<GospaResult> all;
    for (std::size_t k = 0; k < steps; ++k) {
        std::vector<GospaResult> at_k;
        for (const auto& r : runs) at_k.push_back(r.per_step.at(k));
        out.rms_per_step.push_back(rms(at_k));
    }
    for (const auto& r : runs) {
        all.insert(all.end(), r.per_step.begin(), r.per_step.end());
        out.filter_seconds += r.filter_seconds;
    }
    out.rms_all = rms(all);
    return out;
}

/// Runs the variant over runs 0..runs-1 with up to `threads` workers.
/// Results are reduced in run order, so they do not depend on the thread count.
[[nodiscard]] inline MonteCarloResult run_monte_carlo(const ScenarioConfig& cfg, FilterVariant variant, int runs,
                                                      unsigned threads = 1) {
    if (runs < 1) throw std::invalid_argument("run_monte_carlo: runs must be >= 1");
    std::vector<RunResult> results(static_cast<std::size_t>(runs));
    std::vector<std::string> errors(static_cast<std::size_t>(runs));
    std::mutex mutex;
    int next = 0;
    auto worker = [&] {
        while (true) {
            int r = 0;
            {
                std::lock_guard lock(mutex);
                if (next >= runs) return;
                r = next++;
            }
            try {
                const RunData data = make_run_data(cfg, static_cast<std::uint64_t>(r));
                results[static_cast<std::size_t>(r)] = run_filter(cfg, variant, data);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(r)] = "run " + std::to_string(r) + ": " + e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min(threads, static_cast<unsigned>(runs)));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error(e);
    return aggregate(variant, results);
}

// ---- Output ----

inline void write_results_csv(std::ostream& out, const MonteCarloResult& r) {
    out.precision(10);
    out << "step,rms_total,rms_loc,rms_missed,rms_false\n";
    for (std::size_t k = 0; k < r.rms_per_step.size(); ++k) {
        const auto& g = r.rms_per_step[k];
        out << (k + 1) << ',' << g.total << ',' << g.localization << ',' << g.missed_cost << ',' << g.false_cost
            << '\n';
    }
}

[[nodiscard]] inline nlohmann::json summary_json(std::span<const MonteCarloResult> results, const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["steps"] = cfg.steps;
    j["filters"] = nlohmann::json::array();
    for (const auto& r : results) {
        j["filters"].push_back({{"filter", variant_name(r.variant)},
                                {"runs", r.runs},
                                {"rms_total", r.rms_all.total},
                                {"rms_loc", r.rms_all.localization},
                                {"rms_missed", r.rms_all.missed_cost},
                                {"rms_false", r.rms_all.false_cost},
                                {"wall_clock_seconds", r.filter_seconds}});
    }
    return j;
}

}  // namespace pmbm
