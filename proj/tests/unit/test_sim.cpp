#include "pmbm/monte_carlo.hpp"
#include "pmbm/snapshot.hpp"

#include "../oracles/micro_scenes.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pmbm;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pmbm_unit_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

}  // namespace

// ---- Random numbers ----

TEST(Random, CounterRngIsDeterministicAndAddressable) {
    CounterRng a(7);
    CounterRng b(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
    EXPECT_EQ(a.counter(), 100u);
    CounterRng c(8);
    CounterRng d(7);
    EXPECT_NE(c(), d());
    CounterRng s0 = CounterRng::substream(5, 0);
    CounterRng s1 = CounterRng::substream(5, 1);
    EXPECT_NE(s0(), s1());
    // Fixed reference output guards against accidental changes to the generator.
    CounterRng z(0);
    EXPECT_EQ(z(), mix64(0));
}

TEST(Random, SampleMoments) {
    CounterRng rng(61);
    const int n = 20000;
    double pois = 0.0;
    double gam = 0.0;
    double bern = 0.0;
    for (int i = 0; i < n; ++i) {
        pois += poisson(rng, 8.0);
        gam += gamma_rate(rng, 40.0, 4.0);
        bern += bernoulli(rng, 0.95);
    }
    EXPECT_NEAR(pois / n, 8.0, 3.0 * std::sqrt(8.0 / n));
    EXPECT_NEAR(gam / n, 10.0, 3.0 * std::sqrt(40.0 / 16.0 / n));
    EXPECT_NEAR(bern / n, 0.95, 3.0 * std::sqrt(0.95 * 0.05 / n));
}

// ---- Ground truth and measurements ----

TEST(Truth, ZeroBirthGivesEmptyTruth) {
    ScenarioConfig cfg;
    cfg.point_birth_weight = 0.0;
    cfg.extended_birth_weight = 0.0;
    CounterRng rng(62);
    EXPECT_TRUE(sample_ground_truth(cfg, rng).targets.empty());
}

TEST(Truth, StaticTargetsStayPut) {
    ScenarioConfig cfg;
    cfg.survival = 1.0;
    cfg.accel_noise = 0.0;
    cfg.tau = 0.0;
    cfg.steps = 30;
    cfg.point_birth_weight = 0.5;
    CounterRng rng(63);
    const GroundTruth t = sample_ground_truth(cfg, rng);
    ASSERT_FALSE(t.targets.empty());
    for (const auto& x : t.targets) {
        EXPECT_EQ(x.death_step, 30);
        for (const auto& s : x.states) EXPECT_EQ(s, x.states.front());
    }
}

TEST(Truth, ExpectedBirthCount) {
    ScenarioConfig cfg;
    cfg.extended_birth_weight = 0.0;
    cfg.truth_mode = TruthMode::kSampled;
    const int draws = 10000;
    double total = 0.0;
    for (int i = 0; i < draws; ++i) {
        CounterRng rng = CounterRng::substream(64, static_cast<std::uint64_t>(i));
        total += static_cast<double>(sample_ground_truth(cfg, rng).targets.size());
    }
    EXPECT_NEAR(total / draws, 3.0, 0.05 * 3.0);
}

TEST(Truth, CrossingScenarioShape) {
    const GroundTruth t = crossing_scenario(100);
    ASSERT_EQ(t.targets.size(), 4u);
    EXPECT_EQ(truth_ellipses(t, 1).size(), 2u);
    EXPECT_EQ(truth_ellipses(t, 20).size(), 4u);
    EXPECT_EQ(truth_ellipses(t, 50).size(), 3u);
    EXPECT_EQ(truth_ellipses(t, 100).size(), 2u);
    for (const auto& x : t.targets)
        if (x.extended) EXPECT_TRUE(is_spd(x.extent));
}

TEST(Measurements, Statistics) {
    const ClutterModel none{0.0, Vector::Constant(2, -500.0), Vector::Constant(2, 500.0)};
    const MeasurementModels silent{{position_selector(), Matrix::Identity(2, 2), 0.0}, {position_selector(), 0.0}};
    const GroundTruth truth = crossing_scenario(10);
    CounterRng rng(65);
    EXPECT_TRUE(generate_measurements(truth, 5, silent, none, rng).empty());

    const ClutterModel clutter{8.0, Vector::Constant(2, -500.0), Vector::Constant(2, 500.0)};
    GroundTruth empty;
    empty.steps = 1;
    const int n = 10000;
    double count = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto z = generate_measurements(empty, 1, silent, clutter, rng);
        count += static_cast<double>(z.size());
        for (const auto& x : z) EXPECT_TRUE((x.array().abs() <= 500.0).all());
    }
    EXPECT_NEAR(count / n, 8.0, 0.03 * 8.0);

    GroundTruth ext;
    ext.steps = 1;
    TruthTarget t;
    t.extended = true;
    t.birth_step = t.death_step = 1;
    t.states = {Vector::Zero(4)};
    t.gamma = 4.0;
    t.extent = Matrix::Identity(2, 2);
    ext.targets.push_back(t);
    const MeasurementModels sure{{position_selector(), Matrix::Identity(2, 2), 1.0}, {position_selector(), 1.0}};
    double dets = 0.0;
    for (int i = 0; i < n; ++i) dets += static_cast<double>(generate_measurements(ext, 1, sure, none, rng).size());
    EXPECT_NEAR(dets / n, 4.0, 3.0 * std::sqrt(4.0 / n));
}

// ---- Configuration ----

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
    const fs::path p = temp_file("cfg.ini");
    write_text(p,
               "; comment\n[scenario]\nsteps = 40\nseed = 99\ntruth = sampled\n"
               "[clutter]\nrate = 4\nregion_lower = [-100, -200]\nregion_upper = [100, 200]\n"
               "[filter]\nmax_globals = 7\ngate_prob = 0.99\n[metric]\nc = 5\n");
    const ScenarioConfig c = load_config(p.string());
    EXPECT_EQ(c.steps, 40);
    EXPECT_EQ(c.seed, 99u);
    EXPECT_EQ(c.truth_mode, TruthMode::kSampled);
    EXPECT_EQ(c.clutter_rate, 4.0);
    EXPECT_EQ(c.region_lower(1), -200.0);
    EXPECT_EQ(c.region_upper(0), 100.0);
    EXPECT_EQ(c.prune.max_globals, 7);
    EXPECT_EQ(c.assoc.gate_prob, 0.99);
    EXPECT_EQ(c.gospa_c, 5.0);
    EXPECT_EQ(c.point_detection, 0.95);

    write_text(p, "[sensor]\npoint_detectoin = 0.9\n");
    EXPECT_THROW((void)load_config(p.string()), std::invalid_argument);
    write_text(p, "[scenario]\nsteps = 0\n");
    EXPECT_THROW((void)load_config(p.string()), std::invalid_argument);
    write_text(p, "[clutter]\nregion_lower = [1, 2, x]\n");
    EXPECT_THROW((void)load_config(p.string()), std::invalid_argument);
}

TEST(Config, ShippedDefaultMatchesBuiltInDefaults) {
    const ScenarioConfig c = load_config(PMBM_SOURCE_DIR "/configs/default.ini");
    const ScenarioConfig d;
    EXPECT_EQ(c.steps, d.steps);
    EXPECT_EQ(c.clutter_rate, d.clutter_rate);
    EXPECT_EQ(c.point_birth_weight, d.point_birth_weight);
    EXPECT_EQ(c.extended_birth_weight, d.extended_birth_weight);
    EXPECT_EQ(c.birth_std, d.birth_std);
    EXPECT_EQ(c.birth_scale, d.birth_scale);
    EXPECT_EQ(c.prune.max_globals, d.prune.max_globals);
    EXPECT_EQ(c.assoc.eps_max, d.assoc.eps_max);
}

// ---- Files ----

TEST(Files, TruthMeasurementsAndEstimatesRoundTrip) {
    ScenarioConfig cfg;
    cfg.steps = 12;
    cfg.truth_mode = TruthMode::kSampled;
    cfg.point_birth_weight = 0.3;
    cfg.extended_birth_weight = 0.3;
    const RunData data = make_run_data(cfg, 3);
    ASSERT_FALSE(data.truth.targets.empty());

    const fs::path tp = temp_file("truth.jsonl");
    const fs::path mp = temp_file("meas.jsonl");
    {
        std::ofstream t(tp);
        write_truth(t, data.truth);
        std::ofstream m(mp);
        write_measurements(m, data.scans);
    }
    const GroundTruth truth = read_truth(tp.string(), cfg.steps);
    ASSERT_EQ(truth.targets.size(), data.truth.targets.size());
    for (std::size_t i = 0; i < truth.targets.size(); ++i) {
        EXPECT_EQ(truth.targets[i].states, data.truth.targets[i].states);
        EXPECT_EQ(truth.targets[i].extent, data.truth.targets[i].extent);
    }
    EXPECT_EQ(read_measurements(mp.string()), data.scans);

    const RunResult r = run_filter(cfg, FilterVariant::kPePmbm, data);
    const fs::path ep = temp_file("est.jsonl");
    {
        std::ofstream e(ep);
        write_estimates(e, r.estimates);
    }
    const auto est = read_estimates(ep.string());
    ASSERT_EQ(est.size(), r.estimates.size());
    for (std::size_t k = 0; k < est.size(); ++k) {
        ASSERT_EQ(est[k].size(), r.estimates[k].size());
        for (std::size_t i = 0; i < est[k].size(); ++i) EXPECT_EQ(est[k][i].index(), r.estimates[k][i].index());
    }
}

TEST(Files, DensitySnapshotRoundTrip) {
    CounterRng rng(66);
    for (int t = 0; t < 20; ++t) {
        const oracle::MicroScene s = oracle::random_micro_scene(rng);
        const PMBMDensity d = update(oracle::micro_prediction(s), s.z, s.models, s.clutter,
                                     oracle::exact_association(), oracle::no_pruning());
        const nlohmann::json j = to_json(d);
        const PMBMDensity back = density_from_json(nlohmann::json::parse(j.dump()));
        EXPECT_EQ(to_json(back), j);
    }
}

// ---- Filtering runs ----

TEST(Run, StaticPointTargetIsTracked) {
    ScenarioConfig cfg;
    cfg.steps = 30;
    cfg.clutter_rate = 0.0;
    RunData data;
    data.truth.steps = cfg.steps;
    TruthTarget t;
    t.birth_step = 1;
    t.death_step = cfg.steps;
    for (int k = 1; k <= cfg.steps; ++k) t.states.push_back((Vector(4) << 40.0, 0.0, -70.0, 0.0).finished());
    data.truth.targets.push_back(t);
    CounterRng rng(67);
    const MeasurementModels m = make_measurement_models(cfg);
    const ClutterModel clutter = make_clutter_model(cfg);
    for (int k = 1; k <= cfg.steps; ++k) data.scans.push_back(generate_measurements(data.truth, k, m, clutter, rng));
    const RunResult r = run_filter(cfg, FilterVariant::kPePmbm, data);
    for (int k = 6; k <= cfg.steps; ++k) EXPECT_LT(r.per_step[k - 1].total, 2.0) << "step " << k;
}

TEST(Run, MonteCarloIsDeterministic) {
    ScenarioConfig cfg;
    cfg.steps = 15;
    std::string first;
    for (unsigned threads : {1u, 2u, 1u}) {
        const MonteCarloResult r = run_monte_carlo(cfg, FilterVariant::kPePmb, 3, threads);
        std::ostringstream csv;
        write_results_csv(csv, r);
        if (first.empty()) first = csv.str();
        else EXPECT_EQ(csv.str(), first);
    }
    EXPECT_NE(first.find("step,rms_total,rms_loc,rms_missed,rms_false"), std::string::npos);
}

TEST(Run, ExtendedOnlyVariantsZeroPointBirth) {
    const ScenarioConfig cfg;
    EXPECT_EQ(variant_config(cfg, FilterVariant::kEPmbm).point_birth_weight, 0.0);
    EXPECT_EQ(variant_config(cfg, FilterVariant::kEPmb).point_birth_weight, 0.0);
    EXPECT_EQ(variant_config(cfg, FilterVariant::kPeMbm).point_birth_weight, 0.03);
    for (FilterVariant v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
    EXPECT_THROW((void)parse_variant("gm-phd"), std::invalid_argument);
}
