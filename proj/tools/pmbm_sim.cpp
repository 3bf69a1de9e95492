// Command-line driver: scenario simulation, single filter runs, Monte Carlo
// benchmarks and GOSPA scoring.

#include "pmbm/pmbm.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pmbm;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

ScenarioConfig load(const CommonOptions& o) {
    ScenarioConfig cfg = o.config.empty() ? ScenarioConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Scenario/filter configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the configured RNG seed");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void simulate(const CommonOptions& o, std::uint64_t run) {
    const ScenarioConfig cfg = load(o);
    const RunData data = make_run_data(cfg, run);
    auto truth = open_out(fs::path(o.out) / "truth.jsonl");
    write_truth(truth, data.truth);
    auto meas = open_out(fs::path(o.out) / "measurements.jsonl");
    write_measurements(meas, data.scans);
    std::cout << "wrote " << data.truth.targets.size() << " targets and " << data.scans.size() << " scans to "
              << o.out << '\n';
}

void run_one(const CommonOptions& o, const std::string& filter, const std::string& meas_file,
             const std::string& truth_file) {
    ScenarioConfig cfg = load(o);
    const FilterVariant variant = parse_variant(filter);
    RunData data;
    if (!meas_file.empty()) {
        data.scans = read_measurements(meas_file);
        cfg.steps = static_cast<int>(data.scans.size());
        if (!truth_file.empty()) data.truth = read_truth(truth_file, cfg.steps);
    } else {
        data = make_run_data(cfg, 0);
    }
    data.truth.steps = cfg.steps;
    const RunResult r = run_filter(cfg, variant, data);
    auto est = open_out(fs::path(o.out) / "estimates.jsonl");
    write_estimates(est, r.estimates);
    const RunResult runs[] = {r};
    const MonteCarloResult mc = aggregate(variant, runs);
    auto csv = open_out(fs::path(o.out) / "results.csv");
    write_results_csv(csv, mc);
    const MonteCarloResult all[] = {mc};
    auto summary = open_out(fs::path(o.out) / "summary.json");
    summary << summary_json(all, cfg).dump(2) << '\n';
    std::cout << variant_name(variant) << ": GOSPA (RMS over steps) " << mc.rms_all.total << " m, "
              << r.filter_seconds << " s\n";
}

void bench(const CommonOptions& o, std::vector<std::string> filters, int runs, unsigned threads) {
    const ScenarioConfig cfg = load(o);
    if (filters.empty() || (filters.size() == 1 && filters.front() == "all")) {
        filters.clear();
        for (FilterVariant v : kAllVariants) filters.push_back(variant_name(v));
    }
    std::vector<MonteCarloResult> results;
    for (const auto& name : filters) {
        const FilterVariant v = parse_variant(name);
        results.push_back(run_monte_carlo(cfg, v, runs, threads));
        const auto& r = results.back();
        auto csv = open_out(fs::path(o.out) / name / "results.csv");
        write_results_csv(csv, r);
        std::cout << name << ": RMS-GOSPA " << r.rms_all.total << " (loc " << r.rms_all.localization << ", missed "
                  << r.rms_all.missed_cost << ", false " << r.rms_all.false_cost << ") in " << r.filter_seconds
                  << " s\n";
    }
    auto summary = open_out(fs::path(o.out) / "summary.json");
    summary << summary_json(results, cfg).dump(2) << '\n';
}

void score(const CommonOptions& o, const std::string& truth_file, const std::string& est_file) {
    ScenarioConfig cfg = load(o);
    const auto estimates = read_estimates(est_file);
    const GroundTruth truth = read_truth(truth_file, static_cast<int>(estimates.size()));
    const Matrix sel = position_selector();
    RunResult r;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        std::vector<Ellipse> est;
        for (const auto& e : estimates[k]) est.push_back(to_ellipse(e, sel));
        r.per_step.push_back(gospa(est, truth_ellipses(truth, static_cast<int>(k + 1)), cfg.gospa_c, cfg.gospa_p));
    }
    const RunResult runs[] = {r};
    const MonteCarloResult mc = aggregate(FilterVariant::kPePmbm, runs);
    auto csv = open_out(fs::path(o.out) / "results.csv");
    write_results_csv(csv, mc);
    std::cout << "GOSPA (RMS over steps) " << mc.rms_all.total << " m\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point/extended target PMBM tracker: simulation, filtering and scoring"};
    app.require_subcommand(1);
    CommonOptions common;
    std::string filter = "pe-pmbm";
    std::vector<std::string> filters;
    std::string meas_file;
    std::string truth_file;
    std::string est_file;
    std::uint64_t run_index = 0;
    int runs = 25;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());

    auto* sim = app.add_subcommand("simulate", "Write ground truth and measurements for one run");
    add_common(sim, common);
    sim->add_option("--run", run_index, "Monte Carlo run index (selects the RNG substream)");

    auto* run = app.add_subcommand("run", "Run one filter over a scenario");
    add_common(run, common);
    run->add_option("--filter", filter, "pe-pmbm | pe-pmb | pe-mbm | e-pmbm | e-pmb")->capture_default_str();
    run->add_option("--measurements", meas_file, "Measurement file (default: simulate run 0)")
        ->check(CLI::ExistingFile);
    run->add_option("--truth", truth_file, "Ground-truth file for scoring")->check(CLI::ExistingFile);

    auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo comparison of filters");
    add_common(bench_cmd, common);
    bench_cmd->add_option("--filter", filters, "Filters to run (repeatable, or 'all')");
    bench_cmd->add_option("--runs", runs, "Number of Monte Carlo runs")->capture_default_str()->check(CLI::PositiveNumber);
    bench_cmd->add_option("--threads", threads, "Worker threads")->capture_default_str();

    auto* score_cmd = app.add_subcommand("score", "GOSPA between an estimate file and a truth file");
    add_common(score_cmd, common);
    score_cmd->add_option("--truth", truth_file, "Ground-truth file")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--estimates", est_file, "Estimate file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) simulate(common, run_index);
        else if (run->parsed()) run_one(common, filter, meas_file, truth_file);
        else if (bench_cmd->parsed()) bench(common, filters, runs, threads);
        else if (score_cmd->parsed()) score(common, truth_file, est_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
