#pragma once

#include "pmbm/estimation.hpp"
#include "pmbm/pmbm_filter.hpp"
#include "pmbm/random.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pmbm {

// ---- Configuration ----

enum class TruthMode { kFixed, kSampled };

/// Scenario, model and filter parameters. Defaults reproduce the standard
/// mixed point/extended benchmark.
struct ScenarioConfig {
    int steps = 100;
    std::uint64_t seed = 1;
    TruthMode truth_mode = TruthMode::kFixed;
    /// Line-delimited JSON ground truth; empty selects the built-in crossing scenario.
    std::string truth_file;

    // Motion
    double tau = 1.0;
    double accel_noise = 0.25;
    double survival = 0.99;
    double extent_decay = 1e9;
    double gamma_forget = 1.0;

    // Sensor
    double point_detection = 0.95;
    double extended_detection = 0.95;
    double meas_variance = 1.0;
    double clutter_rate = 8.0;
    Vector region_lower = Vector::Constant(2, -500.0);
    Vector region_upper = Vector::Constant(2, 500.0);

    // Birth
    double point_birth_weight = 0.03;
    double extended_birth_weight = 0.06;
    Vector birth_mean = Vector::Zero(4);
    Vector birth_std = (Vector(4) << 200.0, 4.0, 200.0, 4.0).finished();
    double birth_alpha = 40.0;
    double birth_beta = 4.0;
    double birth_dof = 20.0;
    double birth_scale = 200.0;
    double mb_existence = 0.06;
    double mb_point_prob = 1.0 / 3.0;

    // Filter
    AssociationConfig assoc;
    PruneConfig prune;
    double existence_threshold = 0.5;
    double point_threshold = 0.5;

    // Metric
    double gospa_c = 10.0;
    double gospa_p = 2.0;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
        if (region_lower.size() != 2 || region_upper.size() != 2 || !((region_upper - region_lower).minCoeff() > 0.0))
            throw std::invalid_argument("config: region must be a nondegenerate 2-D box");
        if (clutter_rate < 0.0) throw std::invalid_argument("config: clutter rate must be >= 0");
        if (birth_mean.size() != 4 || birth_std.size() != 4)
            throw std::invalid_argument("config: birth mean and std need 4 entries");
        if (prune.max_globals < 1) throw std::invalid_argument("config: max_globals must be >= 1");
        if (prune.ppp_weight_min < 0.0 || prune.bernoulli_exist_min < 0.0 || prune.global_weight_min < 0.0)
            throw std::invalid_argument("config: pruning thresholds must be >= 0");
    }
};

namespace detail {

inline std::string unquote(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string{} : s.substr(b, e - b + 1);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        s = s.substr(1, s.size() - 2);
    return s;
}

/// Parses "[a, b, c]" into a vector.
inline Vector parse_vector(const std::string& text) {
    std::string s = unquote(text);
    if (!s.empty() && s.front() == '[') s.erase(0, 1);
    if (!s.empty() && s.back() == ']') s.pop_back();
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> xs;
    double x = 0.0;
    while (in >> x) xs.push_back(x);
    if (!in.eof()) throw std::invalid_argument("config: cannot parse number list '" + text + "'");
    return Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace detail

/// Reads a TOML-style file of [section] key = value pairs. Unknown keys are errors.
[[nodiscard]] inline ScenarioConfig load_config(const std::string& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw std::invalid_argument("config: " + std::string(e.what()));
    }
    ScenarioConfig c;
    std::set<std::string> known;
    auto num = [&](const std::string& key, double& field) {
        known.insert(key);
        if (auto v = tree.get_optional<std::string>(key)) field = std::stod(detail::unquote(*v));
    };
    auto integer = [&](const std::string& key, auto& field) {
        known.insert(key);
        if (auto v = tree.get_optional<std::string>(key))
            field = static_cast<std::remove_reference_t<decltype(field)>>(std::stoull(detail::unquote(*v)));
    };
    auto vec = [&](const std::string& key, Vector& field) {
        known.insert(key);
        if (auto v = tree.get_optional<std::string>(key)) field = detail::parse_vector(*v);
    };
    auto text = [&](const std::string& key) -> std::optional<std::string> {
        known.insert(key);
        if (auto v = tree.get_optional<std::string>(key)) return detail::unquote(*v);
        return std::nullopt;
    };

    integer("scenario.steps", c.steps);
    integer("scenario.seed", c.seed);
    if (auto mode = text("scenario.truth")) {
        if (*mode == "fixed") c.truth_mode = TruthMode::kFixed;
        else if (*mode == "sampled") c.truth_mode = TruthMode::kSampled;
        else throw std::invalid_argument("config: scenario.truth must be 'fixed' or 'sampled'");
    }
    if (auto f = text("scenario.truth_file")) c.truth_file = *f;

    num("motion.tau", c.tau);
    num("motion.accel_noise", c.accel_noise);
    num("motion.survival", c.survival);
    num("motion.extent_decay", c.extent_decay);
    num("motion.gamma_forget", c.gamma_forget);

    num("sensor.point_detection", c.point_detection);
    num("sensor.extended_detection", c.extended_detection);
    num("sensor.meas_variance", c.meas_variance);
    num("clutter.rate", c.clutter_rate);
    vec("clutter.region_lower", c.region_lower);
    vec("clutter.region_upper", c.region_upper);

    num("birth.point_weight", c.point_birth_weight);
    num("birth.extended_weight", c.extended_birth_weight);
    vec("birth.mean", c.birth_mean);
    vec("birth.std", c.birth_std);
    num("birth.alpha", c.birth_alpha);
    num("birth.beta", c.birth_beta);
    num("birth.dof", c.birth_dof);
    num("birth.scale", c.birth_scale);
    num("birth.mb_existence", c.mb_existence);
    num("birth.mb_point_prob", c.mb_point_prob);

    num("filter.gate_prob", c.assoc.gate_prob);
    num("filter.eps_min", c.assoc.eps_min);
    num("filter.eps_max", c.assoc.eps_max);
    num("filter.eps_step", c.assoc.eps_step);
    integer("filter.max_globals", c.prune.max_globals);
    num("filter.ppp_weight_min", c.prune.ppp_weight_min);
    num("filter.bernoulli_exist_min", c.prune.bernoulli_exist_min);
    num("filter.global_weight_min", c.prune.global_weight_min);
    num("filter.existence_threshold", c.existence_threshold);
    num("filter.point_threshold", c.point_threshold);

    num("metric.c", c.gospa_c);
    num("metric.p", c.gospa_p);

    for (const auto& [section, body] : tree) {
        if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body)
            if (!known.contains(section + "." + key))
                throw std::invalid_argument("config: unknown key '" + section + "." + key + "'");
    }
    c.validate();
    return c;
}

// ---- Models derived from the configuration ----

[[nodiscard]] inline MotionModels make_motion_models(const ScenarioConfig& c) {
    return {make_cv_model(c.tau, c.accel_noise, c.survival), {c.tau, c.extent_decay, c.gamma_forget}};
}

[[nodiscard]] inline MeasurementModels make_measurement_models(const ScenarioConfig& c) {
    MeasurementModels m;
    m.point = {position_selector(), c.meas_variance * Matrix::Identity(2, 2), c.point_detection};
    m.extended = {position_selector(), c.extended_detection};
    return m;
}

[[nodiscard]] inline ClutterModel make_clutter_model(const ScenarioConfig& c) {
    return {c.clutter_rate, c.region_lower, c.region_upper};
}

[[nodiscard]] inline GaussianDensity birth_gaussian(const ScenarioConfig& c) {
    return {c.birth_mean, Matrix(c.birth_std.array().square().matrix().asDiagonal())};
}

[[nodiscard]] inline GGIWParams birth_ggiw(const ScenarioConfig& c) {
    const GaussianDensity g = birth_gaussian(c);
    return {c.birth_alpha, c.birth_beta, g.mean, g.cov, c.birth_dof, c.birth_scale * Matrix::Identity(2, 2)};
}

[[nodiscard]] inline BirthModel make_ppp_birth(const ScenarioConfig& c) {
    BirthModel b;
    b.mode = BirthMode::kPoisson;
    b.ppp_birth.point_components.push_back({c.point_birth_weight, birth_gaussian(c)});
    b.ppp_birth.extended_components.push_back({c.extended_birth_weight, birth_ggiw(c)});
    return b;
}

[[nodiscard]] inline BirthModel make_mb_birth(const ScenarioConfig& c) {
    BirthModel b;
    b.mode = BirthMode::kMultiBernoulli;
    HybridSingleTargetDensity f;
    f.point_prob = c.mb_point_prob;
    f.point = birth_gaussian(c);
    f.extended = birth_ggiw(c);
    b.mb_birth.push_back({c.mb_existence, std::move(f)});
    return b;
}

// ---- Ground truth ----

struct TruthTarget {
    bool extended = false;
    int birth_step = 1;
    /// Last step at which the target exists.
    int death_step = 1;
    /// Kinematic state at birth_step, ..., death_step.
    std::vector<Vector> states;
    double gamma = 0.0;
    Matrix extent;

    [[nodiscard]] bool alive(int step) const { return step >= birth_step && step <= death_step; }
    [[nodiscard]] const Vector& state(int step) const { return states.at(static_cast<std::size_t>(step - birth_step)); }
};

struct GroundTruth {
    int steps = 0;
    std::vector<TruthTarget> targets;
};

/// Truth objects alive at a step, as position/extent ellipses (points have zero extent).
[[nodiscard]] inline std::vector<Ellipse> truth_ellipses(const GroundTruth& truth, int step) {
    std::vector<Ellipse> out;
    const Matrix sel = position_selector();
    for (const auto& t : truth.targets) {
        if (!t.alive(step)) continue;
        const Vector pos = sel * t.state(step);
        out.push_back({pos, t.extended ? t.extent : Matrix::Zero(pos.size(), pos.size())});
    }
    return out;
}

/// Draws births from the Poisson birth intensity at every step, applies
/// survival and the motion model; gamma and extent stay constant.
[[nodiscard]] inline GroundTruth sample_ground_truth(const ScenarioConfig& c, CounterRng& rng) {
    const PointMotionModel motion = make_motion_models(c).point;
    const GaussianDensity birth = birth_gaussian(c);
    GroundTruth truth;
    truth.steps = c.steps;
    std::vector<std::size_t> alive;
    for (int k = 1; k <= c.steps; ++k) {
        std::vector<std::size_t> next;
        for (std::size_t i : alive) {
            TruthTarget& t = truth.targets[i];
            if (!bernoulli(rng, c.survival)) continue;
            t.states.push_back(sample_gaussian(rng, motion.F * t.states.back(), motion.Q));
            t.death_step = k;
            next.push_back(i);
        }
        const int n_point = poisson(rng, c.point_birth_weight);
        const int n_ext = poisson(rng, c.extended_birth_weight);
        for (int j = 0; j < n_point + n_ext; ++j) {
            TruthTarget t;
            t.extended = j >= n_point;
            t.birth_step = k;
            t.death_step = k;
            t.states.push_back(sample_gaussian(rng, birth.mean, birth.cov));
            if (t.extended) {
                t.gamma = gamma_rate(rng, c.birth_alpha, c.birth_beta);
                t.extent = sample_inverse_wishart(rng, c.birth_dof, c.birth_scale * Matrix::Identity(2, 2));
            }
            next.push_back(truth.targets.size());
            truth.targets.push_back(std::move(t));
        }
        alive = std::move(next);
    }
    return truth;
}

namespace detail {

inline TruthTarget straight_line(bool extended, int birth, int death, const Vector& pos_at_50, const Vector& vel) {
    TruthTarget t;
    t.extended = extended;
    t.birth_step = birth;
    t.death_step = death;
    for (int k = birth; k <= death; ++k) {
        const Vector p = pos_at_50 + static_cast<double>(k - 50) * vel;
        t.states.push_back((Vector(4) << p(0), vel(0), p(1), vel(1)).finished());
    }
    return t;
}

inline Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

}  // namespace detail

/// Built-in benchmark: two extended targets present at every step and two
/// point targets alive over steps 5-38 and 10-60; all three targets alive at
/// step 50 pass within about 25 m of each other.
[[nodiscard]] inline GroundTruth crossing_scenario(int steps = 100) {
    GroundTruth truth;
    truth.steps = steps;
    TruthTarget e1 = detail::straight_line(true, 1, steps, detail::vec2(-12.0, 0.0), detail::vec2(4.0, 2.0));
    e1.gamma = 10.0;
    e1.extent = (Matrix(2, 2) << 25.0, 8.0, 8.0, 12.0).finished();
    TruthTarget e2 = detail::straight_line(true, 1, steps, detail::vec2(12.0, 0.0), detail::vec2(-4.0, 2.0));
    e2.gamma = 8.0;
    e2.extent = (Matrix(2, 2) << 16.0, -5.0, -5.0, 14.0).finished();
    TruthTarget p1 = detail::straight_line(false, 5, std::min(38, steps), detail::vec2(-200.0, 60.0),
                                           detail::vec2(3.0, -2.0));
    TruthTarget p2 = detail::straight_line(false, 10, std::min(60, steps), detail::vec2(0.0, 15.0),
                                           detail::vec2(0.0, -3.0));
    truth.targets = {std::move(e1), std::move(e2), std::move(p1), std::move(p2)};
    std::erase_if(truth.targets, [&](const TruthTarget& t) { return t.birth_step > steps; });
    return truth;
}

// ---- Measurements ----

/// One scan: point targets give at most one detection, extended targets a
/// Poisson number of detections spread over their extent, plus uniform clutter.
/// The list is shuffled.
[[nodiscard]] inline std::vector<Vector> generate_measurements(const GroundTruth& truth, int step,
                                                               const MeasurementModels& m,
                                                               const ClutterModel& clutter, CounterRng& rng) {
    std::vector<Vector> z;
    for (const auto& t : truth.targets) {
        if (!t.alive(step)) continue;
        const Vector& x = t.state(step);
        if (!t.extended) {
            if (bernoulli(rng, m.point.detection)) z.push_back(sample_gaussian(rng, m.point.H * x, m.point.R));
        } else if (bernoulli(rng, m.extended.detection)) {
            const int n = poisson(rng, t.gamma);
            for (int j = 0; j < n; ++j) z.push_back(sample_gaussian(rng, m.extended.H * x, t.extent));
        }
    }
    const int n_clutter = poisson(rng, clutter.rate);
    for (int j = 0; j < n_clutter; ++j) {
        Vector c(clutter.lower.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = uniform(rng, clutter.lower(i), clutter.upper(i));
        z.push_back(std::move(c));
    }
    shuffle(z, rng);
    return z;
}

// ---- Line-delimited JSON records ----

namespace detail {

inline nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
    return rows;
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        require_dims(static_cast<Eigen::Index>(j.at(i).size()) == cols, "matrix_from_json: ragged rows");
        m.row(i) = vector_from_json(j.at(i)).transpose();
    }
    return m;
}

inline std::vector<nlohmann::json> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(nlohmann::json::parse(line));
    return out;
}

}  // namespace detail

/// One record per target: {"type", "birth", "death", "states", "gamma", "extent"}.
inline void write_truth(std::ostream& out, const GroundTruth& truth) {
    for (const auto& t : truth.targets) {
        nlohmann::json j;
        j["type"] = t.extended ? "extended" : "point";
        j["birth"] = t.birth_step;
        j["death"] = t.death_step;
        j["states"] = nlohmann::json::array();
        for (const auto& s : t.states) j["states"].push_back(detail::to_json(s));
        if (t.extended) {
            j["gamma"] = t.gamma;
            j["extent"] = detail::to_json(t.extent);
        }
        out << j.dump() << '\n';
    }
}

[[nodiscard]] inline GroundTruth read_truth(const std::string& path, int steps) {
    GroundTruth truth;
    truth.steps = steps;
    for (const auto& j : detail::read_lines(path)) {
        TruthTarget t;
        t.extended = j.at("type").get<std::string>() == "extended";
        t.birth_step = j.at("birth").get<int>();
        t.death_step = j.at("death").get<int>();
        for (const auto& s : j.at("states")) t.states.push_back(detail::vector_from_json(s));
        if (t.death_step < t.birth_step || static_cast<int>(t.states.size()) != t.death_step - t.birth_step + 1)
            throw std::invalid_argument("read_truth: inconsistent birth/death/states");
        if (t.extended) {
            t.gamma = j.at("gamma").get<double>();
            t.extent = detail::matrix_from_json(j.at("extent"));
            if (!(t.gamma > 0.0) || !is_spd(t.extent)) throw std::invalid_argument("read_truth: invalid extended target");
        }
        truth.targets.push_back(std::move(t));
    }
    return truth;
}

/// One record per step: {"step", "measurements"}.
inline void write_measurements(std::ostream& out, const std::vector<std::vector<Vector>>& scans) {
    for (std::size_t k = 0; k < scans.size(); ++k) {
        nlohmann::json j;
        j["step"] = k + 1;
        j["measurements"] = nlohmann::json::array();
        for (const auto& z : scans[k]) j["measurements"].push_back(detail::to_json(z));
        out << j.dump() << '\n';
    }
}

[[nodiscard]] inline std::vector<std::vector<Vector>> read_measurements(const std::string& path) {
    std::vector<std::vector<Vector>> scans;
    for (const auto& j : detail::read_lines(path)) {
        const auto k = j.at("step").get<std::size_t>();
        if (k != scans.size() + 1) throw std::invalid_argument("read_measurements: steps must be consecutive from 1");
        std::vector<Vector> scan;
        for (const auto& z : j.at("measurements")) scan.push_back(detail::vector_from_json(z));
        scans.push_back(std::move(scan));
    }
    return scans;
}

/// One record per step: {"step", "estimates": [{"type", "state", "extent"?}]}.
inline void write_estimates(std::ostream& out, const std::vector<std::vector<TargetEstimate>>& steps) {
    for (std::size_t k = 0; k < steps.size(); ++k) {
        nlohmann::json j;
        j["step"] = k + 1;
        j["estimates"] = nlohmann::json::array();
        for (const auto& e : steps[k]) {
            nlohmann::json r;
            if (const auto* p = std::get_if<PointEstimate>(&e)) {
                r["type"] = "point";
                r["state"] = detail::to_json(p->state);
            } else {
                const auto& x = std::get<ExtendedEstimate>(e);
                r["type"] = "extended";
                r["state"] = detail::to_json(x.state);
                r["extent"] = detail::to_json(x.extent);
            }
            j["estimates"].push_back(std::move(r));
        }
        out << j.dump() << '\n';
    }
}

[[nodiscard]] inline std::vector<std::vector<TargetEstimate>> read_estimates(const std::string& path) {
    std::vector<std::vector<TargetEstimate>> out;
    for (const auto& j : detail::read_lines(path)) {
        const auto k = j.at("step").get<std::size_t>();
        if (k != out.size() + 1) throw std::invalid_argument("read_estimates: steps must be consecutive from 1");
        std::vector<TargetEstimate> step;
        for (const auto& r : j.at("estimates")) {
            if (r.at("type").get<std::string>() == "point")
                step.push_back(PointEstimate{detail::vector_from_json(r.at("state"))});
            else
                step.push_back(ExtendedEstimate{detail::vector_from_json(r.at("state")),
                                                detail::matrix_from_json(r.at("extent"))});
        }
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace pmbm
