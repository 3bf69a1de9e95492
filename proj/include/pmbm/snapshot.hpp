#pragma once

#include "pmbm/hybrid_state.hpp"
#include "pmbm/scenario.hpp"

#include "json.hpp"

namespace pmbm {

// JSON snapshot of a PMBM density. Field names follow the C++ members.
// Absent branches are omitted; non-finite log weights are written as null.

namespace detail {

inline nlohmann::json to_json(const GaussianDensity& g) { return {{"mean", to_json(g.mean)}, {"cov", to_json(g.cov)}}; }

inline nlohmann::json to_json(const GGIWParams& g) {
    return {{"alpha", g.alpha}, {"beta", g.beta},         {"mean", to_json(g.mean)},
            {"cov", to_json(g.cov)}, {"dof", g.dof}, {"scale", to_json(g.scale)}};
}

inline GaussianDensity gaussian_from_json(const nlohmann::json& j) {
    return {vector_from_json(j.at("mean")), matrix_from_json(j.at("cov"))};
}

inline GGIWParams ggiw_from_json(const nlohmann::json& j) {
    return {j.at("alpha").get<double>(), j.at("beta").get<double>(), vector_from_json(j.at("mean")),
            matrix_from_json(j.at("cov")),  j.at("dof").get<double>(),  matrix_from_json(j.at("scale"))};
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const PMBMDensity& d) {
    using detail::to_json;
    nlohmann::json j;
    j["step"] = d.step;
    j["next_track_id"] = d.next_track_id;
    j["ppp"]["point_components"] = nlohmann::json::array();
    for (const auto& c : d.ppp.point_components)
        j["ppp"]["point_components"].push_back({{"weight", c.weight}, {"density", to_json(c.density)}});
    j["ppp"]["extended_components"] = nlohmann::json::array();
    for (const auto& c : d.ppp.extended_components)
        j["ppp"]["extended_components"].push_back({{"weight", c.weight}, {"density", to_json(c.density)}});
    j["tracks"] = nlohmann::json::array();
    for (const auto& t : d.tracks) {
        nlohmann::json jt{{"id", t.id}, {"hypotheses", nlohmann::json::array()}};
        for (const auto& h : t.hypotheses) {
            nlohmann::json jh;
            jh["log_weight"] = std::isfinite(h.log_weight) ? nlohmann::json(h.log_weight) : nlohmann::json(nullptr);
            jh["existence"] = h.existence;
            jh["density"]["point_prob"] = h.density.point_prob;
            if (h.density.point) jh["density"]["point"] = to_json(*h.density.point);
            if (h.density.extended) jh["density"]["extended"] = to_json(*h.density.extended);
            jh["assoc_history"] = nlohmann::json::array();
            for (const auto& m : h.assoc_history) jh["assoc_history"].push_back({m.step, m.index});
            jt["hypotheses"].push_back(std::move(jh));
        }
        j["tracks"].push_back(std::move(jt));
    }
    j["globals"] = nlohmann::json::array();
    for (const auto& g : d.globals) j["globals"].push_back({{"weight", g.weight}, {"choice", g.choice}});
    return j;
}

[[nodiscard]] inline PMBMDensity density_from_json(const nlohmann::json& j) {
    PMBMDensity d;
    d.step = j.at("step").get<std::int64_t>();
    d.next_track_id = j.at("next_track_id").get<std::int64_t>();
    for (const auto& c : j.at("ppp").at("point_components"))
        d.ppp.point_components.push_back({c.at("weight").get<double>(), detail::gaussian_from_json(c.at("density"))});
    for (const auto& c : j.at("ppp").at("extended_components"))
        d.ppp.extended_components.push_back({c.at("weight").get<double>(), detail::ggiw_from_json(c.at("density"))});
    for (const auto& jt : j.at("tracks")) {
        Track t{jt.at("id").get<std::int64_t>(), {}};
        for (const auto& jh : jt.at("hypotheses")) {
            LocalHypothesis h;
            h.log_weight = jh.at("log_weight").is_null() ? kNegInf : jh.at("log_weight").get<double>();
            h.existence = jh.at("existence").get<double>();
            const auto& f = jh.at("density");
            h.density.point_prob = f.at("point_prob").get<double>();
            if (f.contains("point")) h.density.point = detail::gaussian_from_json(f.at("point"));
            if (f.contains("extended")) h.density.extended = detail::ggiw_from_json(f.at("extended"));
            for (const auto& m : jh.at("assoc_history"))
                h.assoc_history.push_back({m.at(0).get<std::int64_t>(), m.at(1).get<int>()});
            t.hypotheses.push_back(std::move(h));
        }
        d.tracks.push_back(std::move(t));
    }
    for (const auto& g : j.at("globals"))
        d.globals.push_back({g.at("weight").get<double>(), g.at("choice").get<std::vector<int>>()});
    return d;
}

}  // namespace pmbm
