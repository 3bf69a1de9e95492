#include "pmbm/pmb.hpp"
#include "pmbm/pmbm_filter.hpp"

#include "../oracles/micro_scenes.hpp"

#include <gtest/gtest.h>

using namespace pmbm;

namespace {

LocalHypothesis hypothesis(double r, double c, pmbm::CounterRng& rng) {
    LocalHypothesis h;
    h.existence = r;
    h.density.point_prob = c;
    if (c > 0.0) h.density.point = oracle::random_gaussian(rng);
    if (c < 1.0) h.density.extended = oracle::random_ggiw(rng);
    return h;
}

/// Random multi-global posterior produced by the update itself.
PMBMDensity random_posterior(CounterRng& rng) {
    for (;;) {
        const oracle::MicroScene s = oracle::random_micro_scene(rng);
        if (!s.prior || s.z.empty()) continue;
        PMBMDensity d = update(oracle::micro_prediction(s), s.z, s.models, s.clutter, oracle::exact_association(),
                               oracle::no_pruning());
        d.ppp.point_components.push_back({0.2, oracle::random_gaussian(rng)});
        return d;
    }
}

}  // namespace

TEST(MarginalWeights, Examples) {
    CounterRng rng(41);
    PMBMDensity d = make_initial_density();
    d.tracks.push_back({0, {hypothesis(0.5, 1.0, rng), hypothesis(0.6, 1.0, rng), hypothesis(0.7, 1.0, rng)}});
    d.tracks.push_back({1, {hypothesis(0.5, 0.0, rng)}});
    d.globals = {{0.6, {1, 0}}, {0.4, {2, 0}}};
    const MarginalWeights w = marginal_weights(d);
    EXPECT_EQ(w[0], (std::vector<double>{0.0, 0.6, 0.4}));
    EXPECT_EQ(w[1], (std::vector<double>{1.0}));

    d.globals = {{1.0, {0, 0}}};
    EXPECT_EQ(marginal_weights(d)[0], (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(PmbProject, AlreadyPmbIsUnchanged) {
    CounterRng rng(42);
    PMBMDensity d = make_initial_density();
    d.tracks.push_back({0, {hypothesis(0.5, 0.3, rng)}});
    d.globals[0].choice = {0};
    const PMBMDensity p = pmb_project(d);
    ASSERT_EQ(p.tracks.size(), 1u);
    const auto& a = d.tracks[0].hypotheses[0];
    const auto& b = p.tracks[0].hypotheses[0];
    EXPECT_EQ(b.existence, a.existence);
    EXPECT_EQ(b.density.point_prob, a.density.point_prob);
    EXPECT_EQ(b.density.point->mean, a.density.point->mean);
    EXPECT_EQ(b.density.extended->scale, a.density.extended->scale);
}

TEST(PmbProject, ZeroExistenceHypothesisContributesNothing) {
    CounterRng rng(43);
    PMBMDensity d = make_initial_density();
    const LocalHypothesis live = hypothesis(1.0, 0.4, rng);
    d.tracks.push_back({0, {live, make_nonexistent_hypothesis()}});
    d.globals = {{0.5, {0}}, {0.5, {1}}};
    const PMBMDensity p = pmb_project(d);
    ASSERT_EQ(p.tracks.size(), 1u);
    const auto& h = p.tracks[0].hypotheses[0];
    EXPECT_EQ(h.existence, 0.5);
    EXPECT_EQ(h.density.point_prob, 0.4);
    EXPECT_EQ(h.density.point->mean, live.density.point->mean);
    EXPECT_EQ(h.density.extended->dof, live.density.extended->dof);

    // A track that exists under no hypothesis is dropped.
    PMBMDensity e = make_initial_density();
    e.tracks.push_back({0, {make_nonexistent_hypothesis()}});
    e.globals[0].choice = {0};
    EXPECT_TRUE(pmb_project(e).tracks.empty());
}

TEST(PmbProject, ExtendedOnlyHypothesesStayExtended) {
    CounterRng rng(44);
    PMBMDensity d = make_initial_density();
    d.tracks.push_back({0, {hypothesis(0.5, 0.0, rng), hypothesis(0.9, 0.0, rng)}});
    d.globals = {{0.3, {0}}, {0.7, {1}}};
    const PMBMDensity p = pmb_project(d);
    const auto& h = p.tracks[0].hypotheses[0];
    EXPECT_EQ(h.density.point_prob, 0.0);
    EXPECT_FALSE(h.density.point.has_value());
    ASSERT_TRUE(h.density.extended.has_value());
    EXPECT_NEAR(h.existence, 0.3 * 0.5 + 0.7 * 0.9, 1e-15);
}

TEST(PmbProject, PreservesPppExpectedCountAndMoments) {
    CounterRng rng(45);
    for (int t = 0; t < 100; ++t) {
        const PMBMDensity d = random_posterior(rng);
        const PMBMDensity p = pmb_project(d);
        const MarginalWeights w = marginal_weights(d);

        ASSERT_EQ(p.globals.size(), 1u);
        EXPECT_EQ(p.globals[0].weight, 1.0);
        ASSERT_EQ(p.ppp.point_components.size(), d.ppp.point_components.size());
        for (std::size_t i = 0; i < d.ppp.point_components.size(); ++i) {
            EXPECT_EQ(p.ppp.point_components[i].weight, d.ppp.point_components[i].weight);
            EXPECT_EQ(p.ppp.point_components[i].density.mean, d.ppp.point_components[i].density.mean);
            EXPECT_EQ(p.ppp.point_components[i].density.cov, d.ppp.point_components[i].density.cov);
        }
        ASSERT_EQ(p.ppp.extended_components.size(), d.ppp.extended_components.size());
        for (std::size_t i = 0; i < d.ppp.extended_components.size(); ++i)
            EXPECT_EQ(p.ppp.extended_components[i].weight, d.ppp.extended_components[i].weight);

        std::size_t out = 0;
        for (std::size_t i = 0; i < d.tracks.size(); ++i) {
            const auto& hyps = d.tracks[i].hypotheses;
            double r = 0.0;
            double pm = 0.0;
            double lo = 1.0;
            double hi = 0.0;
            Vector mean = Vector::Zero(4);
            for (std::size_t a = 0; a < hyps.size(); ++a) {
                const double wr = w[i][a] * hyps[a].existence;
                r += wr;
                if (w[i][a] > 0.0) {
                    lo = std::min(lo, hyps[a].existence);
                    hi = std::max(hi, hyps[a].existence);
                }
                if (wr > 0.0 && hyps[a].density.point_prob > 0.0) {
                    pm += wr * hyps[a].density.point_prob;
                    mean += wr * hyps[a].density.point_prob * hyps[a].density.point->mean;
                }
            }
            if (r == 0.0) continue;
            ASSERT_LT(out, p.tracks.size());
            const auto& h = p.tracks[out++].hypotheses[0];
            EXPECT_EQ(h.existence, std::min(r, 1.0));
            EXPECT_GE(h.existence, lo - 1e-15);
            EXPECT_LE(h.existence, hi + 1e-15);
            EXPECT_NEAR(h.density.point_prob, pm / r, 1e-12);
            if (pm > 0.0) {
                ASSERT_TRUE(h.density.point.has_value());
                EXPECT_LE((h.density.point->mean - mean / pm).norm(), 1e-12 * (1.0 + mean.norm() / pm));
            }
        }
        EXPECT_EQ(out, p.tracks.size());
        const auto bad = check_invariants(p, {1e-9, false, false});
        EXPECT_TRUE(bad.empty()) << bad.front();
    }
}
