#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "varibad/belief.hpp"

using namespace varibad;

namespace {

EnvConfig corridor3() {
    EnvConfig cfg;
    cfg.width = 3;
    cfg.height = 1;
    cfg.start = {0, 0};
    cfg.episode_len = 3;
    cfg.meta_horizon = 3;
    cfg.excluded_cells = {{0, 0}};
    return cfg;
}

// Brute-force posterior: prior(g) * product of indicator consistencies.
GoalBelief brute_force_posterior(const EnvConfig& cfg,
                                 const std::vector<std::pair<GridPos, double>>& observations) {
    GoalBelief out;
    out.probs.assign(cfg.num_cells(), 0.0);
    auto cands = candidate_goals(cfg);
    double total = 0.0;
    for (const GridPos& g : cands) {
        double w = 1.0;
        for (const auto& [cell, r] : observations) {
            bool is_goal_obs = r == cfg.goal_reward;
            bool consistent = is_goal_obs ? (cell == g) : (cell != g);
            if (!consistent) w = 0.0;
        }
        out.probs[cfg.cell_index(g)] = w;
        total += w;
    }
    if (total > 0.0)
        for (double& p : out.probs) p /= total;
    return out;
}

}  // namespace

TEST_CASE("prior belief") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    GoalBelief b = prior_belief(cfg);
    CHECK(b.valid());
    for (const GridPos& g : candidate_goals(cfg))
        CHECK(b.probs[cfg.cell_index(g)] == doctest::Approx(1.0 / 21.0));
    CHECK(b.probs[cfg.cell_index({0, 0})] == 0.0);
    CHECK(b.probs[cfg.cell_index({1, 1})] == 0.0);

    GoalBelief c = prior_belief(corridor3());
    CHECK(c.probs == std::vector<double>{0.0, 0.5, 0.5});
}

TEST_CASE("bayes update rules") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    GoalBelief b = prior_belief(cfg);

    // negative evidence removes and renormalises
    GoalBelief b1 = bayes_update(b, {2, 2}, cfg.step_penalty, cfg);
    CHECK(b1.valid());
    CHECK(b1.probs[cfg.cell_index({2, 2})] == 0.0);
    CHECK(b1.probs[cfg.cell_index({3, 3})] == doctest::Approx(1.0 / 20.0));

    // positive evidence collapses to a delta
    GoalBelief b2 = bayes_update(b1, {4, 4}, cfg.goal_reward, cfg);
    CHECK(b2.valid());
    CHECK(b2.probs[cfg.cell_index({4, 4})] == doctest::Approx(1.0));

    // zero-mass evidence leaves the belief unchanged
    GoalBelief b3 = bayes_update(b, {0, 0}, cfg.step_penalty, cfg);
    CHECK(b3.probs == b.probs);

    // impossible observation
    CHECK_THROWS_AS(bayes_update(b1, {2, 2}, cfg.goal_reward, cfg), std::domain_error);
}

TEST_CASE("three-candidate example") {
    EnvConfig cfg = corridor3();
    cfg.width = 4;
    cfg.meta_horizon = 3;
    cfg.excluded_cells = {{0, 0}};
    GoalBelief b = prior_belief(cfg);  // uniform over {1,2,3}
    GoalBelief u = bayes_update(b, {1, 0}, cfg.step_penalty, cfg);
    CHECK(u.probs[cfg.cell_index({2, 0})] == doctest::Approx(0.5));
    CHECK(u.probs[cfg.cell_index({3, 0})] == doctest::Approx(0.5));
}

TEST_CASE("posterior expected reward") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    GoalBelief b = prior_belief(cfg);
    CHECK(posterior_expected_reward(b, {2, 2}, cfg) ==
          doctest::Approx((1.0 / 21.0) * 1.0 + (20.0 / 21.0) * -0.1));
    CHECK(posterior_expected_reward(b, {0, 0}, cfg) == doctest::Approx(-0.1));
    GoalBelief d = bayes_update(b, {3, 3}, cfg.goal_reward, cfg);
    CHECK(posterior_expected_reward(d, {3, 3}, cfg) == doctest::Approx(1.0));
}

TEST_CASE("entropy") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    GoalBelief b = prior_belief(cfg);
    CHECK(belief_entropy(b) == doctest::Approx(std::log(21.0)));
    CHECK(belief_entropy(prior_belief(corridor3())) == doctest::Approx(std::log(2.0)));
    GoalBelief d = bayes_update(b, {2, 3}, cfg.goal_reward, cfg);
    CHECK(belief_entropy(d) == doctest::Approx(0.0));
}

TEST_CASE("order independence of negative updates") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    std::vector<GridPos> visits = {{2, 2}, {3, 0}, {0, 4}, {4, 4}, {2, 3}};
    std::mt19937_64 rng(5);
    GoalBelief ref = prior_belief(cfg);
    for (const GridPos& v : visits) ref = bayes_update(ref, v, cfg.step_penalty, cfg);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(visits.begin(), visits.end(), rng);
        GoalBelief b = prior_belief(cfg);
        for (const GridPos& v : visits) b = bayes_update(b, v, cfg.step_penalty, cfg);
        for (int i = 0; i < cfg.num_cells(); ++i) CHECK(b.probs[i] == doctest::Approx(ref.probs[i]));
    }
}

TEST_CASE("brute-force equivalence on random trajectories") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> ad(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        Task task = sample_task(rng, cfg);
        GoalBelief folded = prior_belief(cfg);
        std::vector<std::pair<GridPos, double>> obs;
        GridPos pos = cfg.start;
        for (int t = 0; t < cfg.meta_horizon; ++t) {
            StepResult res = step(pos, static_cast<Action>(ad(rng)), task, t, cfg);
            folded = bayes_update(folded, res.next_pos, res.reward, cfg);
            obs.emplace_back(res.next_pos, res.reward);
            pos = res.episode_reset ? cfg.start : res.next_pos;
        }
        GoalBelief brute = brute_force_posterior(cfg, obs);
        for (int i = 0; i < cfg.num_cells(); ++i)
            CHECK(std::fabs(folded.probs[i] - brute.probs[i]) < 1e-12);
    }
}

TEST_CASE("belief json is row-major array") {
    EnvConfig cfg = corridor3();
    nlohmann::json j = prior_belief(cfg).to_json();
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 3);
    CHECK(j[1].get<double>() == doctest::Approx(0.5));
}
