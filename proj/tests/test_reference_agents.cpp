#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <optional>
#include <set>

#include "varibad/reference_agents.hpp"

using namespace varibad;

namespace {

// Independent exhaustive expectimax: plain sets, no memoisation, no pruning,
// no analytic continuation. Exponential; only for tiny instances.
double bf_value(const EnvConfig& cfg, GridPos pos, const std::set<GridPos>& remaining,
                std::optional<GridPos> found, int t, int horizon) {
    if (t >= horizon) return 0.0;
    bool reset = ((t + 1) % cfg.episode_len == 0);
    double best = -1e18;
    for (Action a : kActionOrder) {
        GridPos pos2 = move(pos, a, cfg);
        GridPos next = reset ? cfg.start : pos2;
        double v;
        if (found) {
            double r = (pos2 == *found) ? cfg.goal_reward : cfg.step_penalty;
            v = r + bf_value(cfg, next, remaining, found, t + 1, horizon);
        } else if (remaining.count(pos2)) {
            double k = static_cast<double>(remaining.size());
            v = (1.0 / k) *
                (cfg.goal_reward + bf_value(cfg, next, {pos2}, pos2, t + 1, horizon));
            if (remaining.size() > 1) {
                std::set<GridPos> rem2 = remaining;
                rem2.erase(pos2);
                v += ((k - 1.0) / k) *
                     (cfg.step_penalty + bf_value(cfg, next, rem2, std::nullopt, t + 1, horizon));
            }
        } else {
            v = cfg.step_penalty + bf_value(cfg, next, remaining, std::nullopt, t + 1, horizon);
        }
        best = std::max(best, v);
    }
    return best;
}

EnvConfig corridor(int len, int episode_len, int meta_horizon) {
    EnvConfig cfg;
    cfg.width = len;
    cfg.height = 1;
    cfg.start = {0, 0};
    cfg.episode_len = episode_len;
    cfg.meta_horizon = meta_horizon;
    cfg.excluded_cells = {{0, 0}};
    return cfg;
}

}  // namespace

TEST_CASE("oracle action examples") {
    CHECK(oracle_action({2, 2}, {2, 2}) == Action::Stay);
    CHECK(oracle_action({0, 0}, {3, 0}) == Action::Right);
    CHECK(oracle_action({0, 0}, {2, 2}) == Action::Right);  // equal gaps: horizontal first
    CHECK(oracle_action({0, 0}, {1, 3}) == Action::Up);     // larger vertical gap first
    CHECK(oracle_action({3, 3}, {1, 3}) == Action::Left);
    CHECK(oracle_action({3, 3}, {3, 1}) == Action::Down);
}

TEST_CASE("oracle per-episode closed form") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    auto rows = evaluate_oracle_exact(cfg, 6);
    REQUIRE(rows.size() == 6);
    // mean over goals of: (d-1) penalties, +1 landing, stays for the rest
    double expected = 0.0;
    auto cands = candidate_goals(cfg);
    for (const GridPos& g : cands) {
        int d = manhattan(g, cfg.start);
        expected += cfg.goal_reward * (cfg.episode_len - d + 1) + cfg.step_penalty * (d - 1);
    }
    expected /= static_cast<double>(cands.size());
    for (const auto& r : rows) {
        CHECK(r.mean_return == doctest::Approx(expected));
        CHECK(r.mean_return == doctest::Approx(11.0714285714).epsilon(1e-9));
    }
}

TEST_CASE("stay-put agent scores -1.5 per episode") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    cfg.meta_horizon = 90;
    for (const GridPos& g : candidate_goals(cfg)) {
        Trajectory traj = rollout(cfg, Task{g}, [](GridPos, int) { return Action::Stay; });
        double ep = 0.0;
        for (int t = 0; t < 15; ++t) ep += traj.records[t].reward;
        CHECK(ep == doctest::Approx(-1.5));
    }
}

TEST_CASE("planner equals brute force on small instances") {
    struct Inst {
        EnvConfig cfg;
        const char* name;
    };
    std::vector<Inst> instances;
    instances.push_back({corridor(3, 3, 3), "1x3 corridor H=3"});
    instances.push_back({corridor(3, 3, 6), "1x3 corridor two episodes"});
    instances.push_back({corridor(4, 4, 8), "1x4 corridor H=8"});
    instances.push_back({corridor(5, 4, 8), "1x5 corridor 4 candidates"});
    EnvConfig grid22;
    grid22.width = 2;
    grid22.height = 2;
    grid22.start = {0, 0};
    grid22.episode_len = 4;
    grid22.meta_horizon = 8;
    grid22.excluded_cells = {{0, 0}};
    instances.push_back({grid22, "2x2 grid"});
    EnvConfig grid32 = grid22;
    grid32.width = 3;
    grid32.excluded_cells = {{0, 0}, {1, 0}};
    instances.push_back({grid32, "3x2 grid 4 candidates"});

    for (const auto& inst : instances) {
        INFO(inst.name);
        auto cands = candidate_goals(inst.cfg);
        REQUIRE(cands.size() <= 4);
        BayesOptimalPlanner planner(inst.cfg, inst.cfg.meta_horizon);
        double exact = planner.root_value();
        std::set<GridPos> remaining(cands.begin(), cands.end());
        double brute =
            bf_value(inst.cfg, inst.cfg.start, remaining, std::nullopt, 0, inst.cfg.meta_horizon);
        CHECK(exact == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("corridor planner from intermediate states matches brute force") {
    EnvConfig cfg = corridor(4, 4, 8);
    BayesOptimalPlanner planner(cfg, cfg.meta_horizon);
    auto cands = candidate_goals(cfg);
    // mid-trajectory state: first candidate ruled out, t = 2
    std::set<GridPos> rem_set(cands.begin() + 1, cands.end());
    uint32_t rem = 0;
    for (size_t i = 1; i < cands.size(); ++i) rem |= (1u << i);
    double exact = planner.plan({1, 0}, rem, 2).value;
    double brute = bf_value(cfg, {1, 0}, rem_set, std::nullopt, 2, cfg.meta_horizon);
    CHECK(exact == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("collapsed belief matches oracle per-episode returns") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    cfg.meta_horizon = 30;
    BayesOptimalPlanner planner(cfg, cfg.meta_horizon);
    for (const GridPos& g : {GridPos{4, 4}, GridPos{2, 3}, GridPos{3, 0}}) {
        uint32_t rem = 0;
        auto cands = planner.candidates();
        for (size_t i = 0; i < cands.size(); ++i)
            if (cands[i] == g) rem = 1u << i;
        REQUIRE(rem != 0);
        // fresh episode start with the goal known: value equals the oracle walk
        double v = planner.plan(cfg.start, rem, 15).value;
        int d = manhattan(g, cfg.start);
        double oracle_ep = cfg.goal_reward * (cfg.episode_len - d + 1) + cfg.step_penalty * (d - 1);
        CHECK(v == doctest::Approx(oracle_ep).epsilon(1e-12));
    }
}

TEST_CASE("memoisation purity") {
    EnvConfig cfg = corridor(5, 4, 8);
    BayesOptimalPlanner planner(cfg, cfg.meta_horizon);
    auto r1 = planner.plan(cfg.start, planner.full_remaining(), 0);
    CHECK(planner.cache_size() > 0);
    planner.clear_cache();
    auto r2 = planner.plan(cfg.start, planner.full_remaining(), 0);
    CHECK(r1.value == r2.value);
    CHECK(r1.action == r2.action);
}

TEST_CASE("planner per-episode values nondecreasing (small env)") {
    EnvConfig cfg = corridor(5, 4, 12);
    BayesOptimalPlanner planner(cfg, cfg.meta_horizon);
    auto ep = planner.per_episode_values();
    REQUIRE(ep.size() == 3);
    for (size_t i = 1; i < ep.size(); ++i) CHECK(ep[i] >= ep[i - 1] - 1e-12);
}

TEST_CASE("posterior sampling determinism and dominance") {
    EnvConfig cfg = EnvConfig::default_gridworld();

    // same seed, same sampled-goal sequence
    PosteriorSamplingAgent a(cfg, 42), b(cfg, 42);
    GridPos pa = cfg.start, pb = cfg.start;
    Task task{{4, 2}};
    for (int t = 0; t < 30; ++t) {
        Action aa = a.act(pa), ab = b.act(pb);
        CHECK(aa == ab);
        StepResult ra = step(pa, aa, task, t % 15, cfg);
        a.observe(ra.next_pos, ra.reward);
        b.observe(ra.next_pos, ra.reward);
        pa = pb = ra.episode_reset ? cfg.start : ra.next_pos;
    }

    // collapsed belief: walks to the confirmed goal and stays
    PosteriorSamplingAgent d(cfg, 7);
    d.observe({2, 2}, cfg.goal_reward);
    CHECK(d.act({2, 1}) == Action::Up);
    CHECK(d.act({2, 2}) == Action::Stay);

    // dominance: bayes-optimal >= posterior sampling - 3 SE per episode
    auto bo = evaluate_bayes_optimal_exact(cfg, 3);
    auto ps = evaluate_posterior_sampling(cfg, 3, 20, 1234);
    for (size_t e = 0; e < bo.size(); ++e)
        CHECK(bo[e].mean_return >= ps[e].mean_return - 3.0 * ps[e].stderr_);
}

TEST_CASE("remaining_from_belief round trip") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    BayesOptimalPlanner planner(cfg, 15);
    GoalBelief b = prior_belief(cfg);
    CHECK(planner.remaining_from_belief(b) == planner.full_remaining());
    b = bayes_update(b, {2, 2}, cfg.step_penalty, cfg);
    uint32_t rem = planner.remaining_from_belief(b);
    CHECK(std::popcount(rem) == 20);
    b = bayes_update(b, {3, 3}, cfg.goal_reward, cfg);
    CHECK(std::popcount(planner.remaining_from_belief(b)) == 1);
}
