#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <nlohmann/json.hpp>

#include "varibad/grid_env.hpp"

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

}  // namespace

TEST_CASE("default config candidate set") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    auto cands = candidate_goals(cfg);
    CHECK(cands.size() == 21);
    std::set<GridPos> excluded = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    for (const GridPos& c : cands) CHECK(excluded.count(c) == 0);
    // row-major order
    for (size_t i = 1; i < cands.size(); ++i)
        CHECK(cfg.cell_index(cands[i - 1]) < cfg.cell_index(cands[i]));
}

TEST_CASE("excluded start only gives 24 candidates") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    cfg.excluded_cells = {{0, 0}};
    CHECK(candidate_goals(cfg).size() == 24);
}

TEST_CASE("corridor candidates") {
    auto cands = candidate_goals(corridor3());
    REQUIRE(cands.size() == 2);
    CHECK(cands[0] == GridPos{1, 0});
    CHECK(cands[1] == GridPos{2, 0});
}

TEST_CASE("config validation") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    cfg.meta_horizon = 61;  // not a multiple of episode_len
    CHECK_THROWS(cfg.validate());
    cfg = EnvConfig::default_gridworld();
    cfg.excluded_cells.clear();  // start must be excluded
    CHECK_THROWS(cfg.validate());
    cfg = EnvConfig::default_gridworld();
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y) cfg.excluded_cells.insert({x, y});
    CHECK_THROWS(cfg.validate());  // empty candidate set
}

TEST_CASE("sample_task determinism and uniformity") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    std::mt19937_64 a(123), b(123);
    for (int i = 0; i < 50; ++i) CHECK(sample_task(a, cfg).goal == sample_task(b, cfg).goal);

    std::mt19937_64 rng(7);
    std::map<int, int> counts;
    int n = 100000;
    for (int i = 0; i < n; ++i) counts[cfg.cell_index(sample_task(rng, cfg).goal)]++;
    CHECK(counts.size() == 21);
    double p = 1.0 / 21.0;
    double sigma = std::sqrt(n * p * (1 - p));
    for (const auto& [cell, c] : counts) CHECK(std::fabs(c - n * p) < 5.0 * sigma);

    EnvConfig single = corridor3();
    single.excluded_cells = {{0, 0}, {1, 0}};
    for (int i = 0; i < 10; ++i) CHECK(sample_task(rng, single).goal == GridPos{2, 0});
}

TEST_CASE("step semantics") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    Task task{{2, 2}};

    // stay at the goal keeps paying +1
    StepResult r = step({2, 2}, Action::Stay, task, 5, cfg);
    CHECK(r.next_pos == GridPos{2, 2});
    CHECK(r.reward == doctest::Approx(1.0));
    CHECK_FALSE(r.episode_reset);

    // wall clipping
    r = step({0, 0}, Action::Left, task, 0, cfg);
    CHECK(r.next_pos == GridPos{0, 0});
    CHECK(r.reward == doctest::Approx(-0.1));
    r = step({0, 0}, Action::Down, task, 0, cfg);
    CHECK(r.next_pos == GridPos{0, 0});
    r = step({4, 4}, Action::Up, task, 0, cfg);
    CHECK(r.next_pos == GridPos{4, 4});

    // landing on the goal pays +1
    r = step({2, 1}, Action::Up, task, 0, cfg);
    CHECK(r.next_pos == GridPos{2, 2});
    CHECK(r.reward == doctest::Approx(1.0));

    // reset at t = 14, and at every episode boundary
    r = step({3, 3}, Action::Stay, task, 14, cfg);
    CHECK(r.episode_reset);
    r = step({3, 3}, Action::Stay, task, 29, cfg);
    CHECK(r.episode_reset);
    r = step({3, 3}, Action::Stay, task, 13, cfg);
    CHECK_FALSE(r.episode_reset);

    // action order: up, right, down, left, stay
    CHECK(move({2, 2}, Action::Up, cfg) == GridPos{2, 3});
    CHECK(move({2, 2}, Action::Right, cfg) == GridPos{3, 2});
    CHECK(move({2, 2}, Action::Down, cfg) == GridPos{2, 1});
    CHECK(move({2, 2}, Action::Left, cfg) == GridPos{1, 2});
    CHECK(move({2, 2}, Action::Stay, cfg) == GridPos{2, 2});
}

TEST_CASE("episode return bounds") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    cfg.meta_horizon = 15;
    // sitting at the goal the whole episode
    Task task{{2, 2}};
    double total = 0.0;
    GridPos pos{2, 2};
    for (int t = 0; t < 15; ++t) total += step(pos, Action::Stay, task, t, cfg).reward;
    CHECK(total == doctest::Approx(15.0));
    // never at the goal
    total = 0.0;
    pos = {0, 0};
    for (int t = 0; t < 15; ++t) total += step(pos, Action::Stay, task, t, cfg).reward;
    CHECK(total == doctest::Approx(-1.5));
}

TEST_CASE("rollout chaining and replay determinism") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    std::mt19937_64 rng(99);
    Task task = sample_task(rng, cfg);
    std::uniform_int_distribution<int> ad(0, 4);
    Trajectory traj =
        rollout(cfg, task, [&](GridPos, int) { return static_cast<Action>(ad(rng)); });
    REQUIRE(static_cast<int>(traj.records.size()) == cfg.meta_horizon);
    CHECK(traj.chained(cfg));

    // replaying the stored actions reproduces states and rewards exactly
    GridPos pos = traj.initial_state;
    for (int t = 0; t < cfg.meta_horizon; ++t) {
        const StepRecord& rec = traj.records[t];
        CHECK(pos == rec.state);
        StepResult res = step(pos, rec.action, task, t, cfg);
        CHECK(res.next_pos == rec.next_state);
        CHECK(res.reward == rec.reward);
        CHECK(res.episode_reset == rec.episode_reset);
        pos = res.episode_reset ? cfg.start : res.next_pos;
    }

    // reward domain
    for (const auto& rec : traj.records)
        CHECK((rec.reward == cfg.goal_reward || rec.reward == cfg.step_penalty));
}

TEST_CASE("json round trip") {
    EnvConfig cfg = EnvConfig::default_gridworld();
    nlohmann::json j = cfg.to_json();
    EnvConfig back = EnvConfig::from_json(j);
    CHECK(back.width == cfg.width);
    CHECK(back.height == cfg.height);
    CHECK(back.start == cfg.start);
    CHECK(back.episode_len == cfg.episode_len);
    CHECK(back.meta_horizon == cfg.meta_horizon);
    CHECK(back.step_penalty == cfg.step_penalty);
    CHECK(back.goal_reward == cfg.goal_reward);
    CHECK(back.discount == cfg.discount);
    CHECK(back.excluded_cells == cfg.excluded_cells);
}
