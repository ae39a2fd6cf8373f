#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace varibad {

struct GridPos {
    int x = 0;
    int y = 0;
    auto operator<=>(const GridPos&) const = default;
};

enum class Action : int { Up = 0, Right = 1, Down = 2, Left = 3, Stay = 4 };
inline constexpr int kNumActions = 5;
inline constexpr Action kActionOrder[kNumActions] = {Action::Up, Action::Right, Action::Down,
                                                     Action::Left, Action::Stay};

struct EnvConfig {
    int width = 5;
    int height = 5;
    GridPos start{0, 0};
    int episode_len = 15;    // H
    int meta_horizon = 60;   // H+ (training default 4xH; evaluation uses 6xH)
    double step_penalty = -0.1;
    double goal_reward = 1.0;
    double discount = 0.95;
    std::set<GridPos> excluded_cells;  // cells where the goal may not be

    int num_cells() const { return width * height; }
    int cell_index(GridPos p) const { return p.y * width + p.x; }
    GridPos cell_pos(int idx) const { return GridPos{idx % width, idx / width}; }
    bool in_bounds(GridPos p) const { return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height; }

    // Throws std::invalid_argument when invariants are violated.
    void validate() const;

    // 5x5 gridworld with start bottom-left and the Chebyshev<=1 region around
    // the start excluded from the candidate goal set.
    static EnvConfig default_gridworld();

    static EnvConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Task {
    GridPos goal;
};

struct StepRecord {
    GridPos state;
    Action action;
    double reward;
    GridPos next_state;  // landing cell, before any reset teleport
    bool episode_reset;
};

struct StepResult {
    GridPos next_pos;
    double reward;
    bool episode_reset;
};

struct Trajectory {
    GridPos initial_state;
    std::vector<StepRecord> records;

    // Checks the chaining invariant (next_state of k == state of k+1, except
    // across resets where state == start).
    bool chained(const EnvConfig& cfg) const;
};

// All cells not in excluded_cells, in row-major order (y ascending, then x).
std::vector<GridPos> candidate_goals(const EnvConfig& cfg);

Task sample_task(std::mt19937_64& rng, const EnvConfig& cfg);

// Deterministic movement with wall clipping; reward determined by the landing
// cell; reset flag raised when (t+1) is an episode boundary. No termination
// on reaching the goal.
StepResult step(GridPos pos, Action action, const Task& task, int t, const EnvConfig& cfg);

GridPos move(GridPos pos, Action action, const EnvConfig& cfg);

// Rolls a policy callback (pos, t) -> Action for the full meta-horizon,
// applying episode resets, and returns the resulting trajectory.
template <typename Policy>
Trajectory rollout(const EnvConfig& cfg, const Task& task, Policy&& policy) {
    Trajectory traj;
    traj.initial_state = cfg.start;
    GridPos pos = cfg.start;
    for (int t = 0; t < cfg.meta_horizon; ++t) {
        Action a = policy(pos, t);
        StepResult res = step(pos, a, task, t, cfg);
        traj.records.push_back({pos, a, res.reward, res.next_pos, res.episode_reset});
        pos = res.episode_reset ? cfg.start : res.next_pos;
    }
    return traj;
}

}  // namespace varibad
