#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "varibad/belief.hpp"
#include "varibad/grid_env.hpp"

namespace varibad {

// Shortest-path action toward the goal. Tie-break: reduce the axis with the
// larger remaining gap first, horizontal before vertical on equal gaps.
Action oracle_action(GridPos pos, GridPos goal);

int manhattan(GridPos a, GridPos b);

// Hyper-state of the exact BAMDP: position, candidate cells not yet ruled
// out (bitset over planner candidate indices), and the step index.
struct HyperState {
    GridPos pos;
    uint32_t remaining = 0;
    int t = 0;
};

// Exact finite-horizon expectimax over the goal-search BAMDP. Values are
// undiscounted sums of posterior-expected rewards to the horizon. After the
// goal is confirmed, continuation is analytic (stay at the goal; on reset,
// walk back on a shortest path).
class BayesOptimalPlanner {
  public:
    BayesOptimalPlanner(EnvConfig cfg, int horizon);

    struct PlanResult {
        double value;
        Action action;
    };

    // Expectimax value and argmax action (ties broken by canonical action
    // order up, right, down, left, stay). Requires t < horizon.
    PlanResult plan(GridPos pos, uint32_t remaining, int t);
    PlanResult plan(const HyperState& h) { return plan(h.pos, h.remaining, h.t); }

    uint32_t full_remaining() const { return full_remaining_; }
    uint32_t remaining_from_belief(const GoalBelief& belief) const;
    double root_value() { return plan(cfg_.start, full_remaining_, 0).value; }

    // Expected return of the known-goal walk-back policy for actions at
    // times [t, horizon), starting at the given distance from the goal.
    double found_value(int dist_to_goal, int dist_goal_start, int t) const;

    // Exact per-episode expected returns of an optimal policy. For horizons
    // beyond the shortest prefix that surely identifies the goal, later
    // episodes are provably oracle-valued and filled in analytically.
    std::vector<double> per_episode_values();

    // Probability mass of goal hypotheses still unidentified at the horizon
    // under the optimal policy (set by the last per_episode_values call).
    double unfound_mass() const { return unfound_mass_; }

    // Mean over candidates of the oracle's expected single-episode return.
    double oracle_episode_mean() const;

    const std::vector<GridPos>& candidates() const { return candidates_; }
    const EnvConfig& config() const { return cfg_; }
    int horizon() const { return horizon_; }
    void clear_cache() { memo_.clear(); }
    size_t cache_size() const { return memo_.size(); }

  private:
    double upper_bound(int k, int steps_left) const;
    void accumulate_found(GridPos goal, int t, double weight, std::vector<double>& ep) const;
    void walk_optimal(GridPos pos, uint32_t remaining, int t, double weight, std::vector<double>& ep);

    EnvConfig cfg_;
    int horizon_;
    std::vector<GridPos> candidates_;
    std::vector<int> cand_index_of_cell_;  // cell index -> candidate index or -1
    uint32_t full_remaining_;
    std::vector<std::vector<double>> ub_;              // [k][steps_left]
    mutable std::vector<double> found_cache_;          // [dist][dgs][t]
    int max_dist_;
    double unfound_mass_ = 0.0;
    std::unordered_map<uint64_t, std::pair<double, int8_t>> memo_;
};

// Thompson-style baseline: samples a goal hypothesis from the exact
// posterior, walks the shortest path to it, and resamples only when the
// hypothesis is disconfirmed.
class PosteriorSamplingAgent {
  public:
    PosteriorSamplingAgent(const EnvConfig& cfg, uint64_t seed);

    Action act(GridPos pos);
    void observe(GridPos visited, double observed_reward);
    const GoalBelief& belief() const { return belief_; }
    std::optional<GridPos> sampled_goal() const { return sampled_; }

  private:
    GridPos draw_goal();

    EnvConfig cfg_;
    GoalBelief belief_;
    std::optional<GridPos> sampled_;
    std::mt19937_64 rng_;
};

// Per-episode evaluation results; stderr is 0 for exact evaluations.
struct EpisodeRow {
    std::string agent;
    int episode_index;  // 1-based
    double mean_return;
    double stderr_;
    int n_samples;
};

std::vector<EpisodeRow> evaluate_oracle_exact(const EnvConfig& cfg, int n_episodes);
std::vector<EpisodeRow> evaluate_bayes_optimal_exact(const EnvConfig& cfg, int n_episodes);
std::vector<EpisodeRow> evaluate_posterior_sampling(const EnvConfig& cfg, int n_episodes, int n_seeds,
                                                    uint64_t base_seed);

void write_episode_csv(const std::string& path, const std::vector<EpisodeRow>& rows);

}  // namespace varibad
