#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "varibad/grid_env.hpp"

namespace varibad {

// Exact posterior over the goal cell. Immutable update style: operations
// return new beliefs.
struct GoalBelief {
    std::vector<double> probs;  // one entry per cell, row-major

    // Invariants: nonnegative, sums to 1 within 1e-12.
    bool valid() const;

    nlohmann::json to_json() const;  // row-major array, for heatmap plots
};

GoalBelief prior_belief(const EnvConfig& cfg);

// Bayes rule for a single (visited cell, observed reward) observation.
// +goal_reward collapses the belief to a delta at the visited cell;
// step_penalty zeroes the visited cell and renormalises. Observing
// goal_reward at a zero-probability cell throws std::domain_error.
GoalBelief bayes_update(const GoalBelief& belief, GridPos visited, double observed_reward,
                        const EnvConfig& cfg);

// Eq-2 style expected reward of landing on next_state under the belief.
double posterior_expected_reward(const GoalBelief& belief, GridPos next_state, const EnvConfig& cfg);

// Shannon entropy in nats, 0*log0 = 0.
double belief_entropy(const GoalBelief& belief);

}  // namespace varibad
