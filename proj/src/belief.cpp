#include "varibad/belief.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace varibad {

bool GoalBelief::valid() const {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= 1e-12;
}

nlohmann::json GoalBelief::to_json() const { return nlohmann::json(probs); }

GoalBelief prior_belief(const EnvConfig& cfg) {
    std::vector<GridPos> cands = candidate_goals(cfg);
    GoalBelief b;
    b.probs.assign(cfg.num_cells(), 0.0);
    double p = 1.0 / static_cast<double>(cands.size());
    for (const GridPos& c : cands) b.probs[cfg.cell_index(c)] = p;
    return b;
}

GoalBelief bayes_update(const GoalBelief& belief, GridPos visited, double observed_reward,
                        const EnvConfig& cfg) {
    int idx = cfg.cell_index(visited);
    GoalBelief out = belief;
    if (observed_reward == cfg.goal_reward) {
        if (belief.probs[idx] <= 0.0)
            throw std::domain_error("bayes_update: goal reward observed at a zero-probability cell");
        std::fill(out.probs.begin(), out.probs.end(), 0.0);
        out.probs[idx] = 1.0;
        return out;
    }
    if (belief.probs[idx] <= 0.0) return out;  // zero-mass evidence, unchanged
    out.probs[idx] = 0.0;
    double sum = 0.0;
    for (double p : out.probs) sum += p;
    if (sum <= 0.0) throw std::domain_error("bayes_update: belief support exhausted");
    for (double& p : out.probs) p /= sum;
    return out;
}

double posterior_expected_reward(const GoalBelief& belief, GridPos next_state, const EnvConfig& cfg) {
    double p = belief.probs[cfg.cell_index(next_state)];
    return p * cfg.goal_reward + (1.0 - p) * cfg.step_penalty;
}

double belief_entropy(const GoalBelief& belief) {
    double h = 0.0;
    for (double p : belief.probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace varibad
