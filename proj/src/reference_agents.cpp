#include "varibad/reference_agents.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <stdexcept>

namespace varibad {

int manhattan(GridPos a, GridPos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

Action oracle_action(GridPos pos, GridPos goal) {
    if (pos == goal) return Action::Stay;
    int dx = goal.x - pos.x;
    int dy = goal.y - pos.y;
    if (std::abs(dx) >= std::abs(dy) && dx != 0) return dx > 0 ? Action::Right : Action::Left;
    return dy > 0 ? Action::Up : Action::Down;
}

// ---- BayesOptimalPlanner --------------------------------------------------

BayesOptimalPlanner::BayesOptimalPlanner(EnvConfig cfg, int horizon) : cfg_(std::move(cfg)), horizon_(horizon) {
    cfg_.validate();
    if (horizon_ <= 0 || horizon_ % cfg_.episode_len != 0)
        throw std::invalid_argument("BayesOptimalPlanner: horizon must be a positive multiple of episode_len");
    candidates_ = candidate_goals(cfg_);
    if (candidates_.size() > 32)
        throw std::invalid_argument("BayesOptimalPlanner: more than 32 candidates unsupported");
    cand_index_of_cell_.assign(cfg_.num_cells(), -1);
    for (size_t i = 0; i < candidates_.size(); ++i)
        cand_index_of_cell_[cfg_.cell_index(candidates_[i])] = static_cast<int>(i);
    full_remaining_ = candidates_.size() == 32 ? 0xFFFFFFFFu : ((1u << candidates_.size()) - 1u);

    // Geometry-free optimistic value table: best case probes a fresh
    // candidate every step and a found goal pays out every remaining step.
    int nc = static_cast<int>(candidates_.size());
    ub_.assign(nc + 1, std::vector<double>(horizon_ + 1, 0.0));
    for (int T = 1; T <= horizon_; ++T) {
        ub_[0][T] = cfg_.step_penalty * T;
        for (int k = 1; k <= nc; ++k) {
            double p = 1.0 / k;
            double probe = p * (cfg_.goal_reward + (T - 1) * cfg_.goal_reward);
            if (k > 1) probe += (1.0 - p) * (cfg_.step_penalty + ub_[k - 1][T - 1]);
            double noprobe = cfg_.step_penalty + ub_[k][T - 1];
            ub_[k][T] = std::max(probe, noprobe);
        }
    }

    max_dist_ = (cfg_.width - 1) + (cfg_.height - 1);
    found_cache_.assign(static_cast<size_t>(max_dist_ + 1) * (max_dist_ + 1) * (horizon_ + 1),
                        std::numeric_limits<double>::quiet_NaN());
}

uint32_t BayesOptimalPlanner::remaining_from_belief(const GoalBelief& belief) const {
    uint32_t rem = 0;
    for (size_t i = 0; i < candidates_.size(); ++i)
        if (belief.probs[cfg_.cell_index(candidates_[i])] > 0.0) rem |= (1u << i);
    return rem;
}

double BayesOptimalPlanner::found_value(int dist_to_goal, int dist_goal_start, int t) const {
    if (t >= horizon_) return 0.0;
    size_t key = (static_cast<size_t>(dist_to_goal) * (max_dist_ + 1) + dist_goal_start) *
                     (horizon_ + 1) +
                 t;
    if (!std::isnan(found_cache_[key])) return found_cache_[key];
    double acc = 0.0;
    int d = dist_to_goal;
    for (int s = t; s < horizon_; ++s) {
        if (d > 0) {
            --d;
            acc += (d == 0) ? cfg_.goal_reward : cfg_.step_penalty;
        } else {
            acc += cfg_.goal_reward;  // stay at goal
        }
        if ((s + 1) % cfg_.episode_len == 0 && (s + 1) < horizon_) d = dist_goal_start;
    }
    found_cache_[key] = acc;
    return acc;
}

double BayesOptimalPlanner::upper_bound(int k, int steps_left) const { return ub_[k][steps_left]; }

BayesOptimalPlanner::PlanResult BayesOptimalPlanner::plan(GridPos pos, uint32_t remaining, int t) {
    if (t >= horizon_) throw std::domain_error("plan: horizon exhausted, no action");
    if (remaining == 0) throw std::invalid_argument("plan: empty remaining set");

    uint64_t key = static_cast<uint64_t>(remaining) |
                   (static_cast<uint64_t>(cfg_.cell_index(pos)) << 32) |
                   (static_cast<uint64_t>(t) << 42);
    auto it = memo_.find(key);
    if (it != memo_.end()) return {it->second.first, static_cast<Action>(it->second.second)};

    int k = std::popcount(remaining);
    int rest = horizon_ - t - 1;  // steps after this action
    bool reset = ((t + 1) % cfg_.episode_len == 0) && (t + 1) < horizon_;

    struct Child {
        GridPos pos2;
        double p = 0.0;
        double imm = 0.0;
        double fc = 0.0;  // exact found continuation
        uint32_t rem2 = 0;
        double ub = 0.0;
    };
    Child ch[kNumActions];
    for (int ai = 0; ai < kNumActions; ++ai) {
        Child& c = ch[ai];
        c.pos2 = move(pos, kActionOrder[ai], cfg_);
        int ci = cand_index_of_cell_[cfg_.cell_index(c.pos2)];
        bool probe = ci >= 0 && ((remaining >> ci) & 1u);
        c.p = probe ? 1.0 / k : 0.0;
        c.imm = c.p * cfg_.goal_reward + (1.0 - c.p) * cfg_.step_penalty;
        c.rem2 = probe ? (remaining & ~(1u << ci)) : remaining;
        if (probe && rest > 0) {
            int dgs = manhattan(c.pos2, cfg_.start);
            c.fc = found_value(reset ? dgs : 0, dgs, t + 1);
        }
        c.ub = c.imm;
        if (rest > 0) {
            c.ub += c.p * c.fc;
            if (c.rem2 != 0) c.ub += (1.0 - c.p) * upper_bound(std::popcount(c.rem2), rest);
        }
    }

    int order[kNumActions] = {0, 1, 2, 3, 4};
    std::stable_sort(order, order + kNumActions, [&](int a, int b) { return ch[a].ub > ch[b].ub; });

    double vals[kNumActions];
    bool evaluated[kNumActions] = {false, false, false, false, false};
    double best = -std::numeric_limits<double>::infinity();
    for (int oi = 0; oi < kNumActions; ++oi) {
        int ai = order[oi];
        const Child& c = ch[ai];
        if (c.ub < best - 1e-9) continue;  // admissible bound: cannot win
        double v = c.imm;
        if (rest > 0) {
            v += c.p * c.fc;
            if (c.rem2 != 0 && c.p < 1.0) {
                GridPos next = reset ? cfg_.start : c.pos2;
                v += (1.0 - c.p) * plan(next, c.rem2, t + 1).value;
            }
        }
        vals[ai] = v;
        evaluated[ai] = true;
        best = std::max(best, v);
    }

    int chosen = -1;
    for (int ai = 0; ai < kNumActions; ++ai)
        if (evaluated[ai] && vals[ai] >= best - 1e-12) {
            chosen = ai;
            break;
        }

    memo_.emplace(key, std::make_pair(best, static_cast<int8_t>(chosen)));
    return {best, static_cast<Action>(chosen)};
}

void BayesOptimalPlanner::accumulate_found(GridPos goal, int t, double weight, std::vector<double>& ep) const {
    int dgs = manhattan(goal, cfg_.start);
    int d = (t % cfg_.episode_len == 0) ? dgs : 0;
    for (int s = t; s < horizon_; ++s) {
        double r;
        if (d > 0) {
            --d;
            r = (d == 0) ? cfg_.goal_reward : cfg_.step_penalty;
        } else {
            r = cfg_.goal_reward;
        }
        ep[s / cfg_.episode_len] += weight * r;
        if ((s + 1) % cfg_.episode_len == 0 && (s + 1) < horizon_) d = dgs;
    }
}

void BayesOptimalPlanner::walk_optimal(GridPos pos, uint32_t remaining, int t, double weight,
                                       std::vector<double>& ep) {
    if (t >= horizon_) {
        unfound_mass_ += weight;
        return;
    }
    PlanResult pr = plan(pos, remaining, t);
    GridPos pos2 = move(pos, pr.action, cfg_);
    int k = std::popcount(remaining);
    int ci = cand_index_of_cell_[cfg_.cell_index(pos2)];
    bool probe = ci >= 0 && ((remaining >> ci) & 1u);
    double p = probe ? 1.0 / k : 0.0;
    ep[t / cfg_.episode_len] += weight * (p * cfg_.goal_reward + (1.0 - p) * cfg_.step_penalty);
    bool reset = ((t + 1) % cfg_.episode_len == 0);
    GridPos next = reset ? cfg_.start : pos2;
    if (probe) {
        accumulate_found(pos2, t + 1, weight * p, ep);
        if (k > 1) walk_optimal(next, remaining & ~(1u << ci), t + 1, weight * (1.0 - p), ep);
    } else {
        walk_optimal(next, remaining, t + 1, weight, ep);
    }
}

double BayesOptimalPlanner::oracle_episode_mean() const {
    int L = cfg_.episode_len;
    double acc = 0.0;
    for (const GridPos& g : candidates_) {
        int d = manhattan(g, cfg_.start);
        if (d <= L)
            acc += cfg_.goal_reward * (L - d + 1) + cfg_.step_penalty * (d - 1);
        else
            acc += cfg_.step_penalty * L;
    }
    return acc / static_cast<double>(candidates_.size());
}

std::vector<double> BayesOptimalPlanner::per_episode_values() {
    int L = cfg_.episode_len;
    int n_ep = horizon_ / L;
    // Full expectimax over many episodes is intractable, but once a k-episode
    // prefix identifies the goal with probability one, every later episode of
    // any longer horizon is worth exactly the oracle mean: per-episode returns
    // are bounded by the oracle's, and the policy "k-episode optimum, then
    // walk straight to the known goal" attains that bound, so it is optimal.
    for (int k = std::min(2, n_ep);; ++k) {
        BayesOptimalPlanner* planner = this;
        std::unique_ptr<BayesOptimalPlanner> sub;
        if (k < n_ep) {
            sub = std::make_unique<BayesOptimalPlanner>(cfg_, k * L);
            planner = sub.get();
        }
        std::vector<double> ep(k < n_ep ? k : n_ep, 0.0);
        planner->unfound_mass_ = 0.0;
        planner->walk_optimal(cfg_.start, full_remaining_, 0, 1.0, ep);
        unfound_mass_ = planner->unfound_mass_;
        if (planner->unfound_mass_ == 0.0 || k >= n_ep) {
            ep.resize(n_ep, oracle_episode_mean());
            return ep;
        }
    }
}

// ---- PosteriorSamplingAgent -----------------------------------------------

PosteriorSamplingAgent::PosteriorSamplingAgent(const EnvConfig& cfg, uint64_t seed)
    : cfg_(cfg), belief_(prior_belief(cfg)), rng_(seed) {}

GridPos PosteriorSamplingAgent::draw_goal() {
    double total = 0.0;
    for (double p : belief_.probs) total += p;
    if (total <= 0.0) throw std::domain_error("PosteriorSamplingAgent: belief has no support");
    std::uniform_real_distribution<double> dist(0.0, total);
    double u = dist(rng_);
    double acc = 0.0;
    for (int i = 0; i < cfg_.num_cells(); ++i) {
        acc += belief_.probs[i];
        if (u <= acc && belief_.probs[i] > 0.0) return cfg_.cell_pos(i);
    }
    for (int i = cfg_.num_cells() - 1; i >= 0; --i)
        if (belief_.probs[i] > 0.0) return cfg_.cell_pos(i);
    throw std::domain_error("PosteriorSamplingAgent: belief has no support");
}

Action PosteriorSamplingAgent::act(GridPos pos) {
    if (!sampled_ || belief_.probs[cfg_.cell_index(*sampled_)] <= 0.0) sampled_ = draw_goal();
    return oracle_action(pos, *sampled_);
}

void PosteriorSamplingAgent::observe(GridPos visited, double observed_reward) {
    belief_ = bayes_update(belief_, visited, observed_reward, cfg_);
}

// ---- evaluation -----------------------------------------------------------

namespace {

EnvConfig with_horizon(const EnvConfig& cfg, int n_episodes) {
    EnvConfig out = cfg;
    out.meta_horizon = n_episodes * cfg.episode_len;
    return out;
}

}  // namespace

std::vector<EpisodeRow> evaluate_oracle_exact(const EnvConfig& cfg, int n_episodes) {
    EnvConfig ecfg = with_horizon(cfg, n_episodes);
    std::vector<GridPos> cands = candidate_goals(ecfg);
    std::vector<double> ep(n_episodes, 0.0);
    for (const GridPos& g : cands) {
        Task task{g};
        Trajectory traj = rollout(ecfg, task, [&](GridPos pos, int) { return oracle_action(pos, g); });
        for (size_t k = 0; k < traj.records.size(); ++k)
            ep[k / ecfg.episode_len] += traj.records[k].reward;
    }
    std::vector<EpisodeRow> rows;
    for (int e = 0; e < n_episodes; ++e)
        rows.push_back({"oracle", e + 1, ep[e] / cands.size(), 0.0, static_cast<int>(cands.size())});
    return rows;
}

std::vector<EpisodeRow> evaluate_bayes_optimal_exact(const EnvConfig& cfg, int n_episodes) {
    EnvConfig ecfg = with_horizon(cfg, n_episodes);
    BayesOptimalPlanner planner(ecfg, ecfg.meta_horizon);
    std::vector<double> ep = planner.per_episode_values();
    std::vector<EpisodeRow> rows;
    int n = static_cast<int>(planner.candidates().size());
    for (int e = 0; e < n_episodes; ++e) rows.push_back({"bayes_optimal", e + 1, ep[e], 0.0, n});
    return rows;
}

std::vector<EpisodeRow> evaluate_posterior_sampling(const EnvConfig& cfg, int n_episodes, int n_seeds,
                                                    uint64_t base_seed) {
    EnvConfig ecfg = with_horizon(cfg, n_episodes);
    std::vector<GridPos> cands = candidate_goals(ecfg);
    std::vector<std::vector<double>> samples(n_episodes);  // per-episode return per run
    for (size_t gi = 0; gi < cands.size(); ++gi) {
        for (int s = 0; s < n_seeds; ++s) {
            uint64_t seed = base_seed + gi * static_cast<uint64_t>(n_seeds) + s;
            PosteriorSamplingAgent agent(ecfg, seed);
            Task task{cands[gi]};
            GridPos pos = ecfg.start;
            std::vector<double> ep(n_episodes, 0.0);
            for (int t = 0; t < ecfg.meta_horizon; ++t) {
                Action a = agent.act(pos);
                StepResult res = step(pos, a, task, t, ecfg);
                agent.observe(res.next_pos, res.reward);
                ep[t / ecfg.episode_len] += res.reward;
                pos = res.episode_reset ? ecfg.start : res.next_pos;
            }
            for (int e = 0; e < n_episodes; ++e) samples[e].push_back(ep[e]);
        }
    }
    std::vector<EpisodeRow> rows;
    for (int e = 0; e < n_episodes; ++e) {
        const auto& xs = samples[e];
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        double se = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1) / xs.size()) : 0.0;
        rows.push_back({"posterior_sampling", e + 1, mean, se, static_cast<int>(xs.size())});
    }
    return rows;
}

void write_episode_csv(const std::string& path, const std::vector<EpisodeRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_episode_csv: cannot open " + path);
    out << "agent,episode_index,mean_return,stderr,n_samples\n";
    out << std::setprecision(12);
    for (const EpisodeRow& r : rows)
        out << r.agent << "," << r.episode_index << "," << r.mean_return << "," << r.stderr_ << ","
            << r.n_samples << "\n";
}

}  // namespace varibad
