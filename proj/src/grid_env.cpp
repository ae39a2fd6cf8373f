#include "varibad/grid_env.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace varibad {

void EnvConfig::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("EnvConfig: grid dimensions must be positive");
    if (!in_bounds(start)) throw std::invalid_argument("EnvConfig: start out of bounds");
    if (episode_len <= 0) throw std::invalid_argument("EnvConfig: episode_len must be positive");
    if (meta_horizon <= 0 || meta_horizon % episode_len != 0)
        throw std::invalid_argument("EnvConfig: meta_horizon must be a positive multiple of episode_len");
    if (excluded_cells.find(start) == excluded_cells.end())
        throw std::invalid_argument("EnvConfig: start must be in excluded_cells");
    for (const GridPos& p : excluded_cells)
        if (!in_bounds(p)) throw std::invalid_argument("EnvConfig: excluded cell out of bounds");
    if (static_cast<int>(excluded_cells.size()) >= num_cells())
        throw std::invalid_argument("EnvConfig: candidate goal set is empty");
    if (discount <= 0.0 || discount > 1.0) throw std::invalid_argument("EnvConfig: discount out of (0,1]");
}

EnvConfig EnvConfig::default_gridworld() {
    EnvConfig cfg;
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            int dx = std::abs(x - cfg.start.x);
            int dy = std::abs(y - cfg.start.y);
            if (std::max(dx, dy) <= 1) cfg.excluded_cells.insert(GridPos{x, y});
        }
    return cfg;
}

EnvConfig EnvConfig::from_json(const nlohmann::json& j) {
    EnvConfig cfg;
    cfg.width = j.at("width").get<int>();
    cfg.height = j.at("height").get<int>();
    cfg.start = GridPos{j.at("start").at(0).get<int>(), j.at("start").at(1).get<int>()};
    cfg.episode_len = j.at("episode_len").get<int>();
    cfg.meta_horizon = j.at("meta_horizon").get<int>();
    cfg.step_penalty = j.at("step_penalty").get<double>();
    cfg.goal_reward = j.at("goal_reward").get<double>();
    cfg.discount = j.at("discount").get<double>();
    for (const auto& c : j.at("excluded_cells"))
        cfg.excluded_cells.insert(GridPos{c.at(0).get<int>(), c.at(1).get<int>()});
    cfg.validate();
    return cfg;
}

nlohmann::json EnvConfig::to_json() const {
    nlohmann::json j;
    j["width"] = width;
    j["height"] = height;
    j["start"] = {start.x, start.y};
    j["episode_len"] = episode_len;
    j["meta_horizon"] = meta_horizon;
    j["step_penalty"] = step_penalty;
    j["goal_reward"] = goal_reward;
    j["discount"] = discount;
    auto cells = nlohmann::json::array();
    for (const GridPos& p : excluded_cells) cells.push_back({p.x, p.y});
    j["excluded_cells"] = cells;
    return j;
}

std::vector<GridPos> candidate_goals(const EnvConfig& cfg) {
    cfg.validate();
    std::vector<GridPos> out;
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            GridPos p{x, y};
            if (cfg.excluded_cells.find(p) == cfg.excluded_cells.end()) out.push_back(p);
        }
    if (out.empty()) throw std::invalid_argument("candidate_goals: empty candidate set");
    return out;
}

Task sample_task(std::mt19937_64& rng, const EnvConfig& cfg) {
    std::vector<GridPos> cands = candidate_goals(cfg);
    std::uniform_int_distribution<size_t> dist(0, cands.size() - 1);
    return Task{cands[dist(rng)]};
}

GridPos move(GridPos pos, Action action, const EnvConfig& cfg) {
    GridPos next = pos;
    switch (action) {
        case Action::Up: next.y += 1; break;
        case Action::Right: next.x += 1; break;
        case Action::Down: next.y -= 1; break;
        case Action::Left: next.x -= 1; break;
        case Action::Stay: break;
        default: throw std::invalid_argument("move: invalid action index");
    }
    if (!cfg.in_bounds(next)) return pos;  // wall clipping
    return next;
}

StepResult step(GridPos pos, Action action, const Task& task, int t, const EnvConfig& cfg) {
    if (t < 0 || t >= cfg.meta_horizon) throw std::invalid_argument("step: t outside meta-horizon");
    int ai = static_cast<int>(action);
    if (ai < 0 || ai >= kNumActions) throw std::invalid_argument("step: invalid action index");
    GridPos next = move(pos, action, cfg);
    double reward = (next == task.goal) ? cfg.goal_reward : cfg.step_penalty;
    bool reset = ((t + 1) % cfg.episode_len) == 0;
    return StepResult{next, reward, reset};
}

bool Trajectory::chained(const EnvConfig& cfg) const {
    if (records.empty()) return true;
    if (records.front().state != initial_state) return false;
    for (size_t k = 0; k + 1 < records.size(); ++k) {
        GridPos expected = records[k].episode_reset ? cfg.start : records[k].next_state;
        if (records[k + 1].state != expected) return false;
    }
    return true;
}

}  // namespace varibad
