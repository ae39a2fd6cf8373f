// Command-line front end: train / eval / plan / plot.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <fstream>
#include <iostream>

#include <bit>

#include <CLI11.hpp>

#include "varibad/harness.hpp"

namespace {

using namespace varibad;

void print_rows(const std::vector<EpisodeRow>& rows) {
    std::cout << "agent,episode_index,mean_return,stderr,n_samples\n";
    for (const auto& r : rows)
        std::cout << r.agent << ',' << r.episode_index << ',' << r.mean_return << ',' << r.stderr_ << ','
                  << r.n_samples << '\n';
}

std::vector<EpisodeRow> reference_rows(const std::string& agent, int episodes, int n_seeds, uint64_t seed) {
    EnvConfig env = EnvConfig::default_gridworld();
    return evaluate_reference(env, agent_kind_from_string(agent), episodes, n_seeds, seed);
}

void dump_reference_traces(const std::string& agent, const std::string& path, int episodes, uint64_t seed) {
    EnvConfig env = EnvConfig::default_gridworld();
    env.meta_horizon = episodes * env.episode_len;
    AgentKind kind = agent_kind_from_string(agent);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "goal_x,goal_y,t,x,y,action,reward\n";
    // Planning beyond the goal-identifying prefix is oracle behaviour; a
    // two-episode planner suffices once the belief has collapsed.
    BayesOptimalPlanner planner(env, std::min(env.meta_horizon, 2 * env.episode_len));
    for (GridPos goal : candidate_goals(env)) {
        Trajectory traj;
        if (kind == AgentKind::Oracle) {
            traj = rollout(env, Task{goal}, [&](GridPos p, int) { return oracle_action(p, goal); });
        } else if (kind == AgentKind::BayesOptimal) {
            GoalBelief belief = prior_belief(env);
            traj = rollout(env, Task{goal}, [&](GridPos p, int t) {
                Action a;
                uint32_t rem = planner.remaining_from_belief(belief);
                if (std::popcount(rem) == 1) {
                    int ci = std::countr_zero(rem);
                    a = oracle_action(p, planner.candidates()[ci]);
                } else if (t < planner.horizon()) {
                    a = planner.plan(p, rem, t).action;
                } else {
                    throw std::runtime_error("plan trace: belief not collapsed within the planning prefix");
                }
                GridPos next = move(p, a, env);
                belief = bayes_update(belief, next, next == goal ? env.goal_reward : env.step_penalty, env);
                return a;
            });
        } else if (kind == AgentKind::PosteriorSampling) {
            PosteriorSamplingAgent ps(env, seed ^ static_cast<uint64_t>(env.cell_index(goal)));
            traj = rollout(env, Task{goal}, [&](GridPos p, int) {
                Action a = ps.act(p);
                GridPos next = move(p, a, env);
                ps.observe(next, next == goal ? env.goal_reward : env.step_penalty);
                return a;
            });
        } else {
            throw std::invalid_argument("plan: agent must be a reference kind");
        }
        for (size_t t = 0; t < traj.records.size(); ++t) {
            const auto& r = traj.records[t];
            out << goal.x << ',' << goal.y << ',' << t << ',' << r.state.x << ',' << r.state.y << ','
                << static_cast<int>(r.action) << ',' << r.reward << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"variBAD gridworld: training, evaluation and reference-agent planning"};
    app.require_subcommand(1);

    std::string config_path, resume_path, checkpoint_path, agent, out_path, trace_path;
    uint64_t seed = 0;
    int episodes = 6;
    int n_seeds = 200;
    std::vector<std::string> run_dirs;

    auto* train_cmd = app.add_subcommand("train", "Train (or evaluate a reference agent) per a JSON config");
    train_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    train_cmd->add_option("--seed", seed, "master seed")->required();
    train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or a reference agent");
    auto* ckpt_opt = eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path");
    auto* agent_opt = eval_cmd->add_option("--agent", agent, "reference agent kind");
    ckpt_opt->excludes(agent_opt);
    eval_cmd->add_option("--episodes", episodes, "evaluation episodes (default 6)");
    eval_cmd->add_option("--n-seeds", n_seeds, "MC seeds for stochastic reference agents");
    eval_cmd->add_option("--seed", seed, "base seed for stochastic reference agents");
    eval_cmd->add_option("--out", out_path, "also write the per-episode CSV here");

    auto* plan_cmd = app.add_subcommand("plan", "Run a reference agent and report per-episode values");
    plan_cmd->add_option("--agent", agent, "oracle | bayes_optimal | posterior_sampling")->required();
    plan_cmd->add_option("--episodes", episodes, "evaluation episodes (default 6)");
    plan_cmd->add_option("--n-seeds", n_seeds, "MC seeds for posterior sampling");
    plan_cmd->add_option("--seed", seed, "base seed for posterior sampling");
    plan_cmd->add_option("--out", out_path, "also write the per-episode CSV here");
    plan_cmd->add_option("--trace", trace_path, "dump per-task trajectories to this CSV");

    auto* plot_cmd = app.add_subcommand("plot", "Render SVG reports from run directories");
    plot_cmd->add_option("--runs", run_dirs, "run directories (one per seed)")->required();
    plot_cmd->add_option("--out", out_path, "output directory (default: plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) {
            nlohmann::json j;
            try {
                std::ifstream in(config_path);
                if (!in) throw std::runtime_error("cannot open config " + config_path);
                j = nlohmann::json::parse(in);  // parse_error carries line/column
                ExperimentConfig cfg = ExperimentConfig::from_json(j);
                RunRecord rec = train(cfg, seed, resume_path);
                std::cout << "run_dir: " << rec.run_dir << "\n";
                if (!rec.checkpoint_path.empty()) std::cout << "checkpoint: " << rec.checkpoint_path << "\n";
                std::cout << "episodes_csv: " << rec.episodes_csv << "\n";
            } catch (const nlohmann::json::exception& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 1;
            } catch (const std::invalid_argument& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 1;
            }
        } else if (eval_cmd->parsed()) {
            std::vector<EpisodeRow> rows;
            if (!checkpoint_path.empty())
                rows = evaluate_checkpoint(checkpoint_path, episodes);
            else if (!agent.empty())
                rows = reference_rows(agent, episodes, n_seeds, seed);
            else {
                std::cerr << "eval: need --checkpoint or --agent\n";
                return 1;
            }
            print_rows(rows);
            if (!out_path.empty()) write_episode_csv(out_path, rows);
        } else if (plan_cmd->parsed()) {
            auto rows = reference_rows(agent, episodes, n_seeds, seed);
            print_rows(rows);
            double total = 0.0;
            for (const auto& r : rows) total += r.mean_return;
            std::cout << "total_expected_return: " << total << "\n";
            if (!out_path.empty()) write_episode_csv(out_path, rows);
            if (!trace_path.empty()) dump_reference_traces(agent, trace_path, episodes, seed);
        } else if (plot_cmd->parsed()) {
            plot_runs(run_dirs, out_path.empty() ? "plots" : out_path);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
